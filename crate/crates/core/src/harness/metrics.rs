use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{HarnessError, RenderError};
use crate::render::{encode_pbm, BinaryImage};

fn check_dims(a: &BinaryImage, b: &BinaryImage) -> Result<(), RenderError> {
    b.check_same_size(a.resolution())
}

/// Square root of the number of disagreeing pixels.
pub fn euclidean_distance(a: &BinaryImage, b: &BinaryImage) -> Result<f64, HarnessError> {
    check_dims(a, b)?;
    let differing = a.pixels().iter().zip(b.pixels()).filter(|(x, y)| x != y).count();
    Ok((differing as f64).sqrt())
}

/// Squared distance from every pixel to the nearest black pixel of `img`,
/// computed exactly with two passes of the lower-envelope transform.
pub fn squared_distance_transform(img: &BinaryImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let far = ((w * w + h * h) as f64) * 4.0 + 1.0;
    let mut grid: Vec<f64> = img.pixels().iter().map(|&b| if b { 0.0 } else { far }).collect();
    let mut buf = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    for x in 0..w {
        for y in 0..h {
            buf[y] = grid[y * w + x];
        }
        transform_1d(&buf[..h], &mut out[..h]);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        buf[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        transform_1d(&buf[..w], &mut out[..w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

/// `out[q] = min_p (q - p)^2 + f[p]`.
fn transform_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inter = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    for q in 1..n {
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

fn directed_mean_distance(from: &BinaryImage, to_sq_dist: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, _) in from.pixels().iter().enumerate().filter(|(_, &b)| b) {
        total += to_sq_dist[i].sqrt();
        n += 1;
    }
    total / n as f64
}

/// Modified Hausdorff distance between the black-pixel sets: the larger of
/// the two mean nearest-neighbour distances.
pub fn modified_hausdorff(a: &BinaryImage, b: &BinaryImage) -> Result<f64, HarnessError> {
    check_dims(a, b)?;
    if a.black_count() == 0 || b.black_count() == 0 {
        return Err(HarnessError::EmptyImage);
    }
    let (da, db) = (squared_distance_transform(a), squared_distance_transform(b));
    Ok(directed_mean_distance(a, &db).max(directed_mean_distance(b, &da)))
}

/// A visual similarity measure usable as a classification and generation
/// baseline.
pub trait SimilarityMetric: Send + Sync {
    fn name(&self) -> &str;
    fn distance(&self, a: &BinaryImage, b: &BinaryImage) -> Result<f64, HarnessError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Euclidean;

impl SimilarityMetric for Euclidean {
    fn name(&self) -> &str {
        "euclidean"
    }

    fn distance(&self, a: &BinaryImage, b: &BinaryImage) -> Result<f64, HarnessError> {
        euclidean_distance(a, b)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ModifiedHausdorff;

impl SimilarityMetric for ModifiedHausdorff {
    fn name(&self) -> &str {
        "hausdorff"
    }

    fn distance(&self, a: &BinaryImage, b: &BinaryImage) -> Result<f64, HarnessError> {
        modified_hausdorff(a, b)
    }
}

/// Hex SHA-256 of the image's binary PBM encoding; the key external
/// embedding files use.
pub fn image_key(img: &BinaryImage) -> String {
    Sha256::digest(encode_pbm(img))
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Cosine distance between externally computed feature vectors, looked up
/// by [`image_key`].
#[derive(Clone, Debug)]
pub struct CosineEmbedding {
    name: String,
    vectors: HashMap<String, Vec<f64>>,
}

impl CosineEmbedding {
    pub fn new(name: impl Into<String>, vectors: HashMap<String, Vec<f64>>) -> Self {
        CosineEmbedding { name: name.into(), vectors }
    }

    /// Reads a JSON object mapping image keys to vectors.
    pub fn from_json(name: impl Into<String>, text: &str) -> Result<Self, HarnessError> {
        Ok(Self::new(name, serde_json::from_str(text)?))
    }

    fn vector(&self, img: &BinaryImage) -> Result<&[f64], HarnessError> {
        let key = image_key(img);
        self.vectors
            .get(&key)
            .map(Vec::as_slice)
            .ok_or_else(|| HarnessError::Suite(format!("no embedding for image {key}")))
    }
}

impl SimilarityMetric for CosineEmbedding {
    fn name(&self) -> &str {
        &self.name
    }

    fn distance(&self, a: &BinaryImage, b: &BinaryImage) -> Result<f64, HarnessError> {
        check_dims(a, b)?;
        if a == b {
            return Ok(0.0);
        }
        let (u, v) = (self.vector(a)?, self.vector(b)?);
        if u.len() != v.len() {
            return Err(HarnessError::Suite("embedding dimensions differ".into()));
        }
        let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu == 0.0 || nv == 0.0 {
            return Ok(1.0);
        }
        Ok((1.0 - dot / (nu * nv)).max(0.0))
    }
}

/// Looks up a built-in metric by name.
pub fn builtin_metric(name: &str) -> Result<Box<dyn SimilarityMetric>, HarnessError> {
    match name {
        "euclidean" => Ok(Box::new(Euclidean)),
        "hausdorff" => Ok(Box::new(ModifiedHausdorff)),
        other => Err(HarnessError::UnknownModel(other.to_string())),
    }
}
