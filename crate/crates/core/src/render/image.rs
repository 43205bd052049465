use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::RenderError;

/// Image size in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub const fn new(width: usize, height: usize) -> Self {
        Resolution { width, height }
    }

    pub const fn square(side: usize) -> Self {
        Resolution { width: side, height: side }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution::square(200)
    }
}

/// Parameters of the stochastic ink model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InkParams {
    /// Ink deposited per pixel of arc length before blurring.
    pub ink_per_unit_length: f64,
    /// Normalized 1-D stencil applied along rows and then columns.
    pub blur_kernel: Vec<f64>,
    /// Noise floor: every pixel probability lies in `[epsilon, 1 - epsilon]`.
    pub epsilon: f64,
}

impl Default for InkParams {
    fn default() -> Self {
        InkParams { ink_per_unit_length: 2.0, blur_kernel: binomial_kernel(1), epsilon: 1e-4 }
    }
}

impl InkParams {
    pub fn new(ink_per_unit_length: f64, blur_radius: usize, epsilon: f64) -> Result<Self, RenderError> {
        let p = InkParams { ink_per_unit_length, blur_kernel: binomial_kernel(blur_radius), epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn blur_radius(&self) -> usize {
        self.blur_kernel.len() / 2
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(RenderError::InvalidInk(format!("epsilon {} outside (0, 0.5)", self.epsilon)));
        }
        if !(self.ink_per_unit_length.is_finite() && self.ink_per_unit_length >= 0.0) {
            return Err(RenderError::InvalidInk(format!("ink {} is not a nonnegative number", self.ink_per_unit_length)));
        }
        if self.blur_kernel.len() % 2 == 0 {
            return Err(RenderError::InvalidInk("blur kernel length must be odd".into()));
        }
        if self.blur_kernel.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(RenderError::InvalidInk("blur kernel weights must be nonnegative".into()));
        }
        let total: f64 = self.blur_kernel.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(RenderError::InvalidInk(format!("blur kernel sums to {total}")));
        }
        Ok(())
    }

    /// Maps a clamped ink value in `[0, 1]` to a pixel probability.
    #[inline]
    pub fn remap(&self, v: f64) -> f64 {
        self.epsilon + (1.0 - 2.0 * self.epsilon) * v
    }
}

/// Row of Pascal's triangle of length `2 * radius + 1`, normalized.
pub fn binomial_kernel(radius: usize) -> Vec<f64> {
    let n = 2 * radius;
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    let total: f64 = row.iter().sum();
    row.iter().map(|w| w / total).collect()
}

/// Black/white image; row 0 is the top row.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    res: Resolution,
    pixels: Vec<bool>,
    black: usize,
}

impl std::fmt::Debug for BinaryImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryImage({}x{}, {} black)", self.res.width, self.res.height, self.black)
    }
}

impl BinaryImage {
    pub fn white(res: Resolution) -> Self {
        BinaryImage { res, pixels: vec![false; res.pixels()], black: 0 }
    }

    pub fn from_pixels(res: Resolution, pixels: Vec<bool>) -> Result<Self, RenderError> {
        if pixels.len() != res.pixels() {
            return Err(RenderError::Format(format!(
                "{} pixels for a {}x{} image",
                pixels.len(),
                res.width,
                res.height
            )));
        }
        let black = pixels.iter().filter(|b| **b).count();
        Ok(BinaryImage { res, pixels, black })
    }

    pub fn from_fn(res: Resolution, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(res.pixels());
        for y in 0..res.height {
            for x in 0..res.width {
                pixels.push(f(x, y));
            }
        }
        let black = pixels.iter().filter(|b| **b).count();
        BinaryImage { res, pixels, black }
    }

    pub fn resolution(&self) -> Resolution {
        self.res
    }

    pub fn width(&self) -> usize {
        self.res.width
    }

    pub fn height(&self) -> usize {
        self.res.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.res.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, black: bool) {
        let i = y * self.res.width + x;
        if self.pixels[i] != black {
            self.pixels[i] = black;
            if black {
                self.black += 1;
            } else {
                self.black -= 1;
            }
        }
    }

    /// Row-major pixels, `true` = black.
    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn black_count(&self) -> usize {
        self.black
    }

    /// Coordinates `(x, y)` of black pixels in row-major order.
    pub fn black_pixels(&self) -> Vec<(usize, usize)> {
        let w = self.res.width;
        self.pixels.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| (i % w, i / w)).collect()
    }

    pub fn check_same_size(&self, other: Resolution) -> Result<(), RenderError> {
        if self.res != other {
            return Err(RenderError::DimensionMismatch {
                expected: (other.width, other.height),
                found: (self.res.width, self.res.height),
            });
        }
        Ok(())
    }
}

/// Per-pixel black probabilities, all within `[epsilon, 1 - epsilon]`.
///
/// Pixels that received no ink sit exactly at the floor `epsilon`; their
/// indices are not listed in `inked`, which keeps likelihoods proportional
/// to the amount of ink rather than the image size.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanImage {
    res: Resolution,
    probs: Vec<f64>,
    inked: Vec<u32>,
    ink: InkParams,
}

impl MeanImage {
    /// Uniform image at the noise floor.
    pub fn blank(res: Resolution, ink: &InkParams) -> Self {
        MeanImage { res, probs: vec![ink.epsilon; res.pixels()], inked: Vec::new(), ink: ink.clone() }
    }

    /// Builds an image from raw probabilities, clamping into the open interval
    /// allowed by `ink.epsilon`.
    pub fn from_probs(res: Resolution, probs: Vec<f64>, ink: &InkParams) -> Result<Self, RenderError> {
        if probs.len() != res.pixels() {
            return Err(RenderError::Format(format!("{} probabilities for {} pixels", probs.len(), res.pixels())));
        }
        let lo = ink.epsilon;
        let hi = 1.0 - ink.epsilon;
        let probs: Vec<f64> = probs.into_iter().map(|p| p.clamp(lo, hi)).collect();
        let inked = probs.iter().enumerate().filter(|(_, p)| **p != lo).map(|(i, _)| i as u32).collect();
        Ok(MeanImage { res, probs, inked, ink: ink.clone() })
    }

    pub(crate) fn from_sparse(res: Resolution, ink: &InkParams, indices: &[u32], values: &[f64]) -> Self {
        let mut probs = vec![ink.epsilon; res.pixels()];
        for (&i, &v) in indices.iter().zip(values) {
            probs[i as usize] = ink.remap(v);
        }
        MeanImage { res, probs, inked: indices.to_vec(), ink: ink.clone() }
    }

    pub fn resolution(&self) -> Resolution {
        self.res
    }

    pub fn ink(&self) -> &InkParams {
        &self.ink
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.probs[y * self.res.width + x]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Indices of pixels above the floor (plus possibly some at it), ascending.
    pub fn inked(&self) -> &[u32] {
        &self.inked
    }

    /// The most probable binary image: black wherever `p > 0.5`.
    pub fn threshold(&self) -> BinaryImage {
        let mut img = BinaryImage::white(self.res);
        let w = self.res.width;
        for &i in &self.inked {
            let i = i as usize;
            if self.probs[i] > 0.5 {
                img.set(i % w, i / w, true);
            }
        }
        img
    }

    /// Draws each pixel independently from its Bernoulli probability.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BinaryImage {
        let pixels = self.probs.iter().map(|&p| rng.random::<f64>() < p).collect();
        BinaryImage::from_pixels(self.res, pixels).expect("sizes agree")
    }

    /// `Σ log m` over black pixels plus `Σ log(1 - m)` over white pixels.
    pub fn log_likelihood(&self, image: &BinaryImage) -> Result<f64, RenderError> {
        image.check_same_size(self.res)?;
        let floor = self.ink.epsilon;
        let mut total = base_log_likelihood(image, floor);
        let (ln_f, ln_1f) = (floor.ln(), (1.0 - floor).ln());
        for &i in &self.inked {
            let p = self.probs[i as usize];
            total += if image.pixels[i as usize] { p.ln() - ln_f } else { (1.0 - p).ln() - ln_1f };
        }
        Ok(total)
    }
}

/// Log-likelihood of `image` if every pixel had probability `floor`.
#[inline]
pub(crate) fn base_log_likelihood(image: &BinaryImage, floor: f64) -> f64 {
    let nb = image.black as f64;
    let nw = (image.pixels.len() - image.black) as f64;
    nb * floor.ln() + nw * (1.0 - floor).ln()
}

/// Free-function form of [`MeanImage::sample`].
pub fn sample_image<R: Rng + ?Sized>(m: &MeanImage, rng: &mut R) -> BinaryImage {
    m.sample(rng)
}

/// Free-function form of [`MeanImage::log_likelihood`].
pub fn log_likelihood(image: &BinaryImage, m: &MeanImage) -> Result<f64, RenderError> {
    m.log_likelihood(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_ll(image: &BinaryImage, m: &MeanImage) -> f64 {
        image.pixels().iter().zip(m.probs()).map(|(&b, &p)| if b { p.ln() } else { (1.0 - p).ln() }).sum()
    }

    #[test]
    fn kernels_are_normalized_binomials() {
        assert_eq!(binomial_kernel(0), vec![1.0]);
        assert_eq!(binomial_kernel(1), vec![0.25, 0.5, 0.25]);
        let k2 = binomial_kernel(2);
        let expected = [1.0, 4.0, 6.0, 4.0, 1.0].map(|v| v / 16.0);
        for (a, b) in k2.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_pixel_half() {
        let ink = InkParams { epsilon: 0.25, ..InkParams::default() };
        let m = MeanImage::from_probs(Resolution::square(1), vec![0.5], &ink).unwrap();
        let img = BinaryImage::from_pixels(Resolution::square(1), vec![true]).unwrap();
        assert!((m.log_likelihood(&img).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn all_white_against_floor() {
        let ink = InkParams::default();
        let res = Resolution::new(7, 5);
        let m = MeanImage::blank(res, &ink);
        let img = BinaryImage::white(res);
        let expected = 35.0 * (1.0 - ink.epsilon).ln();
        assert!((m.log_likelihood(&img).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let m = MeanImage::blank(Resolution::square(4), &InkParams::default());
        let img = BinaryImage::white(Resolution::square(5));
        assert!(matches!(m.log_likelihood(&img), Err(RenderError::DimensionMismatch { .. })));
    }

    #[test]
    fn sparse_likelihood_matches_dense_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let res = Resolution::new(9, 6);
        let ink = InkParams { epsilon: 0.01, ..InkParams::default() };
        for _ in 0..50 {
            let probs: Vec<f64> =
                (0..res.pixels()).map(|_| if rng.random::<bool>() { 0.0 } else { rng.random::<f64>() }).collect();
            let m = MeanImage::from_probs(res, probs, &ink).unwrap();
            let img = m.sample(&mut rng);
            assert!((m.log_likelihood(&img).unwrap() - naive_ll(&img, &m)).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_frequency_matches_probability() {
        let ink = InkParams::default();
        let res = Resolution::square(1);
        let m = MeanImage::from_probs(res, vec![0.3], &ink).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let hits = (0..n).filter(|_| m.sample(&mut rng).get(0, 0)).count();
        assert!((hits as f64 / n as f64 - 0.3).abs() < 0.01);
    }

    #[test]
    fn sampling_is_reproducible() {
        let ink = InkParams::default();
        let res = Resolution::square(16);
        let probs = (0..256).map(|i| i as f64 / 256.0).collect();
        let m = MeanImage::from_probs(res, probs, &ink).unwrap();
        let a = m.sample(&mut ChaCha8Rng::seed_from_u64(5));
        let b = m.sample(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn threshold_maximizes_likelihood_on_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let res = Resolution::square(3);
        let ink = InkParams { epsilon: 0.001, ..InkParams::default() };
        for _ in 0..20 {
            let probs = (0..9).map(|_| rng.random::<f64>()).collect();
            let m = MeanImage::from_probs(res, probs, &ink).unwrap();
            let best = m.log_likelihood(&m.threshold()).unwrap();
            for mask in 0u32..512 {
                let img = BinaryImage::from_fn(res, |x, y| mask >> (y * 3 + x) & 1 == 1);
                assert!(m.log_likelihood(&img).unwrap() <= best + 1e-12);
            }
        }
    }

    #[test]
    fn gibbs_inequality_in_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let res = Resolution::new(6, 6);
        let ink = InkParams { epsilon: 0.01, ..InkParams::default() };
        let mut wins = 0;
        for _ in 0..100 {
            let m = MeanImage::from_probs(res, (0..36).map(|_| rng.random()).collect(), &ink).unwrap();
            let other = MeanImage::from_probs(res, (0..36).map(|_| rng.random()).collect(), &ink).unwrap();
            // Expected log-likelihood of samples from m under m vs. under other.
            let mut own = 0.0;
            let mut cross = 0.0;
            for _ in 0..200 {
                let img = m.sample(&mut rng);
                own += m.log_likelihood(&img).unwrap();
                cross += other.log_likelihood(&img).unwrap();
            }
            if own > cross {
                wins += 1;
            }
        }
        assert_eq!(wins, 100);
    }

    #[test]
    fn ink_validation() {
        assert!(InkParams::new(1.0, 1, 0.0).is_err());
        assert!(InkParams::new(1.0, 1, 0.5).is_err());
        assert!(InkParams::new(-1.0, 1, 0.1).is_err());
        let bad = InkParams { blur_kernel: vec![0.5, 0.6, 0.1], ..InkParams::default() };
        assert!(bad.validate().is_err());
        assert!(InkParams::default().validate().is_ok());
    }
}
