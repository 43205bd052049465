//! Maximum-likelihood fitting of ink parameters to reference renders.

use serde::{Deserialize, Serialize};

use crate::error::RenderError;

use super::image::{binomial_kernel, BinaryImage, InkParams};
use super::raster::Rasterizer;
use super::turtle::TurtleTrajectory;

/// Minimum number of (trajectory, image) pairs accepted by [`fit_ink_params`].
pub const MIN_FIT_PAIRS: usize = 50;
/// Largest binomial blur radius tried.
pub const MAX_BLUR_RADIUS: usize = 3;

const INK_RANGE: (f64, f64) = (0.05, 20.0);
const EPSILON_RANGE: (f64, f64) = (1e-6, 0.45);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InkFit {
    pub params: InkParams,
    pub log_likelihood: f64,
}

/// Corpus log-likelihood as a function of ink amount and noise floor for a
/// fixed blur. Blurred ink per unit of `ink_per_unit_length` is computed once,
/// since ink scales linearly before clamping.
pub struct InkObjective {
    radius: usize,
    black: f64,
    white: f64,
    /// `(unit ink, pixel is black)` for every touched pixel of every pair.
    touched: Vec<(f64, bool)>,
}

impl InkObjective {
    pub fn new(pairs: &[(TurtleTrajectory, BinaryImage)], radius: usize) -> Result<Self, RenderError> {
        let res = match pairs.first() {
            Some((_, img)) => img.resolution(),
            None => return Err(RenderError::InsufficientData { needed: 1, found: 0 }),
        };
        let unit = InkParams { ink_per_unit_length: 1.0, blur_kernel: binomial_kernel(radius), epsilon: 0.25 };
        let mut raster = Rasterizer::new(res);
        let (mut black, mut white) = (0.0, 0.0);
        let mut touched = Vec::new();
        for (t, img) in pairs {
            img.check_same_size(res)?;
            let (idx, vals) = raster.raw_ink(t, &unit);
            let pixels = img.pixels();
            let mut touched_black = 0usize;
            for (&i, &u) in idx.iter().zip(vals) {
                let b = pixels[i as usize];
                touched_black += b as usize;
                touched.push((u, b));
            }
            let nb = img.black_count();
            let nw = res.pixels() - nb;
            black += (nb - touched_black) as f64;
            white += (nw - (idx.len() - touched_black)) as f64;
        }
        Ok(InkObjective { radius, black, white, touched })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn log_likelihood(&self, ink: f64, epsilon: f64) -> f64 {
        let mut total = self.black * epsilon.ln() + self.white * (1.0 - epsilon).ln();
        for &(u, b) in &self.touched {
            let m = epsilon + (1.0 - 2.0 * epsilon) * (ink * u).min(1.0);
            total += if b { m.ln() } else { (1.0 - m).ln() };
        }
        total
    }

    /// Best ink amount for a fixed floor.
    pub fn best_ink(&self, epsilon: f64) -> f64 {
        maximize_log_scale(INK_RANGE, |a| self.log_likelihood(a, epsilon))
    }

    /// Best floor for a fixed ink amount.
    pub fn best_epsilon(&self, ink: f64) -> f64 {
        maximize_log_scale(EPSILON_RANGE, |e| self.log_likelihood(ink, e))
    }

    /// Coordinate ascent over ink and floor from the default starting point.
    pub fn fit(&self) -> (f64, f64, f64) {
        let defaults = InkParams::default();
        let (mut ink, mut eps) = (defaults.ink_per_unit_length, defaults.epsilon);
        let mut best = self.log_likelihood(ink, eps);
        for _ in 0..20 {
            ink = self.best_ink(eps);
            eps = self.best_epsilon(ink);
            let ll = self.log_likelihood(ink, eps);
            let improved = ll - best;
            best = best.max(ll);
            if improved.abs() <= 1e-9 * best.abs() {
                break;
            }
        }
        (ink, eps, best)
    }
}

/// Maximizes `f` over `[lo, hi]` on a log scale: a coarse grid locates the
/// basin, golden-section search refines it.
fn maximize_log_scale(range: (f64, f64), f: impl Fn(f64) -> f64) -> f64 {
    const GRID: usize = 48;
    let (a, b) = (range.0.ln(), range.1.ln());
    let at = |k: usize| a + (b - a) * k as f64 / GRID as f64;
    let mut best_k = 0;
    let mut best_v = f64::NEG_INFINITY;
    for k in 0..=GRID {
        let v = f(at(k).exp());
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let mut lo = at(best_k.saturating_sub(1));
    let mut hi = at((best_k + 1).min(GRID));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1.exp()), f(x2.exp()));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2.exp());
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1.exp());
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let x = ((lo + hi) / 2.0).exp();
    if f(x) >= best_v {
        x
    } else {
        at(best_k).exp()
    }
}

/// Fits ink amount, binomial blur radius and noise floor by maximum
/// likelihood over a corpus of placed trajectories and their observed images.
pub fn fit_ink_params(pairs: &[(TurtleTrajectory, BinaryImage)]) -> Result<InkFit, RenderError> {
    if pairs.len() < MIN_FIT_PAIRS {
        return Err(RenderError::InsufficientData { needed: MIN_FIT_PAIRS, found: pairs.len() });
    }
    let mut best: Option<InkFit> = None;
    for radius in 0..=MAX_BLUR_RADIUS {
        let objective = InkObjective::new(pairs, radius)?;
        let (ink, epsilon, ll) = objective.fit();
        if best.as_ref().is_none_or(|b| ll > b.log_likelihood) {
            best = Some(InkFit {
                params: InkParams { ink_per_unit_length: ink, blur_kernel: binomial_kernel(radius), epsilon },
                log_likelihood: ll,
            });
        }
    }
    Ok(best.expect("at least one radius"))
}
