use crate::error::RenderError;
use crate::geometry::Point;
use crate::lsystem::SymbolString;

use super::image::{base_log_likelihood, BinaryImage, InkParams, MeanImage, Resolution};
use super::turtle::{normalize, trace, Frame, TurtleTrajectory};

/// Ink samples per pixel of arc length.
const SAMPLES_PER_PIXEL: f64 = 2.0;

/// Dense scratch buffer that remembers which cells it touched.
#[derive(Clone, Debug)]
struct Layer {
    vals: Vec<f64>,
    mark: Vec<bool>,
    list: Vec<u32>,
}

impl Layer {
    fn new(n: usize) -> Self {
        Layer { vals: vec![0.0; n], mark: vec![false; n], list: Vec::new() }
    }

    #[inline]
    fn add(&mut self, i: usize, v: f64) {
        if !self.mark[i] {
            self.mark[i] = true;
            self.list.push(i as u32);
        }
        self.vals[i] += v;
    }

    fn clear(&mut self) {
        for &i in &self.list {
            self.vals[i as usize] = 0.0;
            self.mark[i as usize] = false;
        }
        self.list.clear();
    }
}

/// Reusable rasterizer. Work is proportional to the amount of ink, not the
/// image size, so one instance per thread makes repeated scoring cheap.
#[derive(Clone, Debug)]
pub struct Rasterizer {
    res: Resolution,
    deposit: Layer,
    rows: Layer,
    cols: Layer,
    out_idx: Vec<u32>,
    out_val: Vec<f64>,
}

impl Rasterizer {
    pub fn new(res: Resolution) -> Self {
        let n = res.pixels();
        Rasterizer {
            res,
            deposit: Layer::new(n),
            rows: Layer::new(n),
            cols: Layer::new(n),
            out_idx: Vec::new(),
            out_val: Vec::new(),
        }
    }

    pub fn resolution(&self) -> Resolution {
        self.res
    }

    /// Maps unit-frame coordinates (y up) to pixel-center coordinates
    /// (row 0 on top, centers at integer positions).
    #[inline]
    fn to_pixel(&self, p: Point) -> Point {
        let s = self.res.width.min(self.res.height) as f64;
        Point::new(
            (p.x - 0.5) * s + self.res.width as f64 / 2.0 - 0.5,
            (0.5 - p.y) * s + self.res.height as f64 / 2.0 - 0.5,
        )
    }

    fn render_sparse(&mut self, t: &TurtleTrajectory, ink: &InkParams) {
        self.accumulate(t, ink, true)
    }

    /// Computes ink values for every touched pixel; results land in
    /// `out_idx` (ascending) and `out_val`, clamped to `[0, 1]` if `clamp`.
    fn accumulate(&mut self, t: &TurtleTrajectory, ink: &InkParams, clamp: bool) {
        self.deposit.clear();
        self.rows.clear();
        self.cols.clear();
        let (w, h) = (self.res.width as i64, self.res.height as i64);
        for seg in &t.segments {
            let a = self.to_pixel(seg.start);
            let b = self.to_pixel(seg.end);
            let len = (b - a).norm();
            let n = ((len * SAMPLES_PER_PIXEL).ceil() as usize).max(1);
            let amount = ink.ink_per_unit_length * len / n as f64;
            if amount == 0.0 {
                continue;
            }
            let d = b - a;
            for k in 0..n {
                let f = (k as f64 + 0.5) / n as f64;
                let (px, py) = (a.x + d.x * f, a.y + d.y * f);
                let (x0, y0) = (px.floor(), py.floor());
                let (fx, fy) = (px - x0, py - y0);
                let (x0, y0) = (x0 as i64, y0 as i64);
                for (dx, dy, wgt) in
                    [(0, 0, (1.0 - fx) * (1.0 - fy)), (1, 0, fx * (1.0 - fy)), (0, 1, (1.0 - fx) * fy), (1, 1, fx * fy)]
                {
                    let (x, y) = (x0 + dx, y0 + dy);
                    if wgt > 0.0 && x >= 0 && y >= 0 && x < w && y < h {
                        self.deposit.add((y * w + x) as usize, amount * wgt);
                    }
                }
            }
        }
        let kernel = &ink.blur_kernel;
        let r = (kernel.len() / 2) as i64;
        let final_layer = if r == 0 {
            &self.deposit
        } else {
            for &i in &self.deposit.list {
                let v = self.deposit.vals[i as usize];
                let (x, y) = (i as i64 % w, i as i64 / w);
                for (k, wk) in kernel.iter().enumerate() {
                    let xx = x + k as i64 - r;
                    if xx >= 0 && xx < w && *wk > 0.0 {
                        self.rows.add((y * w + xx) as usize, v * wk);
                    }
                }
            }
            for &i in &self.rows.list {
                let v = self.rows.vals[i as usize];
                let (x, y) = (i as i64 % w, i as i64 / w);
                for (k, wk) in kernel.iter().enumerate() {
                    let yy = y + k as i64 - r;
                    if yy >= 0 && yy < h && *wk > 0.0 {
                        self.cols.add((yy * w + x) as usize, v * wk);
                    }
                }
            }
            &self.cols
        };
        self.out_idx.clear();
        self.out_idx.extend_from_slice(&final_layer.list);
        self.out_idx.sort_unstable();
        self.out_val.clear();
        let hi = if clamp { 1.0 } else { f64::INFINITY };
        self.out_val.extend(self.out_idx.iter().map(|&i| final_layer.vals[i as usize].clamp(0.0, hi)));
    }

    /// Mean image of a trajectory already placed in the unit frame.
    pub fn rasterize(&mut self, t: &TurtleTrajectory, ink: &InkParams) -> MeanImage {
        self.render_sparse(t, ink);
        MeanImage::from_sparse(self.res, ink, &self.out_idx, &self.out_val)
    }

    /// `log P(image | t)` without materializing the mean image; equal to
    /// `self.rasterize(t, ink).log_likelihood(image)` bit for bit.
    pub fn log_likelihood(
        &mut self,
        t: &TurtleTrajectory,
        ink: &InkParams,
        image: &BinaryImage,
    ) -> Result<f64, RenderError> {
        image.check_same_size(self.res)?;
        self.render_sparse(t, ink);
        let floor = ink.epsilon;
        let mut total = base_log_likelihood(image, floor);
        let (ln_f, ln_1f) = (floor.ln(), (1.0 - floor).ln());
        let pixels = image.pixels();
        for (&i, &v) in self.out_idx.iter().zip(&self.out_val) {
            let p = ink.remap(v);
            total += if pixels[i as usize] { p.ln() - ln_f } else { (1.0 - p).ln() - ln_1f };
        }
        Ok(total)
    }

    /// Touched pixel indices and clamped ink values of the last render.
    pub fn last_render(&self) -> (&[u32], &[f64]) {
        (&self.out_idx, &self.out_val)
    }

    /// Unclamped blurred ink of `t`, as parallel index and value slices.
    pub(crate) fn raw_ink(&mut self, t: &TurtleTrajectory, ink: &InkParams) -> (&[u32], &[f64]) {
        self.accumulate(t, ink, false);
        self.last_render()
    }

    /// Clamped ink values of `t` as `(pixel index, value)` pairs.
    pub fn ink_values(&mut self, t: &TurtleTrajectory, ink: &InkParams) -> (&[u32], &[f64]) {
        self.render_sparse(t, ink);
        self.last_render()
    }
}

/// One-off rasterization of a normalized trajectory.
pub fn rasterize(t: &TurtleTrajectory, ink: &InkParams, res: Resolution) -> MeanImage {
    Rasterizer::new(res).rasterize(t, ink)
}

/// Trace, normalize and rasterize a symbol string. Strings without forward
/// symbols render blank.
pub fn render_string(s: &SymbolString, angle_deg: f64, ink: &InkParams, res: Resolution) -> MeanImage {
    match normalize(&trace(s, angle_deg)) {
        Ok(t) => rasterize(&t, ink, res),
        Err(_) => MeanImage::blank(res, ink),
    }
}

/// The normalized trajectory of `s`, or `None` if it draws nothing.
pub fn placed_trajectory(s: &SymbolString, angle_deg: f64) -> Option<TurtleTrajectory> {
    normalize(&trace(s, angle_deg)).ok()
}

/// Trajectory of `s` placed with a frame fitted to another drawing.
pub fn trajectory_in_frame(s: &SymbolString, angle_deg: f64, frame: &Frame) -> TurtleTrajectory {
    frame.apply(&super::turtle::trace_raw(s, angle_deg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::turtle::Segment;

    fn segment(a: (f64, f64), b: (f64, f64)) -> TurtleTrajectory {
        TurtleTrajectory {
            segments: vec![Segment { start: Point::new(a.0, a.1), end: Point::new(b.0, b.1), source_index: 0 }],
            start: Point::new(a.0, a.1),
            heading_deg: 0.0,
        }
    }

    fn dense_ll(img: &BinaryImage, m: &MeanImage) -> f64 {
        img.pixels().iter().zip(m.probs()).map(|(&b, &p)| if b { p.ln() } else { (1.0 - p).ln() }).sum()
    }

    #[test]
    fn empty_trajectory_is_uniform_floor() {
        let ink = InkParams::default();
        let t = TurtleTrajectory { segments: vec![], start: Point::default(), heading_deg: 0.0 };
        let m = rasterize(&t, &ink, Resolution::square(8));
        assert!(m.probs().iter().all(|&p| p == ink.epsilon));
    }

    #[test]
    fn segment_through_pixel_centers() {
        // On an 8x8 grid, pixel centers sit at (i + 0.5) / 8. Row 3 from the
        // top has y = 1 - 3.5 / 8.
        let res = Resolution::square(8);
        let y = 1.0 - 3.5 / 8.0;
        let t = segment((1.5 / 8.0, y), (6.5 / 8.0, y));
        let ink = InkParams { blur_kernel: vec![1.0], ink_per_unit_length: 1.0, epsilon: 1e-4 };
        let m = rasterize(&t, &ink, res);
        // Without blur, each sample lands on the row exactly, so a column
        // strictly inside the segment receives one pixel-length of ink.
        for x in 2..=5 {
            assert!((m.get(x, 3) - ink.remap(1.0)).abs() < 1e-9, "x={x}: {}", m.get(x, 3));
        }
        // End pixels receive half a pixel of ink.
        assert!((m.get(1, 3) - ink.remap(0.5)).abs() < 1e-9);
        assert!((m.get(6, 3) - ink.remap(0.5)).abs() < 1e-9);
        for yy in [0, 1, 2, 4, 5, 6, 7] {
            for x in 0..8 {
                assert_eq!(m.get(x, yy), ink.epsilon);
            }
        }
    }

    #[test]
    fn default_ink_saturates_a_line() {
        let res = Resolution::square(8);
        let y = 1.0 - 3.5 / 8.0;
        let t = segment((0.5 / 8.0, y), (7.5 / 8.0, y));
        let ink = InkParams::default();
        let m = rasterize(&t, &ink, res);
        for x in 2..=5 {
            assert!((m.get(x, 3) - (1.0 - ink.epsilon)).abs() < 1e-9);
            assert!((m.get(x, 2) - ink.remap(0.5)).abs() < 1e-9);
            assert_eq!(m.get(x, 0), ink.epsilon);
        }
    }

    #[test]
    fn deterministic_and_sparse_likelihood_agrees() {
        let l = crate::lsystem::LSystem::from_rule("G-G+F+G-G", 60.0).unwrap();
        let s = crate::lsystem::expand_to_depth(&l, 3).unwrap();
        let ink = InkParams::default();
        let res = Resolution::square(64);
        let a = render_string(&s, 60.0, &ink, res);
        let b = render_string(&s, 60.0, &ink, res);
        assert_eq!(a, b);
        let img = a.threshold();
        let t = placed_trajectory(&s, 60.0).unwrap();
        let mut r = Rasterizer::new(res);
        let fast = r.log_likelihood(&t, &ink, &img).unwrap();
        assert_eq!(fast, a.log_likelihood(&img).unwrap());
        assert!((fast - dense_ll(&img, &a)).abs() < 1e-6);
    }

    #[test]
    fn resolution_stability() {
        let l = crate::lsystem::LSystem::from_rule("G-G+F+G-G", 60.0).unwrap();
        let ink = InkParams::default();
        for d in 1..=3 {
            let s = crate::lsystem::expand_to_depth(&l, d).unwrap();
            let coarse = render_string(&s, 60.0, &ink, Resolution::square(100));
            let fine = render_string(&s, 60.0, &ink, Resolution::square(200));
            let mut err = 0.0;
            for y in 0..100 {
                for x in 0..100 {
                    let down = (fine.get(2 * x, 2 * y)
                        + fine.get(2 * x + 1, 2 * y)
                        + fine.get(2 * x, 2 * y + 1)
                        + fine.get(2 * x + 1, 2 * y + 1))
                        / 4.0;
                    err += (down - coarse.get(x, y)).abs();
                }
            }
            assert!(err / 10_000.0 < 0.05, "depth {d}: {}", err / 10_000.0);
        }
    }
}
