use serde::{Deserialize, Serialize};

use crate::error::RenderError;
use crate::geometry::{BBox, Point};
use crate::lsystem::{Symbol, SymbolString};

/// Fraction of the frame the normalized drawing spans horizontally.
pub const COMMON_WIDTH: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
    /// Position of the forward symbol that drew this segment.
    pub source_index: usize,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurtleTrajectory {
    pub segments: Vec<Segment>,
    /// Where the turtle started.
    pub start: Point,
    /// Initial heading in degrees, counter-clockwise from +x.
    pub heading_deg: f64,
}

impl TurtleTrajectory {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::of_points(self.segments.iter().flat_map(|s| [s.start, s.end]))
    }

    pub fn translated(&self, by: Point) -> TurtleTrajectory {
        self.mapped(|p| p + by)
    }

    pub fn scaled(&self, k: f64) -> TurtleTrajectory {
        self.mapped(|p| p * k)
    }

    fn mapped(&self, f: impl Fn(Point) -> Point) -> TurtleTrajectory {
        TurtleTrajectory {
            segments: self
                .segments
                .iter()
                .map(|s| Segment { start: f(s.start), end: f(s.end), source_index: s.source_index })
                .collect(),
            start: f(self.start),
            heading_deg: self.heading_deg,
        }
    }

    /// Total arc length.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }
}

/// Traces `s` from the origin with a rightward heading. `-` turns
/// counter-clockwise, `+` clockwise; forward symbols advance by their step.
pub fn trace_raw(s: &SymbolString, angle_deg: f64) -> TurtleTrajectory {
    let mut heading = 0.0f64;
    let mut pos = Point::new(0.0, 0.0);
    let mut segments = Vec::with_capacity(s.count_forward());
    for (i, (sym, step)) in s.symbols().iter().zip(s.steps()).enumerate() {
        match sym {
            Symbol::F | Symbol::G => {
                let r = heading.to_radians();
                let end = Point::new(pos.x + step * r.cos(), pos.y + step * r.sin());
                segments.push(Segment { start: pos, end, source_index: i });
                pos = end;
            }
            Symbol::Minus => heading += angle_deg,
            Symbol::Plus => heading -= angle_deg,
            Symbol::Space => {}
        }
    }
    TurtleTrajectory { segments, start: Point::new(0.0, 0.0), heading_deg: 0.0 }
}

/// Traces `s` and translates the drawing so its bottom-left corner is the
/// origin.
pub fn trace(s: &SymbolString, angle_deg: f64) -> TurtleTrajectory {
    let raw = trace_raw(s, angle_deg);
    match raw.bbox() {
        Some(b) => raw.translated(Point::new(-b.min.x, -b.min.y)),
        None => raw,
    }
}

/// Uniform scale plus offset mapping turtle coordinates into the unit frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub scale: f64,
    pub offset: Point,
}

impl Frame {
    /// Frame that scales `t` to the common width and centers its bounding
    /// box. Drawings with no horizontal extent are scaled by height.
    pub fn fit(t: &TurtleTrajectory) -> Result<Frame, RenderError> {
        let b = t.bbox().ok_or(RenderError::EmptyTrajectory)?;
        let (w, h) = (b.width(), b.height());
        let extent = w.max(h);
        let scale = if w > 1e-9 * extent && w > 0.0 {
            COMMON_WIDTH / w
        } else if h > 0.0 {
            COMMON_WIDTH / h
        } else {
            1.0
        };
        let center = Point::new((b.min.x + b.max.x) * 0.5, (b.min.y + b.max.y) * 0.5);
        Ok(Frame { scale, offset: Point::new(0.5, 0.5) - center * scale })
    }

    pub fn apply(&self, t: &TurtleTrajectory) -> TurtleTrajectory {
        t.scaled(self.scale).translated(self.offset)
    }
}

/// Scales to the common width and centers in the unit frame.
pub fn normalize(t: &TurtleTrajectory) -> Result<TurtleTrajectory, RenderError> {
    Ok(Frame::fit(t)?.apply(t))
}
