//! Small planar geometry helpers.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of_points<I: IntoIterator<Item = Point>>(points: I) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox { min: first, max: first };
        for p in it {
            b.min.x = b.min.x.min(p.x);
            b.min.y = b.min.y.min(p.y);
            b.max.x = b.max.x.max(p.x);
            b.max.y = b.max.y.max(p.y);
        }
        Some(b)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

fn orientation(a: Point, b: Point, c: Point, tol: f64) -> i8 {
    let v = (b - a).cross(c - a);
    if v > tol {
        1
    } else if v < -tol {
        -1
    } else {
        0
    }
}

fn within_box(a: Point, b: Point, p: Point, tol: f64) -> bool {
    p.x >= a.x.min(b.x) - tol && p.x <= a.x.max(b.x) + tol && p.y >= a.y.min(b.y) - tol && p.y <= a.y.max(b.y) + tol
}

/// Closed-segment intersection test, touching and collinear overlap included.
pub fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let scale = [p1, p2, q1, q2].iter().map(|p| p.x.abs().max(p.y.abs())).fold(1.0, f64::max);
    let tol = 1e-10 * scale * scale;
    let o1 = orientation(p1, p2, q1, tol);
    let o2 = orientation(p1, p2, q2, tol);
    let o3 = orientation(q1, q2, p1, tol);
    let o4 = orientation(q1, q2, p2, tol);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    let ptol = 1e-9 * scale;
    (o1 == 0 && within_box(p1, p2, q1, ptol))
        || (o2 == 0 && within_box(p1, p2, q2, ptol))
        || (o3 == 0 && within_box(q1, q2, p1, ptol))
        || (o4 == 0 && within_box(q1, q2, p2, ptol))
        || (o1 != o2 && o3 != o4)
}
