//! Small 2-D geometry primitives shared by all modules.

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(&self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn add(&self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(&self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(&self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }

    /// Rotation by +90 degrees: (x, y) -> (-y, x).
    pub fn perp(&self) -> Point {
        Point::new(-self.y, self.x)
    }
}

/// 2x2 matrix, row major.
pub type Mat2 = [[f64; 2]; 2];

pub fn mat_vec(m: &Mat2, v: Point) -> Point {
    Point::new(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y)
}

/// v * v^T scaled by s, accumulated into `out`.
pub fn add_scaled_outer(out: &mut Mat2, v: Point, s: f64) {
    out[0][0] += s * v.x * v.x;
    out[0][1] += s * v.x * v.y;
    out[1][0] += s * v.y * v.x;
    out[1][1] += s * v.y * v.y;
}
