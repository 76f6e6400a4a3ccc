use serde::{Deserialize, Serialize};

/// A real-valued position in pixel coordinates (x to the right, y down).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Coordinate-wise mean of two points.
    pub fn midpoint(self, other: Point) -> Point {
        Point::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub xmin: usize,
    pub ymin: usize,
    pub xmax: usize,
    pub ymax: usize,
}

impl BBox {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin as f64
            && p.x <= self.xmax as f64
            && p.y >= self.ymin as f64
            && p.y <= self.ymax as f64
    }

    /// Euclidean distance from `p` to the nearest point of the box (0 inside).
    pub fn distance_to(&self, p: Point) -> f64 {
        let dx = (self.xmin as f64 - p.x).max(0.0).max(p.x - self.xmax as f64);
        let dy = (self.ymin as f64 - p.y).max(0.0).max(p.y - self.ymax as f64);
        dx.hypot(dy)
    }
}
