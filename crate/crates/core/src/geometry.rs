use serde::{Deserialize, Serialize};

/// A planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Position) -> f64 {
        dist(*self, *other)
    }
}

/// Euclidean distance in meters.
pub fn dist(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}
