use serde::{Deserialize, Serialize};

/// Largest spatial dimension supported by the simulators.
pub const MAX_DIM: usize = 3;

/// A point of `R^d`, `d ≤ 3`. Coordinates beyond `d` are kept at zero, so
/// distances can be computed without knowing `d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point(pub [f64; MAX_DIM]);

impl Point {
    pub const ORIGIN: Point = Point([0.0; MAX_DIM]);

    /// Point `(x1, 0, …, 0)`.
    pub fn on_axis(x1: f64) -> Self {
        Point([x1, 0.0, 0.0])
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        let mut p = [0.0; MAX_DIM];
        for (dst, src) in p.iter_mut().zip(coords) {
            *dst = *src;
        }
        Point(p)
    }

    #[inline]
    pub fn x1(&self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn dist2(&self, other: &Point) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    #[inline]
    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Point {
        Point(self.0.map(|c| c * factor))
    }

    /// Reflection through the interface hyperplane `x₁ = 0`.
    pub fn mirrored(&self) -> Point {
        let mut p = *self;
        p.0[0] = -p.0[0];
        p
    }

    /// The side of the interface this point lies on; `x₁ = 0` belongs to `H⁺`.
    #[inline]
    pub fn side(&self) -> Side {
        Side::of(self.x1())
    }
}

/// One of the two halfspaces `H⁺ = {x₁ > 0}` and `H⁻ = {x₁ < 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    #[inline]
    pub fn of(x1: f64) -> Side {
        if x1 >= 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Side::Plus => 1,
            Side::Minus => 0,
        }
    }

    pub fn from_u8(b: u8) -> Option<Side> {
        match b {
            1 => Some(Side::Plus),
            0 => Some(Side::Minus),
            _ => None,
        }
    }
}
