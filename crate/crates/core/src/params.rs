use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::point::{Side, MAX_DIM};

/// Microscopic parameters of the heterogeneous-dispersal SLFV.
///
/// The macroscopic quantities (`σ±²`, `β`, `α`) are derived on demand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    u: f64,
    r_plus: f64,
    r_minus: f64,
    d: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct RawParams {
    u: f64,
    r_plus: f64,
    r_minus: f64,
    d: usize,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = crate::SlfvError;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.u, raw.r_plus, raw.r_minus, raw.d)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            u: p.u,
            r_plus: p.r_plus,
            r_minus: p.r_minus,
            d: p.d,
        }
    }
}

impl ModelParams {
    pub fn new(u: f64, r_plus: f64, r_minus: f64, d: usize) -> Result<Self> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(invalid(format!("impact parameter u = {u} not in (0, 1]")));
        }
        if !(r_minus > 0.0 && r_minus <= r_plus && r_plus.is_finite()) {
            return Err(invalid(format!(
                "radii must satisfy 0 < r_minus <= r_plus, got r_plus = {r_plus}, r_minus = {r_minus}"
            )));
        }
        if d == 0 || d > MAX_DIM {
            return Err(invalid(format!("dimension d = {d} not in 1..={MAX_DIM}")));
        }
        Ok(ModelParams { u, r_plus, r_minus, d })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn r_plus(&self) -> f64 {
        self.r_plus
    }

    pub fn r_minus(&self) -> f64 {
        self.r_minus
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn with_dimension(&self, d: usize) -> Result<Self> {
        ModelParams::new(self.u, self.r_plus, self.r_minus, d)
    }

    pub fn with_u(&self, u: f64) -> Result<Self> {
        ModelParams::new(u, self.r_plus, self.r_minus, self.d)
    }

    pub fn radius(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.r_plus,
            Side::Minus => self.r_minus,
        }
    }

    /// Per-coordinate diffusivity of the limiting lineage on `side`.
    pub fn sigma2(&self, side: Side) -> f64 {
        let r = self.radius(side);
        self.u * 2.0 * r * r / (self.d as f64 + 2.0)
    }

    pub fn sigma2_plus(&self) -> f64 {
        self.sigma2(Side::Plus)
    }

    pub fn sigma2_minus(&self) -> f64 {
        self.sigma2(Side::Minus)
    }

    pub fn beta(&self) -> f64 {
        let (p, m) = (self.r_plus * self.r_plus, self.r_minus * self.r_minus);
        (p - m) / (p + m)
    }

    /// Skewness `(β + 1)/2` of the limit in the unit-diffusivity convention.
    pub fn alpha(&self) -> f64 {
        (self.beta() + 1.0) / 2.0
    }
}
