//! Initial allele-frequency profiles `w₀` depending on the first coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `left` for `x < at`, `right` for `x > at`.
    Heaviside {
        at: f64,
        left: f64,
        right: f64,
    },
    /// Linear interpolation between knots, constant beyond the end knots.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    /// `1{x < at}`.
    pub fn step_down(at: f64) -> Self {
        Profile::Heaviside {
            at,
            left: 1.0,
            right: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            Profile::Constant { value } if in_unit(*value) => Ok(()),
            Profile::Heaviside { at, left, right } if at.is_finite() && in_unit(*left) && in_unit(*right) => Ok(()),
            Profile::PiecewiseLinear { knots }
                if !knots.is_empty()
                    && knots.iter().all(|(_, v)| in_unit(*v))
                    && knots.windows(2).all(|w| w[0].0 < w[1].0) =>
            {
                Ok(())
            }
            _ => Err(invalid(format!(
                "profile {self:?} must take values in [0,1] with increasing knots"
            ))),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Heaviside { at, left, right } => {
                if x < *at {
                    *left
                } else if x > *at {
                    *right
                } else {
                    0.5 * (left + right)
                }
            }
            Profile::PiecewiseLinear { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x <= first.0 {
                    return first.1;
                }
                if x >= last.0 {
                    return last.1;
                }
                let i = knots.partition_point(|k| k.0 <= x);
                let (a, b) = (knots[i - 1], knots[i]);
                a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
            }
        }
    }

    /// Exact integral of the profile over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            Profile::Constant { value } => value * (b - a),
            Profile::Heaviside { at, left, right } => {
                let split = at.clamp(a, b);
                left * (split - a) + right * (b - split)
            }
            Profile::PiecewiseLinear { knots } => {
                let mut pts = vec![a];
                pts.extend(knots.iter().map(|k| k.0).filter(|&k| k > a && k < b));
                pts.push(b);
                pts.windows(2)
                    .map(|w| 0.5 * (self.value(w[0]) + self.value(w[1])) * (w[1] - w[0]))
                    .sum()
            }
        }
    }

    pub fn cell_average(&self, a: f64, b: f64) -> f64 {
        self.integral(a, b) / (b - a)
    }

    pub fn far_left(&self) -> f64 {
        self.value(f64::NEG_INFINITY)
    }

    pub fn far_right(&self) -> f64 {
        self.value(f64::INFINITY)
    }

    /// The same profile seen in coordinates scaled by `factor`: `x ↦ w₀(x / factor)`.
    pub fn dilated(&self, factor: f64) -> Profile {
        match self {
            Profile::Constant { .. } => self.clone(),
            Profile::Heaviside { at, left, right } => Profile::Heaviside {
                at: at * factor,
                left: *left,
                right: *right,
            },
            Profile::PiecewiseLinear { knots } => Profile::PiecewiseLinear {
                knots: knots.iter().map(|(x, v)| (x * factor, *v)).collect(),
            },
        }
    }

    /// `x ↦ w₀(-x)`.
    pub fn mirrored(&self) -> Profile {
        match self {
            Profile::Constant { .. } => self.clone(),
            Profile::Heaviside { at, left, right } => Profile::Heaviside {
                at: -at,
                left: *right,
                right: *left,
            },
            Profile::PiecewiseLinear { knots } => Profile::PiecewiseLinear {
                knots: knots.iter().rev().map(|(x, v)| (-x, *v)).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heaviside_cell_average() {
        let p = Profile::step_down(0.0);
        assert_eq!(p.cell_average(-1.0, -0.5), 1.0);
        assert_eq!(p.cell_average(-0.5, 0.5), 0.5);
        assert_eq!(p.cell_average(0.25, 0.75), 0.0);
        assert_eq!(p.far_left(), 1.0);
        assert_eq!(p.far_right(), 0.0);
    }

    #[test]
    fn piecewise_linear_integral() {
        let p = Profile::PiecewiseLinear {
            knots: vec![(-1.0, 0.0), (1.0, 1.0)],
        };
        assert!((p.integral(-2.0, 2.0) - 2.0).abs() < 1e-14);
        assert!((p.value(0.0) - 0.5).abs() < 1e-15);
        assert!(p.validate().is_ok());
        let m = p.mirrored();
        for x in [-1.5, -0.3, 0.2, 0.9] {
            assert!((m.value(x) - p.value(-x)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Profile::constant(1.5).validate().is_err());
        let bad = Profile::PiecewiseLinear {
            knots: vec![(1.0, 0.2), (0.0, 0.3)],
        };
        assert!(bad.validate().is_err());
    }
}
