//! Nested Monte Carlo for the band averages of the drift functions `h±`
//! (`d = 1`).
//!
//! `h⁺(x) = u∫Φ(x,y)1{y ≤ r₊}(Eι(y) − x)dy + u∫Φ(x,y)1{y > r₊}(y − x)dy` and
//! `h⁻` is its mirror image. `Eι(y)` is the expected first position in the
//! band `[-r₊, r₊]` of a lineage started at `y`; it equals `y` inside the band
//! and is estimated by inner lineage runs on a grid of starting points
//! outside it, with linear interpolation in between. `Eι` jumps at `±r₊`, so
//! the grid nodes at `±r₊` carry the one-sided limits from outside.
//!
//! For fixed `x`, `Φ(x, ·)` is piecewise linear in one dimension, so every
//! integrand is piecewise quadratic and Simpson's rule on the pieces is exact.
//! The estimate is therefore linear in the grid values of `Eι`, and the inner
//! Monte Carlo error is propagated through that linear map.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::band_entry;
use crate::error::{invalid, Result};
use crate::geometry::phi_kernel;
use crate::params::ModelParams;
use crate::point::{Point, Side};
use crate::rng::stream;
use crate::stats::MeanVar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HIntegralOptions {
    /// Grid intervals per side for the entry map.
    pub grid_intervals: usize,
    /// Inner runs per grid node.
    pub inner_runs: usize,
    /// Real-time cap of an inner run; capped runs count as entering at 0.
    pub time_cap: f64,
    pub outer_samples: usize,
}

impl Default for HIntegralOptions {
    fn default() -> Self {
        HIntegralOptions {
            grid_intervals: 20,
            inner_runs: 1000,
            time_cap: 1e7,
            outer_samples: 10_000,
        }
    }
}

/// Estimated entry positions on `[-3r₊, -r₊]` and `[r₊, 3r₊]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryMap {
    r: f64,
    /// Grid on `[-3r₊, -r₊]`.
    pub left: Vec<EntryNode>,
    /// Grid on `[r₊, 3r₊]`.
    pub right: Vec<EntryNode>,
    pub censored: u64,
    pub runs: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryNode {
    pub y: f64,
    pub mean: f64,
    /// Variance of `mean`.
    pub variance: f64,
}

impl EntryMap {
    /// Map with given values at `intervals + 1` equally spaced nodes per side.
    pub fn from_fn(r: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Self {
        let node = |y: f64| EntryNode {
            y,
            mean: f(y),
            variance: 0.0,
        };
        EntryMap {
            r,
            left: grid(-3.0 * r, -r, intervals).map(node).collect(),
            right: grid(r, 3.0 * r, intervals).map(node).collect(),
            censored: 0,
            runs: 0,
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        if y.abs() <= self.r {
            return y;
        }
        let mut out = 0.0;
        self.for_each_weight(y, |side, k, w| {
            let nodes = if side == Side::Minus { &self.left } else { &self.right };
            out += w * nodes[k].mean;
        });
        out
    }

    /// Interpolation weights at `y` outside the band, as `(side, node, weight)`.
    fn for_each_weight(&self, y: f64, mut f: impl FnMut(Side, usize, f64)) {
        let (side, nodes) = if y < 0.0 {
            (Side::Minus, &self.left)
        } else {
            (Side::Plus, &self.right)
        };
        let (lo, hi) = (nodes[0].y, nodes[nodes.len() - 1].y);
        let m = nodes.len() - 1;
        let s = ((y - lo) / (hi - lo) * m as f64).clamp(0.0, m as f64);
        let j = (s.floor() as usize).min(m - 1);
        let theta = s - j as f64;
        f(side, j, 1.0 - theta);
        f(side, j + 1, theta);
    }

    fn nodes(&self, side: Side) -> &[EntryNode] {
        match side {
            Side::Minus => &self.left,
            Side::Plus => &self.right,
        }
    }
}

fn grid(lo: f64, hi: f64, intervals: usize) -> impl Iterator<Item = f64> {
    (0..=intervals).map(move |k| lo + (hi - lo) * k as f64 / intervals as f64)
}

/// Estimates `Eι` on the two outer grids by `options.inner_runs` lineages per node.
pub fn entry_map(params: &ModelParams, options: &HIntegralOptions, seed: u64) -> Result<EntryMap> {
    check(params, options)?;
    let r = params.r_plus();
    let n = options.grid_intervals;
    let starts: Vec<f64> = grid(-3.0 * r, -r, n).chain(grid(r, 3.0 * r, n)).collect();
    let nodes: Vec<(EntryNode, u64)> = starts
        .par_iter()
        .enumerate()
        .map(|(k, &y)| {
            let start = if y.abs() <= r {
                y.signum() * r * (1.0 + 1e-12)
            } else {
                y
            };
            let mut rng = stream(seed, "entry-map", k as u64);
            let mut acc = MeanVar::default();
            let mut censored = 0;
            for _ in 0..options.inner_runs {
                match band_entry(start, params, &mut rng, options.time_cap) {
                    Some(e) => acc.push(e),
                    None => {
                        censored += 1;
                        acc.push(0.0);
                    }
                }
            }
            (
                EntryNode {
                    y,
                    mean: acc.mean(),
                    variance: acc.variance() / acc.count() as f64,
                },
                censored,
            )
        })
        .collect();
    let censored = nodes.iter().map(|(_, c)| c).sum();
    let (left, right) = nodes.split_at(n + 1);
    Ok(EntryMap {
        r,
        left: left.iter().map(|(e, _)| *e).collect(),
        right: right.iter().map(|(e, _)| *e).collect(),
        censored,
        runs: (2 * (n + 1) * options.inner_runs) as u64,
    })
}

fn check(params: &ModelParams, options: &HIntegralOptions) -> Result<()> {
    if params.d() != 1 {
        return Err(invalid("the h-integrals are defined in dimension one"));
    }
    if options.grid_intervals < 1 || options.inner_runs < 2 || options.outer_samples < 2 {
        return Err(invalid(
            "h-integral estimation needs a grid, inner runs and outer samples",
        ));
    }
    if !(options.time_cap > 0.0) {
        return Err(invalid("the inner time cap must be positive"));
    }
    Ok(())
}

/// `h(x) = a + Σₖ b_k Eι(y_k)`, split into its constant part and the
/// coefficients on each grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearH {
    pub constant: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl LinearH {
    pub fn value(&self, map: &EntryMap) -> f64 {
        let dot = |c: &[f64], n: &[EntryNode]| c.iter().zip(n).map(|(c, n)| c * n.mean).sum::<f64>();
        self.constant + dot(&self.left, &map.left) + dot(&self.right, &map.right)
    }
}

/// Decomposes `h^{side}(x)` for `x` in the band into its linear form in the entry map.
pub fn h_linear(params: &ModelParams, side: Side, x: f64, map: &EntryMap) -> LinearH {
    let (u, r, rm) = (params.u(), params.r_plus(), params.r_minus());
    let sign = side.sign();
    let mut out = LinearH {
        constant: 0.0,
        left: vec![0.0; map.left.len()],
        right: vec![0.0; map.right.len()],
    };
    let mut cuts = vec![
        x - 2.0 * r,
        x + 2.0 * r,
        x,
        -r,
        r,
        -rm,
        rm,
        0.0,
        x - 2.0 * rm,
        x + 2.0 * rm,
    ];
    cuts.extend(map.left.iter().chain(&map.right).map(|n| n.y));
    cuts.retain(|c| (x - 2.0 * r..=x + 2.0 * r).contains(c));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let phi = |y: f64| phi_kernel(&Point::on_axis(x), &Point::on_axis(y), params);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let beyond = sign * mid > r;
        for (y, wt) in [(a, 1.0), (mid, 4.0), (b, 1.0)] {
            let q = sign * u * wt * (b - a) / 6.0 * phi(y);
            if beyond || mid.abs() <= r {
                out.constant += q * (y - x);
            } else {
                out.constant -= q * x;
                let coeffs = if mid < 0.0 { &mut out.left } else { &mut out.right };
                map.for_each_weight(y, |_, k, wk| coeffs[k] += q * wk);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HIntegralEstimate {
    pub estimate: f64,
    /// Standard error including the propagated inner error.
    pub stderr: f64,
    pub outer_stderr: f64,
    pub inner_stderr: f64,
    pub censored: u64,
    pub inner_runs: u64,
}

/// Estimates `∫h^{side} dπ` with `π` uniform on the band.
pub fn estimate_h_integral<R: Rng + ?Sized>(
    params: &ModelParams,
    side: Side,
    map: &EntryMap,
    options: &HIntegralOptions,
    rng: &mut R,
) -> Result<HIntegralEstimate> {
    check(params, options)?;
    let r = params.r_plus();
    let xs: Vec<f64> = (0..options.outer_samples)
        .map(|_| r * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let forms: Vec<LinearH> = xs.par_iter().map(|&x| h_linear(params, side, x, map)).collect();
    let outer: MeanVar = forms.iter().map(|f| f.value(map)).collect();
    let n = forms.len() as f64;
    let mut inner_var = 0.0;
    for s in [Side::Minus, Side::Plus] {
        for (k, node) in map.nodes(s).iter().enumerate() {
            let b: f64 = forms
                .iter()
                .map(|f| if s == Side::Minus { f.left[k] } else { f.right[k] })
                .sum::<f64>()
                / n;
            inner_var += b * b * node.variance;
        }
    }
    let outer_stderr = outer.stderr();
    let inner_stderr = inner_var.sqrt();
    Ok(HIntegralEstimate {
        estimate: outer.mean(),
        stderr: (outer_stderr.powi(2) + inner_var).sqrt(),
        outer_stderr,
        inner_stderr,
        censored: map.censored,
        inner_runs: map.runs,
    })
}
