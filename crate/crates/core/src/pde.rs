//! Finite-difference solver for the interface heat equation
//!
//! ```text
//! ∂ρ/∂t = (σ±²/2) ∂²ρ/∂x²   on H±,
//! ρ continuous at 0,   (1+β) ρ'(0⁺) = (1−β) ρ'(0⁻).
//! ```
//!
//! The grid has a node exactly at the interface. Each half-line uses the
//! standard three-point Laplacian; at the interface node each side is extended
//! by a ghost value, and the two ghosts are eliminated with the flux condition
//! and the requirement that both extensions give the same time derivative.
//! The resulting row is
//!
//! ```text
//! ρ₀' = 2ab [P(ρ₁−ρ₀) + Q(ρ₋₁−ρ₀)] / (dx² (Pb + Qa)),
//! a = σ₊²/2,  b = σ₋²/2,  P = 1+β,  Q = 1−β,
//! ```
//!
//! which keeps the system tridiagonal and covers `β = ±1` without special
//! cases. Time stepping is implicit Euler.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SlfvError};
use crate::profile::Profile;
use crate::skew::SkewParams;
use crate::stats::CdfTable;

/// Treatment of the two far ends of the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarField {
    /// Values pinned to the far-field limits of the initial profile.
    #[default]
    Dirichlet,
    /// Homogeneous Neumann; the scheme then conserves mass.
    Reflecting,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dx: f64,
    pub dt: f64,
    /// Distance from the interface to the left end.
    pub left: f64,
    /// Distance from the interface to the right end.
    pub right: f64,
    #[serde(default)]
    pub far_field: FarField,
}

impl GridSpec {
    pub fn symmetric(dx: f64, dt: f64, half_width: f64) -> Self {
        GridSpec {
            dx,
            dt,
            left: half_width,
            right: half_width,
            far_field: FarField::Dirichlet,
        }
    }

    pub fn reflecting(self) -> Self {
        GridSpec {
            far_field: FarField::Reflecting,
            ..self
        }
    }

    fn node_counts(&self) -> Result<(usize, usize)> {
        if !(self.dx > 0.0 && self.dt > 0.0 && self.left > 0.0 && self.right > 0.0) {
            return Err(invalid(format!(
                "grid spacing, step and extent must be positive: {self:?}"
            )));
        }
        let nl = (self.left / self.dx).round() as usize;
        let nr = (self.right / self.dx).round() as usize;
        if nl < 3 || nr < 3 {
            return Err(invalid("grid needs at least three nodes on each side"));
        }
        Ok((nl, nr))
    }
}

/// Time-stepping operator for a fixed grid, parameter set and time step.
#[derive(Clone, Debug)]
pub struct TransmissionSolver {
    params: SkewParams,
    spec: GridSpec,
    nl: usize,
    nr: usize,
    dt: f64,
    lower: Vec<f64>,
    // Thomas factorization
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
}

impl TransmissionSolver {
    /// Builds the operator for reaching time `t`; the step is shrunk so that
    /// `t` is a whole number of steps.
    pub fn new(params: &SkewParams, spec: &GridSpec, t: f64) -> Result<Self> {
        let (nl, nr) = spec.node_counts()?;
        let needed = 8.0 * params.sigma_max() * t.sqrt();
        let (xl, xr) = (nl as f64 * spec.dx, nr as f64 * spec.dx);
        if xl < needed || xr < needed {
            return Err(invalid(format!(
                "far boundaries at -{xl} and {xr} are closer than 8·σ_max·√t = {needed}"
            )));
        }
        let steps = if t > 0.0 { (t / spec.dt).ceil().max(1.0) } else { 1.0 };
        let dt = if t > 0.0 { t / steps } else { spec.dt };
        let n = nl + nr + 1;
        let a = params.sigma_plus().powi(2) / 2.0;
        let b = params.sigma_minus().powi(2) / 2.0;
        let p = 1.0 + params.beta();
        let q = 1.0 - params.beta();
        let lam = dt / (spec.dx * spec.dx);
        let mut lower = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            if i == nl {
                let k = 2.0 * a * b / (p * b + q * a);
                lower[i] = -lam * k * q;
                upper[i] = -lam * k * p;
                diag[i] = 1.0 + lam * k * (p + q);
                continue;
            }
            let kappa = if i > nl { a } else { b };
            let boundary = i == 0 || i == n - 1;
            match (boundary, spec.far_field) {
                (true, FarField::Dirichlet) => {}
                (true, FarField::Reflecting) => {
                    diag[i] = 1.0 + 2.0 * lam * kappa;
                    if i == 0 {
                        upper[i] = -2.0 * lam * kappa;
                    } else {
                        lower[i] = -2.0 * lam * kappa;
                    }
                }
                (false, _) => {
                    lower[i] = -lam * kappa;
                    upper[i] = -lam * kappa;
                    diag[i] = 1.0 + 2.0 * lam * kappa;
                }
            }
        }
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let denom = diag[i] - lower[i] * prev_c;
            if denom.abs() < 1e-300 {
                return Err(SlfvError::Numerical("singular transmission matrix".into()));
            }
            inv_denom[i] = 1.0 / denom;
            c_prime[i] = upper[i] * inv_denom[i];
            prev_c = c_prime[i];
        }
        Ok(TransmissionSolver {
            params: *params,
            spec: *spec,
            nl,
            nr,
            dt,
            lower,
            c_prime,
            inv_denom,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.nl + self.nr + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.nl as f64) * self.spec.dx
    }

    /// Cell averages of `w0` around each node.
    pub fn initial_values(&self, w0: &Profile) -> Vec<f64> {
        let h = self.spec.dx / 2.0;
        (0..self.len())
            .map(|i| {
                let x = self.x(i);
                w0.cell_average(x - h, x + h)
            })
            .collect()
    }

    /// One implicit Euler step in place.
    pub fn step(&self, rho: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rho.len(), n);
        rho[0] *= self.inv_denom[0];
        for i in 1..n {
            rho[i] = (rho[i] - self.lower[i] * rho[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            rho[i] -= self.c_prime[i] * rho[i + 1];
        }
    }

    /// Advances `steps` steps from `rho`.
    pub fn advance(&self, rho: &mut [f64], steps: usize) {
        for _ in 0..steps {
            self.step(rho);
        }
    }

    pub fn steps_to(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }

    pub fn solve(&self, w0: &Profile, t: f64) -> Result<TransmissionGrid> {
        w0.validate()?;
        let mut rho = self.initial_values(w0);
        if self.spec.far_field == FarField::Dirichlet {
            let n = rho.len();
            rho[0] = w0.far_left();
            rho[n - 1] = w0.far_right();
        }
        self.advance(&mut rho, self.steps_to(t));
        Ok(self.wrap(rho, t))
    }

    fn wrap(&self, rho: Vec<f64>, time: f64) -> TransmissionGrid {
        TransmissionGrid {
            dx: self.spec.dx,
            dt: self.dt,
            origin: -(self.nl as f64) * self.spec.dx,
            interface: self.nl,
            rho,
            time,
            sigma2_plus: self.params.sigma_plus().powi(2),
            sigma2_minus: self.params.sigma_minus().powi(2),
            beta: self.params.beta(),
        }
    }
}

/// Nodal solution at a given time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionGrid {
    pub dx: f64,
    pub dt: f64,
    /// Position of node 0.
    pub origin: f64,
    /// Index of the node at `x = 0`.
    pub interface: usize,
    pub rho: Vec<f64>,
    pub time: f64,
    pub sigma2_plus: f64,
    pub sigma2_minus: f64,
    pub beta: f64,
}

impl TransmissionGrid {
    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx
    }

    /// Linear interpolation between nodes, constant beyond the ends.
    pub fn value_at(&self, x: f64) -> f64 {
        let s = (x - self.origin) / self.dx;
        if s <= 0.0 {
            return self.rho[0];
        }
        let last = self.rho.len() - 1;
        if s >= last as f64 {
            return self.rho[last];
        }
        let i = s.floor() as usize;
        let f = s - i as f64;
        self.rho[i] * (1.0 - f) + self.rho[i + 1] * f
    }

    /// Three-point one-sided derivatives `(ρ'(0⁻), ρ'(0⁺))`.
    pub fn one_sided_slopes(&self) -> (f64, f64) {
        let k = self.interface;
        let r = &self.rho;
        let plus = (-3.0 * r[k] + 4.0 * r[k + 1] - r[k + 2]) / (2.0 * self.dx);
        let minus = (3.0 * r[k] - 4.0 * r[k - 1] + r[k - 2]) / (2.0 * self.dx);
        (minus, plus)
    }

    /// `ρ'(0⁻)/ρ'(0⁺)`, which the flux condition sets to `(1+β)/(1−β)`.
    pub fn slope_ratio(&self) -> f64 {
        let (minus, plus) = self.one_sided_slopes();
        minus / plus
    }

    /// Residual `(1+β)ρ'(0⁺) − (1−β)ρ'(0⁻)` of the flux condition.
    pub fn flux_residual(&self) -> f64 {
        let (minus, plus) = self.one_sided_slopes();
        (1.0 + self.beta) * plus - (1.0 - self.beta) * minus
    }

    /// Difference between the two one-sided quadratic extrapolations to `x = 0`.
    pub fn continuity_jump(&self) -> f64 {
        let k = self.interface;
        let r = &self.rho;
        let from_right = 3.0 * r[k + 1] - 3.0 * r[k + 2] + r[k + 3];
        let from_left = 3.0 * r[k - 1] - 3.0 * r[k - 2] + r[k - 3];
        (from_right - from_left).abs()
    }

    /// Weights `(c₋, c₊)` of the measure conserved by the scheme under
    /// reflecting ends. Both equal 1 when `σ₋²(1+β) = σ₊²(1−β)`.
    pub fn conserved_weights(&self) -> (f64, f64) {
        let a = self.sigma2_plus / 2.0;
        let b = self.sigma2_minus / 2.0;
        let (p, q) = (1.0 + self.beta, 1.0 - self.beta);
        let s = p * b + q * a;
        (2.0 * a * q / s, 2.0 * b * p / s)
    }

    /// Trapezoid mass of `ρ` under the conserved weighting.
    pub fn weighted_mass(&self) -> f64 {
        let (cm, cp) = self.conserved_weights();
        let n = self.rho.len();
        let k = self.interface;
        self.rho
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let c = match i.cmp(&k) {
                    std::cmp::Ordering::Less => cm,
                    std::cmp::Ordering::Greater => cp,
                    std::cmp::Ordering::Equal => 0.5 * (cm + cp),
                };
                let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                c * end * v * self.dx
            })
            .sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.rho
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Solution CSV rows `(t, x, rho)`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "x", "rho"])?;
        for (i, v) in self.rho.iter().enumerate() {
            w.write_record([self.time.to_string(), self.x(i).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves the interface heat equation from `w0` up to time `t`.
pub fn solve_rho(params: &SkewParams, w0: &Profile, t: f64, spec: &GridSpec) -> Result<TransmissionGrid> {
    if !(t >= 0.0) {
        return Err(invalid(format!("time must be nonnegative, got {t}")));
    }
    TransmissionSolver::new(params, spec, t)?.solve(w0, t)
}

/// Tolerance on decreases of the tabulated CDF.
const MONOTONE_TOL: f64 = 1e-6;

/// `s ↦ P_{x0}(X_t ≤ s)` tabulated at the thresholds, from one solve per threshold
/// with `w₀ = 1{x ≤ s}`.
pub fn green_cdf(params: &SkewParams, x0: f64, t: f64, spec: &GridSpec, thresholds: &[f64]) -> Result<CdfTable> {
    if !(t > 0.0) {
        return Err(invalid(format!("time must be positive, got {t}")));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) || thresholds.len() < 2 {
        return Err(invalid("thresholds must be at least two strictly increasing values"));
    }
    let solver = TransmissionSolver::new(params, spec, t)?;
    let steps = solver.steps_to(t);
    let raw: Vec<f64> = thresholds
        .par_iter()
        .map(|&s| {
            let w0 = Profile::Heaviside {
                at: s,
                left: 1.0,
                right: 0.0,
            };
            let mut rho = solver.initial_values(&w0);
            let n = rho.len();
            rho[0] = 1.0;
            rho[n - 1] = 0.0;
            solver.advance(&mut rho, steps);
            solver.wrap(rho, t).value_at(x0)
        })
        .collect();
    let mut fs = Vec::with_capacity(raw.len());
    let mut running = f64::NEG_INFINITY;
    for (i, &f) in raw.iter().enumerate() {
        if f < running - MONOTONE_TOL {
            return Err(SlfvError::Numerical(format!(
                "CDF table decreases by {} at threshold {}",
                running - f,
                thresholds[i]
            )));
        }
        running = running.max(f);
        fs.push(running.clamp(0.0, 1.0));
    }
    CdfTable::new(thresholds.to_vec(), fs)
}

/// Evenly spaced thresholds covering `±span` around `center`.
pub fn threshold_sweep(center: f64, span: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count)
        .map(|k| center - span + 2.0 * span * k as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal_cdf;

    fn fig3() -> SkewParams {
        SkewParams::new(0.5, 1.0, -0.6).unwrap()
    }

    #[test]
    fn constants_are_stationary() {
        let p = fig3();
        let g = solve_rho(
            &p,
            &Profile::constant(0.37),
            2.0,
            &GridSpec::symmetric(0.01, 0.01, 12.0),
        )
        .unwrap();
        let err = g.rho.iter().map(|v| (v - 0.37).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn heat_kernel_case() {
        let p = SkewParams::new(1.0, 1.0, 0.0).unwrap();
        let g = solve_rho(&p, &Profile::step_down(0.0), 1.0, &GridSpec::symmetric(1e-3, 1e-4, 9.0)).unwrap();
        let err = (0..g.rho.len())
            .map(|i| (g.rho[i] - normal_cdf(-g.x(i))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "max error {err}");
    }

    #[test]
    fn boundary_gate() {
        let p = fig3();
        assert!(solve_rho(
            &p,
            &Profile::step_down(0.0),
            12.0,
            &GridSpec::symmetric(0.01, 0.01, 20.0)
        )
        .is_err());
        assert!(solve_rho(
            &p,
            &Profile::step_down(0.0),
            12.0,
            &GridSpec::symmetric(0.01, 0.01, 28.0)
        )
        .is_ok());
    }

    #[test]
    fn negative_skew_slope_ratio() {
        let g = solve_rho(
            &fig3(),
            &Profile::step_down(0.0),
            12.0,
            &GridSpec::symmetric(2e-3, 0.02, 28.0),
        )
        .unwrap();
        assert!((g.slope_ratio() - 0.25).abs() < 0.0025, "{}", g.slope_ratio());
        let (lo, hi) = g.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn reflecting_mode_conserves() {
        let p = fig3();
        let spec = GridSpec::symmetric(0.01, 0.01, 12.0).reflecting();
        let w0 = Profile::PiecewiseLinear {
            knots: vec![(-2.0, 0.0), (-0.5, 1.0), (1.0, 0.2), (3.0, 0.0)],
        };
        let g0 = solve_rho(&p, &w0, 0.0, &spec).unwrap();
        let g1 = solve_rho(&p, &w0, 1.0, &spec).unwrap();
        assert!((g0.weighted_mass() - g1.weighted_mass()).abs() < 1e-10);
        assert_eq!(g0.conserved_weights(), (1.0, 1.0));
    }

    #[test]
    fn reflecting_mode_conserves_weighted_measure() {
        let p = SkewParams::new(0.7, 1.2, 0.4).unwrap();
        let spec = GridSpec::symmetric(0.01, 0.02, 10.0).reflecting();
        let w0 = Profile::step_down(0.5);
        let m0 = solve_rho(&p, &w0, 0.0, &spec).unwrap().weighted_mass();
        let m1 = solve_rho(&p, &w0, 1.0, &spec).unwrap().weighted_mass();
        assert!((m0 - m1).abs() < 1e-10);
    }

    #[test]
    fn extreme_beta_is_supported() {
        for beta in [-1.0, 1.0] {
            let p = SkewParams::new(0.8, 0.6, beta).unwrap();
            let g = solve_rho(&p, &Profile::step_down(0.3), 1.0, &GridSpec::symmetric(5e-3, 5e-3, 8.0)).unwrap();
            let (lo, hi) = g.min_max();
            assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12);
            let (minus, plus) = g.one_sided_slopes();
            // reflecting into H⁺ (β = 1) leaves ρ'(0⁺) = 0; β = −1 leaves ρ'(0⁻) = 0
            let flat = if beta > 0.0 { plus } else { minus };
            assert!(flat.abs() < 0.02 * (plus.abs() + minus.abs()).max(1e-3), "β={beta}");
        }
    }

    #[test]
    fn green_cdf_gaussian() {
        let p = SkewParams::new(1.0, 1.0, 0.0).unwrap();
        let th = threshold_sweep(0.3, 5.0, 101);
        let cdf = green_cdf(&p, 0.3, 1.0, &GridSpec::symmetric(2e-3, 1e-3, 9.0), &th).unwrap();
        for (&s, &f) in cdf.nodes().iter().zip(cdf.values()) {
            assert!((f - normal_cdf(s - 0.3)).abs() < 5e-4, "s={s}");
        }
    }

    #[test]
    fn green_cdf_matches_closed_form_for_skew() {
        let p = fig3();
        let th = threshold_sweep(0.0, 5.0, 81);
        let cdf = green_cdf(&p, 0.0, 1.0, &GridSpec::symmetric(2e-3, 1e-3, 9.0), &th).unwrap();
        for (&s, &f) in cdf.nodes().iter().zip(cdf.values()) {
            let exact = crate::skew::limit_marginal_cdf(&p, 0.0, 1.0, s).unwrap();
            assert!((f - exact).abs() < 2e-3, "s={s}: {f} vs {exact}");
        }
    }

    #[test]
    fn csv_output() {
        let p = fig3();
        let g = solve_rho(&p, &Profile::constant(0.5), 0.1, &GridSpec::symmetric(0.5, 0.05, 3.0)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,rho\n"));
        assert_eq!(text.lines().count(), g.rho.len() + 1);
    }
}
