//! Exact samplers for the two-speed skew Brownian motion
//! `dX¹ = σ(X)dB¹ + β dL⁰(X¹)` with `σ = σ₊` on `{x₁ > 0}` and `σ₋` on `{x₁ < 0}`.
//!
//! The first coordinate is reduced to unit-diffusivity skew Brownian motion by
//! the piecewise-linear map `g(x) = x/σ±`. Under `g` the skewness becomes
//! `α_std = [(1+β)/σ₊] / [(1+β)/σ₊ + (1−β)/σ₋]`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::params::ModelParams;
use crate::point::{Point, Side};
use crate::stats::normal_cdf;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewParams {
    sigma_plus: f64,
    sigma_minus: f64,
    beta: f64,
}

impl SkewParams {
    pub fn new(sigma_plus: f64, sigma_minus: f64, beta: f64) -> Result<Self> {
        if !(sigma_plus > 0.0 && sigma_plus.is_finite() && sigma_minus > 0.0 && sigma_minus.is_finite()) {
            return Err(invalid(format!(
                "diffusivities must be positive and finite, got σ₊={sigma_plus}, σ₋={sigma_minus}"
            )));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(invalid(format!("β must lie in [-1, 1], got {beta}")));
        }
        Ok(SkewParams {
            sigma_plus,
            sigma_minus,
            beta,
        })
    }

    /// Limit parameters of a lineage of the SLFV with the given event radii.
    pub fn from_model(params: &ModelParams) -> Self {
        SkewParams {
            sigma_plus: params.sigma2_plus().sqrt(),
            sigma_minus: params.sigma2_minus().sqrt(),
            beta: params.beta(),
        }
    }

    pub fn sigma_plus(&self) -> f64 {
        self.sigma_plus
    }

    pub fn sigma_minus(&self) -> f64 {
        self.sigma_minus
    }

    pub fn sigma(&self, x1: f64) -> f64 {
        match Side::of(x1) {
            Side::Plus => self.sigma_plus,
            Side::Minus => self.sigma_minus,
        }
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_plus.max(self.sigma_minus)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        (self.beta + 1.0) / 2.0
    }

    /// The same process seen through `x₁ ↦ −x₁`.
    pub fn mirrored(&self) -> Self {
        SkewParams {
            sigma_plus: self.sigma_minus,
            sigma_minus: self.sigma_plus,
            beta: -self.beta,
        }
    }

    pub fn standardize(&self) -> Result<Standardization> {
        standardize(self)
    }
}

/// Unit-diffusivity reduction `Y = g(X¹)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Standardization {
    pub alpha_std: f64,
    pub slope_plus: f64,
    pub slope_minus: f64,
}

impl Standardization {
    pub fn g(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x * self.slope_plus
        } else {
            x * self.slope_minus
        }
    }

    pub fn g_inv(&self, y: f64) -> f64 {
        if y >= 0.0 {
            y / self.slope_plus
        } else {
            y / self.slope_minus
        }
    }
}

pub fn standardize(params: &SkewParams) -> Result<Standardization> {
    let wp = (1.0 + params.beta) / params.sigma_plus;
    let wm = (1.0 - params.beta) / params.sigma_minus;
    let alpha_std = wp / (wp + wm);
    if !(0.0..=1.0).contains(&alpha_std) {
        return Err(invalid(format!("standardized skewness {alpha_std} left [0, 1]")));
    }
    Ok(Standardization {
        alpha_std,
        slope_plus: 1.0 / params.sigma_plus,
        slope_minus: 1.0 / params.sigma_minus,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(invalid(format!("skewness must lie in [0, 1], got {alpha}")))
    }
}

/// Exact draw of `Y_t` for standard skew Brownian motion with `P(excursion > 0) = alpha`
/// started at `x`.
pub fn sample_skew_transition<R: Rng + ?Sized>(x: f64, t: f64, alpha: f64, rng: &mut R) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("transition time must be positive, got {t}")));
    }
    check_alpha(alpha)?;
    Ok(skew_step(x, t, alpha, rng))
}

fn skew_step<R: Rng + ?Sized>(x: f64, t: f64, alpha: f64, rng: &mut R) -> f64 {
    let remaining = if x == 0.0 {
        t
    } else {
        let z: f64 = rng.sample(StandardNormal);
        let hit = x * x / (z * z);
        if hit > t {
            let sd = t.sqrt();
            loop {
                let y = x + sd * rng.sample::<f64, _>(StandardNormal);
                if y * x <= 0.0 {
                    continue;
                }
                if rng.random::<f64>() < -(-2.0 * x * y / t).exp_m1() {
                    return y;
                }
            }
        }
        t - hit
    };
    let mag = remaining.sqrt() * rng.sample::<f64, _>(StandardNormal).abs();
    if rng.random::<f64>() < alpha {
        mag
    } else {
        -mag
    }
}

/// `P_x(Y_t ≤ y)` for standard skew Brownian motion with skewness `alpha`.
pub fn skew_transition_cdf(x: f64, t: f64, alpha: f64, y: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - skew_transition_cdf(-x, t, 1.0 - alpha, -y);
    }
    let s = t.sqrt();
    if y < 0.0 {
        2.0 * (1.0 - alpha) * normal_cdf((y - x) / s)
    } else {
        let below = normal_cdf(-x / s);
        2.0 * (1.0 - alpha) * below
            + (normal_cdf((y - x) / s) - below)
            + (2.0 * alpha - 1.0) * (normal_cdf((y + x) / s) - normal_cdf(x / s))
    }
}

/// `P_{x0}(X¹_t ≤ y)` for the two-speed process.
pub fn limit_marginal_cdf(params: &SkewParams, x0: f64, t: f64, y: f64) -> Result<f64> {
    let st = standardize(params)?;
    Ok(skew_transition_cdf(st.g(x0), t, st.alpha_std, st.g(y)))
}

/// Exact draw of `X¹_t` started at `x0`.
pub fn sample_limit_marginal<R: Rng + ?Sized>(params: &SkewParams, x0: f64, t: f64, rng: &mut R) -> Result<f64> {
    let st = standardize(params)?;
    let y = sample_skew_transition(st.g(x0), t, st.alpha_std, rng)?;
    Ok(st.g_inv(y))
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.first().is_some_and(|&t| t < 0.0) {
        return Err(invalid("grid times must be nonnegative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid times must increase strictly"));
    }
    Ok(())
}

/// Path of the limit process at the given grid times (time 0 is the start `x0`).
///
/// The first coordinate is exact at the grid. The remaining coordinates receive
/// Gaussian increments whose variance averages `σ²` at the two endpoints.
pub fn sample_limit_path<R: Rng + ?Sized>(
    params: &SkewParams,
    x0: &Point,
    d: usize,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<Point>> {
    check_grid(times)?;
    if d == 0 || d > crate::point::MAX_DIM {
        return Err(invalid(format!("dimension {d} unsupported")));
    }
    let st = standardize(params)?;
    let mut out = Vec::with_capacity(times.len());
    let mut cur = *x0;
    let mut y = st.g(cur.x1());
    let mut now = 0.0;
    for &t in times {
        let dt = t - now;
        if dt > 0.0 {
            let s_before = params.sigma(cur.x1()).powi(2);
            y = skew_step(y, dt, st.alpha_std, rng);
            cur.0[0] = st.g_inv(y);
            let s_after = params.sigma(cur.x1()).powi(2);
            let sd = (0.5 * (s_before + s_after) * dt).sqrt();
            for i in 1..d {
                cur.0[i] += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        now = t;
        out.push(cur);
    }
    Ok(out)
}

/// First-coordinate path on a grid, cheaper than [`sample_limit_path`] when `d = 1`.
pub fn sample_limit_path_1d<R: Rng + ?Sized>(
    params: &SkewParams,
    x0: f64,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_grid(times)?;
    let st = standardize(params)?;
    let mut y = st.g(x0);
    let mut now = 0.0;
    Ok(times
        .iter()
        .map(|&t| {
            if t > now {
                y = skew_step(y, t - now, st.alpha_std, rng);
            }
            now = t;
            st.g_inv(y)
        })
        .collect())
}

/// Result of a pair-meeting simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Meeting {
    Met { time: f64, location: f64 },
    Censored { horizon: f64 },
}

impl Meeting {
    pub fn time(&self) -> Option<f64> {
        match self {
            Meeting::Met { time, .. } => Some(*time),
            Meeting::Censored { .. } => None,
        }
    }
}

/// Standard deviations of the gap kept between the two paths per step.
const MEETING_GAP_SDS: f64 = 6.0;
/// Smallest step as a fraction of the horizon.
const MEETING_FLOOR: f64 = 1.0 / (1u64 << 20) as f64;

/// First meeting of two independent limit paths started at `x1` and `x2`.
///
/// Steps never exceed `step` and shrink quadratically with the gap, down to
/// `2⁻²⁰·horizon`, so that a crossing is detected within one small step of the
/// true meeting. The reported time and location are interval midpoints.
pub fn meeting_time_pair<R: Rng + ?Sized>(
    params: &SkewParams,
    x1: f64,
    x2: f64,
    step: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Meeting> {
    if x1 == x2 {
        return Err(invalid("starting points must differ"));
    }
    if !(step > 0.0 && horizon > 0.0) {
        return Err(invalid("step and horizon must be positive"));
    }
    let st = standardize(params)?;
    let floor = MEETING_FLOOR * horizon;
    let scale = MEETING_GAP_SDS * params.sigma_max() * std::f64::consts::SQRT_2;
    let (mut a, mut b) = (st.g(x1), st.g(x2));
    let mut now = 0.0;
    while now < horizon {
        let gap = (st.g_inv(a) - st.g_inv(b)).abs();
        let h = (gap / scale).powi(2).min(step).max(floor).min(horizon - now);
        let a_next = skew_step(a, h, st.alpha_std, rng);
        let b_next = skew_step(b, h, st.alpha_std, rng);
        if (a - b).signum() != (a_next - b_next).signum() {
            let location = 0.25 * (st.g_inv(a) + st.g_inv(b) + st.g_inv(a_next) + st.g_inv(b_next));
            return Ok(Meeting::Met {
                time: now + 0.5 * h,
                location,
            });
        }
        a = a_next;
        b = b_next;
        now += h;
    }
    Ok(Meeting::Censored { horizon })
}

/// Patch boundary between a type-1 region on the left and a type-0 region on
/// the right, started at the interface, sampled at the grid times.
///
/// Its one-dimensional marginals satisfy `P₀(Z_t ≥ x) = P_x(X_t ≤ 0)`.
pub fn boundary_process<R: Rng + ?Sized>(params: &SkewParams, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    check_grid(times)?;
    let st = standardize(params)?;
    let alpha = 1.0 - st.alpha_std;
    let mut y = 0.0;
    let mut now = 0.0;
    Ok(times
        .iter()
        .map(|&t| {
            if t > now {
                y = skew_step(y, t - now, alpha, rng);
            }
            now = t;
            st.g_inv(y)
        })
        .collect())
}

/// `P₀(Z_t ≤ z)` for the patch boundary.
pub fn boundary_cdf(params: &SkewParams, t: f64, z: f64) -> Result<f64> {
    let st = standardize(params)?;
    Ok(skew_transition_cdf(0.0, t, 1.0 - st.alpha_std, st.g(z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{ks_critical_value, ks_statistic, sort_floats, KsLevel};

    #[test]
    fn standardize_examples() {
        let s = standardize(&SkewParams::new(1.0, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(s.alpha_std, 0.5);
        for beta in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            let s = standardize(&SkewParams::new(1.0, 1.0, beta).unwrap()).unwrap();
            assert!((s.alpha_std - (1.0 + beta) / 2.0).abs() < 1e-15);
        }
        let s = standardize(&SkewParams::new(0.5, 1.0, -0.6).unwrap()).unwrap();
        assert!((s.alpha_std - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn standardize_slfv_parameters() {
        let p = ModelParams::new(0.5, 1.0, 0.7, 1).unwrap();
        let s = standardize(&SkewParams::from_model(&p)).unwrap();
        assert!((s.alpha_std - 1.0 / 1.7).abs() < 1e-12);
    }

    #[test]
    fn g_is_increasing_bijection() {
        let s = standardize(&SkewParams::new(0.3, 1.7, 0.2).unwrap()).unwrap();
        assert_eq!(s.g(0.0), 0.0);
        let xs = [-3.0, -1.0, -1e-9, 0.0, 1e-9, 0.5, 4.0];
        for w in xs.windows(2) {
            assert!(s.g(w[0]) < s.g(w[1]));
        }
        for x in xs {
            assert!((s.g_inv(s.g(x)) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(SkewParams::new(0.0, 1.0, 0.0).is_err());
        assert!(SkewParams::new(1.0, 1.0, 1.5).is_err());
        let mut rng = stream(0, "skew", 0);
        assert!(sample_skew_transition(0.0, 0.0, 0.5, &mut rng).is_err());
        assert!(sample_skew_transition(0.0, 1.0, 1.2, &mut rng).is_err());
        let p = SkewParams::new(1.0, 1.0, 0.0).unwrap();
        assert!(sample_limit_path_1d(&p, 0.0, &[1.0, 0.5], &mut rng).is_err());
        assert!(meeting_time_pair(&p, 1.0, 1.0, 0.01, 1.0, &mut rng).is_err());
    }

    #[test]
    fn cdf_is_a_distribution() {
        for &alpha in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            for &x in &[-1.0, 0.0, 2.0] {
                let mut last = 0.0;
                for k in -400..=400 {
                    let y = k as f64 * 0.025;
                    let f = skew_transition_cdf(x, 1.0, alpha, y);
                    assert!(f >= last - 1e-15 && f <= 1.0 + 1e-15, "α={alpha} x={x} y={y}");
                    last = f;
                }
                assert!(skew_transition_cdf(x, 1.0, alpha, -40.0) < 1e-12);
                assert!(skew_transition_cdf(x, 1.0, alpha, 40.0) > 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn cdf_reduces_to_gaussian_and_reflection() {
        for &x in &[-1.3, 0.0, 0.4] {
            for &y in &[-2.0, -0.1, 0.0, 0.7] {
                let f = skew_transition_cdf(x, 2.0, 0.5, y);
                assert!((f - normal_cdf((y - x) / 2f64.sqrt())).abs() < 1e-14);
            }
        }
        // α = 1 from 0 is |N(0,t)|
        let f = skew_transition_cdf(0.0, 1.0, 1.0, 1.0);
        assert!((f - (2.0 * normal_cdf(1.0) - 1.0)).abs() < 1e-14);
        assert_eq!(skew_transition_cdf(0.0, 1.0, 1.0, -0.5), 0.0);
        // mass on the positive side from 0
        assert!((1.0 - skew_transition_cdf(0.0, 3.0, 0.3, 0.0) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn cdf_matches_density_quadrature() {
        // density for x ≥ 0: φ(y−x) + (2α−1)φ(y+x) on y ≥ 0, 2(1−α)φ(y−x) on y < 0
        let (x, t, alpha) = (0.6f64, 0.8f64, 0.8f64);
        let phi = |z: f64| (-z * z / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
        let dens = |y: f64| {
            if y >= 0.0 {
                phi(y - x) + (2.0 * alpha - 1.0) * phi(y + x)
            } else {
                2.0 * (1.0 - alpha) * phi(y - x)
            }
        };
        for &y in &[-1.0f64, 0.0, 0.3, 1.5] {
            let lower = quadrature::double_exponential::integrate(dens, -12.0, y.min(0.0), 1e-12).integral;
            let upper = if y > 0.0 {
                quadrature::double_exponential::integrate(dens, 0.0, y, 1e-12).integral
            } else {
                0.0
            };
            assert!((lower + upper - skew_transition_cdf(x, t, alpha, y)).abs() < 1e-9);
        }
    }

    #[test]
    fn sampler_matches_cdf() {
        let n = 200_000;
        for (k, &(x, alpha)) in [(0.0, 0.3), (-0.8, 0.75), (1.5, 0.1)].iter().enumerate() {
            let mut rng = stream(4, "skew-unit", k as u64);
            let mut s: Vec<f64> = (0..n)
                .map(|_| sample_skew_transition(x, 0.7, alpha, &mut rng).unwrap())
                .collect();
            sort_floats(&mut s);
            let ks = ks_statistic(&s, |y| skew_transition_cdf(x, 0.7, alpha, y)).unwrap();
            assert!(ks < ks_critical_value(n, KsLevel::One), "x={x} α={alpha}: {ks}");
        }
    }

    #[test]
    fn limit_marginal_matches_cdf() {
        let p = SkewParams::new(0.5, 1.0, -0.6).unwrap();
        let n = 200_000;
        let mut rng = stream(5, "limit-marginal", 0);
        let mut s: Vec<f64> = (0..n)
            .map(|_| sample_limit_marginal(&p, 0.2, 1.0, &mut rng).unwrap())
            .collect();
        sort_floats(&mut s);
        let ks = ks_statistic(&s, |y| limit_marginal_cdf(&p, 0.2, 1.0, y).unwrap()).unwrap();
        assert!(ks < ks_critical_value(n, KsLevel::One), "{ks}");
    }

    #[test]
    fn mirrored_params_mirror_the_law() {
        let p = SkewParams::new(0.4, 0.9, 0.3).unwrap();
        let q = p.mirrored();
        for &y in &[-1.0, -0.2, 0.0, 0.5] {
            let f = limit_marginal_cdf(&p, 0.3, 1.2, y).unwrap();
            let g = 1.0 - limit_marginal_cdf(&q, -0.3, 1.2, -y).unwrap();
            assert!((f - g).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_identity() {
        let p = SkewParams::new(0.6, 1.1, 0.25).unwrap();
        for &x in &[-0.9, -0.1, 0.0, 0.3, 1.2] {
            let lhs = 1.0 - boundary_cdf(&p, 1.5, x).unwrap();
            let rhs = limit_marginal_cdf(&p, x, 1.5, 0.0).unwrap();
            assert!((lhs - rhs).abs() < 1e-14, "x={x}");
        }
    }

    #[test]
    fn path_is_deterministic_and_matches_grid() {
        let p = SkewParams::new(0.5, 1.0, -0.6).unwrap();
        let times: Vec<f64> = (1..=8).map(|k| k as f64 * 0.125).collect();
        let a = sample_limit_path(&p, &Point([0.1, 0.0, 0.0]), 3, &times, &mut stream(1, "path", 0)).unwrap();
        let b = sample_limit_path(&p, &Point([0.1, 0.0, 0.0]), 3, &times, &mut stream(1, "path", 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), times.len());
    }

    #[test]
    fn meeting_when_starting_close() {
        let p = SkewParams::new(1.0, 1.0, 0.0).unwrap();
        let mut rng = stream(2, "meet", 0);
        let m = meeting_time_pair(&p, -0.01, 0.01, 0.01, 10.0, &mut rng).unwrap();
        assert!(m.time().is_some());
        let m = meeting_time_pair(&p, -50.0, 50.0, 0.01, 0.1, &mut rng).unwrap();
        assert_eq!(m, Meeting::Censored { horizon: 0.1 });
    }
}
