//! Goodness-of-fit statistics and Monte Carlo summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlfvError};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Significance levels with tabulated asymptotic Kolmogorov critical values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KsLevel {
    #[serde(rename = "0.01")]
    One,
    #[serde(rename = "0.05")]
    Five,
}

impl KsLevel {
    pub fn alpha(self) -> f64 {
        match self {
            KsLevel::One => 0.01,
            KsLevel::Five => 0.05,
        }
    }

    /// `c(α) = sqrt(-ln(α/2)/2)`.
    pub fn coefficient(self) -> f64 {
        (-(self.alpha() / 2.0).ln() / 2.0).sqrt()
    }
}

/// One-sample critical value `c(α)/√n`.
pub fn ks_critical_value(n: usize, level: KsLevel) -> f64 {
    level.coefficient() / (n as f64).sqrt()
}

/// Two-sample critical value `c(α)·sqrt((n+m)/(nm))`.
pub fn ks_two_sample_critical_value(n: usize, m: usize, level: KsLevel) -> f64 {
    let (n, m) = (n as f64, m as f64);
    level.coefficient() * ((n + m) / (n * m)).sqrt()
}

fn check_sorted(sample: &[f64], what: &str) -> Result<()> {
    if sample.is_empty() {
        return Err(SlfvError::InvalidParameter(format!("{what} sample is empty")));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(SlfvError::InvalidParameter(format!("{what} sample contains NaN")));
    }
    if let Some(i) = sample.windows(2).position(|w| w[1] < w[0]) {
        return Err(SlfvError::Unsorted(format!(
            "{what} sample decreases at index {}",
            i + 1
        )));
    }
    Ok(())
}

/// Sup-distance between the empirical CDF of a sorted sample and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    check_sorted(sample, "KS")?;
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sample.len() {
        // ties: the empirical CDF jumps once over the whole run
        let x = sample[i];
        let mut j = i;
        while j + 1 < sample.len() && sample[j + 1] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((j + 1) as f64 / n - f).abs());
        i = j + 1;
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov statistic between sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sorted(a, "first")?;
    check_sorted(b, "second")?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

pub fn sort_floats(v: &mut [f64]) {
    v.sort_by(|a, b| a.total_cmp(b));
}

/// Monotone CDF table with linear interpolation; clamps to 0 and 1 outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfTable {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl CdfTable {
    pub fn new(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if xs.len() != fs.len() || xs.len() < 2 {
            return Err(SlfvError::InvalidParameter("CDF table needs ≥ 2 matching nodes".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SlfvError::Unsorted("CDF nodes must increase strictly".into()));
        }
        if fs.windows(2).any(|w| w[1] < w[0]) {
            return Err(SlfvError::Numerical("CDF values decrease".into()));
        }
        Ok(CdfTable { xs, fs })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.fs
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return if x < self.xs[0] { 0.0 } else { self.fs[0] };
        }
        if x >= self.xs[n - 1] {
            return if x > self.xs[n - 1] { 1.0 } else { self.fs[n - 1] };
        }
        let k = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (f0, f1) = (self.fs[k - 1], self.fs[k]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }
}

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanVar::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Success frequency with its binomial standard error.
pub fn binomial_estimate(successes: u64, trials: u64) -> (f64, f64) {
    let p = successes as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Whether `target` lies in `p̂ ± z·sqrt(p(1-p)/n)`, using the target's variance.
pub fn within_binomial_ci(successes: u64, trials: u64, target: f64, z: f64) -> bool {
    let p = successes as f64 / trials as f64;
    let se = (target * (1.0 - target) / trials as f64).sqrt();
    (p - target).abs() <= z * se
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn critical_values() {
        assert!((KsLevel::One.coefficient() - 1.627_60).abs() < 1e-4);
        assert!((KsLevel::Five.coefficient() - 1.358_10).abs() < 1e-4);
        assert!((ks_critical_value(100, KsLevel::Five) - 0.135_81).abs() < 1e-4);
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-14);
    }

    #[test]
    fn constant_sample_is_far_from_continuous_cdf() {
        let s = vec![0.3; 50];
        assert!(ks_statistic(&s, |x| x.clamp(0.0, 1.0)).unwrap() >= 0.5);
        let s = vec![0.0; 10];
        assert!(ks_statistic(&s, normal_cdf).unwrap() >= 0.5);
    }

    #[test]
    fn unsorted_and_empty_are_rejected() {
        assert!(matches!(
            ks_statistic(&[1.0, 0.0], normal_cdf),
            Err(SlfvError::Unsorted(_))
        ));
        assert!(ks_statistic(&[], normal_cdf).is_err());
        assert!(matches!(
            ks_two_sample(&[0.0], &[2.0, 1.0]),
            Err(SlfvError::Unsorted(_))
        ));
    }

    #[test]
    fn exact_small_sample() {
        // uniform CDF; points at 0.1, 0.5, 0.9 -> D = max(0.1, 1/3-0.1, 0.5-1/3, 2/3-0.5, 0.9-2/3, 0.1)
        let d = ks_statistic(&[0.1, 0.5, 0.9], |x| x).unwrap();
        assert!((d - (0.9 - 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn power_against_shift() {
        let mut rng = stream(1, "ks-power", 0);
        let mut s: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        sort_floats(&mut s);
        let d = ks_statistic(&s, |x| normal_cdf(x - 0.5)).unwrap();
        assert!(d > ks_critical_value(s.len(), KsLevel::One));
    }

    #[test]
    fn calibration() {
        let mut passes = 0;
        for rep in 0..100 {
            let mut rng = stream(2, "ks-calibration", rep);
            let mut s: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
            sort_floats(&mut s);
            if ks_statistic(&s, normal_cdf).unwrap() < ks_critical_value(s.len(), KsLevel::One) {
                passes += 1;
            }
        }
        assert!(passes >= 98, "{passes}/100");
    }

    #[test]
    fn two_sample_basics() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 1.0], &[5.0, 6.0]).unwrap(), 1.0);
        let d = ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_sample_calibration() {
        let mut rejections = 0;
        for rep in 0..200 {
            let mut rng = stream(3, "ks2", rep);
            let mut a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
            let mut b: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
            sort_floats(&mut a);
            sort_floats(&mut b);
            if ks_two_sample(&a, &b).unwrap() > ks_two_sample_critical_value(2000, 3000, KsLevel::Five) {
                rejections += 1;
            }
        }
        assert!(rejections <= 22, "{rejections}/200");
    }

    #[test]
    fn cdf_table_interpolates() {
        let t = CdfTable::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.5, 0.9]).unwrap();
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(3.0), 1.0);
        assert!((t.eval(0.5) - 0.3).abs() < 1e-15);
        assert!((t.eval(1.5) - 0.7).abs() < 1e-15);
        assert!(CdfTable::new(vec![0.0, 1.0], vec![0.6, 0.5]).is_err());
        assert!(CdfTable::new(vec![1.0, 0.0], vec![0.1, 0.5]).is_err());
    }

    #[test]
    fn mean_var_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let whole: MeanVar = xs.iter().copied().collect();
        let mut left: MeanVar = xs[..37].iter().copied().collect();
        let right: MeanVar = xs[37..].iter().copied().collect();
        left.merge(&right);
        assert!((whole.mean() - left.mean()).abs() < 1e-14);
        assert!((whole.variance() - left.variance()).abs() < 1e-14);
        assert_eq!(whole.count(), 100);
    }

    #[test]
    fn binomial_helpers() {
        let (p, se) = binomial_estimate(30, 100);
        assert!((p - 0.3).abs() < 1e-15);
        assert!((se - (0.21f64 / 100.0).sqrt()).abs() < 1e-15);
        assert!(within_binomial_ci(5000, 10_000, 0.5, 4.0));
        assert!(!within_binomial_ci(5300, 10_000, 0.5, 4.0));
    }
}
