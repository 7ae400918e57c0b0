//! Excursion bookkeeping for a single lineage around the band `[-r₊, r₊]`.
//!
//! With `τᵢ±` the entry times into `{±ξ ≤ r₊}` and `σᵢ±` the following exit
//! times, the ledger maintains
//!
//! ```text
//! ±ξ_t 1{±ξ_t > r₊} = ±ξ_0 + M±(t) + L±(t) ∓ Σᵢ ξ(τᵢ±) 1{τᵢ± ≤ t < σᵢ±}
//! ```
//!
//! where `M±` collects the jumps made from `{±ξ > r₊}` and `L±` collects the
//! displacement `±(ξ(σᵢ±) − ξ(τᵢ±))` at each exit. `τ₀± = 0` when the lineage
//! starts in `{±ξ ≤ r₊}`.

use serde::{Deserialize, Serialize};

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Scalar state of the ledger at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub t: f64,
    pub nu: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    pub m_plus: f64,
    pub m_minus: f64,
}

/// Ledger values at a time, the local-time ratio and the time-weighted
/// histogram of the lineage over the band (a density on `[-r₊, r₊]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub snapshot: LedgerSnapshot,
    pub ratio: f64,
    pub histogram: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcursionLedger {
    r: f64,
    x0: f64,
    time: f64,
    current: f64,
    nu: CompensatedSum,
    l_plus: CompensatedSum,
    l_minus: CompensatedSum,
    m_plus: CompensatedSum,
    m_minus: CompensatedSum,
    pub tau_plus: Vec<f64>,
    pub sigma_plus: Vec<f64>,
    pub tau_minus: Vec<f64>,
    pub sigma_minus: Vec<f64>,
    anchor_plus: Option<f64>,
    anchor_minus: Option<f64>,
    histogram: Vec<f64>,
    band_samples: Option<Vec<(f64, f64)>>,
}

impl ExcursionLedger {
    /// Ledger for a lineage starting at first coordinate `x0`, band half-width
    /// `r`, with a histogram of `bins` cells. Time-weighted band samples are
    /// stored only when `keep_samples` is set.
    pub fn new(x0: f64, r: f64, bins: usize, keep_samples: bool) -> Self {
        let mut ledger = ExcursionLedger {
            r,
            x0,
            time: 0.0,
            current: x0,
            nu: CompensatedSum::default(),
            l_plus: CompensatedSum::default(),
            l_minus: CompensatedSum::default(),
            m_plus: CompensatedSum::default(),
            m_minus: CompensatedSum::default(),
            tau_plus: Vec::new(),
            sigma_plus: Vec::new(),
            tau_minus: Vec::new(),
            sigma_minus: Vec::new(),
            anchor_plus: None,
            anchor_minus: None,
            histogram: vec![0.0; bins.max(1)],
            band_samples: keep_samples.then(Vec::new),
        };
        if x0 <= r {
            ledger.tau_plus.push(0.0);
            ledger.anchor_plus = Some(x0);
        }
        if x0 >= -r {
            ledger.tau_minus.push(0.0);
            ledger.anchor_minus = Some(x0);
        }
        ledger
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn position(&self) -> f64 {
        self.current
    }

    pub fn in_band(&self) -> bool {
        self.current.abs() <= self.r
    }

    pub fn nu(&self) -> f64 {
        self.nu.value()
    }

    pub fn l_plus(&self) -> f64 {
        self.l_plus.value()
    }

    pub fn l_minus(&self) -> f64 {
        self.l_minus.value()
    }

    pub fn m_plus(&self) -> f64 {
        self.m_plus.value()
    }

    pub fn m_minus(&self) -> f64 {
        self.m_minus.value()
    }

    pub fn band_samples(&self) -> Option<&[(f64, f64)]> {
        self.band_samples.as_deref()
    }

    /// The lineage stays put for `dt`.
    pub fn hold(&mut self, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        self.time += dt;
        if self.in_band() {
            self.nu.add(dt);
            let bins = self.histogram.len();
            let k = (((self.current + self.r) / (2.0 * self.r)) * bins as f64).floor();
            self.histogram[(k.max(0.0) as usize).min(bins - 1)] += dt;
            if let Some(samples) = self.band_samples.as_mut() {
                samples.push((self.current, dt));
            }
        }
    }

    /// The lineage jumps from its current position to `y` at the current time.
    pub fn jump(&mut self, y: f64) {
        let (x, r, t) = (self.current, self.r, self.time);
        if x > r {
            self.m_plus.add(y - x);
            if y <= r {
                self.tau_plus.push(t);
                self.anchor_plus = Some(y);
            }
        } else if y > r {
            self.sigma_plus.push(t);
            let anchor = self.anchor_plus.take().expect("anchored while outside the excursion");
            self.l_plus.add(y - anchor);
        }
        if x < -r {
            self.m_minus.add(x - y);
            if y >= -r {
                self.tau_minus.push(t);
                self.anchor_minus = Some(y);
            }
        } else if y < -r {
            self.sigma_minus.push(t);
            let anchor = self.anchor_minus.take().expect("anchored while outside the excursion");
            self.l_minus.add(anchor - y);
        }
        self.current = y;
    }

    /// `LHS − RHS` of the decomposition on each side.
    pub fn identity_residuals(&self) -> (f64, f64) {
        let x = self.current;
        let lhs_plus = if x > self.r { x } else { 0.0 };
        let rhs_plus = self.x0 + self.m_plus() + self.l_plus() - self.anchor_plus.unwrap_or(0.0);
        let lhs_minus = if -x > self.r { -x } else { 0.0 };
        let rhs_minus = -self.x0 + self.m_minus() + self.l_minus() + self.anchor_minus.unwrap_or(0.0);
        (lhs_plus - rhs_plus, lhs_minus - rhs_minus)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            t: self.time,
            nu: self.nu(),
            l_plus: self.l_plus(),
            l_minus: self.l_minus(),
            m_plus: self.m_plus(),
            m_minus: self.m_minus(),
        }
    }
}

/// Reads the ledger at its current time: `ν`, `L±`, `L⁺/L⁻` and the band histogram.
pub fn ledger_report(ledger: &ExcursionLedger) -> LedgerReport {
    let snapshot = ledger.snapshot();
    let total: f64 = ledger.histogram.iter().sum();
    let width = 2.0 * ledger.r / ledger.histogram.len() as f64;
    let histogram = ledger
        .histogram
        .iter()
        .map(|w| if total > 0.0 { w / (total * width) } else { 0.0 })
        .collect();
    LedgerReport {
        snapshot,
        ratio: snapshot.l_plus / snapshot.l_minus,
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut c = CompensatedSum::default();
        c.add(1e16);
        for _ in 0..1000 {
            c.add(1.0);
        }
        c.add(-1e16);
        assert_eq!(c.value(), 1000.0);
    }

    #[test]
    fn scripted_path() {
        let mut l = ExcursionLedger::new(0.2, 1.0, 4, true);
        l.hold(1.0);
        l.jump(1.5); // exit to + side: L⁺ += 1.3
        l.hold(2.0);
        l.jump(2.0); // M⁺ += 0.5
        l.hold(0.5);
        l.jump(0.4); // re-entry: M⁺ += −1.6, anchor 0.4
        l.hold(1.0);
        l.jump(-1.2); // exit to − side from the entry at time 0: L⁻ += 0.2 − (−1.2)
        l.hold(1.0);
        l.jump(-0.9); // M⁻ += −0.3
        assert!((l.l_plus() - 1.3).abs() < 1e-15);
        assert!((l.m_plus() - (0.5 - 1.6)).abs() < 1e-15);
        assert!((l.l_minus() - 1.4).abs() < 1e-15);
        assert!((l.m_minus() + 0.3).abs() < 1e-15);
        assert!((l.nu() - 2.0).abs() < 1e-15);
        assert_eq!(l.sigma_plus, vec![1.0]);
        assert_eq!(l.tau_plus, vec![0.0, 3.5]);
        assert_eq!(l.sigma_minus, vec![4.5]);
        assert_eq!(l.tau_minus, vec![0.0, 5.5]);
        let (a, b) = l.identity_residuals();
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        let rep = ledger_report(&l);
        assert!((rep.ratio - 1.3 / 1.4).abs() < 1e-15);
        let mass: f64 = rep.histogram.iter().map(|h| h * 0.5).sum();
        assert!((mass - 1.0).abs() < 1e-15);
        assert_eq!(l.band_samples().unwrap().len(), 2);
    }

    #[test]
    fn start_outside_band() {
        let mut l = ExcursionLedger::new(-3.0, 1.0, 10, false);
        assert_eq!(l.identity_residuals(), (0.0, 0.0));
        l.jump(-2.0);
        l.jump(0.5);
        l.jump(1.7);
        let (a, b) = l.identity_residuals();
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        assert!(l.band_samples().is_none());
    }
}
