use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Where the target value of a row comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// A published value or claim about the model.
    Published,
    /// A direct consequence of a definition.
    Exact,
    /// Computed by an independent numerical oracle.
    Oracle,
}

/// How the estimate is compared with the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Check {
    /// `|estimate − target| ≤ tolerance`.
    Absolute { tolerance: f64 },
    /// `|estimate − target| ≤ tolerance·|target|`.
    Relative { tolerance: f64 },
    /// `|estimate − target| ≤ relative·|target| + sigmas·stderr`.
    RelativePlusSigmas { relative: f64, sigmas: f64 },
    /// `|estimate − target| ≤ sigmas·stderr`.
    Sigmas { sigmas: f64 },
    /// `estimate ≤ target`; the target is a critical value or an upper bound.
    AtMost,
    /// `estimate ≥ target`.
    AtLeast,
    /// `estimate ∈ [lo, hi]`.
    Within { lo: f64, hi: f64 },
    /// A qualitative condition evaluated by the suite (estimate 1 = holds).
    Holds,
    /// Reported without a pass/fail rule.
    Info,
}

impl Check {
    pub fn tolerance(&self, stderr: f64) -> f64 {
        match *self {
            Check::Absolute { tolerance } => tolerance,
            Check::Relative { tolerance } => tolerance,
            Check::RelativePlusSigmas { sigmas, .. } => sigmas * stderr,
            Check::Sigmas { sigmas } => sigmas * stderr,
            Check::Within { lo, hi } => 0.5 * (hi - lo),
            Check::AtMost | Check::AtLeast | Check::Holds | Check::Info => 0.0,
        }
    }

    pub fn passes(&self, estimate: f64, stderr: f64, target: f64) -> bool {
        if estimate.is_nan() {
            return matches!(self, Check::Info);
        }
        let err = (estimate - target).abs();
        match *self {
            Check::Absolute { tolerance } => err <= tolerance,
            Check::Relative { tolerance } => err <= tolerance * target.abs(),
            Check::RelativePlusSigmas { relative, sigmas } => err <= relative * target.abs() + sigmas * stderr,
            Check::Sigmas { sigmas } => err <= sigmas * stderr,
            Check::AtMost => estimate <= target,
            Check::AtLeast => estimate >= target,
            Check::Within { lo, hi } => (lo..=hi).contains(&estimate),
            Check::Holds => estimate == 1.0,
            Check::Info => true,
        }
    }
}

/// One checked statistic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub name: String,
    pub estimate: f64,
    /// Standard error of the estimate; zero for deterministic rows and KS rows,
    /// whose target is the critical value.
    pub stderr: f64,
    pub target: f64,
    pub provenance: Provenance,
    pub tolerance: Check,
    pub required: bool,
    pub pass: bool,
}

impl StatRow {
    pub fn new(
        name: impl Into<String>,
        estimate: f64,
        stderr: f64,
        target: f64,
        provenance: Provenance,
        check: Check,
    ) -> Self {
        StatRow {
            name: name.into(),
            estimate,
            stderr,
            target,
            provenance,
            pass: check.passes(estimate, stderr, target),
            tolerance: check,
            required: !matches!(check, Check::Info),
        }
    }

    /// A row that is reported but never fails the suite.
    pub fn info(name: impl Into<String>, estimate: f64, stderr: f64, target: f64, provenance: Provenance) -> Self {
        StatRow::new(name, estimate, stderr, target, provenance, Check::Info)
    }

    pub fn holds(name: impl Into<String>, condition: bool, provenance: Provenance) -> Self {
        StatRow::new(name, f64::from(u8::from(condition)), 0.0, 1.0, provenance, Check::Holds)
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }
}

fn number(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e6) {
        format!("{v:.4e}")
    } else {
        format!("{v:.6}")
    }
}

impl fmt::Display for StatRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match (self.required, self.pass) {
            _ if matches!(self.tolerance, Check::Info) => "info",
            (_, true) => "PASS",
            (true, false) => "FAIL",
            (false, false) => "fail (informational)",
        };
        write!(
            f,
            "{verdict:>4}  {:<44} estimate {:<12} target {:<12} stderr {:.3e}",
            self.name,
            number(self.estimate),
            number(self.target),
            self.stderr
        )
    }
}

/// Rows of one suite, serialized as `{suite, rows}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub rows: Vec<StatRow>,
}

impl SuiteReport {
    pub fn new(suite: impl Into<String>) -> Self {
        SuiteReport {
            suite: suite.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: StatRow) {
        self.rows.push(row);
    }

    /// Records a failure to run part of the suite as a failed row.
    pub fn push_error(&mut self, name: impl Into<String>, err: &crate::SlfvError) {
        let mut row = StatRow::holds(format!("{}: {err}", name.into()), false, Provenance::Exact);
        row.estimate = f64::NAN;
        self.rows.push(row);
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass || !r.required)
    }

    pub fn failures(&self) -> impl Iterator<Item = &StatRow> {
        self.rows.iter().filter(|r| r.required && !r.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}] {}", self.suite, if self.passed() { "pass" } else { "FAIL" })?;
        for row in &self.rows {
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks() {
        assert!(Check::Relative { tolerance: 0.02 }.passes(1.01, 0.0, 1.0));
        assert!(!Check::Relative { tolerance: 0.02 }.passes(1.03, 0.0, 1.0));
        assert!(Check::RelativePlusSigmas {
            relative: 0.02,
            sigmas: 3.0
        }
        .passes(1.049, 0.01, 1.0));
        assert!(!Check::Sigmas { sigmas: 3.0 }.passes(1.049, 0.01, 1.0));
        assert!(Check::AtMost.passes(0.01, 0.0, 0.02));
        assert!(Check::Within { lo: 1.7, hi: 2.3 }.passes(2.0, 0.0, 2.0));
        assert!(!Check::Holds.passes(0.0, 0.0, 1.0));
        assert!(!Check::AtMost.passes(f64::NAN, 0.0, 1.0));
        assert!(Check::Info.passes(f64::NAN, 0.0, 1.0));
    }

    #[test]
    fn informational_rows_do_not_fail_the_suite() {
        let mut r = SuiteReport::new("x");
        r.push(StatRow::new(
            "a",
            1.0,
            0.0,
            1.0,
            Provenance::Exact,
            Check::Absolute { tolerance: 0.0 },
        ));
        r.push(
            StatRow::new(
                "b",
                2.0,
                0.0,
                1.0,
                Provenance::Exact,
                Check::Absolute { tolerance: 0.5 },
            )
            .optional(),
        );
        assert!(r.passed());
        r.push(StatRow::holds("c", false, Provenance::Exact));
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn json_schema() {
        let mut r = SuiteReport::new("formulas");
        r.push(StatRow::new(
            "beta",
            0.34,
            0.0,
            0.34,
            Provenance::Exact,
            Check::Absolute { tolerance: 1e-9 },
        ));
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["suite"], "formulas");
        let row = &v["rows"][0];
        for key in [
            "name",
            "estimate",
            "stderr",
            "target",
            "provenance",
            "tolerance",
            "pass",
        ] {
            assert!(row.get(key).is_some(), "{key}");
        }
        assert_eq!(row["provenance"], "exact");
        assert_eq!(row["tolerance"]["rule"], "absolute");
    }
}
