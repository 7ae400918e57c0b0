use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlfvError};
use crate::params::ModelParams;
use crate::profile::Profile;
use crate::stats::KsLevel;

/// A named verification suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    Formulas,
    /// Criterion `1..=12` of the acceptance list.
    Criterion(u8),
    All,
}

impl Suite {
    pub const CRITERIA: u8 = 12;

    pub fn name(self) -> String {
        match self {
            Suite::Formulas => "formulas".into(),
            Suite::Criterion(k) => format!("a{k}"),
            Suite::All => "all".into(),
        }
    }

    /// Suites run by `self`, in order.
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => std::iter::once(Suite::Formulas)
                .chain((1..=Self::CRITERIA).map(Suite::Criterion))
                .collect(),
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Suite {
    type Err = SlfvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formulas" => Ok(Suite::Formulas),
            "all" => Ok(Suite::All),
            _ => s
                .strip_prefix('a')
                .and_then(|k| k.parse::<u8>().ok())
                .filter(|k| (1..=Self::CRITERIA).contains(k))
                .map(Suite::Criterion)
                .ok_or_else(|| SlfvError::Config(format!("unknown suite `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Forward,
    Dual,
    SkewBm,
    Pde,
    Verify(Suite),
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentKind::Forward => f.write_str("forward"),
            ExperimentKind::Dual => f.write_str("dual"),
            ExperimentKind::SkewBm => f.write_str("skewbm"),
            ExperimentKind::Pde => f.write_str("pde"),
            ExperimentKind::Verify(s) => write!(f, "verify:{s}"),
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = SlfvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(ExperimentKind::Forward),
            "dual" => Ok(ExperimentKind::Dual),
            "skewbm" => Ok(ExperimentKind::SkewBm),
            "pde" => Ok(ExperimentKind::Pde),
            _ => match s.strip_prefix("verify:") {
                Some(suite) => Ok(ExperimentKind::Verify(suite.parse()?)),
                None => Err(SlfvError::Config(format!("unknown experiment kind `{s}`"))),
            },
        }
    }
}

impl Serialize for ExperimentKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExperimentKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Pass/fail thresholds of the verification suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub formula_abs: f64,
    pub variance_rel: f64,
    pub variance_quadrature_rel: f64,
    pub skew_sign_z: f64,
    pub marginal_ks: f64,
    pub sampler_ks: f64,
    pub slope_ratio_rel: f64,
    pub continuity_jump: f64,
    pub duality_sigmas: f64,
    pub local_time_ratio_rel: f64,
    pub band_ks_level: KsLevel,
    pub h_integral_rel: f64,
    pub h_integral_sigmas: f64,
    pub occupation_ratio_range: (f64, f64),
    pub coalescence_d1_min: f64,
    pub onset_ks_level: KsLevel,
    pub coalescence_d2_max: f64,
    pub boundary_ks_level: KsLevel,
    pub identity_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            formula_abs: 1e-5,
            variance_rel: 0.02,
            variance_quadrature_rel: 1e-4,
            skew_sign_z: 4.0,
            marginal_ks: 0.02,
            sampler_ks: 0.01,
            slope_ratio_rel: 0.01,
            continuity_jump: 1e-8,
            duality_sigmas: 3.0,
            local_time_ratio_rel: 0.05,
            band_ks_level: KsLevel::One,
            h_integral_rel: 0.02,
            h_integral_sigmas: 3.0,
            occupation_ratio_range: (1.7, 2.3),
            coalescence_d1_min: 0.5,
            onset_ks_level: KsLevel::One,
            coalescence_d2_max: 0.05,
            boundary_ks_level: KsLevel::One,
            identity_abs: 1e-10,
        }
    }
}

/// Sample sizes and numerical settings of the verification suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSizes {
    pub variance_jumps: u64,
    pub skew_levels: Vec<f64>,
    pub skew_replicates: u64,
    pub sampler_draws: u64,
    pub oracle_dx: f64,
    pub oracle_thresholds: usize,
    pub transmission_dx: f64,
    pub transmission_time: f64,
    pub duality_n: f64,
    pub duality_time: f64,
    pub duality_replicates: u64,
    pub local_time_horizon: f64,
    pub local_time_replicates: u64,
    pub band_samples: u64,
    pub band_occupation: f64,
    pub band_time_cap: f64,
    pub h_grid_intervals: usize,
    pub h_inner_runs: usize,
    pub h_time_cap: f64,
    pub h_outer_samples: usize,
    pub occupation_times: Vec<f64>,
    pub occupation_replicates: u64,
    pub pair_levels: Vec<f64>,
    pub pair_time: f64,
    pub pair_start: f64,
    pub pair_replicates: u64,
    pub meeting_step: f64,
    pub patch_length: f64,
    pub patch_times: Vec<f64>,
    pub patch_replicates: u64,
    pub boundary_n: f64,
    pub boundary_time: f64,
    pub boundary_half_window: f64,
    pub boundary_replicates: u64,
    pub identity_trajectories: u64,
    pub identity_horizon: f64,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        SuiteSizes {
            variance_jumps: 100_000,
            skew_levels: vec![25.0, 100.0, 400.0],
            skew_replicates: 100_000,
            sampler_draws: 1_000_000,
            oracle_dx: 2e-3,
            oracle_thresholds: 301,
            transmission_dx: 1e-3,
            transmission_time: 12.0,
            duality_n: 100.0,
            duality_time: 0.5,
            duality_replicates: 2000,
            local_time_horizon: 1e5,
            local_time_replicates: 100,
            band_samples: 100_000,
            band_occupation: 2.0,
            band_time_cap: 1e6,
            h_grid_intervals: 20,
            h_inner_runs: 1000,
            h_time_cap: 1e7,
            h_outer_samples: 1_000_000,
            occupation_times: vec![1e3, 4e3, 1.6e4],
            occupation_replicates: 1000,
            pair_levels: vec![25.0, 100.0, 400.0],
            pair_time: 4.0,
            pair_start: 0.5,
            pair_replicates: 2000,
            meeting_step: 1.0 / 512.0,
            patch_length: 220.0,
            patch_times: vec![10.0, 100.0, 250.0],
            patch_replicates: 4,
            boundary_n: 400.0,
            boundary_time: 1.0,
            boundary_half_window: 3.0,
            boundary_replicates: 1000,
            identity_trajectories: 100,
            identity_horizon: 1e4,
        }
    }
}

fn default_params() -> ModelParams {
    ModelParams::new(0.5, 1.0, 0.7, 1).expect("valid defaults")
}

fn default_n() -> f64 {
    1.0
}

fn default_replicates() -> u64 {
    1
}

/// One experiment, as read from a JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_params")]
    pub params: ModelParams,
    /// Rescaled window `[lo, hi]` of the forward field.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default = "default_n")]
    pub n: f64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default)]
    pub seed: u64,
    /// Rescaled output times.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Unrescaled forward cell width; defaults to `r₋/20`.
    #[serde(default)]
    pub cell_width: Option<f64>,
    #[serde(default)]
    pub w0: Option<Profile>,
    /// Rescaled starting points of the lineages.
    #[serde(default)]
    pub initial: Vec<Vec<f64>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sizes: SuiteSizes,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            params: default_params(),
            window: None,
            n: default_n(),
            replicates: default_replicates(),
            seed: 0,
            snapshots: Vec::new(),
            output_dir: None,
            cell_width: None,
            w0: None,
            initial: Vec::new(),
            tolerances: Tolerances::default(),
            sizes: SuiteSizes::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0) {
            return Err(SlfvError::Config(format!(
                "rescaling level n must be ≥ 1, got {}",
                self.n
            )));
        }
        if self.replicates == 0 {
            return Err(SlfvError::Config("at least one replicate is required".into()));
        }
        if self.snapshots.windows(2).any(|w| w[1] <= w[0]) || self.snapshots.iter().any(|&t| !(t >= 0.0)) {
            return Err(SlfvError::Config(
                "snapshot times must be nonnegative and increasing".into(),
            ));
        }
        if let Some((lo, hi)) = self.window {
            if !(hi > lo) {
                return Err(SlfvError::Config(format!("empty window [{lo}, {hi}]")));
            }
        }
        if self.initial.iter().any(|p| p.is_empty() || p.len() > self.params.d()) {
            return Err(SlfvError::Config(
                "initial positions need between 1 and d coordinates".into(),
            ));
        }
        if let Some(w0) = &self.w0 {
            w0.validate()?;
        }
        Ok(())
    }
}
