use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::SuiteReport;
use super::suites::run_suite;
use crate::dual::{run_dual, run_single_lineage, DualOptions, LedgerSnapshot, LineageOptions, TrajectoryRow};
use crate::error::Result;
use crate::forward::{run_forward, AlleleField, ForwardConfig};
use crate::pde::{solve_rho, GridSpec};
use crate::point::Point;
use crate::profile::Profile;
use crate::rng::stream;
use crate::skew::{sample_limit_path, SkewParams};

/// Reports produced by an experiment and the files it wrote.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub reports: Vec<SuiteReport>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(SuiteReport::passed)
    }
}

fn csv_writer(path: &Path, header: &[String]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    Ok(w)
}

fn coordinate_header(prefix: &[&str], d: usize, suffix: &[&str]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((1..=d).map(|i| format!("x{i}")))
        .chain(suffix.iter().map(|s| s.to_string()))
        .collect()
}

fn coordinates(p: &Point, d: usize, scale: f64) -> impl Iterator<Item = String> + '_ {
    p.0[..d].iter().map(move |x| (x / scale).to_string())
}

fn last_snapshot(config: &ExperimentConfig) -> f64 {
    config.snapshots.last().copied().unwrap_or(1.0)
}

fn initial_points(config: &ExperimentConfig, default: &[f64]) -> Vec<Point> {
    if config.initial.is_empty() {
        default.iter().map(|&x| Point::on_axis(x)).collect()
    } else {
        config.initial.iter().map(|c| Point::from_slice(c)).collect()
    }
}

/// Runs the experiment described by `config` and writes its artifacts into
/// `out_dir`, which is created if needed. Output depends only on the config.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut out = ExperimentOutput::default();
    match config.kind {
        ExperimentKind::Forward => forward(config, out_dir, &mut out)?,
        ExperimentKind::Dual => dual(config, out_dir, &mut out)?,
        ExperimentKind::SkewBm => skew_bm(config, out_dir, &mut out)?,
        ExperimentKind::Pde => pde(config, out_dir, &mut out)?,
        ExperimentKind::Verify(suite) => {
            for s in suite.expand() {
                let report = run_suite(s, config);
                let path = out_dir.join(format!("{}.json", s.name()));
                report.write_json(&path)?;
                out.files.push(path);
                out.reports.push(report);
            }
        }
    }
    Ok(out)
}

fn forward(config: &ExperimentConfig, out_dir: &Path, out: &mut ExperimentOutput) -> Result<()> {
    let snapshots = if config.snapshots.is_empty() {
        vec![1.0]
    } else {
        config.snapshots.clone()
    };
    let cfg = ForwardConfig {
        params: config.params,
        n: config.n,
        window: config.window.unwrap_or((-5.0, 5.0)),
        h: config.cell_width.unwrap_or(config.params.r_minus() / 20.0),
        w0: config.w0.clone().unwrap_or_else(|| Profile::step_down(0.0)),
        snapshots,
        horizon: None,
    };
    cfg.validate()?;
    let runs: Vec<Vec<AlleleField>> = (0..config.replicates)
        .into_par_iter()
        .map(|k| Ok(run_forward(&cfg, stream(config.seed, "forward", k))?.snapshots))
        .collect::<Result<_>>()?;
    let path = out_dir.join("snapshots.csv");
    let header = ["replicate", "t", "cell_index", "x_center", "w"].map(String::from);
    let mut w = csv_writer(&path, &header)?;
    for (k, snaps) in runs.iter().enumerate() {
        for s in snaps {
            s.write_csv_rows(k as u64, &mut w)?;
        }
    }
    w.flush()?;
    out.files.push(path);
    Ok(())
}

fn dual(config: &ExperimentConfig, out_dir: &Path, out: &mut ExperimentOutput) -> Result<()> {
    let p = config.params;
    let d = p.d();
    let n = config.n;
    let scale = n.sqrt();
    let starts: Vec<Point> = initial_points(config, &[-0.5, 0.5])
        .iter()
        .map(|x| x.scaled(scale))
        .collect();
    let horizon = n * last_snapshot(config);
    let opts = DualOptions {
        record_trajectory: true,
        close_distance: None,
    };
    let runs: Vec<(Vec<TrajectoryRow>, Vec<LedgerSnapshot>)> = (0..config.replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(config.seed, "dual", k);
            let trajectory = run_dual(&starts, horizon, &p, &mut rng, &opts)?.trajectory;
            let report_times: Vec<f64> = if config.snapshots.is_empty() {
                vec![horizon]
            } else {
                config.snapshots.iter().map(|t| t * n).filter(|&t| t > 0.0).collect()
            };
            let lineage = LineageOptions {
                report_times,
                ..LineageOptions::with_ledger()
            };
            let mut rng = stream(config.seed, "dual-ledger", k);
            let reports = run_single_lineage(&starts[0], horizon, &p, &mut rng, &lineage)?.reports;
            Ok((trajectory, reports))
        })
        .collect::<Result<_>>()?;

    let path = out_dir.join("trajectories.csv");
    let mut w = csv_writer(
        &path,
        &coordinate_header(&["replicate", "t", "particle_id"], d, &["alive"]),
    )?;
    for (k, (trajectory, _)) in runs.iter().enumerate() {
        for row in trajectory {
            let mut record = vec![k.to_string(), (row.t / n).to_string(), row.particle.to_string()];
            record.extend(coordinates(&row.position, d, scale));
            record.push(u8::from(row.alive).to_string());
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    out.files.push(path);

    let path = out_dir.join("ledger.csv");
    let header = ["replicate", "t", "nu", "L_plus", "L_minus", "M_plus", "M_minus"].map(String::from);
    let mut w = csv_writer(&path, &header)?;
    for (k, (_, reports)) in runs.iter().enumerate() {
        for s in reports {
            w.write_record([k as f64, s.t, s.nu, s.l_plus, s.l_minus, s.m_plus, s.m_minus].map(|v| v.to_string()))?;
        }
    }
    w.flush()?;
    out.files.push(path);
    Ok(())
}

fn skew_bm(config: &ExperimentConfig, out_dir: &Path, out: &mut ExperimentOutput) -> Result<()> {
    let d = config.params.d();
    let skew = SkewParams::from_model(&config.params);
    let x0 = initial_points(config, &[0.0])[0];
    let times = if config.snapshots.is_empty() {
        (1..=100).map(|i| i as f64 / 100.0).collect()
    } else {
        config.snapshots.clone()
    };
    let paths: Vec<Vec<Point>> = (0..config.replicates)
        .into_par_iter()
        .map(|k| sample_limit_path(&skew, &x0, d, &times, &mut stream(config.seed, "skewbm", k)))
        .collect::<Result<_>>()?;

    let path = out_dir.join("paths.csv");
    let mut w = csv_writer(&path, &coordinate_header(&["replicate", "t"], d, &[]))?;
    for (k, points) in paths.iter().enumerate() {
        for (t, x) in times.iter().zip(points) {
            let mut record = vec![k.to_string(), t.to_string()];
            record.extend(coordinates(x, d, 1.0));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    out.files.push(path);

    let path = out_dir.join("marginal.csv");
    let mut w = csv_writer(&path, &["replicate".into(), "value".into()])?;
    for (k, points) in paths.iter().enumerate() {
        if let Some(x) = points.last() {
            w.write_record([k.to_string(), x.x1().to_string()])?;
        }
    }
    w.flush()?;
    out.files.push(path);
    Ok(())
}

fn pde(config: &ExperimentConfig, out_dir: &Path, out: &mut ExperimentOutput) -> Result<()> {
    let skew = SkewParams::from_model(&config.params);
    let t = last_snapshot(config);
    let dx = config.cell_width.unwrap_or(1e-3);
    let half = match config.window {
        Some((lo, hi)) => lo.abs().max(hi.abs()),
        None => 8.0 * skew.sigma_max() * t.sqrt() + 1.0,
    };
    let spec = GridSpec::symmetric(dx, 10.0 * dx, half);
    let w0 = config.w0.clone().unwrap_or_else(|| Profile::step_down(0.0));
    let grid = solve_rho(&skew, &w0, t, &spec)?;
    let path = out_dir.join("solution.csv");
    grid.write_csv(BufWriter::new(File::create(&path)?))?;
    out.files.push(path);
    Ok(())
}
