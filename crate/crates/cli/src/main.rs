use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use slfv_core::harness::{run_experiment, ExperimentConfig, ExperimentKind};

/// Simulate the SLFV with a dispersal interface, its dual and its limits, or
/// run a verification suite.
#[derive(Debug, Parser)]
#[command(name = "slfv", version)]
struct Args {
    /// forward, dual, skewbm, pde or verify:<suite> (formulas, a1..a12, all).
    kind: ExperimentKind,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of replicates; overrides the config.
    #[arg(long)]
    replicates: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> slfv_core::Result<bool> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(args.kind),
    };
    config.kind = args.kind;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    let out_dir = args
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| slfv_core::SlfvError::Config(e.to_string()))?;
    }
    let output = run_experiment(&config, &out_dir)?;
    for report in &output.reports {
        print!("{report}");
    }
    for file in &output.files {
        println!("wrote {}", file.display());
    }
    Ok(output.passed())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
