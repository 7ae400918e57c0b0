//! Verification suites. Each suite runs at the sizes in
//! [`SuiteSizes`](super::config::SuiteSizes), checks against
//! [`Tolerances`](super::config::Tolerances) and returns one report.

use quadrature::double_exponential;
use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Suite};
use super::report::{Check, Provenance, StatRow, SuiteReport};
use crate::dual::{
    entry_map, estimate_h_integral, run_dual, run_single_lineage, sample_band_process, DualOptions, HIntegralOptions,
    LineageOptions,
};
use crate::error::Result;
use crate::forward::{eval_i, run_forward, Bump, ForwardConfig, TestFunctional};
use crate::geometry::{phi_kernel, unit_ball_volume};
use crate::params::ModelParams;
use crate::pde::{green_cdf, solve_rho, threshold_sweep, GridSpec};
use crate::point::{Point, Side};
use crate::profile::Profile;
use crate::rng::stream;
use crate::skew::{boundary_cdf, boundary_process, meeting_time_pair, sample_limit_marginal, SkewParams};
use crate::stats::{
    binomial_estimate, ks_critical_value, ks_statistic, ks_two_sample, ks_two_sample_critical_value, sort_floats,
    CdfTable, MeanVar,
};

fn replicate<T: Send>(count: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..count).into_par_iter().map(f).collect()
}

/// Runs one suite (not `all`).
pub fn run_suite(suite: Suite, config: &ExperimentConfig) -> SuiteReport {
    let mut report = SuiteReport::new(suite.name());
    let outcome = match suite {
        Suite::Formulas => formulas(config, &mut report),
        Suite::Criterion(1) => lineage_variance(config, &mut report),
        Suite::Criterion(2) => interface_skewness(config, &mut report),
        Suite::Criterion(3) => marginal_convergence(config, &mut report),
        Suite::Criterion(4) => transmission_condition(config, &mut report),
        Suite::Criterion(5) => duality(config, &mut report),
        Suite::Criterion(6) => local_time_ratio(config, &mut report),
        Suite::Criterion(7) => stationary_band_law(config, &mut report),
        Suite::Criterion(8) => h_integrals(config, &mut report),
        Suite::Criterion(9) => occupation_scaling(config, &mut report),
        Suite::Criterion(10) => dimension_dichotomy(config, &mut report),
        Suite::Criterion(11) => patch_dynamics(config, &mut report),
        Suite::Criterion(12) => ledger_identity(config, &mut report),
        Suite::Criterion(_) | Suite::All => unreachable!("expanded by the caller"),
    };
    if let Err(e) = outcome {
        report.push_error(format!("{suite} aborted"), &e);
    }
    report
}

fn formulas(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = &config.params;
    let check = Check::Absolute {
        tolerance: config.tolerances.formula_abs,
    };
    let skew = SkewParams::from_model(p);
    let (r2p, r2m) = (p.r_plus().powi(2), p.r_minus().powi(2));
    let dim = (p.d() + 2) as f64;
    let rows = [
        ("beta", p.beta(), (r2p - r2m) / (r2p + r2m)),
        ("sigma2_plus", p.sigma2_plus(), p.u() * 2.0 * r2p / dim),
        ("sigma2_minus", p.sigma2_minus(), p.u() * 2.0 * r2m / dim),
        ("alpha", p.alpha(), 0.5 * (1.0 + p.beta())),
        (
            "beta_from_diffusivities",
            p.beta(),
            (p.sigma2_plus() - p.sigma2_minus()) / (p.sigma2_plus() + p.sigma2_minus()),
        ),
        (
            "alpha_standardized",
            skew.standardize()?.alpha_std,
            p.r_plus() / (p.r_plus() + p.r_minus()),
        ),
    ];
    for (name, estimate, target) in rows {
        report.push(StatRow::new(name, estimate, 0.0, target, Provenance::Exact, check));
    }
    if *p == ModelParams::new(0.5, 1.0, 0.7, 1)? {
        for (name, estimate, target) in [
            ("beta_reference", p.beta(), 0.34228),
            ("sigma2_plus_reference", p.sigma2_plus(), 1.0 / 3.0),
            ("sigma2_minus_reference", p.sigma2_minus(), 0.16333),
            ("alpha_reference", p.alpha(), 0.67114),
        ] {
            report.push(StatRow::new(name, estimate, 0.0, target, Provenance::Exact, check));
        }
    }
    Ok(())
}

/// `u∫Φ(x,y)(y₁−x₁)²dy` for `x` deep in one halfspace, where `Φ(x,·)` is
/// isotropic: `u·V_d(1)∫₀^{2r} Φ(x, x+ρe₁) ρ^{d+1} dρ`.
fn variance_by_quadrature(p: &ModelParams, side: Side) -> f64 {
    let x = Point::on_axis(side.sign() * 10.0 * p.r_plus());
    let r = p.radius(side);
    let d = p.d();
    let integrand = |rho: f64| phi_kernel(&x, &Point::on_axis(x.x1() + rho), p) * rho.powi(d as i32 + 1);
    p.u() * unit_ball_volume(d) * double_exponential::integrate(integrand, 0.0, 2.0 * r, 1e-12).integral
}

fn lineage_variance(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let tol = &config.tolerances;
    for d in [1, 2] {
        let p = config.params.with_dimension(d)?;
        for side in [Side::Plus, Side::Minus] {
            let target = p.sigma2(side);
            let horizon = config.sizes.variance_jumps as f64 / p.u();
            let x0 = Point::on_axis(side.sign() * 1e4 * p.r_plus());
            let opts = LineageOptions {
                record_path: true,
                ..Default::default()
            };
            let mut rng = stream(config.seed, "lineage-variance", (d * 2 + side.as_u8() as usize) as u64);
            let run = run_single_lineage(&x0, horizon, &p, &mut rng, &opts)?;
            let (mut s2, mut s4) = (0.0, 0.0);
            for w in run.path.windows(2) {
                let dx = w[1].1.x1() - w[0].1.x1();
                s2 += dx * dx;
                s4 += dx.powi(4);
            }
            let tag = format!("d{d}_{}", if side == Side::Plus { "plus" } else { "minus" });
            report.push(StatRow::new(
                format!("displacement_variance_{tag}"),
                s2 / horizon,
                s4.sqrt() / horizon,
                target,
                Provenance::Published,
                Check::Relative {
                    tolerance: tol.variance_rel,
                },
            ));
            report.push(StatRow::info(
                format!("jumps_{tag}"),
                run.jumps as f64,
                0.0,
                config.sizes.variance_jumps as f64,
                Provenance::Exact,
            ));
            report.push(StatRow::new(
                format!("variance_quadrature_{tag}"),
                variance_by_quadrature(&p, side),
                0.0,
                target,
                Provenance::Published,
                Check::Relative {
                    tolerance: tol.variance_quadrature_rel,
                },
            ));
        }
    }
    Ok(())
}

fn rescaled_endpoints(config: &ExperimentConfig, purpose: &str, n: f64, count: u64) -> Result<Vec<f64>> {
    let p = config.params;
    let scale = n.sqrt();
    let samples: Result<Vec<f64>> = replicate(count, |k| {
        let mut rng = stream(config.seed, purpose, k);
        let run = run_single_lineage(&Point::ORIGIN, n, &p, &mut rng, &LineageOptions::default())?;
        Ok(run.end.x1() / scale)
    })
    .into_iter()
    .collect();
    samples
}

fn interface_skewness(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = config.params;
    let sizes = &config.sizes;
    let alpha = p.alpha();
    let alpha_std = SkewParams::from_model(&p).standardize()?.alpha_std;
    let count = sizes.skew_replicates;
    let mut gaps = Vec::new();
    let last = sizes.skew_levels.len().saturating_sub(1);
    for (i, &n) in sizes.skew_levels.iter().enumerate() {
        let xs = rescaled_endpoints(config, &format!("skewness-n{n}"), n, count)?;
        let positive = xs.iter().filter(|&&x| x > 0.0).count() as u64;
        let (freq, se) = binomial_estimate(positive, count);
        let ci = (alpha * (1.0 - alpha) / count as f64).sqrt();
        let row = StatRow::new(
            format!("p_positive_n{n}"),
            freq,
            ci,
            alpha,
            Provenance::Published,
            Check::Sigmas {
                sigmas: config.tolerances.skew_sign_z,
            },
        );
        report.push(if i == last { row } else { row.optional() });
        report.push(StatRow::info(
            format!("p_positive_n{n}_vs_standardized_limit"),
            freq,
            se,
            alpha_std,
            Provenance::Oracle,
        ));
        gaps.push((freq - alpha).abs());
    }
    report.push(StatRow::holds(
        "p_positive_approaches_alpha_monotonically",
        gaps.windows(2).all(|w| w[1] < w[0]),
        Provenance::Published,
    ));
    Ok(())
}

fn limit_cdf_oracle(config: &ExperimentConfig, skew: &SkewParams, t: f64) -> Result<CdfTable> {
    let sizes = &config.sizes;
    let spread = skew.sigma_max() * t.sqrt();
    let spec = GridSpec::symmetric(sizes.oracle_dx, sizes.oracle_dx / 2.0, 8.0 * spread + 1.0);
    green_cdf(
        skew,
        0.0,
        t,
        &spec,
        &threshold_sweep(0.0, 6.0 * spread, sizes.oracle_thresholds),
    )
}

fn marginal_convergence(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = config.params;
    let sizes = &config.sizes;
    let skew = SkewParams::from_model(&p);
    let table = limit_cdf_oracle(config, &skew, 1.0)?;
    let mut stats = Vec::new();
    let last = sizes.skew_levels.len().saturating_sub(1);
    for (i, &n) in sizes.skew_levels.iter().enumerate() {
        let mut xs = rescaled_endpoints(config, &format!("marginal-n{n}"), n, sizes.skew_replicates)?;
        sort_floats(&mut xs);
        let ks = ks_statistic(&xs, |y| table.eval(y))?;
        let row = StatRow::new(
            format!("ks_lineage_vs_oracle_n{n}"),
            ks,
            0.0,
            config.tolerances.marginal_ks,
            Provenance::Oracle,
            Check::AtMost,
        );
        report.push(if i == last { row } else { row.optional() });
        stats.push(ks);
    }
    report.push(StatRow::holds(
        "ks_decreases_in_n",
        stats.windows(2).all(|w| w[1] < w[0]),
        Provenance::Published,
    ));
    let draws = sizes.sampler_draws;
    let chunks = 64u64;
    let per = draws.div_ceil(chunks);
    let mut ys: Vec<f64> = replicate(chunks, |c| {
        let mut rng = stream(config.seed, "skew-sampler", c);
        (0..per.min(draws - c * per))
            .map(|_| sample_limit_marginal(&skew, 0.0, 1.0, &mut rng))
            .collect::<Result<Vec<f64>>>()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .concat();
    sort_floats(&mut ys);
    report.push(StatRow::new(
        "ks_limit_sampler_vs_oracle",
        ks_statistic(&ys, |y| table.eval(y))?,
        0.0,
        config.tolerances.sampler_ks,
        Provenance::Oracle,
        Check::AtMost,
    ));
    Ok(())
}

fn transmission_condition(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let sizes = &config.sizes;
    let skew = SkewParams::new(0.5, 1.0, -0.6)?;
    let t = sizes.transmission_time;
    let spec = GridSpec::symmetric(
        sizes.transmission_dx,
        10.0 * sizes.transmission_dx,
        8.0 * skew.sigma_max() * t.sqrt() + 1.0,
    );
    let grid = solve_rho(&skew, &Profile::step_down(0.0), t, &spec)?;
    let beta = skew.beta();
    report.push(StatRow::new(
        "slope_ratio",
        grid.slope_ratio(),
        0.0,
        (1.0 + beta) / (1.0 - beta),
        Provenance::Published,
        Check::Relative {
            tolerance: config.tolerances.slope_ratio_rel,
        },
    ));
    report.push(StatRow::new(
        "continuity_jump",
        grid.continuity_jump(),
        0.0,
        config.tolerances.continuity_jump,
        Provenance::Exact,
        Check::AtMost,
    ));
    report.push(StatRow::info(
        "flux_residual",
        grid.flux_residual(),
        0.0,
        0.0,
        Provenance::Exact,
    ));
    let (lo, hi) = grid.min_max();
    report.push(StatRow::holds(
        "maximum_principle",
        lo >= -1e-12 && hi <= 1.0 + 1e-12,
        Provenance::Exact,
    ));
    Ok(())
}

fn duality(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = config.params;
    let sizes = &config.sizes;
    let n = sizes.duality_n;
    let t = sizes.duality_time;
    let w0 = Profile::PiecewiseLinear {
        knots: vec![(-1.0, 0.8), (1.0, 0.2)],
    };
    let functionals = [
        TestFunctional::new(vec![Bump::new(0.1, 0.6)?])?,
        TestFunctional::new(vec![Bump::new(-0.3, 0.4)?, Bump::new(0.4, 0.4)?])?,
    ];
    let forward = ForwardConfig {
        params: p,
        n,
        window: (-4.0, 4.0),
        h: p.r_minus() / 20.0,
        w0: w0.clone(),
        snapshots: vec![t],
        horizon: None,
    };
    for f in &functionals {
        f.check_support(forward.window.0, forward.window.1)?;
    }
    let forward_values: Vec<Vec<f64>> = replicate(sizes.duality_replicates, |k| {
        let run = run_forward(&forward, stream(config.seed, "duality-forward", k))?;
        let snap = &run.snapshots[0];
        Ok(functionals.iter().map(|f| eval_i(snap, f)).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let scale = n.sqrt();
    for (j, functional) in functionals.iter().enumerate() {
        let fwd: MeanVar = forward_values.iter().map(|v| v[j]).collect();
        let dual: MeanVar = replicate(sizes.duality_replicates, |k| {
            let mut rng = stream(config.seed, &format!("duality-dual-j{}", j + 1), k);
            let starts: Vec<Point> = functional
                .bumps
                .iter()
                .map(|b| Point::on_axis(b.sample(&mut rng) * scale))
                .collect();
            let run = run_dual(&starts, n * t, &p, &mut rng, &DualOptions::default())?;
            Ok(run
                .system
                .alive_positions()
                .map(|x| w0.value(x.x1() / scale))
                .product::<f64>())
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .map(|v| v * functional.mass())
        .collect();
        let se = (fwd.stderr().powi(2) + dual.stderr().powi(2)).sqrt();
        report.push(StatRow::new(
            format!("forward_vs_dual_j{}", functional.j()),
            fwd.mean(),
            se,
            dual.mean(),
            Provenance::Published,
            Check::Sigmas {
                sigmas: config.tolerances.duality_sigmas,
            },
        ));
    }
    Ok(())
}

/// Ratio of means with its delta-method standard error.
fn ratio_of_means(pairs: &[(f64, f64)]) -> (f64, f64) {
    let m = pairs.len() as f64;
    let (sa, sb) = pairs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let ratio = sa / sb;
    let resid: MeanVar = pairs.iter().map(|&(x, y)| x - ratio * y).collect();
    (ratio, resid.variance().sqrt() / (sb / m) / m.sqrt())
}

fn local_time_ratio(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = config.params;
    let sizes = &config.sizes;
    let pairs: Vec<(f64, f64)> = replicate(sizes.local_time_replicates, |k| {
        let mut rng = stream(config.seed, "local-times", k);
        let run = run_single_lineage(
            &Point::ORIGIN,
            sizes.local_time_horizon,
            &p,
            &mut rng,
            &LineageOptions::with_ledger(),
        )?;
        let l = run.ledger.expect("ledger requested");
        Ok((l.l_plus(), l.l_minus()))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (ratio, se) = ratio_of_means(&pairs);
    report.push(StatRow::new(
        "local_time_ratio",
        ratio,
        se,
        p.sigma2_plus() / p.sigma2_minus(),
        Provenance::Published,
        Check::Relative {
            tolerance: config.tolerances.local_time_ratio_rel,
        },
    ));
    Ok(())
}

fn stationary_band_law(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = config.params;
    let sizes = &config.sizes;
    let r = p.r_plus();
    let attempts = sizes.band_samples + sizes.band_samples / 100 + 100;
    let draws: Vec<Option<f64>> = replicate(attempts, |k| {
        let mut rng = stream(config.seed, "band-law", k);
        let y0 = r * (2.0 * rng.random::<f64>() - 1.0);
        sample_band_process(y0, sizes.band_occupation, &p, &mut rng, sizes.band_time_cap)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut ys: Vec<f64> = draws
        .iter()
        .flatten()
        .copied()
        .take(sizes.band_samples as usize)
        .collect();
    let used = draws.iter().scan(0usize, |kept, d| {
        let more = *kept < ys.len();
        *kept += usize::from(d.is_some());
        Some(more)
    });
    let censored = draws.iter().zip(used).filter(|(d, more)| *more && d.is_none()).count();
    sort_floats(&mut ys);
    let ks = ks_statistic(&ys, |y| ((y + r) / (2.0 * r)).clamp(0.0, 1.0))?;
    report.push(StatRow::new(
        "ks_band_law_vs_uniform",
        ks,
        0.0,
        ks_critical_value(ys.len(), config.tolerances.band_ks_level),
        Provenance::Published,
        Check::AtMost,
    ));
    report.push(StatRow::holds(
        "uncensored_samples_reach_target",
        ys.len() as u64 >= sizes.band_samples,
        Provenance::Exact,
    ));
    report.push(StatRow::info(
        "censored_paths",
        censored as f64,
        0.0,
        0.0,
        Provenance::Exact,
    ));
    Ok(())
}

fn h_integrals(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = config.params.with_dimension(1)?;
    let sizes = &config.sizes;
    let opts = HIntegralOptions {
        grid_intervals: sizes.h_grid_intervals,
        inner_runs: sizes.h_inner_runs,
        time_cap: sizes.h_time_cap,
        outer_samples: sizes.h_outer_samples,
    };
    let map = entry_map(&p, &opts, config.seed)?;
    for side in [Side::Plus, Side::Minus] {
        let mut rng = stream(config.seed, "h-integral-outer", side.as_u8() as u64);
        let est = estimate_h_integral(&p, side, &map, &opts, &mut rng)?;
        report.push(StatRow::new(
            format!("h_integral_{}", if side == Side::Plus { "plus" } else { "minus" }),
            est.estimate,
            est.stderr,
            p.sigma2(side) / (4.0 * p.r_plus()),
            Provenance::Published,
            Check::RelativePlusSigmas {
                relative: config.tolerances.h_integral_rel,
                sigmas: config.tolerances.h_integral_sigmas,
            },
        ));
    }
    report.push(StatRow::info(
        "censored_inner_runs",
        map.censored as f64,
        0.0,
        0.0,
        Provenance::Exact,
    ));
    Ok(())
}

fn occupation_scaling(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = config.params;
    let sizes = &config.sizes;
    let mut times = sizes.occupation_times.clone();
    times.extend(sizes.occupation_times.last().map(|&t| 4.0 * t));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let horizon = *times.last().expect("occupation times configured");
    let opts = LineageOptions {
        report_times: times.clone(),
        ..Default::default()
    };
    let nus: Vec<Vec<f64>> = replicate(sizes.occupation_replicates, |k| {
        let mut rng = stream(config.seed, "occupation", k);
        let run = run_single_lineage(&Point::ORIGIN, horizon, &p, &mut rng, &opts)?;
        Ok(run.reports.iter().map(|s| s.nu).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (lo, hi) = config.tolerances.occupation_ratio_range;
    for &t in &sizes.occupation_times {
        let i = times.iter().position(|&s| s == t).expect("listed");
        let j = times.iter().position(|&s| s == 4.0 * t).expect("listed");
        let pairs: Vec<(f64, f64)> = nus.iter().map(|v| (v[j], v[i])).collect();
        let (ratio, se) = ratio_of_means(&pairs);
        report.push(StatRow::new(
            format!("occupation_ratio_t{t}"),
            ratio,
            se,
            2.0,
            Provenance::Published,
            Check::Within { lo, hi },
        ));
    }
    Ok(())
}

fn pair_runs(
    config: &ExperimentConfig,
    p: &ModelParams,
    n: f64,
    purpose: &str,
) -> Result<Vec<(Option<f64>, Option<f64>)>> {
    let sizes = &config.sizes;
    let a = sizes.pair_start * n.sqrt();
    let starts = [Point::on_axis(-a), Point::on_axis(a)];
    replicate(sizes.pair_replicates, |k| {
        let mut rng = stream(config.seed, purpose, k);
        let run = run_dual(&starts, sizes.pair_time * n, p, &mut rng, &DualOptions::default())?;
        Ok((run.first_close.map(|t| t / n), run.first_merge().map(|t| t / n)))
    })
    .into_iter()
    .collect()
}

fn dimension_dichotomy(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let sizes = &config.sizes;
    let tol = &config.tolerances;
    let n_top = *sizes.pair_levels.last().expect("pair levels configured");
    let p1 = config.params.with_dimension(1)?;
    let runs = pair_runs(config, &p1, n_top, "pairs-d1")?;
    let merged = runs.iter().filter(|r| r.1.is_some()).count() as u64;
    let (freq, se) = binomial_estimate(merged, sizes.pair_replicates);
    report.push(StatRow::new(
        "coalescence_by_t_d1",
        freq,
        se,
        tol.coalescence_d1_min,
        Provenance::Published,
        Check::AtLeast,
    ));
    let mut onsets: Vec<f64> = runs.iter().filter_map(|r| r.0).collect();
    let skew = SkewParams::from_model(&p1);
    let meetings: Vec<Option<f64>> = replicate(sizes.pair_replicates, |k| {
        let mut rng = stream(config.seed, "limit-meeting", k);
        let m = meeting_time_pair(
            &skew,
            -sizes.pair_start,
            sizes.pair_start,
            sizes.meeting_step,
            sizes.pair_time,
            &mut rng,
        )?;
        Ok(m.time())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut met: Vec<f64> = meetings.iter().flatten().copied().collect();
    report.push(StatRow::info(
        "limit_meeting_by_t_d1",
        met.len() as f64 / sizes.pair_replicates as f64,
        0.0,
        tol.coalescence_d1_min,
        Provenance::Oracle,
    ));
    report.push(StatRow::info(
        "close_approach_by_t_d1",
        onsets.len() as f64 / sizes.pair_replicates as f64,
        0.0,
        tol.coalescence_d1_min,
        Provenance::Oracle,
    ));
    sort_floats(&mut onsets);
    sort_floats(&mut met);
    report.push(StatRow::new(
        "ks_onset_vs_limit_meeting_d1",
        ks_two_sample(&onsets, &met)?,
        0.0,
        ks_two_sample_critical_value(onsets.len(), met.len(), tol.onset_ks_level),
        Provenance::Oracle,
        Check::AtMost,
    ));

    let p2 = config.params.with_dimension(2)?;
    let mut freqs = Vec::new();
    for &n in &sizes.pair_levels {
        let runs = pair_runs(config, &p2, n, &format!("pairs-d2-n{n}"))?;
        let merged = runs.iter().filter(|r| r.1.is_some()).count() as u64;
        let (freq, se) = binomial_estimate(merged, sizes.pair_replicates);
        freqs.push(freq);
        let row = StatRow::new(
            format!("coalescence_by_t_d2_n{n}"),
            freq,
            se,
            tol.coalescence_d2_max,
            Provenance::Published,
            Check::AtMost,
        );
        report.push(if n == n_top { row } else { row.optional() });
    }
    report.push(StatRow::holds(
        "coalescence_d2_decreases_in_n",
        freqs.windows(2).all(|w| w[1] < w[0]),
        Provenance::Published,
    ));
    Ok(())
}

/// Patch regime with `σ² = 0.2` on one side and `0.06` on the other, written
/// in the frame where the larger radius sits in `H⁺`.
fn patch_params() -> Result<ModelParams> {
    ModelParams::new(0.5, 0.6f64.sqrt(), 0.18f64.sqrt(), 1)
}

fn patch_dynamics(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let sizes = &config.sizes;
    let p = patch_params()?;
    let half = 0.5 * sizes.patch_length;
    let mixed = ForwardConfig {
        params: p,
        n: 1.0,
        window: (-half, half),
        h: p.r_minus() / 20.0,
        w0: Profile::constant(0.5),
        snapshots: sizes.patch_times.clone(),
        horizon: None,
    };
    let fractions: Vec<Vec<f64>> = replicate(sizes.patch_replicates, |k| {
        let run = run_forward(&mixed, stream(config.seed, "patches", k))?;
        Ok(run.snapshots.iter().map(|s| s.fraction_between(0.05, 0.95)).collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let means: Vec<f64> = (0..sizes.patch_times.len())
        .map(|i| fractions.iter().map(|f| f[i]).sum::<f64>() / fractions.len() as f64)
        .collect();
    for (t, m) in sizes.patch_times.iter().zip(&means) {
        report.push(StatRow::info(
            format!("mixed_fraction_t{t}"),
            *m,
            0.0,
            0.0,
            Provenance::Published,
        ));
    }
    report.push(StatRow::holds(
        "mixed_fraction_decreases",
        means.windows(2).all(|w| w[1] < w[0]),
        Provenance::Published,
    ));

    let n = sizes.boundary_n;
    let t = sizes.boundary_time;
    let front = ForwardConfig {
        params: p,
        n,
        window: (-sizes.boundary_half_window, sizes.boundary_half_window),
        h: p.r_minus() / 20.0,
        w0: Profile::step_down(0.0),
        snapshots: vec![t],
        horizon: None,
    };
    let mut boundary: Vec<f64> = replicate(sizes.boundary_replicates, |k| {
        let run = run_forward(&front, stream(config.seed, "boundary-forward", k))?;
        Ok(run.snapshots[0].mass_boundary())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let skew = SkewParams::from_model(&p);
    let reference_count = 10 * sizes.boundary_replicates;
    let mut reference: Vec<f64> = replicate(reference_count, |k| {
        let mut rng = stream(config.seed, "boundary-limit", k);
        Ok(boundary_process(&skew, &[t], &mut rng)?[0])
    })
    .into_iter()
    .collect::<Result<_>>()?;
    sort_floats(&mut boundary);
    sort_floats(&mut reference);
    let level = config.tolerances.boundary_ks_level;
    report.push(StatRow::new(
        "ks_boundary_vs_limit_law",
        ks_statistic(&boundary, |z| boundary_cdf(&skew, t, z).unwrap_or(f64::NAN))?,
        0.0,
        ks_critical_value(boundary.len(), level),
        Provenance::Published,
        Check::AtMost,
    ));
    report.push(StatRow::info(
        "ks_boundary_vs_limit_samples",
        ks_two_sample(&boundary, &reference)?,
        0.0,
        ks_two_sample_critical_value(boundary.len(), reference.len(), level),
        Provenance::Oracle,
    ));
    Ok(())
}

fn ledger_identity(config: &ExperimentConfig, report: &mut SuiteReport) -> Result<()> {
    let p = config.params.with_dimension(1)?;
    let sizes = &config.sizes;
    let opts = LineageOptions {
        check_identity: true,
        ..Default::default()
    };
    let count = sizes.identity_trajectories;
    let results: Vec<(f64, bool)> = replicate(count, |k| {
        let mut rng = stream(config.seed, "ledger-identity", k);
        let x0 = -3.0 * p.r_plus() + 6.0 * p.r_plus() * rng.random::<f64>();
        let run = run_single_lineage(&Point::on_axis(x0), sizes.identity_horizon, &p, &mut rng, &opts)?;
        let l = run.ledger.expect("ledger requested");
        let consistent = l.nu() <= l.time() + 1e-9 && l.l_plus() >= 0.0 && l.l_minus() >= 0.0;
        Ok((run.max_identity_residual, consistent))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    report.push(StatRow::new(
        "max_identity_residual",
        worst,
        0.0,
        config.tolerances.identity_abs,
        Provenance::Published,
        Check::AtMost,
    ));
    report.push(StatRow::holds(
        "ledger_quantities_consistent",
        results.iter().all(|r| r.1),
        Provenance::Exact,
    ));
    Ok(())
}
