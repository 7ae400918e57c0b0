//! Ancestral lineages: the coalescing dual and single-lineage runs with
//! excursion bookkeeping.
//!
//! Lineages are driven by thinning. A lineage at `x` is covered by events at
//! rate `c(x) = |B(x,r₊)∩H⁺|/V_{r₊} + |B(x,r₋)∩H⁻|/V_{r₋}`, and a covering
//! event marks it with probability `u`. For several lineages, candidate
//! centres are drawn from the union of the covering sets by picking a lineage
//! proportionally to its covering rate and accepting with probability `1/k`,
//! `k` being the number of lineages the centre covers.

mod h_integral;
mod ledger;

pub use h_integral::{
    entry_map, estimate_h_integral, h_linear, EntryMap, EntryNode, HIntegralEstimate, HIntegralOptions, LinearH,
};
pub use ledger::{ledger_report, CompensatedSum, ExcursionLedger, LedgerReport, LedgerSnapshot};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::event_engine::ReproductionEvent;
use crate::geometry::{covering_rate, sample_covering_center, sample_uniform_ball};
use crate::params::ModelParams;
use crate::point::Point;

/// One coalescence: the particles in `absorbed` join `survivor` at `landing`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub time: f64,
    pub survivor: usize,
    pub absorbed: Vec<usize>,
    pub landing: Point,
}

/// Particle system `𝓐_t = {ξ¹_t, …, ξ^{N_t}_t}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineageSystem {
    positions: Vec<Point>,
    alive: Vec<bool>,
    pub merge_log: Vec<Merge>,
    time: f64,
}

impl LineageSystem {
    pub fn new(initial: &[Point]) -> Result<Self> {
        if initial.is_empty() {
            return Err(invalid("the dual needs at least one lineage"));
        }
        Ok(LineageSystem {
            positions: initial.to_vec(),
            alive: vec![true; initial.len()],
            merge_log: Vec::new(),
            time: 0.0,
        })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.alive[i]
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn alive_positions(&self) -> impl Iterator<Item = &Point> {
        self.positions
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(p, _)| p)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Smallest distance between two alive lineages.
    pub fn min_pair_distance(&self) -> f64 {
        let alive: Vec<&Point> = self.alive_positions().collect();
        let mut best = f64::INFINITY;
        for i in 0..alive.len() {
            for j in i + 1..alive.len() {
                best = best.min(alive[i].dist(alive[j]));
            }
        }
        best
    }
}

/// What an event did to the dual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualEventOutcome {
    pub covered: usize,
    pub marked: usize,
}

/// Marks each alive lineage in the event ball with probability `u`; marked
/// lineages jump to the parent location and merge into the lowest id.
pub fn apply_event_dual<R: Rng + ?Sized>(
    system: &mut LineageSystem,
    event: &mut ReproductionEvent,
    params: &ModelParams,
    rng: &mut R,
) -> DualEventOutcome {
    let mut covered = 0;
    let mut marked: Vec<usize> = Vec::new();
    for i in 0..system.positions.len() {
        if system.alive[i] && event.covers(&system.positions[i]) {
            covered += 1;
            if rng.random::<f64>() < params.u() {
                marked.push(i);
            }
        }
    }
    system.time = system.time.max(event.time);
    if let Some(&survivor) = marked.first() {
        let parent = event.parent(params.d(), rng);
        for &i in &marked {
            system.positions[i] = parent;
        }
        if marked.len() > 1 {
            for &i in &marked[1..] {
                system.alive[i] = false;
            }
            system.merge_log.push(Merge {
                time: event.time,
                survivor,
                absorbed: marked[1..].to_vec(),
                landing: parent,
            });
        }
    }
    DualEventOutcome {
        covered,
        marked: marked.len(),
    }
}

/// Trajectory CSV row `(t, particle_id, position, alive)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub particle: usize,
    pub position: Point,
    pub alive: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DualOptions {
    /// Record every lineage position after each accepted event.
    pub record_trajectory: bool,
    /// Distance defining the first close approach `T_n`; defaults to `2r₊`.
    pub close_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualRun {
    pub system: LineageSystem,
    /// First time two alive lineages were within the close distance.
    pub first_close: Option<f64>,
    pub trajectory: Vec<TrajectoryRow>,
    pub candidates: u64,
    pub events: u64,
}

impl DualRun {
    pub fn first_merge(&self) -> Option<f64> {
        self.system.merge_log.first().map(|m| m.time)
    }
}

/// Event-driven dual started from `initial`, run up to `horizon` (unrescaled).
pub fn run_dual<R: Rng + ?Sized>(
    initial: &[Point],
    horizon: f64,
    params: &ModelParams,
    rng: &mut R,
    options: &DualOptions,
) -> Result<DualRun> {
    if !(horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    let mut system = LineageSystem::new(initial)?;
    let close = options.close_distance.unwrap_or(2.0 * params.r_plus());
    let mut first_close = (system.alive_count() > 1 && system.min_pair_distance() < close).then_some(0.0);
    let mut trajectory = Vec::new();
    let record = |system: &LineageSystem, t: f64, out: &mut Vec<TrajectoryRow>| {
        for (i, p) in system.positions.iter().enumerate() {
            out.push(TrajectoryRow {
                t,
                particle: i,
                position: *p,
                alive: system.alive[i],
            });
        }
    };
    if options.record_trajectory {
        record(&system, 0.0, &mut trajectory);
    }
    let (mut candidates, mut events) = (0u64, 0u64);
    let mut now = 0.0;
    let mut rates: Vec<(usize, f64)> = Vec::with_capacity(initial.len());
    loop {
        rates.clear();
        rates.extend(
            (0..system.positions.len())
                .filter(|&i| system.alive[i])
                .map(|i| (i, covering_rate(&system.positions[i], params))),
        );
        let total: f64 = rates.iter().map(|(_, c)| c).sum();
        now += rng.sample::<f64, _>(Exp1) / total;
        if now > horizon {
            break;
        }
        candidates += 1;
        let chosen = if rates.len() == 1 {
            rates[0].0
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = rates[rates.len() - 1].0;
            for &(i, c) in &rates {
                if target < c {
                    pick = i;
                    break;
                }
                target -= c;
            }
            pick
        };
        let (center, _) = sample_covering_center(&system.positions[chosen], params, rng);
        let mut event = ReproductionEvent::new(now, center, params);
        let k = rates
            .iter()
            .filter(|(i, _)| event.covers(&system.positions[*i]))
            .count();
        if k > 1 && rng.random::<f64>() * k as f64 >= 1.0 {
            continue;
        }
        events += 1;
        let outcome = apply_event_dual(&mut system, &mut event, params, rng);
        if outcome.marked > 0 {
            if first_close.is_none() && system.alive_count() > 1 && system.min_pair_distance() < close {
                first_close = Some(now);
            }
            if options.record_trajectory {
                record(&system, now, &mut trajectory);
            }
        }
    }
    system.time = horizon;
    Ok(DualRun {
        system,
        first_close,
        trajectory,
        candidates,
        events,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineageOptions {
    /// Maintain an [`ExcursionLedger`] on the first coordinate.
    pub ledger: bool,
    /// Keep the time-weighted band samples in the ledger.
    pub keep_band_samples: bool,
    /// Record the path `(jump time, position)`.
    pub record_path: bool,
    /// Evaluate the decomposition identity after every jump.
    pub check_identity: bool,
    /// Times at which the ledger state is copied out.
    pub report_times: Vec<f64>,
    pub histogram_bins: usize,
}

impl Default for LineageOptions {
    fn default() -> Self {
        LineageOptions {
            ledger: false,
            keep_band_samples: false,
            record_path: false,
            check_identity: false,
            report_times: Vec::new(),
            histogram_bins: 20,
        }
    }
}

impl LineageOptions {
    pub fn with_ledger() -> Self {
        LineageOptions {
            ledger: true,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleLineageRun {
    pub end: Point,
    pub path: Vec<(f64, Point)>,
    pub ledger: Option<ExcursionLedger>,
    pub reports: Vec<LedgerSnapshot>,
    pub jumps: u64,
    pub candidates: u64,
    pub max_jump: f64,
    pub max_identity_residual: f64,
}

/// Single lineage `ξ` from `x0` up to `horizon` (unrescaled).
pub fn run_single_lineage<R: Rng + ?Sized>(
    x0: &Point,
    horizon: f64,
    params: &ModelParams,
    rng: &mut R,
    options: &LineageOptions,
) -> Result<SingleLineageRun> {
    if !(horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if options.report_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("report times must increase"));
    }
    let d = params.d();
    let r = params.r_plus();
    let mut ledger = (options.ledger || options.check_identity || !options.report_times.is_empty())
        .then(|| ExcursionLedger::new(x0.x1(), r, options.histogram_bins, options.keep_band_samples));
    let mut reports = Vec::with_capacity(options.report_times.len());
    let mut next_report = 0usize;
    let mut path = Vec::new();
    if options.record_path {
        path.push((0.0, *x0));
    }
    let mut x = *x0;
    let mut now = 0.0;
    let (mut jumps, mut candidates) = (0u64, 0u64);
    let mut max_jump = 0.0f64;
    let mut max_residual = 0.0f64;
    loop {
        let rate = covering_rate(&x, params);
        let next = now + rng.sample::<f64, _>(Exp1) / rate;
        let stop = next.min(horizon);
        if let Some(l) = ledger.as_mut() {
            while next_report < options.report_times.len() && options.report_times[next_report] <= stop {
                let tr = options.report_times[next_report];
                l.hold(tr - l.time());
                reports.push(l.snapshot());
                next_report += 1;
            }
            l.hold(stop - l.time());
        }
        if next > horizon {
            break;
        }
        now = next;
        candidates += 1;
        let (center, side) = sample_covering_center(&x, params, rng);
        if rng.random::<f64>() >= params.u() {
            continue;
        }
        let y = sample_uniform_ball(&center, params.radius(side), d, rng);
        max_jump = max_jump.max(x.dist(&y));
        jumps += 1;
        if let Some(l) = ledger.as_mut() {
            l.jump(y.x1());
            if options.check_identity {
                let (a, b) = l.identity_residuals();
                max_residual = max_residual.max(a.abs()).max(b.abs());
            }
        }
        x = y;
        if options.record_path {
            path.push((now, x));
        }
    }
    Ok(SingleLineageRun {
        end: x,
        path,
        ledger,
        reports,
        jumps,
        candidates,
        max_jump,
        max_identity_residual: max_residual,
    })
}

/// Position of `Y(s) = ξ(α(s))`, the lineage read at occupation time `s` of the
/// band, started at `y0` in the band (`d = 1`). `None` when real time reaches
/// `time_cap` first.
pub fn sample_band_process<R: Rng + ?Sized>(
    y0: f64,
    s: f64,
    params: &ModelParams,
    rng: &mut R,
    time_cap: f64,
) -> Result<Option<f64>> {
    let r = params.r_plus();
    if y0.abs() > r {
        return Err(invalid(format!("start {y0} lies outside the band")));
    }
    let mut x = Point::on_axis(y0);
    let (mut now, mut nu) = (0.0, 0.0);
    loop {
        let hold = rng.sample::<f64, _>(Exp1) / covering_rate(&x, params);
        if x.x1().abs() <= r {
            if nu + hold >= s {
                return Ok(Some(x.x1()));
            }
            nu += hold;
        }
        now += hold;
        if now > time_cap {
            return Ok(None);
        }
        let (center, side) = sample_covering_center(&x, params, rng);
        if rng.random::<f64>() < params.u() {
            x = sample_uniform_ball(&center, params.radius(side), params.d(), rng);
        }
    }
}

/// First position in the band `[-r₊, r₊]` reached from `y`, or `None` when
/// real time reaches `time_cap` first (`d = 1`).
pub fn band_entry<R: Rng + ?Sized>(y: f64, params: &ModelParams, rng: &mut R, time_cap: f64) -> Option<f64> {
    let r = params.r_plus();
    let mut x = Point::on_axis(y);
    let mut now = 0.0;
    while x.x1().abs() > r {
        now += rng.sample::<f64, _>(Exp1) / covering_rate(&x, params);
        if now > time_cap {
            return None;
        }
        let (center, side) = sample_covering_center(&x, params, rng);
        if rng.random::<f64>() < params.u() {
            x = sample_uniform_ball(&center, params.radius(side), params.d(), rng);
        }
    }
    Some(x.x1())
}
