//! Forward SLFV on a grid of piecewise-constant cells (`d = 1`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::event_engine::{EventStream, ReproductionEvent, SimWindow};
use crate::params::ModelParams;
use crate::profile::Profile;

/// Cells per smallest event radius required of every field.
pub const MIN_CELLS_PER_RADIUS: f64 = 20.0;

/// Allele-frequency field `w(t, ·)` on `[origin, origin + h·len)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlleleField {
    cell_width: f64,
    origin: f64,
    values: Vec<f64>,
    time: f64,
}

impl AlleleField {
    /// Field of cell averages of `w0` on `[lo, hi]` with cells of width at most `h`.
    pub fn from_profile(lo: f64, hi: f64, h: f64, w0: &Profile) -> Result<Self> {
        w0.validate()?;
        if !(hi > lo && h > 0.0) {
            return Err(invalid(format!("bad field extent [{lo}, {hi}] with cell width {h}")));
        }
        let cells = ((hi - lo) / h).ceil() as usize;
        let h = (hi - lo) / cells as f64;
        let values = (0..cells)
            .map(|i| {
                let a = lo + i as f64 * h;
                w0.cell_average(a, a + h).clamp(0.0, 1.0)
            })
            .collect();
        Ok(AlleleField {
            cell_width: h,
            origin: lo,
            values,
            time: 0.0,
        })
    }

    pub fn from_values(origin: f64, cell_width: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !(cell_width > 0.0) {
            return Err(invalid("field needs cells of positive width"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("frequencies must lie in [0, 1]"));
        }
        Ok(AlleleField {
            cell_width,
            origin,
            values,
            time: 0.0,
        })
    }

    /// Checks the resolution gate `h ≤ r₋/20`.
    pub fn check_resolution(&self, params: &ModelParams) -> Result<()> {
        if self.cell_width > params.r_minus() / MIN_CELLS_PER_RADIUS * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "cell width {} exceeds r₋/{MIN_CELLS_PER_RADIUS}",
                self.cell_width
            )));
        }
        Ok(())
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn end(&self) -> f64 {
        self.origin + self.cell_width * self.values.len() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.cell_width
    }

    /// Value of the cell containing `x`; the edge cells extend beyond the field.
    pub fn value_at(&self, x: f64) -> f64 {
        let i = ((x - self.origin) / self.cell_width).floor();
        let i = i.clamp(0.0, (self.values.len() - 1) as f64) as usize;
        self.values[i]
    }

    /// Exact average of the field over `[center − r, center + r]`.
    pub fn ball_mean(&self, center: f64, radius: f64) -> f64 {
        self.interval_integral(center - radius, center + radius) / (2.0 * radius)
    }

    fn interval_integral(&self, a: f64, b: f64) -> f64 {
        let h = self.cell_width;
        let n = self.values.len();
        let mut total = 0.0;
        // constant extension of the edge cells
        if a < self.origin {
            total += self.values[0] * (b.min(self.origin) - a);
        }
        let end = self.end();
        if b > end {
            total += self.values[n - 1] * (b - a.max(end));
        }
        let lo = a.max(self.origin);
        let hi = b.min(end);
        if hi > lo {
            let first = (((lo - self.origin) / h).floor() as usize).min(n - 1);
            let last = (((hi - self.origin) / h).ceil() as usize).min(n);
            for i in first..last {
                let c0 = self.origin + i as f64 * h;
                let overlap = (hi.min(c0 + h) - lo.max(c0)).max(0.0);
                total += self.values[i] * overlap;
            }
        }
        total
    }

    /// Index range of cells whose centre lies in the open ball.
    fn covered_cells(&self, center: f64, radius: f64) -> std::ops::Range<usize> {
        let h = self.cell_width;
        let n = self.values.len() as f64;
        let first = ((center - radius - self.origin) / h - 0.5).floor() + 1.0;
        let last = ((center + radius - self.origin) / h - 0.5).ceil();
        let mut lo = first.clamp(0.0, n) as usize;
        let mut hi = last.clamp(0.0, n) as usize;
        while lo < hi && (self.center(lo) - center).abs() >= radius {
            lo += 1;
        }
        while hi > lo && (self.center(hi - 1) - center).abs() >= radius {
            hi -= 1;
        }
        lo..hi
    }

    /// Reproduction event: offspring type `k ~ Bernoulli(ball mean)`, then
    /// `w ← (1−u)w + u·k` on every cell whose centre lies in the ball.
    pub fn apply_event<R: Rng + ?Sized>(&mut self, event: &ReproductionEvent, u: f64, rng: &mut R) -> bool {
        let c = event.center.x1();
        let k = rng.random::<f64>() < self.ball_mean(c, event.radius);
        let target = if k { u } else { 0.0 };
        for i in self.covered_cells(c, event.radius) {
            self.values[i] = (1.0 - u) * self.values[i] + target;
        }
        self.time = event.time;
        k
    }

    /// Copy with positions and time mapped by `x ↦ x·space`, `t ↦ t·time`.
    pub fn rescaled(&self, space: f64, time: f64) -> AlleleField {
        AlleleField {
            cell_width: self.cell_width * space,
            origin: self.origin * space,
            values: self.values.clone(),
            time: self.time * time,
        }
    }

    /// Fraction of cells with `w ∈ (lo, hi)`.
    pub fn fraction_between(&self, lo: f64, hi: f64) -> f64 {
        let count = self.values.iter().filter(|&&v| v > lo && v < hi).count();
        count as f64 / self.values.len() as f64
    }

    /// Position of a single step from type 1 on the left to type 0 on the right
    /// with the same mass: `origin + ∫ w`.
    pub fn mass_boundary(&self) -> f64 {
        self.origin + self.values.iter().sum::<f64>() * self.cell_width
    }

    /// Snapshot CSV rows `(replicate, t, cell_index, x_center, w)`.
    pub fn write_csv_rows<W: std::io::Write>(&self, replicate: u64, out: &mut csv::Writer<W>) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            out.write_record([
                replicate.to_string(),
                self.time.to_string(),
                i.to_string(),
                self.center(i).to_string(),
                v.to_string(),
            ])?;
        }
        Ok(())
    }
}

/// Hat function `max(0, 1 − |x − center|/half_width)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

impl Bump {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(invalid("bump half-width must be positive"));
        }
        Ok(Bump { center, half_width })
    }

    pub fn value(&self, x: f64) -> f64 {
        (1.0 - (x - self.center).abs() / self.half_width).max(0.0)
    }

    pub fn integral(&self) -> f64 {
        self.half_width
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    /// `∫_{-∞}^x` of the hat.
    fn antiderivative(&self, x: f64) -> f64 {
        let s = ((x - self.center) / self.half_width).clamp(-1.0, 1.0);
        let area = if s <= 0.0 {
            0.5 * (1.0 + s) * (1.0 + s)
        } else {
            1.0 - 0.5 * (1.0 - s) * (1.0 - s)
        };
        area * self.half_width
    }

    pub fn integral_over(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// Draw from the normalized hat (triangular law).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.center + self.half_width * (rng.random::<f64>() - rng.random::<f64>())
    }
}

/// Product weight `ψ(x₁, …, x_j) = ∏ bump_i(x_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctional {
    pub bumps: Vec<Bump>,
}

impl TestFunctional {
    pub fn new(bumps: Vec<Bump>) -> Result<Self> {
        if bumps.is_empty() {
            return Err(invalid("a test functional needs j ≥ 1"));
        }
        Ok(TestFunctional { bumps })
    }

    pub fn j(&self) -> usize {
        self.bumps.len()
    }

    /// `∫ψ`.
    pub fn mass(&self) -> f64 {
        self.bumps.iter().map(Bump::integral).product()
    }

    pub fn check_support(&self, lo: f64, hi: f64) -> Result<()> {
        for b in &self.bumps {
            let (a, c) = b.support();
            if a < lo || c > hi {
                return Err(invalid(format!("bump support [{a}, {c}] leaves [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// `I(w, ψ) = ∫ ∏ w(x_i) ψ(x_1, …, x_j) dx`, exact for a product of hats against
/// a piecewise-constant field.
pub fn eval_i(field: &AlleleField, functional: &TestFunctional) -> f64 {
    functional
        .bumps
        .iter()
        .map(|bump| {
            let (a, b) = bump.support();
            let h = field.cell_width;
            let n = field.values.len();
            let first = (((a - field.origin) / h).floor().max(0.0) as usize).min(n);
            let last = (((b - field.origin) / h).ceil().max(0.0) as usize).min(n);
            (first..last)
                .map(|i| {
                    let c0 = field.origin + i as f64 * h;
                    field.values[i] * bump.integral_over(c0, c0 + h)
                })
                .sum::<f64>()
        })
        .product()
}

/// Forward run in rescaled coordinates: `w^n(t, x) = w(n t, √n x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub params: ModelParams,
    /// Rescaling level `n ≥ 1`.
    pub n: f64,
    /// Rescaled window `[lo, hi]` carrying the field.
    pub window: (f64, f64),
    /// Unrescaled cell width.
    pub h: f64,
    /// Initial profile in rescaled coordinates.
    pub w0: Profile,
    /// Rescaled snapshot times, increasing.
    pub snapshots: Vec<f64>,
    /// Rescaled horizon of the event stream; defaults to the last snapshot.
    #[serde(default)]
    pub horizon: Option<f64>,
}

impl ForwardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.params.d() != 1 {
            return Err(invalid("forward simulation is implemented for d = 1 only"));
        }
        if !(self.n >= 1.0) {
            return Err(invalid(format!("rescaling level must be ≥ 1, got {}", self.n)));
        }
        if !(self.window.1 > self.window.0) {
            return Err(invalid("empty forward window"));
        }
        if self.snapshots.is_empty() || self.snapshots.windows(2).any(|w| w[1] <= w[0]) || self.snapshots[0] < 0.0 {
            return Err(invalid("snapshot times must be nonnegative and increasing"));
        }
        if self.horizon.is_some_and(|h| !(h > 0.0)) {
            return Err(invalid("horizon must be positive"));
        }
        self.w0.validate()
    }
}

/// Snapshots in rescaled coordinates; `exhausted` is set when the horizon
/// ended the run before the last requested snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardRun {
    pub snapshots: Vec<AlleleField>,
    pub exhausted: bool,
}

pub fn run_forward<R: Rng>(config: &ForwardConfig, rng: R) -> Result<ForwardRun> {
    config.validate()?;
    let params = config.params;
    let scale = config.n.sqrt();
    let (lo, hi) = (config.window.0 * scale, config.window.1 * scale);
    let mut field = AlleleField::from_profile(lo, hi, config.h, &config.w0.dilated(scale))?;
    field.check_resolution(&params)?;
    let horizon = config.horizon.unwrap_or(*config.snapshots.last().expect("validated"));
    let window = SimWindow::padded(&[lo], &[hi], &params, config.n * horizon.max(f64::MIN_POSITIVE))?;
    let mut stream = EventStream::new(window, params, rng);
    let mut out = Vec::with_capacity(config.snapshots.len());
    let mut pending: Option<ReproductionEvent> = None;
    let mut exhausted = false;
    for &t in &config.snapshots {
        let target = config.n * t;
        if t > horizon {
            exhausted = true;
            break;
        }
        loop {
            if pending.is_none() {
                pending = stream.next_event().ok();
            }
            match pending.take() {
                Some(ev) if ev.time <= target => {
                    field.apply_event(&ev, params.u(), stream.rng_mut());
                }
                other => {
                    pending = other;
                    break;
                }
            }
        }
        let mut snap = field.rescaled(1.0 / scale, 1.0 / config.n);
        snap.time = t;
        out.push(snap);
    }
    Ok(ForwardRun {
        snapshots: out,
        exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point;
    use crate::rng::stream;

    fn params() -> ModelParams {
        ModelParams::new(0.5, 1.0, 0.7, 1).unwrap()
    }

    fn event(c: f64, r: f64) -> ReproductionEvent {
        let p = ModelParams::new(0.5, r, r, 1).unwrap();
        ReproductionEvent::new(1.0, Point::on_axis(c), &p)
    }

    #[test]
    fn ball_mean_constant() {
        let f = AlleleField::from_profile(-5.0, 5.0, 0.01, &Profile::constant(0.3)).unwrap();
        assert!((f.ball_mean(0.123, 0.7) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ball_mean_step() {
        let f = AlleleField::from_profile(-5.0, 5.0, 0.035, &Profile::step_down(0.0)).unwrap();
        let m = f.ball_mean(0.0, 0.7);
        assert!((m - 0.5).abs() <= 0.035 / 1.4);
    }

    #[test]
    fn ball_mean_refinement_oracle() {
        let mut rng = stream(1, "field", 0);
        let h = 0.05;
        let vals: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let f = AlleleField::from_values(-5.0, h, vals).unwrap();
        for &(c, r) in &[(0.013, 1.0), (-2.3, 0.7), (3.31, 0.45)] {
            let fine = h / 10.0;
            let m = (2.0 * r / fine).round() as usize;
            let riemann: f64 = (0..m)
                .map(|k| f.value_at(c - r + (k as f64 + 0.5) * 2.0 * r / m as f64))
                .sum::<f64>()
                / m as f64;
            assert!((f.ball_mean(c, r) - riemann).abs() < h / r, "c={c}");
        }
    }

    #[test]
    fn full_replacement_and_absorbing_state() {
        let mut rng = stream(2, "field", 0);
        let mut f = AlleleField::from_profile(-3.0, 3.0, 0.01, &Profile::constant(0.4)).unwrap();
        let ev = event(0.2, 1.0);
        let k = f.apply_event(&ev, 1.0, &mut rng);
        let target = if k { 1.0 } else { 0.0 };
        for i in 0..f.len() {
            if (f.center(i) - 0.2).abs() < 1.0 {
                assert_eq!(f.values()[i], target);
            } else {
                assert_eq!(f.values()[i], 0.4);
            }
        }
        let mut ones = AlleleField::from_profile(-3.0, 3.0, 0.01, &Profile::constant(1.0)).unwrap();
        for _ in 0..50 {
            ones.apply_event(&event(rng.random::<f64>() * 4.0 - 2.0, 0.7), 0.6, &mut rng);
        }
        assert!(ones.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn neutral_in_expectation() {
        let reps = 40_000;
        let mut acc = 0.0;
        for rep in 0..reps {
            let mut rng = stream(3, "neutral", rep);
            let mut f = AlleleField::from_profile(-3.0, 3.0, 0.05, &Profile::constant(0.3)).unwrap();
            f.apply_event(&event(0.0, 1.0), 0.5, &mut rng);
            acc += f.value_at(0.0);
        }
        let mean = acc / reps as f64;
        // new value is 0.15 or 0.65 with probabilities 0.7, 0.3
        let sd = 0.5 * (0.21f64).sqrt();
        assert!((mean - 0.3).abs() < 4.0 * sd / (reps as f64).sqrt());
    }

    #[test]
    fn covered_cells_use_centres() {
        let f = AlleleField::from_values(0.0, 1.0, vec![0.0; 10]).unwrap();
        // centres sit at 0.5, 1.5, …
        assert_eq!(f.covered_cells(3.0, 1.0), 2..4);
        assert_eq!(f.covered_cells(3.0, 0.5), 3..3);
        assert_eq!(f.covered_cells(-4.0, 1.0), 0..0);
        assert_eq!(f.covered_cells(0.0, 100.0), 0..10);
    }

    #[test]
    fn eval_i_trivial_cases() {
        let ones = AlleleField::from_profile(-5.0, 5.0, 0.01, &Profile::constant(1.0)).unwrap();
        let zeros = AlleleField::from_profile(-5.0, 5.0, 0.01, &Profile::constant(0.0)).unwrap();
        let psi = TestFunctional::new(vec![Bump::new(0.3, 0.5).unwrap(), Bump::new(-1.0, 0.25).unwrap()]).unwrap();
        assert!((eval_i(&ones, &psi) - psi.mass()).abs() < 1e-12);
        assert_eq!(eval_i(&zeros, &psi), 0.0);
    }

    #[test]
    fn eval_i_refinement_oracle() {
        let mut rng = stream(4, "field", 0);
        let h = 0.02;
        let vals: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let f = AlleleField::from_values(-5.0, h, vals).unwrap();
        let bump = Bump::new(0.137, 0.8).unwrap();
        let psi = TestFunctional::new(vec![bump]).unwrap();
        // midpoint rule on ten sub-cells per field cell
        let fine = h / 10.0;
        let oracle: f64 = (0..f.len() * 10)
            .map(|k| {
                let x = f.origin() + (k as f64 + 0.5) * fine;
                f.values()[k / 10] * bump.value(x) * fine
            })
            .sum();
        let exact = eval_i(&f, &psi);
        assert!((exact - oracle).abs() < 1e-3 * oracle, "{exact} vs {oracle}");
    }

    #[test]
    fn bump_antiderivative() {
        let b = Bump::new(1.0, 0.5).unwrap();
        assert!((b.integral_over(0.0, 2.0) - 0.5).abs() < 1e-15);
        assert!((b.integral_over(0.5, 1.0) - 0.25).abs() < 1e-15);
        assert!((b.integral_over(0.75, 1.25) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn zero_profile_stays_zero() {
        let cfg = ForwardConfig {
            params: params(),
            n: 4.0,
            window: (-2.0, 2.0),
            h: 0.035,
            w0: Profile::constant(0.0),
            snapshots: vec![0.5, 1.0],
            horizon: None,
        };
        let run = run_forward(&cfg, stream(5, "forward", 0)).unwrap();
        assert_eq!(run.snapshots.len(), 2);
        assert!(!run.exhausted);
        for s in &run.snapshots {
            assert!(s.values().iter().all(|&v| v == 0.0));
        }
        assert!((run.snapshots[1].time() - 1.0).abs() < 1e-15);
        assert!((run.snapshots[0].origin() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn horizon_cuts_snapshots() {
        let cfg = ForwardConfig {
            params: params(),
            n: 1.0,
            window: (-2.0, 2.0),
            h: 0.035,
            w0: Profile::constant(0.5),
            snapshots: vec![0.5, 1.0, 2.0],
            horizon: Some(1.0),
        };
        let run = run_forward(&cfg, stream(6, "forward", 0)).unwrap();
        assert_eq!(run.snapshots.len(), 2);
        assert!(run.exhausted);
    }

    #[test]
    fn resolution_gate() {
        let cfg = ForwardConfig {
            params: params(),
            n: 1.0,
            window: (-2.0, 2.0),
            h: 0.1,
            w0: Profile::constant(0.5),
            snapshots: vec![1.0],
            horizon: None,
        };
        assert!(run_forward(&cfg, stream(7, "forward", 0)).is_err());
    }
}
