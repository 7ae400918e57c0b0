//! Space-time Poisson stream of reproduction events `Π⁺ ∪ Π⁻` restricted to a
//! finite window.
//!
//! Centres in `H^±` arrive with intensity `dx dt / V_{r±}`. The stream is
//! generated sequentially with one exponential clock, so memory stays O(1)
//! whatever the horizon.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SlfvError};
use crate::geometry::{ball_volume, sample_uniform_ball};
use crate::params::ModelParams;
use crate::point::{Point, Side, MAX_DIM};

/// Axis-aligned box of admissible event centres together with the time horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimWindow {
    lo: Point,
    hi: Point,
    d: usize,
    padding: f64,
    horizon: f64,
}

impl SimWindow {
    /// Window whose region of interest is `[interior_lo, interior_hi]`, padded by
    /// `r₊` on every face so that no event reaching the interior is missed.
    pub fn padded(interior_lo: &[f64], interior_hi: &[f64], params: &ModelParams, horizon: f64) -> Result<Self> {
        let d = params.d();
        if interior_lo.len() != d || interior_hi.len() != d {
            return Err(invalid(format!("window bounds must have {d} coordinates")));
        }
        if !(horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        let pad = params.r_plus();
        let mut lo = Point::ORIGIN;
        let mut hi = Point::ORIGIN;
        for i in 0..d {
            if !(interior_hi[i] > interior_lo[i]) {
                return Err(invalid(format!("empty window along axis {i}")));
            }
            lo.0[i] = interior_lo[i] - pad;
            hi.0[i] = interior_hi[i] + pad;
        }
        Ok(SimWindow {
            lo,
            hi,
            d,
            padding: pad,
            horizon,
        })
    }

    pub fn lo(&self) -> &Point {
        &self.lo
    }

    pub fn hi(&self) -> &Point {
        &self.hi
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn padding(&self) -> f64 {
        self.padding
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..self.d).all(|i| p.0[i] >= self.lo.0[i] && p.0[i] <= self.hi.0[i])
    }

    fn transverse_volume(&self) -> f64 {
        (1..self.d).map(|i| self.hi.0[i] - self.lo.0[i]).product()
    }

    /// Lebesgue measure of `window ∩ H^side`.
    pub fn halfspace_volume(&self, side: Side) -> f64 {
        let (a, b) = (self.lo.x1(), self.hi.x1());
        let len = match side {
            Side::Plus => b.max(0.0) - a.max(0.0),
            Side::Minus => b.min(0.0) - a.min(0.0),
        };
        len * self.transverse_volume()
    }
}

/// Partial event rates of the two halfspaces inside a window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRates {
    pub plus: f64,
    pub minus: f64,
}

impl EventRates {
    pub fn total(&self) -> f64 {
        self.plus + self.minus
    }
}

/// `Λ = |window ∩ H⁺|/V_{r₊} + |window ∩ H⁻|/V_{r₋}`.
pub fn event_rate(window: &SimWindow, params: &ModelParams) -> EventRates {
    let d = params.d();
    let vp = ball_volume(params.r_plus(), d).expect("validated radius");
    let vm = ball_volume(params.r_minus(), d).expect("validated radius");
    EventRates {
        plus: window.halfspace_volume(Side::Plus) / vp,
        minus: window.halfspace_volume(Side::Minus) / vm,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReproductionEvent {
    pub time: f64,
    pub center: Point,
    pub radius: f64,
    pub side: Side,
    parent: Option<Point>,
}

impl ReproductionEvent {
    /// Event centred at `center`, with the radius of its halfspace.
    pub fn new(time: f64, center: Point, params: &ModelParams) -> Self {
        let side = center.side();
        ReproductionEvent {
            time,
            center,
            radius: params.radius(side),
            side,
            parent: None,
        }
    }

    /// Parent location, drawn uniformly in the event ball on first request.
    pub fn parent<R: Rng + ?Sized>(&mut self, d: usize, rng: &mut R) -> Point {
        *self
            .parent
            .get_or_insert_with(|| sample_uniform_ball(&self.center, self.radius, d, rng))
    }

    pub fn parent_if_drawn(&self) -> Option<Point> {
        self.parent
    }

    pub fn covers(&self, p: &Point) -> bool {
        self.center.dist2(p) < self.radius * self.radius
    }
}

/// Draws the next event after `t_now`. Fails with
/// [`SlfvError::HorizonExhausted`] when the exponential clock overshoots.
pub fn next_event<R: Rng + ?Sized>(
    window: &SimWindow,
    params: &ModelParams,
    rates: &EventRates,
    rng: &mut R,
    t_now: f64,
) -> Result<ReproductionEvent> {
    let total = rates.total();
    let time = t_now + rng.sample::<f64, _>(Exp1) / total;
    if time > window.horizon {
        return Err(SlfvError::HorizonExhausted {
            time: t_now,
            horizon: window.horizon,
        });
    }
    let side = if rng.random::<f64>() * total < rates.plus {
        Side::Plus
    } else {
        Side::Minus
    };
    let (a, b) = match side {
        Side::Plus => (window.lo.x1().max(0.0), window.hi.x1().max(0.0)),
        Side::Minus => (window.lo.x1().min(0.0), window.hi.x1().min(0.0)),
    };
    let mut center = Point::ORIGIN;
    center.0[0] = a + (b - a) * rng.random::<f64>();
    for i in 1..window.d {
        center.0[i] = window.lo.0[i] + (window.hi.0[i] - window.lo.0[i]) * rng.random::<f64>();
    }
    // the x₁ = 0 tie belongs to H⁺; keep the drawn side and its radius consistent
    if side == Side::Minus && center.x1() >= 0.0 {
        center.0[0] = -f64::MIN_POSITIVE;
    }
    Ok(ReproductionEvent {
        time,
        center,
        radius: params.radius(side),
        side,
        parent: None,
    })
}

/// Sequential generator of the windowed event stream.
pub struct EventStream<R> {
    window: SimWindow,
    params: ModelParams,
    rates: EventRates,
    rng: R,
    now: f64,
}

impl<R: Rng> EventStream<R> {
    pub fn new(window: SimWindow, params: ModelParams, rng: R) -> Self {
        let rates = event_rate(&window, &params);
        EventStream {
            window,
            params,
            rates,
            rng,
            now: 0.0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn window(&self) -> &SimWindow {
        &self.window
    }

    pub fn rates(&self) -> EventRates {
        self.rates
    }

    /// The generator driving the stream, for draws attached to its events.
    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn next_event(&mut self) -> Result<ReproductionEvent> {
        let ev = next_event(&self.window, &self.params, &self.rates, &mut self.rng, self.now)?;
        self.now = ev.time;
        Ok(ev)
    }
}

/// One record of the binary event log.
#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub center: Point,
    pub side: Side,
}

impl From<&ReproductionEvent> for EventRecord {
    fn from(ev: &ReproductionEvent) -> Self {
        EventRecord {
            time: ev.time,
            center: ev.center,
            side: ev.side,
        }
    }
}

/// Little-endian records: `f64` time, `d × f64` centre, `u8` halfspace
/// (1 = `H⁺`, 0 = `H⁻`).
pub fn write_event_log<W: Write>(mut out: W, events: &[EventRecord], d: usize) -> Result<()> {
    for ev in events {
        out.write_all(&ev.time.to_le_bytes())?;
        for c in &ev.center.0[..d] {
            out.write_all(&c.to_le_bytes())?;
        }
        out.write_all(&[ev.side.as_u8()])?;
    }
    Ok(())
}

pub fn read_event_log<Rd: Read>(mut input: Rd, d: usize) -> Result<Vec<EventRecord>> {
    if d == 0 || d > MAX_DIM {
        return Err(invalid(format!("dimension {d} unsupported")));
    }
    let rec = 8 * (d + 1) + 1;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % rec != 0 {
        return Err(invalid(format!(
            "event log length {} is not a multiple of {rec}",
            bytes.len()
        )));
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8 bytes"));
    bytes
        .chunks_exact(rec)
        .map(|chunk| {
            let mut center = Point::ORIGIN;
            for i in 0..d {
                center.0[i] = f(&chunk[8 * (i + 1)..8 * (i + 2)]);
            }
            let side = Side::from_u8(chunk[rec - 1]).ok_or_else(|| invalid("bad halfspace byte"))?;
            Ok(EventRecord {
                time: f(&chunk[..8]),
                center,
                side,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::stats::{ks_critical_value, ks_statistic, KsLevel};

    fn params() -> ModelParams {
        ModelParams::new(0.5, 1.0, 0.7, 1).unwrap()
    }

    fn window_1d(lo: f64, hi: f64, horizon: f64) -> SimWindow {
        // un-pad so that the bounds are exactly [lo, hi]
        let p = params();
        SimWindow::padded(&[lo + p.r_plus()], &[hi - p.r_plus()], &p, horizon).unwrap()
    }

    #[test]
    fn rate_of_symmetric_window() {
        let w = window_1d(-10.0, 10.0, 1.0);
        let rates = event_rate(&w, &params());
        assert!((rates.total() - (10.0 / 2.0 + 10.0 / 1.4)).abs() < 1e-12);
        assert!((rates.total() - 12.142_857_142_857).abs() < 1e-9);
    }

    #[test]
    fn rate_of_window_inside_plus() {
        let w = window_1d(3.0, 9.0, 1.0);
        let rates = event_rate(&w, &params());
        assert_eq!(rates.minus, 0.0);
        assert!((rates.plus - 6.0 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_rate() {
        let p = ModelParams::new(0.5, 0.8, 0.8, 2).unwrap();
        let w = SimWindow::padded(&[-2.0, -1.0], &[3.0, 1.0], &p, 1.0).unwrap();
        let rates = event_rate(&w, &p);
        let area = (5.0 + 1.6) * (2.0 + 1.6);
        assert!((rates.total() - area / (std::f64::consts::PI * 0.64)).abs() < 1e-12);
    }

    #[test]
    fn gaps_and_thinning() {
        let p = params();
        let w = window_1d(-10.0, 10.0, 1e9);
        let mut s = EventStream::new(w.clone(), p, stream(11, "events", 0));
        let rates = s.rates();
        let n = 1_000_000;
        let mut plus = 0usize;
        let mut last = 0.0;
        let mut sum_gap = 0.0;
        for _ in 0..n {
            let ev = s.next_event().unwrap();
            sum_gap += ev.time - last;
            last = ev.time;
            if ev.side == Side::Plus {
                plus += 1;
                assert_eq!(ev.radius, 1.0);
                assert!(ev.center.x1() >= 0.0);
            } else {
                assert_eq!(ev.radius, 0.7);
                assert!(ev.center.x1() < 0.0);
            }
            assert!(w.contains(&ev.center));
        }
        let mean_gap = sum_gap / n as f64;
        let expected = 1.0 / rates.total();
        assert!((mean_gap - expected).abs() < 4.0 * expected / (n as f64).sqrt());
        let frac = plus as f64 / n as f64;
        let q = rates.plus / rates.total();
        assert!((frac - q).abs() < 4.0 * (q * (1.0 - q) / n as f64).sqrt());
    }

    #[test]
    fn homogeneous_centers_are_uniform() {
        let p = ModelParams::new(0.5, 0.6, 0.6, 2).unwrap();
        let w = SimWindow::padded(&[-3.0, 0.0], &[2.0, 4.0], &p, 1e9).unwrap();
        let n = 200_000;
        let mut rejections = 0;
        for seed in 0..20u64 {
            let mut s = EventStream::new(w.clone(), p, stream(seed, "events", 0));
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let ev = s.next_event().unwrap();
                xs.push(ev.center.0[0]);
                ys.push(ev.center.0[1]);
            }
            for (vals, axis) in [(&mut xs, 0), (&mut ys, 1)] {
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let (a, b) = (w.lo().0[axis], w.hi().0[axis]);
                let ks = ks_statistic(vals, |x| ((x - a) / (b - a)).clamp(0.0, 1.0)).unwrap();
                if ks > ks_critical_value(n, KsLevel::One) {
                    rejections += 1;
                }
            }
        }
        // 40 tests at the 1% level
        assert!(rejections <= 3, "{rejections} rejections");
    }

    #[test]
    fn disjoint_boxes_have_independent_poisson_counts() {
        let p = params();
        let w = window_1d(-6.0, 6.0, 20.0);
        let reps = 4000;
        let (mut c1, mut c2) = (Vec::new(), Vec::new());
        for rep in 0..reps {
            let mut s = EventStream::new(w.clone(), p, stream(13, "boxes", rep));
            let (mut a, mut b) = (0.0f64, 0.0f64);
            while let Ok(ev) = s.next_event() {
                let x = ev.center.x1();
                if (-4.0..-1.0).contains(&x) && ev.time < 10.0 {
                    a += 1.0;
                }
                if (0.5..3.0).contains(&x) && ev.time >= 10.0 {
                    b += 1.0;
                }
            }
            c1.push(a);
            c2.push(b);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (m1, m2) = (mean(&c1), mean(&c2));
        let expect1 = 3.0 * 10.0 / 1.4;
        let expect2 = 2.5 * 10.0 / 2.0;
        let n = reps as f64;
        assert!((m1 - expect1).abs() < 4.0 * (expect1 / n).sqrt());
        assert!((m2 - expect2).abs() < 4.0 * (expect2 / n).sqrt());
        // dispersion index (chi-square with reps-1 dof under the Poisson law)
        for (v, m) in [(&c1, m1), (&c2, m2)] {
            let chi2: f64 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / m;
            let z = (chi2 - (n - 1.0)) / (2.0 * (n - 1.0)).sqrt();
            assert!(z.abs() < 4.0, "dispersion z = {z}");
        }
        let cov: f64 = c1.iter().zip(&c2).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / n;
        let corr = cov / (m1 * m2).sqrt();
        assert!(corr.abs() < 4.0 / n.sqrt(), "corr = {corr}");
    }

    #[test]
    fn streams_are_deterministic() {
        let p = params();
        let w = window_1d(-5.0, 5.0, 50.0);
        let run = || {
            let mut s = EventStream::new(w.clone(), p, stream(99, "events", 7));
            let mut out = Vec::new();
            while let Ok(ev) = s.next_event() {
                out.push(EventRecord::from(&ev));
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn horizon_exhaustion_is_reported() {
        let p = params();
        let w = window_1d(-5.0, 5.0, 0.5);
        let mut s = EventStream::new(w, p, stream(1, "events", 0));
        let err = loop {
            match s.next_event() {
                Ok(ev) => assert!(ev.time <= 0.5),
                Err(e) => break e,
            }
        };
        assert!(matches!(err, SlfvError::HorizonExhausted { .. }));
    }

    #[test]
    fn lazy_parent_is_stable_and_in_ball() {
        let p = ModelParams::new(0.5, 1.0, 0.7, 3).unwrap();
        let mut rng = stream(5, "parent", 0);
        let mut ev = ReproductionEvent::new(0.0, Point([0.3, 1.0, -2.0]), &p);
        assert!(ev.parent_if_drawn().is_none());
        let a = ev.parent(3, &mut rng);
        let b = ev.parent(3, &mut rng);
        assert_eq!(a, b);
        assert!(a.dist(&ev.center) <= ev.radius);
    }

    #[test]
    fn event_log_round_trip() {
        let p = ModelParams::new(0.5, 1.0, 0.7, 2).unwrap();
        let w = SimWindow::padded(&[-2.0, -2.0], &[2.0, 2.0], &p, 5.0).unwrap();
        let mut s = EventStream::new(w, p, stream(3, "events", 0));
        let mut recs = Vec::new();
        while let Ok(ev) = s.next_event() {
            recs.push(EventRecord::from(&ev));
        }
        let mut buf = Vec::new();
        write_event_log(&mut buf, &recs, 2).unwrap();
        assert_eq!(buf.len(), recs.len() * 25);
        assert_eq!(read_event_log(&buf[..], 2).unwrap(), recs);
        assert!(read_event_log(&buf[..buf.len() - 1], 2).is_err());
    }
}
