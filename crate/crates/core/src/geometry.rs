//! Ball volumes, ball intersections clipped to a halfspace, the lineage jump
//! kernel `Φ` and uniform sampling in balls.
//!
//! Only the first coordinate interacts with the interface; everything else is
//! dimension-generic for `d ≤ 3`.

use std::f64::consts::PI;

use quadrature::double_exponential;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::params::ModelParams;
use crate::point::{Point, Side};

/// Volume `π^{d/2} r^d / Γ(d/2 + 1)` of a `d`-ball of radius `r`.
pub fn ball_volume(r: f64, d: usize) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("ball radius must be positive, got {r}")));
    }
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let half = d as f64 / 2.0;
    Ok(PI.powf(half) * r.powi(d as i32) / libm::tgamma(half + 1.0))
}

pub(crate) fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => ball_volume(1.0, d).expect("d >= 1"),
    }
}

/// Fraction of the ball `B(x, r)` that lies in `H⁺`, as a function of `x₁`.
pub fn positive_fraction(x1: f64, r: f64, d: usize) -> f64 {
    if x1 >= r {
        return 1.0;
    }
    if x1 <= -r {
        return 0.0;
    }
    match d {
        1 => (x1 + r) / (2.0 * r),
        2 => {
            let area = r * r * (-x1 / r).acos() + x1 * (r * r - x1 * x1).sqrt();
            area / (PI * r * r)
        }
        3 => {
            let h = r + x1;
            h * h * (3.0 * r - h) / (4.0 * r * r * r)
        }
        _ => unreachable!("dimension checked by ModelParams"),
    }
}

/// Rate at which a lineage sitting at `x` is covered by reproduction events:
/// `|B(x,r₊) ∩ H⁺|/V_{r₊} + |B(x,r₋) ∩ H⁻|/V_{r₋}`. Equal to 1 at distance
/// `≥ r₊` from the interface.
pub fn covering_rate(x: &Point, params: &ModelParams) -> f64 {
    let d = params.d();
    positive_fraction(x.x1(), params.r_plus(), d) + 1.0 - positive_fraction(x.x1(), params.r_minus(), d)
}

/// Upper bound of [`covering_rate`] over `R^d`.
pub fn covering_rate_bound(params: &ModelParams) -> f64 {
    // the rate is 1 outside [-r₊, r₊]; scan, then refine around the best node
    let r = params.r_plus();
    let rate = |x1: f64| covering_rate(&Point::on_axis(x1), params);
    let nodes = 4096;
    let h = 2.0 * r / nodes as f64;
    let best = (0..=nodes)
        .map(|k| -r + k as f64 * h)
        .max_by(|a, b| rate(*a).total_cmp(&rate(*b)))
        .expect("nonempty scan");
    let (mut lo, mut hi) = (best - h, best + h);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let m1 = hi - inv_phi * (hi - lo);
        let m2 = lo + inv_phi * (hi - lo);
        if rate(m1) < rate(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    rate(best).max(rate(0.5 * (lo + hi))) + 1e-12
}

#[inline]
pub fn ball_contains(center: &Point, r: f64, p: &Point) -> bool {
    center.dist2(p) < r * r
}

/// Uniform point in `B(center, r)` by rejection from the bounding cube.
pub fn sample_uniform_ball<R: Rng + ?Sized>(center: &Point, r: f64, d: usize, rng: &mut R) -> Point {
    if d == 1 {
        return Point::on_axis(center.x1() + r * (2.0 * rng.random::<f64>() - 1.0));
    }
    loop {
        let mut offset = [0.0; crate::MAX_DIM];
        let mut norm2 = 0.0;
        for c in offset.iter_mut().take(d) {
            *c = 2.0 * rng.random::<f64>() - 1.0;
            norm2 += *c * *c;
        }
        if norm2 < 1.0 {
            let mut p = *center;
            for (pc, oc) in p.0.iter_mut().zip(offset) {
                *pc += r * oc;
            }
            return p;
        }
    }
}

/// Uniform point in `B(center, r) ∩ H^side`. The set must have positive volume.
pub fn sample_ball_in_halfspace<R: Rng + ?Sized>(center: &Point, r: f64, side: Side, d: usize, rng: &mut R) -> Point {
    let (lo, hi) = match side {
        Side::Plus => ((center.x1() - r).max(0.0), center.x1() + r),
        Side::Minus => (center.x1() - r, (center.x1() + r).min(0.0)),
    };
    debug_assert!(hi > lo, "empty halfspace section of the ball");
    loop {
        let mut p = *center;
        p.0[0] = lo + (hi - lo) * rng.random::<f64>();
        for c in p.0.iter_mut().take(d).skip(1) {
            *c += r * (2.0 * rng.random::<f64>() - 1.0);
        }
        if p.side() != side {
            continue;
        }
        if d == 1 || ball_contains(center, r, &p) {
            return p;
        }
    }
}

/// Centre of a reproduction event covering `x`, uniform over the set of
/// centres whose event ball contains `x`. Returns the centre and its side.
pub fn sample_covering_center<R: Rng + ?Sized>(x: &Point, params: &ModelParams, rng: &mut R) -> (Point, Side) {
    let d = params.d();
    let plus = positive_fraction(x.x1(), params.r_plus(), d);
    let minus = 1.0 - positive_fraction(x.x1(), params.r_minus(), d);
    let side = if rng.random::<f64>() * (plus + minus) < plus {
        Side::Plus
    } else {
        Side::Minus
    };
    (sample_ball_in_halfspace(x, params.radius(side), side, d, rng), side)
}

fn disc_intersection_area(ra: f64, rb: f64, dist: f64) -> f64 {
    if ra <= 0.0 || rb <= 0.0 || dist >= ra + rb {
        return 0.0;
    }
    if dist <= (ra - rb).abs() {
        let m = ra.min(rb);
        return PI * m * m;
    }
    let ca = ((dist * dist + ra * ra - rb * rb) / (2.0 * dist * ra)).clamp(-1.0, 1.0);
    let cb = ((dist * dist + rb * rb - ra * ra) / (2.0 * dist * rb)).clamp(-1.0, 1.0);
    let k = (-dist + ra + rb) * (dist + ra - rb) * (dist - ra + rb) * (dist + ra + rb);
    ra * ra * ca.acos() + rb * rb * cb.acos() - 0.5 * k.max(0.0).sqrt()
}

/// `|B^side(x, r) ∩ B^side(y, r)|`: volume of the lens of two equal balls
/// restricted to one halfspace.
///
/// Exact for `d = 1`. For `d = 2, 3` the lens is sliced orthogonally to the
/// first axis; slices have closed-form size and the slice profile is
/// integrated by double-exponential quadrature between its kinks.
pub fn halfspace_lens_volume(x: &Point, y: &Point, r: f64, side: Side, d: usize) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("lens radius must be positive, got {r}")));
    }
    if d == 0 || d > crate::MAX_DIM {
        return Err(invalid(format!("dimension {d} unsupported")));
    }
    let dist2 = x.dist2(y);
    if dist2 >= 4.0 * r * r {
        return Ok(0.0);
    }
    let mut lo = x.x1().max(y.x1()) - r;
    let mut hi = x.x1().min(y.x1()) + r;
    match side {
        Side::Plus => lo = lo.max(0.0),
        Side::Minus => hi = hi.min(0.0),
    }
    if hi <= lo {
        return Ok(0.0);
    }
    if d == 1 {
        return Ok(hi - lo);
    }

    let transverse2: f64 = (1..d).map(|i| (x.0[i] - y.0[i]).powi(2)).sum();
    let transverse = transverse2.sqrt();
    let slice = |z1: f64| -> f64 {
        let rx = (r * r - (z1 - x.x1()).powi(2)).max(0.0).sqrt();
        let ry = (r * r - (z1 - y.x1()).powi(2)).max(0.0).sqrt();
        if d == 2 {
            let a = (x.0[1] - rx).max(y.0[1] - ry);
            let b = (x.0[1] + rx).min(y.0[1] + ry);
            (b - a).max(0.0)
        } else {
            disc_intersection_area(rx, ry, transverse)
        }
    };

    // slice profile kinks: ball extremities and the first-axis extent of the
    // sphere-sphere intersection circle
    let mut breaks = vec![x.x1() - r, x.x1() + r, y.x1() - r, y.x1() + r];
    let dist = dist2.sqrt();
    if dist > 0.0 {
        let circle_r = (r * r - dist2 / 4.0).max(0.0).sqrt();
        let e1 = (y.x1() - x.x1()) / dist;
        let mid = 0.5 * (x.x1() + y.x1());
        let spread = circle_r * (1.0 - e1 * e1).max(0.0).sqrt();
        breaks.push(mid - spread);
        breaks.push(mid + spread);
    }
    let mut knots = vec![lo];
    knots.extend(breaks.into_iter().filter(|&b| b > lo && b < hi));
    knots.push(hi);
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let scale = r.powi(d as i32);
    let total = knots
        .windows(2)
        .map(|w| double_exponential::integrate(slice, w[0], w[1], 1e-14 * scale).integral)
        .sum();
    Ok(total)
}

/// Jump kernel of a single lineage:
/// `Φ(x,y) = |B⁺(x,r₊)∩B⁺(y,r₊)|/V_{r₊}² + |B⁻(x,r₋)∩B⁻(y,r₋)|/V_{r₋}²`.
pub fn phi_kernel(x: &Point, y: &Point, params: &ModelParams) -> f64 {
    let d = params.d();
    let (rp, rm) = (params.r_plus(), params.r_minus());
    if x.dist2(y) >= 4.0 * rp * rp {
        return 0.0;
    }
    let vp = unit_ball_volume(d) * rp.powi(d as i32);
    let vm = unit_ball_volume(d) * rm.powi(d as i32);
    let plus = halfspace_lens_volume(x, y, rp, Side::Plus, d).expect("validated radius");
    let minus = halfspace_lens_volume(x, y, rm, Side::Minus, d).expect("validated radius");
    plus / (vp * vp) + minus / (vm * vm)
}
