//! Birkhoff annuli over closed geodesics, first-return maps, Monte Carlo
//! section checks, trapped sets and homoclinic detection.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csf::DiscreteCurve;
use crate::finder::CompleteSystem;
use crate::flow::{
    advance, bisect, clairaut, displace, integrate_with, ClosedGeodesicRecord, FlowOptions, OrbitType, Side, State,
    Stepper, Trajectory, UnitTangent,
};
use crate::geom::{wrap, SurfaceKind, SurfaceMetric, SurfacePoint, TangentVector, POLAR_CAP};
use crate::linalg::{composite_gl, pinv2};
use crate::{Error, Result};

/// Curve carrying an annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Carrier {
    /// Chart line `u = value` (`axis = 0`) or `v = value` (`axis = 1`).
    Level { axis: usize, value: f64 },
    /// Dense polygon of a general closed curve.
    Polyline(DiscreteCurve),
}

/// One of the two Birkhoff annuli of an oriented closed curve: unit vectors
/// on the curve pointing weakly to its left, in coordinates `(s, φ)` with
/// `s` the arclength from the origin and `φ` the angle from the left normal
/// (positive toward the tangent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffAnnulus {
    pub label: String,
    pub carrier: Carrier,
    pub length: f64,
    /// Orientation of the annulus relative to the carrier.
    pub reversed: bool,
    /// `+1` when the carrier runs along the increasing line coordinate.
    forward: f64,
    /// Line coordinate of `s = 0` for level carriers.
    origin: f64,
    /// Arclength at each polyline vertex.
    cum: Vec<f64>,
}

/// Largest offset accepted at a bisected crossing.
const ROOT_TOL: f64 = 1e-8;

fn near_zero(d: f64, p: Option<f64>) -> f64 {
    match p {
        Some(p) => d - p * (d / p).round(),
        None => d,
    }
}

impl BirkhoffAnnulus {
    /// Annulus over a closed chart line, oriented along the increasing line
    /// coordinate unless `reversed`.
    pub fn level(m: &SurfaceMetric, axis: usize, value: f64, reversed: bool) -> Result<Self> {
        Self::level_from(m, axis, value, 1.0, 0.0, reversed, format!("{}={value}", ["u", "v"][axis.min(1)]))
    }

    fn level_from(
        m: &SurfaceMetric,
        axis: usize,
        value: f64,
        forward: f64,
        origin: f64,
        reversed: bool,
        label: String,
    ) -> Result<Self> {
        if axis > 1 {
            return Err(Error::Precondition("axis must be 0 or 1".into()));
        }
        if axis == 0 && m.periods().1.is_none() {
            return Err(Error::Precondition("u-lines do not close on a sphere chart".into()));
        }
        let mut a = Self {
            label,
            carrier: Carrier::Level { axis, value },
            length: 0.0,
            reversed,
            forward,
            origin,
            cum: Vec::new(),
        };
        a.length = a.line_integral(m, origin, a.period(m))?;
        Ok(a)
    }

    /// Annulus over the closed geodesic `rec`, with the record's start as
    /// `s = 0`.
    pub fn over(m: &SurfaceMetric, rec: &ClosedGeodesicRecord, reversed: bool) -> Result<Self> {
        let pts = &rec.curve.points;
        let label = format!("geodesic(L={:.6})", rec.length);
        for axis in [1usize, 0] {
            let c = pts[0].coord(axis);
            if pts.iter().all(|p| (p.coord(axis) - c).abs() < 1e-7) {
                let forward = if rec.start.dir()[1 - axis] >= 0.0 { 1.0 } else { -1.0 };
                let origin = rec.start.base.coord(1 - axis);
                return Self::level_from(m, axis, c, forward, origin, reversed, label);
            }
        }
        let opts = FlowOptions::default();
        let tr = integrate_with(m, &rec.start, rec.length, [0.0, 0.0], opts)?;
        let n = 1024;
        let mut samples = Vec::with_capacity(n);
        for k in 0..n {
            let y = tr.state_at(m, rec.length * k as f64 / n as f64)?;
            samples.push(SurfacePoint::new(y[0], y[1]));
        }
        let poly = DiscreteCurve::new(samples, rec.curve.shift);
        let mut cum = vec![0.0];
        for i in 0..n {
            let (a, b) = (poly.at(i as isize), poly.at(i as isize + 1));
            let mid = SurfacePoint::new(0.5 * (a.u + b.u), 0.5 * (a.v + b.v));
            let d = m.metric_at(mid)?.norm([b.u - a.u, b.v - a.v]);
            cum.push(cum[i] + d);
        }
        Ok(Self {
            label,
            carrier: Carrier::Polyline(poly),
            length: cum[n],
            reversed,
            forward: 1.0,
            origin: 0.0,
            cum,
        })
    }

    /// Both annuli `A(γ̇)` and `A(−γ̇)` over `rec`.
    pub fn pair(m: &SurfaceMetric, rec: &ClosedGeodesicRecord) -> Result<[Self; 2]> {
        Ok([Self::over(m, rec, false)?, Self::over(m, rec, true)?])
    }

    fn period(&self, m: &SurfaceMetric) -> f64 {
        match self.carrier {
            Carrier::Level { axis: 1, .. } => m.periods().0,
            Carrier::Level { .. } => m.periods().1.unwrap_or(PI),
            Carrier::Polyline(_) => 0.0,
        }
    }

    fn line_point(&self, x: f64) -> SurfacePoint {
        match self.carrier {
            Carrier::Level { axis: 1, value } => SurfacePoint::new(x, value),
            Carrier::Level { value, .. } => SurfacePoint::new(value, x),
            Carrier::Polyline(_) => unreachable!(),
        }
    }

    /// `∫ |∂_x| dx` along a level line from `a` over a span `w ≥ 0`.
    fn line_integral(&self, m: &SurfaceMetric, a: f64, w: f64) -> Result<f64> {
        let Carrier::Level { axis, .. } = self.carrier else {
            unreachable!()
        };
        if w == 0.0 {
            return Ok(0.0);
        }
        let panels = ((w / self.period(m).max(1e-300)) * 16.0).ceil().max(1.0) as usize;
        let mut s = 0.0;
        for (x, wt) in composite_gl(a, a + w, panels, 8) {
            let d = m.metric_at(self.line_point(x))?;
            s += wt * if axis == 1 { d.g11 } else { d.g22 }.sqrt();
        }
        Ok(s)
    }

    /// Signed offset of `p` from the carrier toward the carrier's left
    /// normal, in chart units for level lines.
    pub fn signed_offset(&self, m: &SurfaceMetric, p: SurfacePoint) -> f64 {
        match &self.carrier {
            Carrier::Level { axis, value } => {
                let d = if *axis == 1 {
                    near_zero(p.v - value, m.periods().1)
                } else {
                    near_zero(p.u - value, Some(m.periods().0))
                };
                // left of +∂_u is +v, left of +∂_v is −u
                let sign = if *axis == 1 { 1.0 } else { -1.0 };
                sign * self.forward * d
            }
            Carrier::Polyline(c) => match self.project(m, c, p) {
                Some((_, off)) => off,
                None => f64::INFINITY,
            },
        }
    }

    /// Nearest polyline segment: arclength of the foot point and signed
    /// metric offset.
    fn project(&self, m: &SurfaceMetric, c: &DiscreteCurve, p: SurfacePoint) -> Option<(f64, f64)> {
        let (pu, pv) = m.periods();
        let mut best: Option<(f64, f64, f64)> = None;
        let ku = [-1.0, 0.0, 1.0];
        let kv: &[f64] = if pv.is_some() { &[-1.0, 0.0, 1.0] } else { &[0.0] };
        for a in ku {
            for b in kv {
                let q = SurfacePoint::new(p.u + a * pu, p.v + b * pv.unwrap_or(0.0));
                for i in 0..c.len() {
                    let (x0, x1) = (c.at(i as isize), c.at(i as isize + 1));
                    let e = [x1.u - x0.u, x1.v - x0.v];
                    let d = [q.u - x0.u, q.v - x0.v];
                    let ee = e[0] * e[0] + e[1] * e[1];
                    let t = ((d[0] * e[0] + d[1] * e[1]) / ee).clamp(0.0, 1.0);
                    let r = [d[0] - t * e[0], d[1] - t * e[1]];
                    let dist2 = r[0] * r[0] + r[1] * r[1];
                    if best.is_none_or(|b| dist2 < b.0) {
                        let foot = SurfacePoint::new(x0.u + t * e[0], x0.v + t * e[1]);
                        let g = m.metric_at(foot).ok()?;
                        let nu = g.left_normal(e);
                        let s = self.cum[i] + t * (self.cum[i + 1] - self.cum[i]);
                        best = Some((dist2, s, g.inner(r, nu)));
                    }
                }
            }
        }
        best.map(|b| (b.1, b.2))
    }

    /// Unit tangent and left normal of the annulus orientation at `p`.
    fn frame(&self, m: &SurfaceMetric, p: SurfacePoint) -> Result<([f64; 2], [f64; 2], f64)> {
        let d = m.metric_at(p)?;
        let (t, s) = match &self.carrier {
            Carrier::Level { axis, .. } => {
                let t = if *axis == 1 { [self.forward, 0.0] } else { [0.0, self.forward] };
                let x = if *axis == 1 { p.u } else { p.v };
                let period = self.period(m);
                let span = wrap(self.forward * (x - self.origin), period);
                let a = if self.forward > 0.0 { self.origin } else { self.origin - span };
                let i = self.line_integral(m, a, span)?;
                (t, i)
            }
            Carrier::Polyline(c) => {
                let (s, _) = self.project(m, c, p).ok_or(Error::PointOutsideChart { u: p.u, v: p.v })?;
                let k = self.cum.partition_point(|x| *x <= s).clamp(1, c.len()) - 1;
                let (a, b) = (c.at(k as isize), c.at(k as isize + 1));
                (([b.u - a.u, b.v - a.v]), s)
            }
        };
        let n = d.norm(t);
        let mut e = [t[0] / n, t[1] / n];
        let mut s = s.rem_euclid(self.length);
        if self.reversed {
            e = [-e[0], -e[1]];
            s = (self.length - s).rem_euclid(self.length);
        }
        Ok((e, d.left_normal(e), s))
    }

    /// Coordinates of the unit vector `(p, w)` when it lies on this annulus
    /// (the point is taken as on the carrier).
    pub fn coords(&self, m: &SurfaceMetric, y: &State) -> Result<Option<(f64, f64)>> {
        let p = SurfacePoint::new(y[0], y[1]);
        let (e, nu, s) = self.frame(m, p)?;
        let d = m.metric_at(p)?;
        let w = [y[2], y[3]];
        let (a, b) = (d.inner(w, nu), d.inner(w, e));
        if a < 0.0 {
            return Ok(None);
        }
        Ok(Some((s, b.atan2(a))))
    }

    /// Unit vector at annulus coordinates `(s, φ)`.
    pub fn tangent_at(&self, m: &SurfaceMetric, s: f64, phi: f64) -> Result<UnitTangent> {
        let s = s.rem_euclid(self.length);
        let s_car = if self.reversed { (self.length - s).rem_euclid(self.length) } else { s };
        let p = match &self.carrier {
            Carrier::Level { .. } => {
                // invert the arclength by Newton on the line coordinate
                let period = self.period(m);
                let mut x = self.origin + self.forward * period * s_car / self.length;
                for _ in 0..50 {
                    let (_, _, mut cur) = self.frame(m, self.line_point(x))?;
                    if self.reversed {
                        cur = (self.length - cur).rem_euclid(self.length);
                    }
                    let mut diff = s_car - cur;
                    diff -= self.length * (diff / self.length).round();
                    let d = m.metric_at(self.line_point(x))?;
                    let speed = match self.carrier {
                        Carrier::Level { axis: 1, .. } => d.g11.sqrt(),
                        _ => d.g22.sqrt(),
                    };
                    let dx = self.forward * diff / speed;
                    x += dx;
                    if dx.abs() < 1e-15 {
                        break;
                    }
                }
                self.line_point(x)
            }
            Carrier::Polyline(c) => {
                let k = self.cum.partition_point(|x| *x <= s_car).clamp(1, c.len()) - 1;
                let t = (s_car - self.cum[k]) / (self.cum[k + 1] - self.cum[k]);
                let (a, b) = (c.at(k as isize), c.at(k as isize + 1));
                SurfacePoint::new(a.u + t * (b.u - a.u), a.v + t * (b.v - a.v))
            }
        };
        let (e, nu, _) = self.frame(m, p)?;
        let (sn, cs) = phi.sin_cos();
        UnitTangent::new(m, p, TangentVector::new(cs * nu[0] + sn * e[0], cs * nu[1] + sn * e[1]))
    }

    /// Distance in the unit tangent bundle from `y` to the lift of the
    /// carrier (either orientation): normal offset and angle to the tangent.
    pub fn lift_distance(&self, m: &SurfaceMetric, y: &State) -> Result<f64> {
        let p = SurfacePoint::new(y[0], y[1]);
        let off = self.signed_offset(m, p);
        let d = m.metric_at(p)?;
        let (e, _, _) = self.frame(m, p)?;
        let w = [y[2], y[3]];
        let c = d.inner(w, e).clamp(-1.0, 1.0);
        let angle = c.abs().acos();
        let off = match self.carrier {
            Carrier::Level { axis: 1, .. } => off * d.g22.sqrt(),
            Carrier::Level { .. } => off * d.g11.sqrt(),
            Carrier::Polyline(_) => off,
        };
        Ok(off.hypot(angle))
    }
}

trait Coord {
    fn coord(&self, axis: usize) -> f64;
}

impl Coord for SurfacePoint {
    fn coord(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.u
        } else {
            self.v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnStatus {
    Returned,
    TrappedForward,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub annulus: usize,
    pub s: f64,
    pub phi: f64,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub start: UnitTangent,
    pub hit: Option<Hit>,
    pub tau: f64,
    pub status: ReturnStatus,
}

/// Orbit run to the first annulus hit, with states sampled at the
/// requested times on the way.
fn run_to_section(
    m: &SurfaceMetric,
    annuli: &[BirkhoffAnnulus],
    z0: &UnitTangent,
    budget: f64,
    probe_times: &[f64],
) -> Result<(ReturnSample, Vec<State>)> {
    let mut st = Stepper::new(m, z0, [0.0, 0.0], FlowOptions::default())?;
    let offsets = |y: &State| -> Vec<f64> {
        annuli.iter().map(|a| a.signed_offset(m, SurfacePoint::new(y[0], y[1]))).collect()
    };
    let mut prev_f = offsets(&st.y);
    let mut probes = Vec::with_capacity(probe_times.len());
    let mut next_probe = 0;
    while st.t < budget {
        let (t0, y0) = (st.t, st.y);
        st.step(budget)?;
        let f = offsets(&st.y);
        let mut best: Option<(f64, usize, State)> = None;
        for (k, a) in annuli.iter().enumerate() {
            let (fa, fb) = (prev_f[k], f[k]);
            let crossed = (fa < 0.0 && fb >= 0.0) || (fa > 0.0 && fb <= 0.0);
            if !crossed || !(fa - fb).abs().is_finite() {
                continue;
            }
            let g = |t: f64| -> Result<f64> {
                let y = advance(m, &y0, t0, t - t0)?;
                Ok(a.signed_offset(m, SurfacePoint::new(y[0], y[1])))
            };
            let tc = bisect(g, t0, st.t, 1e-14)?;
            if tc <= 1e-9 || best.as_ref().is_some_and(|b| b.0 <= tc) {
                continue;
            }
            let y = advance(m, &y0, t0, tc - t0)?;
            // a wrap of the offset or a switch of the nearest polyline
            // segment also flips the sign, but leaves a large residual
            let residual = a.signed_offset(m, SurfacePoint::new(y[0], y[1])).abs();
            if residual < ROOT_TOL && a.coords(m, &y)?.is_some() {
                best = Some((tc, k, y));
            }
        }
        while next_probe < probe_times.len() && probe_times[next_probe] <= st.t {
            let tp = probe_times[next_probe];
            if best.as_ref().is_some_and(|b| b.0 < tp) {
                break;
            }
            probes.push(advance(m, &y0, t0, tp - t0)?);
            next_probe += 1;
        }
        if let Some((tc, k, y)) = best {
            let (s, phi) = annuli[k].coords(m, &y)?.unwrap();
            let hit = Hit { annulus: k, s, phi, state: y };
            return Ok((ReturnSample { start: *z0, hit: Some(hit), tau: tc, status: ReturnStatus::Returned }, probes));
        }
        prev_f = f;
    }
    Ok((ReturnSample { start: *z0, hit: None, tau: budget, status: ReturnStatus::Budget }, probes))
}

/// First transverse crossing of any annulus interior within `budget`.
pub fn first_return(m: &SurfaceMetric, annuli: &[BirkhoffAnnulus], z0: &UnitTangent, budget: f64) -> Result<ReturnSample> {
    Ok(run_to_section(m, annuli, z0, budget, &[])?.0)
}

/// Area-weighted uniform sampler on the unit tangent bundle, with an
/// independent ChaCha stream per sample index.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    m: &'a SurfaceMetric,
    seed: u64,
    max_density: f64,
    u_span: f64,
    v_span: (f64, f64),
}

impl<'a> Sampler<'a> {
    pub fn new(m: &'a SurfaceMetric, seed: u64) -> Self {
        let (pu, pv) = m.periods();
        let v_span = match pv {
            Some(p) => (0.0, p),
            None => (POLAR_CAP, PI - POLAR_CAP),
        };
        let mut max_density: f64 = 0.0;
        for i in 0..128 {
            for j in 0..128 {
                let p = SurfacePoint::new(
                    pu * (i as f64 + 0.5) / 128.0,
                    v_span.0 + (v_span.1 - v_span.0) * (j as f64 + 0.5) / 128.0,
                );
                if let Ok(d) = m.metric_at(p) {
                    max_density = max_density.max(d.det().sqrt());
                }
            }
        }
        Self { m, seed, max_density: 1.1 * max_density, u_span: pu, v_span }
    }

    pub fn sample(&self, index: u64) -> UnitTangent {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        loop {
            let u = rng.gen::<f64>() * self.u_span;
            let v = self.v_span.0 + rng.gen::<f64>() * (self.v_span.1 - self.v_span.0);
            let accept = rng.gen::<f64>() * self.max_density;
            let theta = rng.gen::<f64>() * TAU;
            let p = SurfacePoint::new(u, v);
            let Ok(d) = self.m.metric_at(p) else { continue };
            if accept < d.det().sqrt() {
                if let Ok(z) = UnitTangent::from_angle(self.m, p, theta) {
                    return z;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Integration budget per sample.
    pub t_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffReport {
    pub samples: usize,
    pub returned: usize,
    pub budget: usize,
    pub failed: usize,
    pub l_bound: f64,
    pub max_tau: f64,
    pub mean_tau: f64,
    pub bin_width: f64,
    pub histogram: Vec<usize>,
    pub is_section_evidence: bool,
    /// First few samples that did not return within `l_bound`.
    pub counterexamples: Vec<UnitTangent>,
}

impl BirkhoffReport {
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("tau_lo,tau_hi,count\n");
        for (i, c) in self.histogram.iter().enumerate() {
            let lo = i as f64 * self.bin_width;
            s.push_str(&format!("{lo},{},{c}\n", lo + self.bin_width));
        }
        s
    }
}

pub const HISTOGRAM_BINS: usize = 32;

/// Monte Carlo evidence that the union of `annuli` is a Birkhoff section
/// with return time at most `l_bound`.
pub fn verify_birkhoff(
    m: &SurfaceMetric,
    annuli: &[BirkhoffAnnulus],
    cfg: SamplingConfig,
    l_bound: f64,
) -> Result<BirkhoffReport> {
    if cfg.n_samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    if !(l_bound > 0.0) {
        return Err(Error::Precondition("l_bound must be positive".into()));
    }
    let sampler = Sampler::new(m, cfg.seed);
    let budget = cfg.t_budget.max(l_bound);
    let results: Vec<(UnitTangent, Option<f64>)> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let z = sampler.sample(i);
            match first_return(m, annuli, &z, budget) {
                Ok(r) if r.status == ReturnStatus::Returned => (z, Some(r.tau)),
                Ok(_) => (z, None),
                Err(_) => (z, Some(f64::NAN)),
            }
        })
        .collect();
    let mut rep = BirkhoffReport {
        samples: cfg.n_samples,
        returned: 0,
        budget: 0,
        failed: 0,
        l_bound,
        max_tau: 0.0,
        mean_tau: 0.0,
        bin_width: l_bound / HISTOGRAM_BINS as f64,
        histogram: vec![0; HISTOGRAM_BINS],
        is_section_evidence: true,
        counterexamples: Vec::new(),
    };
    let mut sum = 0.0;
    for (z, tau) in results {
        match tau {
            Some(t) if t.is_nan() => rep.failed += 1,
            Some(t) => {
                rep.returned += 1;
                rep.max_tau = rep.max_tau.max(t);
                sum += t;
                let bin = ((t / rep.bin_width) as usize).min(HISTOGRAM_BINS - 1);
                rep.histogram[bin] += 1;
                if t > l_bound && rep.counterexamples.len() < 16 {
                    rep.counterexamples.push(z);
                }
            }
            None => {
                rep.budget += 1;
                if rep.counterexamples.len() < 16 {
                    rep.counterexamples.push(z);
                }
            }
        }
    }
    rep.mean_tau = if rep.returned > 0 { sum / rep.returned as f64 } else { 0.0 };
    rep.is_section_evidence = rep.returned == rep.samples && rep.max_tau <= l_bound;
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessOrigin {
    Sample,
    StableProbe,
    UnstableProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapWitness {
    pub start: UnitTangent,
    pub origin: WitnessOrigin,
    /// Index into the system's `all`.
    pub waist: usize,
    pub final_distance: f64,
    pub clairaut: Option<f64>,
    /// Whether the late orbit is within `1e-3` of the waist lift.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub samples: usize,
    pub returned_forward: usize,
    pub budget: usize,
    pub failed: usize,
    pub sample_trapped_forward: usize,
    pub sample_trapped_backward: usize,
    pub trapped_forward: Vec<TrapWitness>,
    pub trapped_backward: Vec<TrapWitness>,
    /// Trapped witnesses not close to any waist lift at the end.
    pub anomalies: usize,
    pub max_tau: f64,
}

pub const PROBE_TIME: f64 = 10.0;
pub const PROBES_PER_SIDE: usize = 8;

/// Forward classification of one orbit: `Returned`, `TrappedForward` with
/// the waist it approaches, or `Budget`.
fn classify(
    m: &SurfaceMetric,
    annuli: &[BirkhoffAnnulus],
    waists: &[(usize, BirkhoffAnnulus)],
    z: &UnitTangent,
    budget: f64,
) -> Result<(ReturnSample, Option<(usize, f64)>)> {
    let tail: Vec<f64> = (0..=8).map(|k| budget * (0.75 + 0.25 * k as f64 / 8.0)).collect();
    let (mut r, states) = run_to_section(m, annuli, z, budget, &tail)?;
    if r.status == ReturnStatus::Returned || states.len() < tail.len() {
        return Ok((r, None));
    }
    for (idx, w) in waists {
        let d: Vec<f64> = states.iter().map(|y| w.lift_distance(m, y)).collect::<Result<_>>()?;
        if d.windows(2).all(|p| p[1] <= p[0]) {
            r.status = ReturnStatus::TrappedForward;
            return Ok((r, Some((*idx, *d.last().unwrap()))));
        }
    }
    Ok((r, None))
}

/// Trapped sets of the complement of a complete system: Monte Carlo
/// samples in both time directions, plus probes started on the local stable
/// and unstable manifolds of each limit waist.
pub fn trapped_sets(m: &SurfaceMetric, system: &CompleteSystem, cfg: SamplingConfig) -> Result<TrapReport> {
    let mut annuli = Vec::new();
    for rec in &system.all {
        annuli.extend(BirkhoffAnnulus::pair(m, rec)?);
    }
    let waists: Vec<(usize, BirkhoffAnnulus)> = system
        .limit_sub
        .iter()
        .map(|&i| BirkhoffAnnulus::over(m, &system.all[i], false).map(|a| (i, a)))
        .collect::<Result<_>>()?;
    let sampler = Sampler::new(m, cfg.seed);
    type Outcome = (Option<(ReturnSample, Option<(usize, f64)>)>, Option<(ReturnSample, Option<(usize, f64)>)>);
    let outcomes: Vec<(UnitTangent, Outcome)> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let z = sampler.sample(i);
            let fwd = classify(m, &annuli, &waists, &z, cfg.t_budget).ok();
            let bwd = classify(m, &annuli, &waists, &z.flip(), cfg.t_budget).ok();
            (z, (fwd, bwd))
        })
        .collect();
    let mut rep = TrapReport {
        samples: cfg.n_samples,
        returned_forward: 0,
        budget: 0,
        failed: 0,
        sample_trapped_forward: 0,
        sample_trapped_backward: 0,
        trapped_forward: Vec::new(),
        trapped_backward: Vec::new(),
        anomalies: 0,
        max_tau: 0.0,
    };
    let witness = |z: UnitTangent, origin, (w, d): (usize, f64)| TrapWitness {
        start: z,
        origin,
        waist: w,
        final_distance: d,
        clairaut: clairaut(m, &z),
        consistent: d < 1e-3,
    };
    for (z, (fwd, bwd)) in outcomes {
        match fwd {
            None => rep.failed += 1,
            Some((r, trap)) => match r.status {
                ReturnStatus::Returned => {
                    rep.returned_forward += 1;
                    rep.max_tau = rep.max_tau.max(r.tau);
                }
                ReturnStatus::TrappedForward => {
                    rep.sample_trapped_forward += 1;
                    rep.trapped_forward.push(witness(z, WitnessOrigin::Sample, trap.unwrap()));
                }
                ReturnStatus::Budget => rep.budget += 1,
            },
        }
        if let Some((r, Some(trap))) = bwd {
            if r.status == ReturnStatus::TrappedForward {
                rep.sample_trapped_backward += 1;
                rep.trapped_backward.push(witness(z, WitnessOrigin::Sample, trap));
            }
        }
    }
    let budget = PROBE_TIME.min(cfg.t_budget);
    for (idx, _) in &waists {
        let rec = &system.all[*idx];
        let delta = 1e-4 * m.inj_radius_estimate;
        for stable in [true, false] {
            for side in [Side::Left, Side::Right] {
                let seeds = crate::flow::invariant_manifold_seed_with(m, rec, side, stable, PROBES_PER_SIDE, delta)?;
                for z in seeds {
                    let start = if stable { z } else { z.flip() };
                    let (r, trap) = classify(m, &annuli, &waists, &start, budget)?;
                    let origin = if stable { WitnessOrigin::StableProbe } else { WitnessOrigin::UnstableProbe };
                    match (r.status, trap) {
                        (ReturnStatus::TrappedForward, Some(t)) => {
                            let w = witness(z, origin, t);
                            if stable {
                                rep.trapped_forward.push(w);
                            } else {
                                rep.trapped_backward.push(w);
                            }
                        }
                        _ => rep.anomalies += 1,
                    }
                }
            }
        }
    }
    rep.anomalies += rep.trapped_forward.iter().chain(&rep.trapped_backward).filter(|w| !w.consistent).count();
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub max_defect: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

/// Finite-difference check that the first-return map to `annulus`
/// preserves `cos φ ds dφ` on an `n_s × n_φ` grid of cell centres.
pub fn return_map_area_check(
    m: &SurfaceMetric,
    annulus: &BirkhoffAnnulus,
    n_s: usize,
    n_phi: usize,
    budget: f64,
) -> Result<AreaReport> {
    let mut pts = Vec::with_capacity(n_s * n_phi);
    for i in 0..n_s {
        for j in 0..n_phi {
            let s = annulus.length * (i as f64 + 0.5) / n_s as f64;
            let phi = -FRAC_PI_2 + PI * (j as f64 + 0.5) / n_phi as f64;
            pts.push((s, phi));
        }
    }
    return_map_area_check_at(m, annulus, &pts, budget)
}

/// Same check at explicit interior points `(s, φ)`.
pub fn return_map_area_check_at(
    m: &SurfaceMetric,
    annulus: &BirkhoffAnnulus,
    pts: &[(f64, f64)],
    budget: f64,
) -> Result<AreaReport> {
    if pts.iter().any(|p| p.1.abs() >= FRAC_PI_2) {
        return Err(Error::Precondition("grid touches the annulus boundary".into()));
    }
    let annuli = std::slice::from_ref(annulus);
    let psi = |s: f64, phi: f64| -> Option<(f64, f64)> {
        let z = annulus.tangent_at(m, s, phi).ok()?;
        let r = first_return(m, annuli, &z, budget).ok()?;
        r.hit.map(|h| (h.s, h.phi))
    };
    let h = 1e-5;
    let l = annulus.length;
    let unwrap = |a: f64, b: f64| {
        let d = a - b;
        d - l * (d / l).round()
    };
    let defects: Vec<Option<f64>> = pts
        .par_iter()
        .map(|&(s, phi)| {
            let c = psi(s, phi)?;
            let (sp, sm) = (psi(s + h, phi)?, psi(s - h, phi)?);
            let (pp, pm) = (psi(s, phi + h)?, psi(s, phi - h)?);
            let j = [
                [unwrap(sp.0, sm.0) / (2.0 * h), unwrap(pp.0, pm.0) / (2.0 * h)],
                [(sp.1 - sm.1) / (2.0 * h), (pp.1 - pm.1) / (2.0 * h)],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            Some((det * c.1.cos() / phi.cos() - 1.0).abs())
        })
        .collect();
    let mut rep = AreaReport { max_defect: 0.0, evaluated: 0, excluded: 0 };
    for d in defects {
        match d {
            Some(d) => {
                rep.evaluated += 1;
                rep.max_defect = rep.max_defect.max(d);
            }
            None => rep.excluded += 1,
        }
    }
    Ok(rep)
}

/// Seeds on one branch of a local invariant manifold, as a function of the
/// phase along the orbit.
struct Branch<'a> {
    m: &'a SurfaceMetric,
    tr: Trajectory,
    length: f64,
    side: f64,
    delta: f64,
}

impl<'a> Branch<'a> {
    fn new(m: &'a SurfaceMetric, rec: &ClosedGeodesicRecord, side: Side, stable: bool, delta: f64) -> Result<Self> {
        let lambda = if stable { rec.floquet.sigma_inv[0] } else { rec.floquet.sigma[0] };
        let e = rec.floquet.eigenvector(lambda);
        if e[0].abs() < 1e-12 {
            return Err(Error::Precondition("eigendirection is vertical".into()));
        }
        let tr = integrate_with(m, &rec.start, rec.length, e, FlowOptions::default())?;
        Ok(Self { m, tr, length: rec.length, side: side.sign(), delta })
    }

    fn seed(&self, alpha: f64) -> Result<UnitTangent> {
        let y = self.tr.state_at(self.m, alpha.rem_euclid(self.length))?;
        let z = UnitTangent::from_state(&y);
        let scale = self.side * self.delta / y[4];
        displace(self.m, &z, [y[4] * scale, y[5] * scale])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicPoint {
    pub tangent: UnitTangent,
    pub s: f64,
    pub phi: f64,
    pub forward_distance: f64,
    pub backward_distance: f64,
}

pub const HOMOCLINIC_SEEDS: usize = 64;

/// Transverse homoclinic points of a hyperbolic waist winding once in `u`,
/// found on the parallel `v = transversal_v`. The unstable branch on
/// `side_u` is grown forward and the stable branch on `side_s` backward to
/// their first crossings heading toward the waist; transverse crossings of
/// the two traces are refined by Newton's method and kept when the orbit
/// comes within `1e-3` of the waist lift in both time directions.
pub fn detect_homoclinic(
    m: &SurfaceMetric,
    waist: &ClosedGeodesicRecord,
    side_u: Side,
    side_s: Side,
    transversal_v: f64,
    budget: f64,
) -> Result<Vec<HomoclinicPoint>> {
    if waist.kind != OrbitType::Hyperbolic {
        return Err(Error::NotHyperbolic);
    }
    if waist.curve.shift[1] != 0.0 || waist.curve.shift[0] == 0.0 {
        return Err(Error::Precondition("waist must wind once around the u direction".into()));
    }
    let vw = waist.curve.points.iter().map(|p| p.v).sum::<f64>() / waist.curve.len() as f64;
    let toward_up = transversal_v < vw;
    // orbits heading toward the waist cross with v̇ of this sign; the
    // unreversed annulus over a v-line has its normal along +v
    let a_in = BirkhoffAnnulus::level(m, 1, transversal_v, !toward_up)?;
    let a_out = BirkhoffAnnulus::level(m, 1, transversal_v, toward_up)?;
    let delta = 1e-4 * m.inj_radius_estimate;
    let unstable = Branch::new(m, waist, side_u, false, delta)?;
    let stable = Branch::new(m, waist, side_s, true, delta)?;
    let ins = std::slice::from_ref(&a_in);
    let outs = std::slice::from_ref(&a_out);
    let hit_u = |alpha: f64| -> Option<(f64, f64)> {
        let z = unstable.seed(alpha).ok()?;
        first_return(m, ins, &z, budget).ok()?.hit.map(|h| (h.s, h.phi))
    };
    let hit_s = |beta: f64| -> Option<(f64, f64)> {
        let z = stable.seed(beta).ok()?.flip();
        let h = first_return(m, outs, &z, budget).ok()?.hit?;
        let mut y = h.state;
        y[2] = -y[2];
        y[3] = -y[3];
        a_in.coords(m, &y).ok()?
    };
    let l = a_in.length;
    let sdiff = |a: f64, b: f64| {
        let d = a - b;
        d - l * (d / l).round()
    };
    let trace = |f: &(dyn Fn(f64) -> Option<(f64, f64)> + Sync), period: f64| -> Vec<(f64, (f64, f64))> {
        let mut pts: Vec<(f64, Option<(f64, f64)>)> = (0..HOMOCLINIC_SEEDS)
            .into_par_iter()
            .map(|k| {
                let a = period * k as f64 / HOMOCLINIC_SEEDS as f64;
                (a, f(a))
            })
            .collect();
        for _ in 0..5 {
            let n = pts.len();
            let gaps: Vec<f64> = (0..n)
                .filter_map(|i| {
                    let (a, pa) = pts[i];
                    let (b, pb) = pts[(i + 1) % n];
                    let b = if i + 1 == n { b + period } else { b };
                    match (pa, pb) {
                        (Some(p), Some(q)) if sdiff(p.0, q.0).hypot(p.1 - q.1) > 1e-2 => Some(0.5 * (a + b)),
                        _ => None,
                    }
                })
                .collect();
            if gaps.is_empty() || pts.len() > 4096 {
                break;
            }
            let extra: Vec<(f64, Option<(f64, f64)>)> = gaps.into_par_iter().map(|a| (a % period, f(a))).collect();
            pts.extend(extra);
            pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        }
        pts.into_iter().filter_map(|(a, p)| p.map(|p| (a, p))).collect()
    };
    let tu = trace(&hit_u, waist.length);
    let ts = trace(&hit_s, waist.length);
    let mut candidates = Vec::new();
    for i in 0..tu.len() {
        let (a0, p0) = tu[i];
        let (a1, p1) = tu[(i + 1) % tu.len()];
        if sdiff(p1.0, p0.0).hypot(p1.1 - p0.1) > 0.05 {
            continue;
        }
        let r = [sdiff(p1.0, p0.0), p1.1 - p0.1];
        for j in 0..ts.len() {
            let (b0, q0) = ts[j];
            let (b1, q1) = ts[(j + 1) % ts.len()];
            if sdiff(q1.0, q0.0).hypot(q1.1 - q0.1) > 0.05 {
                continue;
            }
            let s = [sdiff(q1.0, q0.0), q1.1 - q0.1];
            let d = [sdiff(q0.0, p0.0), q0.1 - p0.1];
            let den = r[0] * s[1] - r[1] * s[0];
            let sine = den.abs() / (r[0].hypot(r[1]) * s[0].hypot(s[1])).max(1e-300);
            if sine < 1e-3 {
                continue;
            }
            let t = (d[0] * s[1] - d[1] * s[0]) / den;
            let w = (d[0] * r[1] - d[1] * r[0]) / den;
            if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&w) {
                let a1 = if a1 < a0 { a1 + waist.length } else { a1 };
                let b1 = if b1 < b0 { b1 + waist.length } else { b1 };
                candidates.push((a0 + t * (a1 - a0), b0 + w * (b1 - b0)));
            }
        }
    }
    let mut found: Vec<HomoclinicPoint> = Vec::new();
    for (mut a, mut b) in candidates {
        let mut ok = false;
        for _ in 0..15 {
            let (Some(pu), Some(ps)) = (hit_u(a), hit_s(b)) else { break };
            let res = [sdiff(pu.0, ps.0), pu.1 - ps.1];
            if res[0].hypot(res[1]) < 1e-11 {
                ok = true;
                break;
            }
            let h = 1e-7 * waist.length;
            let (Some(pa), Some(pb)) = (hit_u(a + h), hit_s(b + h)) else { break };
            let jac = [
                [sdiff(pa.0, pu.0) / h, -sdiff(pb.0, ps.0) / h],
                [(pa.1 - pu.1) / h, -(pb.1 - ps.1) / h],
            ];
            let inv = pinv2(&jac, 1e-12);
            a -= inv[0][0] * res[0] + inv[0][1] * res[1];
            b -= inv[1][0] * res[0] + inv[1][1] * res[1];
        }
        if !ok {
            continue;
        }
        let Some((s, phi)) = hit_u(a) else { continue };
        if found.iter().any(|f| sdiff(f.s, s).abs() < 1e-6 && (f.phi - phi).abs() < 1e-6) {
            continue;
        }
        let z = a_in.tangent_at(m, s, phi)?;
        let wa = BirkhoffAnnulus::over(m, waist, false)?;
        let closest = |z: &UnitTangent| -> Result<f64> {
            let tr = integrate_with(m, z, budget, [0.0, 0.0], FlowOptions::default())?;
            let mut best = f64::INFINITY;
            for y in tr.states.iter().skip(tr.states.len() / 4) {
                best = best.min(wa.lift_distance(m, y)?);
            }
            Ok(best)
        };
        let (fd, bd) = (closest(&z)?, closest(&z.flip())?);
        if fd < 1e-3 && bd < 1e-3 {
            found.push(HomoclinicPoint { tangent: z, s, phi, forward_distance: fd, backward_distance: bd });
        }
    }
    Ok(found)
}

/// Whether `m` is a sphere chart, for callers choosing default budgets.
pub fn is_sphere(m: &SurfaceMetric) -> bool {
    m.kind == SurfaceKind::SphereOfRevolution
}
