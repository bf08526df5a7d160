//! Curve shortening flow on closed curves in the lifted chart.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::flow::{bisect, integrate_with, ClosedGeodesicRecord, FlowOptions, HomotopyTag, UnitTangent};
use crate::geom::{MetricData, SurfaceKind, SurfaceMetric, SurfacePoint, TangentVector};
use crate::linalg::{pinv2, solve_cyclic_tridiagonal};
use crate::{Error, Result};

/// Closed polygon in the lifted chart. The curve closes up to the deck
/// translation `shift`: the point after the last one is `points[0] + shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCurve {
    pub points: Vec<SurfacePoint>,
    pub shift: [f64; 2],
}

impl DiscreteCurve {
    pub fn new(points: Vec<SurfacePoint>, shift: [f64; 2]) -> Self {
        Self { points, shift }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point `i` for any integer `i`, continued by the deck translation.
    pub fn at(&self, i: isize) -> SurfacePoint {
        let n = self.points.len() as isize;
        let k = i.div_euclid(n);
        let p = self.points[i.rem_euclid(n) as usize];
        SurfacePoint::new(p.u + k as f64 * self.shift[0], p.v + k as f64 * self.shift[1])
    }
}

impl DiscreteCurve {
    /// Samples `f` at `t = k / n`, `k = 0..n`; `f(1)` must equal
    /// `f(0) + shift`.
    pub fn from_fn<F: Fn(f64) -> SurfacePoint>(n: usize, shift: [f64; 2], f: F) -> Self {
        Self::new((0..n).map(|k| f(k as f64 / n as f64)).collect(), shift)
    }

    /// Euclidean circle in the chart, counterclockwise.
    pub fn circle(center: SurfacePoint, radius: f64, n: usize) -> Self {
        Self::from_fn(n, [0.0, 0.0], |t| {
            SurfacePoint::new(center.u + radius * (TAU * t).cos(), center.v + radius * (TAU * t).sin())
        })
    }

    /// Loop in the class of `shift` through `base`, displaced by
    /// `amp · sin(2π j t)` in the chart direction perpendicular to `shift`.
    pub fn sine_loop(base: SurfacePoint, shift: [f64; 2], amp: f64, j: u32, n: usize) -> Self {
        let len = shift[0].hypot(shift[1]);
        let perp = [-shift[1] / len, shift[0] / len];
        Self::from_fn(n, shift, |t| {
            let w = amp * (TAU * j as f64 * t).sin();
            SurfacePoint::new(base.u + t * shift[0] + w * perp[0], base.v + t * shift[1] + w * perp[1])
        })
    }

    fn segment(&self, i: usize) -> (SurfacePoint, SurfacePoint) {
        (self.at(i as isize), self.at(i as isize + 1))
    }

    pub fn centroid(&self) -> SurfacePoint {
        let n = self.points.len() as f64;
        let (su, sv) = self.points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.u, b + p.v));
        SurfacePoint::new(su / n, sv / n)
    }

    /// CSV point list `u,v`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,v\n");
        for p in &self.points {
            s.push_str(&format!("{},{}\n", p.u, p.v));
        }
        s
    }
}

fn metric(m: &SurfaceMetric, p: SurfacePoint) -> Result<MetricData> {
    m.metric_at(p)
}

fn chord(m: &SurfaceMetric, a: SurfacePoint, b: SurfacePoint) -> Result<f64> {
    let mid = SurfacePoint::new(0.5 * (a.u + b.u), 0.5 * (a.v + b.v));
    Ok(metric(m, mid)?.norm([b.u - a.u, b.v - a.v]))
}

/// Length as the sum of chords measured in the metric at their midpoints.
pub fn curve_length(m: &SurfaceMetric, c: &DiscreteCurve) -> Result<f64> {
    let mut l = 0.0;
    for i in 0..c.len() {
        let (a, b) = c.segment(i);
        l += chord(m, a, b)?;
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub k: Vec<f64>,
    pub normals: Vec<[f64; 2]>,
    pub tangents: Vec<[f64; 2]>,
    pub length: f64,
}

impl CurvatureProfile {
    pub fn max_abs(&self) -> f64 {
        self.k.iter().fold(0.0, |a, k| a.max(k.abs()))
    }
}

/// Geodesic curvature at each vertex from non-uniform three-point
/// differences, with the positively oriented unit normals and the length.
pub fn curvature_profile(m: &SurfaceMetric, c: &DiscreteCurve) -> Result<CurvatureProfile> {
    let n = c.len();
    if n < 3 {
        return Err(Error::DegenerateCurve("too few points".into()));
    }
    let mut edges = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = c.segment(i);
        let h = chord(m, a, b)?;
        if !(h > 1e-14) {
            return Err(Error::DegenerateCurve(format!("zero-length edge at {i}")));
        }
        edges.push(h);
    }
    let mut out = CurvatureProfile { k: vec![0.0; n], normals: vec![[0.0; 2]; n], tangents: vec![[0.0; 2]; n], length: edges.iter().sum() };
    for i in 0..n {
        let (hm, hp) = (edges[(i + n - 1) % n], edges[i]);
        let (xm, x0, xp) = (c.at(i as isize - 1), c.at(i as isize), c.at(i as isize + 1));
        let den = hm * hp * (hm + hp);
        let d1 = |a: f64, b: f64, c0: f64| (hm * hm * b - hp * hp * a + (hp * hp - hm * hm) * c0) / den;
        let d2 = |a: f64, b: f64, c0: f64| 2.0 * (hm * b - (hm + hp) * c0 + hp * a) / den;
        let xs = [d1(xm.u, xp.u, x0.u), d1(xm.v, xp.v, x0.v)];
        let xss = [d2(xm.u, xp.u, x0.u), d2(xm.v, xp.v, x0.v)];
        let d = metric(m, x0)?;
        let g = d.christoffel(xs, xs);
        let acc = [xss[0] + g[0], xss[1] + g[1]];
        let nu = d.left_normal(xs);
        let speed2 = d.inner(xs, xs);
        out.k[i] = d.inner(acc, nu) / speed2;
        out.normals[i] = nu;
        out.tangents[i] = xs;
    }
    Ok(out)
}

/// Redistributes the vertices uniformly in arclength along the polygon,
/// keeping vertex 0.
pub fn resample(m: &SurfaceMetric, c: &DiscreteCurve, n_new: usize) -> Result<DiscreteCurve> {
    let n = c.len();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for i in 0..n {
        let (a, b) = c.segment(i);
        cum.push(cum[i] + chord(m, a, b)?);
    }
    let total = cum[n];
    let mut pts = Vec::with_capacity(n_new);
    let mut j = 0;
    for k in 0..n_new {
        let s = total * k as f64 / n_new as f64;
        while j + 1 < n && cum[j + 1] <= s {
            j += 1;
        }
        let (a, b) = c.segment(j);
        let seg = cum[j + 1] - cum[j];
        let t = if seg > 0.0 { (s - cum[j]) / seg } else { 0.0 };
        pts.push(SurfacePoint::new(a.u + t * (b.u - a.u), a.v + t * (b.v - a.v)));
    }
    Ok(DiscreteCurve::new(pts, c.shift))
}

fn orient(a: SurfacePoint, b: SurfacePoint, c: SurfacePoint) -> f64 {
    (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u)
}

fn segments_meet(p: (SurfacePoint, SurfacePoint), q: (SurfacePoint, SurfacePoint)) -> bool {
    let o1 = orient(p.0, p.1, q.0);
    let o2 = orient(p.0, p.1, q.1);
    let o3 = orient(q.0, q.1, p.0);
    let o4 = orient(q.0, q.1, p.1);
    o1 * o2 <= 0.0 && o3 * o4 <= 0.0
}

/// Deck translations to test against: the period lattice window
/// `{−1, 0, 1}²` together with `±shift`.
fn translates(m: &SurfaceMetric, shift: [f64; 2]) -> Vec<[f64; 2]> {
    let (pu, pv) = m.periods();
    let mut out = Vec::new();
    for a in -1..=1 {
        let vs: Vec<i32> = if pv.is_some() { vec![-1, 0, 1] } else { vec![0] };
        for b in vs {
            out.push([a as f64 * pu, b as f64 * pv.unwrap_or(0.0)]);
        }
    }
    for s in [shift, [-shift[0], -shift[1]]] {
        if !out.iter().any(|t| (t[0] - s[0]).abs() < 1e-12 && (t[1] - s[1]).abs() < 1e-12) {
            out.push(s);
        }
    }
    out
}

/// Whether the closed curve is embedded on the surface: no two non-adjacent
/// segments of the lift meet, including deck-translated copies.
pub fn is_embedded(m: &SurfaceMetric, c: &DiscreteCurve) -> bool {
    let n = c.len();
    let segs: Vec<_> = (0..n).map(|i| c.segment(i)).collect();
    let (mut ulo, mut uhi, mut vlo, mut vhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in c.points.iter().chain([c.at(n as isize)].iter()) {
        ulo = ulo.min(p.u);
        uhi = uhi.max(p.u);
        vlo = vlo.min(p.v);
        vhi = vhi.max(p.v);
    }
    let trs: Vec<[f64; 2]> = translates(m, c.shift)
        .into_iter()
        .filter(|t| t[0] <= uhi - ulo && -t[0] <= uhi - ulo && t[1] <= vhi - vlo && -t[1] <= vhi - vlo)
        .collect();
    struct Item {
        lo: f64,
        hi: f64,
        vlo: f64,
        vhi: f64,
        idx: usize,
        tr: usize,
    }
    let mut copies = Vec::with_capacity(n * trs.len());
    let mut width: f64 = 0.0;
    for (ti, t) in trs.iter().enumerate() {
        for (i, s) in segs.iter().enumerate() {
            let (a, b) = (s.0, s.1);
            let lo = a.u.min(b.u) + t[0];
            let hi = a.u.max(b.u) + t[0];
            width = width.max(hi - lo);
            copies.push(Item { lo, hi, vlo: a.v.min(b.v) + t[1], vhi: a.v.max(b.v) + t[1], idx: i, tr: ti });
        }
    }
    copies.sort_unstable_by(|a, b| a.lo.total_cmp(&b.lo));
    let los: Vec<f64> = copies.iter().map(|c| c.lo).collect();
    let is_zero = |t: &[f64; 2]| t[0] == 0.0 && t[1] == 0.0;
    let same = |t: &[f64; 2], s: [f64; 2]| (t[0] - s[0]).abs() < 1e-12 && (t[1] - s[1]).abs() < 1e-12;
    for (i, s) in segs.iter().enumerate() {
        let (a, b) = (s.0, s.1);
        let (lo, hi) = (a.u.min(b.u), a.u.max(b.u));
        let (vlo, vhi) = (a.v.min(b.v), a.v.max(b.v));
        let start = los.partition_point(|x| *x < lo - width);
        let end = los.partition_point(|x| *x <= hi);
        for cp in &copies[start..end] {
            if cp.hi < lo || cp.vhi < vlo || cp.vlo > vhi {
                continue;
            }
            let t = &trs[cp.tr];
            let j = cp.idx;
            let next_shift = if i == n - 1 { c.shift } else { [0.0, 0.0] };
            let prev_shift = if i == 0 { [-c.shift[0], -c.shift[1]] } else { [0.0, 0.0] };
            if (j == i && is_zero(t))
                || (j == (i + 1) % n && same(t, next_shift))
                || ((j + 1) % n == i && same(t, prev_shift))
            {
                continue;
            }
            let q = segs[j];
            let q = (SurfacePoint::new(q.0.u + t[0], q.0.v + t[1]), SurfacePoint::new(q.1.u + t[0], q.1.v + t[1]));
            if segments_meet(*s, q) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunnelWindow {
    pub length: f64,
    pub eps: f64,
}

/// Membership in the funnel: `|L − ℓ| < ε²` and `‖k‖_∞ < ε`.
pub fn funnel_check(m: &SurfaceMetric, c: &DiscreteCurve, w: FunnelWindow) -> bool {
    match curvature_profile(m, c) {
        Ok(p) => (p.length - w.length).abs() < w.eps * w.eps && p.max_abs() < w.eps,
        Err(_) => false,
    }
}

/// Open region of the lifted chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    /// `v_lo < v < v_hi`.
    Band { v_lo: f64, v_hi: f64 },
    /// `v < v_boundary` when `below`, else `v > v_boundary`.
    Cap { v_boundary: f64, below: bool },
    /// Open rectangle in the lift.
    Rect { u: [f64; 2], v: [f64; 2] },
}

impl RegionSpec {
    pub fn contains(&self, p: SurfacePoint) -> bool {
        match *self {
            RegionSpec::Band { v_lo, v_hi } => p.v > v_lo && p.v < v_hi,
            RegionSpec::Cap { v_boundary, below } => {
                if below {
                    p.v < v_boundary
                } else {
                    p.v > v_boundary
                }
            }
            RegionSpec::Rect { u, v } => p.u > u[0] && p.u < u[1] && p.v > v[0] && p.v < v[1],
        }
    }

    pub fn contains_curve(&self, c: &DiscreteCurve) -> bool {
        c.points.iter().all(|p| self.contains(*p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub max_steps: usize,
    pub eps_target: f64,
    pub dt_factor: f64,
    /// `h_min = L / h_min_divisor`; the curve keeps about
    /// `L / (1.5 h_min)` vertices.
    pub h_min_divisor: f64,
    /// Defaults to `1e-3 · inj` when `None`.
    pub collapse_tol: Option<f64>,
    pub polish: bool,
    pub record_trace: bool,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            max_steps: 400_000,
            eps_target: 1e-3,
            dt_factor: 0.4,
            h_min_divisor: 256.0,
            collapse_tol: None,
            polish: true,
            record_trace: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FlowOutcome {
    ConvergedGeodesic(Box<ClosedGeodesicRecord>),
    Collapsed { point: SurfacePoint, s_extinct: f64 },
    Running { curve: DiscreteCurve, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub s: f64,
    pub length: f64,
    pub max_k: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub outcome: FlowOutcome,
    pub final_curve: DiscreteCurve,
    pub trace: Vec<TraceRow>,
    pub steps: usize,
    pub rejected: usize,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("s,L,max_k,n\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.s, r.length, r.max_k, r.n));
    }
    s
}

/// Homotopy class of a closed curve from its deck translation.
pub fn homotopy_of(m: &SurfaceMetric, shift: [f64; 2]) -> HomotopyTag {
    match m.periods() {
        (pu, Some(pv)) => {
            let p = (shift[0] / pu).round() as i32;
            let q = (shift[1] / pv).round() as i32;
            if p == 0 && q == 0 {
                HomotopyTag::Contractible(true)
            } else {
                HomotopyTag::Torus { p, q }
            }
        }
        _ => HomotopyTag::Contractible(true),
    }
}

/// One semi-implicit step `(I − Δs D²) x⁺ = x + Δs Γ(x_σ, x_σ)` on a curve
/// sampled uniformly with metric spacing `h`.
fn implicit_step(m: &SurfaceMetric, c: &DiscreteCurve, h: f64, dt: f64) -> Result<DiscreteCurve> {
    let n = c.len();
    let r = dt / (h * h);
    let mut rhs_u = vec![0.0; n];
    let mut rhs_v = vec![0.0; n];
    for i in 0..n {
        let (xm, x0, xp) = (c.at(i as isize - 1), c.at(i as isize), c.at(i as isize + 1));
        let xs = [(xp.u - xm.u) / (2.0 * h), (xp.v - xm.v) / (2.0 * h)];
        let g = metric(m, x0)?.christoffel(xs, xs);
        rhs_u[i] = x0.u + dt * g[0];
        rhs_v[i] = x0.v + dt * g[1];
    }
    // the deck translation enters through the wrap-around neighbours
    rhs_u[n - 1] += r * c.shift[0];
    rhs_v[n - 1] += r * c.shift[1];
    rhs_u[0] -= r * c.shift[0];
    rhs_v[0] -= r * c.shift[1];
    let lower = vec![-r; n];
    let upper = vec![-r; n];
    let diag = vec![1.0 + 2.0 * r; n];
    let u = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs_u);
    let v = solve_cyclic_tridiagonal(&lower, &diag, &upper, &rhs_v);
    Ok(DiscreteCurve::new(u.into_iter().zip(v).map(|(u, v)| SurfacePoint::new(u, v)).collect(), c.shift))
}

enum Rejection {
    Embedding,
    Region,
    Length,
}

/// Stateful curve shortening run; `step` performs one accepted step.
pub struct CsfRunner<'a> {
    m: &'a SurfaceMetric,
    pub policy: StepPolicy,
    region: Option<RegionSpec>,
    pub curve: DiscreteCurve,
    pub s: f64,
    pub length: f64,
    pub steps: usize,
    pub rejected: usize,
    pub trace: Vec<TraceRow>,
    max_k: f64,
}

impl<'a> CsfRunner<'a> {
    pub fn new(m: &'a SurfaceMetric, c0: &DiscreteCurve, policy: StepPolicy, region: Option<RegionSpec>) -> Result<Self> {
        if c0.len() < 16 {
            return Err(Error::Precondition("curve needs at least 16 points".into()));
        }
        if let Some(r) = region {
            if !r.contains_curve(c0) {
                return Err(Error::Precondition("initial curve is not inside the region".into()));
            }
        }
        if !is_embedded(m, c0) {
            return Err(Error::Precondition("initial curve is not embedded".into()));
        }
        let curve = resample(m, c0, Self::target_n(&policy))?;
        let length = curve_length(m, &curve)?;
        let mut run =
            Self { m, policy, region, curve, s: 0.0, length, steps: 0, rejected: 0, trace: Vec::new(), max_k: 0.0 };
        run.record()?;
        Ok(run)
    }

    fn target_n(p: &StepPolicy) -> usize {
        (p.h_min_divisor / 1.5).round().max(16.0) as usize
    }

    fn record(&mut self) -> Result<()> {
        self.max_k = curvature_profile(self.m, &self.curve)?.max_abs();
        if self.policy.record_trace {
            self.trace.push(TraceRow { s: self.s, length: self.length, max_k: self.max_k, n: self.curve.len() });
        }
        Ok(())
    }

    pub fn collapse_tol(&self) -> f64 {
        self.policy.collapse_tol.unwrap_or(1e-3 * self.m.inj_radius_estimate)
    }

    pub fn collapsed(&self) -> bool {
        0.5 * self.length < self.collapse_tol()
    }

    /// Sup of the geodesic curvature of the current curve.
    pub fn max_curvature(&self) -> f64 {
        self.max_k
    }

    /// One accepted step. Returns `Ok(false)` when no step shortening the
    /// curve could be found (the length is at its numerical floor).
    pub fn step(&mut self) -> Result<bool> {
        let n = self.curve.len();
        let h = self.length / n as f64;
        let mut dt = self.policy.dt_factor * h * h;
        let mut last = Rejection::Length;
        for _ in 0..=8 {
            let moved = implicit_step(self.m, &self.curve, h, dt)?;
            let next = resample(self.m, &moved, Self::target_n(&self.policy))?;
            let verdict = if !is_embedded(self.m, &next) {
                Some(Rejection::Embedding)
            } else if self.region.is_some_and(|r| !r.contains_curve(&next)) {
                Some(Rejection::Region)
            } else {
                let l = curve_length(self.m, &next)?;
                if l <= self.length {
                    self.curve = next;
                    self.length = l;
                    self.s += dt;
                    self.steps += 1;
                    self.record()?;
                    return Ok(true);
                }
                Some(Rejection::Length)
            };
            last = verdict.unwrap();
            self.rejected += 1;
            dt *= 0.5;
        }
        match last {
            Rejection::Embedding => Err(Error::EmbeddednessLost { step: self.steps }),
            Rejection::Region => Err(Error::ConvexityViolation { step: self.steps }),
            Rejection::Length => Ok(false),
        }
    }

    /// Flows until convergence, collapse or the step budget.
    pub fn run(mut self) -> Result<FlowRun> {
        let eps = self.policy.eps_target;
        let mut polish_below = 0.3 * eps;
        loop {
            if self.collapsed() {
                let (point, s_extinct) = (self.curve.centroid(), self.s);
                return Ok(self.finish(FlowOutcome::Collapsed { point, s_extinct }));
            }
            let k = self.max_curvature();
            if self.policy.polish && k < polish_below {
                if let Ok(rec) = polish_closed_geodesic(self.m, &self.curve) {
                    if funnel_check(self.m, &self.curve, FunnelWindow { length: rec.length, eps }) {
                        return Ok(self.finish(FlowOutcome::ConvergedGeodesic(Box::new(rec))));
                    }
                }
                polish_below = 0.5 * k;
            }
            if self.steps >= self.policy.max_steps {
                let (curve, s) = (self.curve.clone(), self.s);
                return Ok(self.finish(FlowOutcome::Running { curve, s }));
            }
            if !self.step()? {
                if k < eps && self.policy.polish {
                    let rec = polish_closed_geodesic(self.m, &self.curve)?;
                    return Ok(self.finish(FlowOutcome::ConvergedGeodesic(Box::new(rec))));
                }
                return Err(Error::DegenerateCurve(format!("length stalled with max |k| = {k:e}")));
            }
        }
    }

    fn finish(self, outcome: FlowOutcome) -> FlowRun {
        FlowRun { outcome, final_curve: self.curve, trace: self.trace, steps: self.steps, rejected: self.rejected }
    }
}

pub fn evolve(m: &SurfaceMetric, c0: &DiscreteCurve, policy: StepPolicy) -> Result<FlowRun> {
    CsfRunner::new(m, c0, policy, None)?.run()
}

pub fn region_confined_evolve(m: &SurfaceMetric, c0: &DiscreteCurve, region: RegionSpec, policy: StepPolicy) -> Result<FlowRun> {
    CsfRunner::new(m, c0, policy, Some(region))?.run()
}

/// Shooting setup for closing a nearly closed geodesic: the transversal is
/// the chart line `p0 + a ν0`, the direction is rotated by `b` from the
/// chart vector `t0`.
struct Shooting<'a> {
    m: &'a SurfaceMetric,
    p0: SurfacePoint,
    t0: [f64; 2],
    nu0: [f64; 2],
    g0: MetricData,
    shift: [f64; 2],
    length: f64,
}

impl Shooting<'_> {
    fn frame(&self, p: SurfacePoint) -> Result<(MetricData, [f64; 2], [f64; 2])> {
        let d = metric(self.m, p)?;
        let n = d.norm(self.t0);
        let e1 = [self.t0[0] / n, self.t0[1] / n];
        let e2 = d.left_normal(e1);
        Ok((d, e1, e2))
    }

    fn start(&self, a: f64, b: f64) -> Result<UnitTangent> {
        let p = SurfacePoint::new(self.p0.u + a * self.nu0[0], self.p0.v + a * self.nu0[1]);
        let (_, e1, e2) = self.frame(p)?;
        let (s, c) = b.sin_cos();
        Ok(UnitTangent { base: p, dir: TangentVector::new(c * e1[0] + s * e2[0], c * e1[1] + s * e2[1]) })
    }

    fn side(&self, y: &[f64]) -> f64 {
        let d = [y[0] - self.p0.u - self.shift[0], y[1] - self.p0.v - self.shift[1]];
        self.g0.inner(d, self.t0)
    }

    /// Return time and the residual `(a' − a, b' − b)`.
    fn residual(&self, a: f64, b: f64) -> Result<(f64, [f64; 2])> {
        let z = self.start(a, b)?;
        let tr = integrate_with(self.m, &z, 1.5 * self.length, [0.0, 0.0], FlowOptions::default())?;
        for i in 0..tr.times.len() - 1 {
            if tr.times[i + 1] < 0.5 * self.length {
                continue;
            }
            let (fa, fb) = (self.side(&tr.states[i]), self.side(&tr.states[i + 1]));
            if fa <= 0.0 && fb > 0.0 {
                let t = bisect(|t| Ok(self.side(&tr.state_at(self.m, t)?)), tr.times[i], tr.times[i + 1], 1e-14)?;
                let y = tr.state_at(self.m, t)?;
                let d = [y[0] - self.p0.u - self.shift[0], y[1] - self.p0.v - self.shift[1]];
                let a1 = self.g0.inner(d, self.nu0);
                let (dh, e1, e2) = self.frame(SurfacePoint::new(y[0], y[1]))?;
                let w = [y[2], y[3]];
                let b1 = dh.inner(w, e2).atan2(dh.inner(w, e1));
                return Ok((t, [a1 - a, b1 - b]));
            }
        }
        Err(Error::NotClosed { gap: f64::INFINITY })
    }
}

/// Newton shooting from a nearly geodesic closed curve to an exact closed
/// geodesic in the same class.
pub fn polish_closed_geodesic(m: &SurfaceMetric, c: &DiscreteCurve) -> Result<ClosedGeodesicRecord> {
    let prof = curvature_profile(m, c)?;
    let p0 = c.points[0];
    let g0 = metric(m, p0)?;
    let t0 = prof.tangents[0];
    let nt = g0.norm(t0);
    let t0 = [t0[0] / nt, t0[1] / nt];
    let sh = Shooting { m, p0, t0, nu0: g0.left_normal(t0), g0, shift: c.shift, length: prof.length };
    let (mut a, mut b) = (0.0, 0.0);
    let mut best = f64::INFINITY;
    let mut time = prof.length;
    for _ in 0..40 {
        let (t, r) = sh.residual(a, b)?;
        time = t;
        let norm = r[0].hypot(r[1]);
        best = norm;
        if norm < 1e-12 {
            break;
        }
        let hd = 1e-7;
        let mut jac = [[0.0; 2]; 2];
        for (col, (da, db)) in [(hd, 0.0), (0.0, hd)].into_iter().enumerate() {
            let (_, rp) = sh.residual(a + da, b + db)?;
            let (_, rm) = sh.residual(a - da, b - db)?;
            jac[0][col] = (rp[0] - rm[0]) / (2.0 * hd);
            jac[1][col] = (rp[1] - rm[1]) / (2.0 * hd);
        }
        let inv = pinv2(&jac, 1e-8);
        let step = [inv[0][0] * r[0] + inv[0][1] * r[1], inv[1][0] * r[0] + inv[1][1] * r[1]];
        // damp steps that would leave the neighbourhood of the curve
        let scale = (0.1 * prof.length / step[0].hypot(step[1]).max(1e-300)).min(1.0);
        a -= scale * step[0];
        b -= scale * step[1];
        if step[0].hypot(step[1]) < 1e-15 {
            break;
        }
    }
    if best > 1e-9 {
        return Err(Error::NotClosed { gap: best });
    }
    let z = sh.start(a, b)?;
    let kind = m.kind;
    let tag = if kind == SurfaceKind::SphereOfRevolution { HomotopyTag::Contractible(true) } else { homotopy_of(m, c.shift) };
    ClosedGeodesicRecord::from_orbit(m, &z, time, tag)
}
