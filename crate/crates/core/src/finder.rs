//! Searches for closed geodesics: class minimizers, minmax geodesics between
//! waists, nested chains inside disks and complete systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csf::{
    curvature_profile, curve_length, evolve, is_embedded, polish_closed_geodesic, region_confined_evolve, CsfRunner,
    DiscreteCurve, FlowOutcome, RegionSpec, StepPolicy,
};
use crate::flow::{ClosedGeodesicRecord, HomotopyTag, OrbitType};
use crate::geom::{SurfaceKind, SurfaceMetric, SurfacePoint};
use crate::{Error, Result};

/// Homotopy data for [`class_minimizer`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeedClass {
    /// Primitive class `(p, q)` of a torus.
    Lattice { p: i32, q: i32 },
    /// Any embedded seed curve.
    Curve(DiscreteCurve),
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Canonical representative of a lattice class: a slightly wavy straight
/// loop in the chart.
pub fn lattice_representative(m: &SurfaceMetric, p: i32, q: i32) -> Result<DiscreteCurve> {
    let (pu, pv) = m.periods();
    let Some(pv) = pv else {
        return Err(Error::WrongGenus);
    };
    if p == 0 && q == 0 {
        return Err(Error::Precondition("class (0, 0) is contractible".into()));
    }
    if gcd(p, q) != 1 {
        return Err(Error::Precondition(format!("class ({p}, {q}) is not primitive")));
    }
    let shift = [p as f64 * pu, q as f64 * pv];
    let amp = 0.02 * pu.min(pv);
    Ok(DiscreteCurve::sine_loop(SurfacePoint::new(0.1 * pu, 0.37 * pv), shift, amp, 1, 128))
}

/// Length minimizer in a homotopy class, reached by curve shortening from a
/// canonical representative.
pub fn class_minimizer(m: &SurfaceMetric, seed: &SeedClass) -> Result<ClosedGeodesicRecord> {
    let c0 = match seed {
        SeedClass::Lattice { p, q } => lattice_representative(m, *p, *q)?,
        SeedClass::Curve(c) => c.clone(),
    };
    let run = evolve(m, &c0, StepPolicy { record_trace: false, ..StepPolicy::default() })?;
    let mut rec = match run.outcome {
        FlowOutcome::ConvergedGeodesic(rec) => *rec,
        FlowOutcome::Collapsed { .. } => return Err(Error::FlowCollapsed { step: run.steps }),
        FlowOutcome::Running { .. } => {
            return Err(Error::BudgetExhausted(format!("no convergence after {} steps", run.steps)))
        }
    };
    if rec.kind == OrbitType::Degenerate && !rec.has_conjugate_points {
        rec.is_waist = waist_perturbation_check(m, &rec, 50, 1e-3, 0)?.passed;
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub samples: usize,
    pub amplitude: f64,
    /// Smallest `L(perturbed) − L(record)` over the samples.
    pub min_excess: f64,
    pub passed: bool,
}

/// Local minimality test: random normal perturbations of the record's
/// polygon built from Fourier modes `0..=3`, scaled to sup-norm `amp`.
pub fn waist_perturbation_check(
    m: &SurfaceMetric,
    rec: &ClosedGeodesicRecord,
    count: usize,
    amp: f64,
    seed: u64,
) -> Result<PerturbationReport> {
    let base = &rec.curve;
    let n = base.len();
    let prof = curvature_profile(m, base)?;
    let l0 = curve_length(m, base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_excess = f64::INFINITY;
    let mut embedded = true;
    for _ in 0..count {
        let coef: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let w: Vec<f64> = (0..n)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                coef.iter().enumerate().map(|(j, (a, b))| a * (j as f64 * t).cos() + b * (j as f64 * t).sin()).sum()
            })
            .collect();
        let sup = w.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-12);
        let pts = (0..n)
            .map(|i| {
                let p = base.points[i];
                let nu = prof.normals[i];
                let s = amp * w[i] / sup;
                SurfacePoint::new(p.u + s * nu[0], p.v + s * nu[1])
            })
            .collect();
        let c = DiscreteCurve::new(pts, base.shift);
        embedded &= is_embedded(m, &c);
        min_excess = min_excess.min(curve_length(m, &c)? - l0);
    }
    Ok(PerturbationReport { samples: count, amplitude: amp, min_excess, passed: embedded && min_excess >= -1e-9 })
}

/// Family of curves with a common deck shift and vertex count, read as a
/// piecewise linear path `λ ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweepout {
    pub curves: Vec<DiscreteCurve>,
}

impl Sweepout {
    pub fn new(curves: Vec<DiscreteCurve>) -> Result<Self> {
        if curves.len() < 2 {
            return Err(Error::Precondition("sweepout needs at least two curves".into()));
        }
        let (n, shift) = (curves[0].len(), curves[0].shift);
        if curves.iter().any(|c| c.len() != n || c.shift != shift) {
            return Err(Error::Precondition("sweepout curves differ in size or class".into()));
        }
        Ok(Self { curves })
    }

    /// `count` curves interpolating linearly between `a` and `b`.
    pub fn between(a: &DiscreteCurve, b: &DiscreteCurve, count: usize) -> Result<Self> {
        if a.len() != b.len() || a.shift != b.shift {
            return Err(Error::Precondition("endpoint curves differ in size or class".into()));
        }
        let curves = (0..count)
            .map(|k| lerp_curve(a, b, k as f64 / (count - 1) as f64))
            .collect();
        Self::new(curves)
    }

    pub fn at(&self, lambda: f64) -> DiscreteCurve {
        let segs = (self.curves.len() - 1) as f64;
        let x = (lambda.clamp(0.0, 1.0) * segs).min(segs - 1e-15);
        let k = x.floor() as usize;
        lerp_curve(&self.curves[k], &self.curves[k + 1], x - k as f64)
    }
}

fn lerp_curve(a: &DiscreteCurve, b: &DiscreteCurve, t: f64) -> DiscreteCurve {
    let pts = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| SurfacePoint::new(p.u + t * (q.u - p.u), p.v + t * (q.v - p.v)))
        .collect();
    DiscreteCurve::new(pts, a.shift)
}

/// Where a coarse flow from a curve ends up.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Settled {
    Collapsed(SurfacePoint),
    Curve { length: f64, centroid: SurfacePoint },
}

impl Settled {
    fn length(&self) -> f64 {
        match self {
            Settled::Collapsed(_) => 0.0,
            Settled::Curve { length, .. } => *length,
        }
    }
}

fn chart_distance(m: &SurfaceMetric, a: SurfacePoint, b: SurfacePoint) -> f64 {
    let (pu, pv) = m.periods();
    let near = |d: f64, p: f64| d - p * (d / p).round();
    let du = near(a.u - b.u, pu);
    let dv = match pv {
        Some(p) => near(a.v - b.v, p),
        None => a.v - b.v,
    };
    du.hypot(dv)
}

fn same_end(m: &SurfaceMetric, a: &Settled, b: &Settled) -> bool {
    match (a, b) {
        (Settled::Collapsed(p), Settled::Collapsed(q)) => chart_distance(m, *p, *q) < 0.3,
        (Settled::Curve { length: la, centroid: pa }, Settled::Curve { length: lb, centroid: pb }) => {
            (la - lb).abs() < 1e-2 * la.max(*lb) && chart_distance(m, *pa, *pb) < 0.3
        }
        _ => false,
    }
}

fn coarse_policy() -> StepPolicy {
    StepPolicy { h_min_divisor: 96.0, polish: false, record_trace: false, max_steps: 200_000, ..StepPolicy::default() }
}

/// Flows `c` on a coarse grid until it collapses or nearly stops; with
/// `snapshot` the curve of least sup-curvature along the way is kept.
fn settle(m: &SurfaceMetric, c: &DiscreteCurve, snapshot: bool) -> Result<(Settled, Option<(f64, DiscreteCurve)>)> {
    let policy = coarse_policy();
    let mut run = CsfRunner::new(m, c, policy, None)?;
    let mut best: Option<(f64, DiscreteCurve)> = None;
    loop {
        if run.collapsed() {
            return Ok((Settled::Collapsed(run.curve.centroid()), best));
        }
        let k = run.max_curvature();
        if snapshot && best.as_ref().is_none_or(|b| k < b.0) {
            best = Some((k, run.curve.clone()));
        }
        if k < 0.3 * policy.eps_target {
            break;
        }
        if run.steps >= policy.max_steps {
            return Err(Error::BudgetExhausted("coarse flow did not settle".into()));
        }
        if !run.step()? {
            break;
        }
    }
    Ok((Settled::Curve { length: run.length, centroid: run.curve.centroid() }, best))
}

/// Minmax closed geodesic of a sweepout: the sweep parameter is bisected to
/// the boundary between the basins of the two endpoint limits, and the
/// curve flowing closest to a geodesic from there is Newton polished.
pub fn minmax_geodesic(m: &SurfaceMetric, sweep: &Sweepout) -> Result<ClosedGeodesicRecord> {
    let (first, last) = (&sweep.curves[0], sweep.curves.last().unwrap());
    let spread = first
        .points
        .iter()
        .zip(&last.points)
        .fold(0.0f64, |a, (p, q)| a.max((p.u - q.u).hypot(p.v - q.v)));
    if spread < 1e-9 {
        return Err(Error::Precondition("sweepout endpoints coincide".into()));
    }
    let ends: Vec<Settled> =
        sweep.curves.par_iter().map(|c| settle(m, c, false).map(|s| s.0)).collect::<Result<_>>()?;
    let k = (0..ends.len() - 1)
        .find(|&k| !same_end(m, &ends[k], &ends[k + 1]))
        .ok_or_else(|| Error::SweepoutDegenerated("every sweep curve flows to the same limit".into()))?;
    let segs = (sweep.curves.len() - 1) as f64;
    let (mut lo, mut hi) = (k as f64 / segs, (k + 1) as f64 / segs);
    let lo_end = ends[k];
    for _ in 0..48 {
        if hi - lo < 1e-10 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (s, _) = settle(m, &sweep.at(mid), false)?;
        if same_end(m, &s, &lo_end) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let floor = ends[0].length().max(ends[ends.len() - 1].length()).max(lo_end.length()).max(ends[k + 1].length());
    let mut candidates = Vec::new();
    for lam in [lo, hi] {
        if let (_, Some(snap)) = settle(m, &sweep.at(lam), true)? {
            candidates.push(snap);
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, c) in candidates {
        if let Ok(rec) = polish_closed_geodesic(m, &c) {
            if rec.length > floor + 1e-6 {
                return Ok(rec);
            }
        }
    }
    Err(Error::SweepoutDegenerated("no closed geodesic above the endpoint levels".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Waist,
    ConjugatePointType,
}

impl Role {
    pub fn of(rec: &ClosedGeodesicRecord) -> Self {
        if rec.is_waist {
            Role::Waist
        } else {
            Role::ConjugatePointType
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainPattern {
    /// Consecutive members meet once, others are disjoint.
    Linked,
    /// Pairwise disjoint, each inside the previous, roles alternating.
    Nested,
    /// Free collection used to start a complete system.
    Seed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationChain {
    pub geodesics: Vec<ClosedGeodesicRecord>,
    pub intersections: Vec<Vec<usize>>,
    pub roles: Vec<Role>,
    pub pattern: ChainPattern,
}

impl ConfigurationChain {
    pub fn new(m: &SurfaceMetric, geodesics: Vec<ClosedGeodesicRecord>, pattern: ChainPattern) -> Self {
        let n = geodesics.len();
        let mut intersections = vec![vec![0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let c = intersection_count(m, &geodesics[i].curve, &geodesics[j].curve);
                intersections[i][j] = c;
                intersections[j][i] = c;
            }
        }
        let roles = geodesics.iter().map(Role::of).collect();
        Self { geodesics, intersections, roles, pattern }
    }

    pub fn len(&self) -> usize {
        self.geodesics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geodesics.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        let n = self.len();
        match self.pattern {
            ChainPattern::Linked => (0..n).all(|i| {
                (0..n).all(|j| i == j || self.intersections[i][j] == usize::from(i.abs_diff(j) == 1))
            }),
            ChainPattern::Nested => {
                n % 2 == 0
                    && self.intersections.iter().flatten().all(|&c| c == 0)
                    && self.roles.iter().enumerate().all(|(i, r)| {
                        *r == if i % 2 == 0 { Role::Waist } else { Role::ConjugatePointType }
                    })
            }
            ChainPattern::Seed => true,
        }
    }
}

/// Transverse intersections of two closed curves on the surface, counted
/// once per point by pairing the first curve's fundamental polygon with
/// every deck translate of the second.
pub fn intersection_count(m: &SurfaceMetric, a: &DiscreteCurve, b: &DiscreteCurve) -> usize {
    let (pu, pv) = m.periods();
    let vs: Vec<f64> = match pv {
        Some(p) => (-3..=3).map(|k| k as f64 * p).collect(),
        None => vec![0.0],
    };
    let mut count = 0;
    for i in 0..a.len() {
        let (p0, p1) = (a.at(i as isize), a.at(i as isize + 1));
        let r = [p1.u - p0.u, p1.v - p0.v];
        for j in 0..b.len() {
            let (q0, q1) = (b.at(j as isize), b.at(j as isize + 1));
            let s = [q1.u - q0.u, q1.v - q0.v];
            let den = r[0] * s[1] - r[1] * s[0];
            if den.abs() < 1e-300 {
                continue;
            }
            for ku in -3..=3 {
                for tv in &vs {
                    let d = [q0.u + ku as f64 * pu - p0.u, q0.v + tv - p0.v];
                    let t = (d[0] * s[1] - d[1] * s[0]) / den;
                    let w = (d[0] * r[1] - d[1] * r[0]) / den;
                    if (0.0..1.0).contains(&t) && (0.0..1.0).contains(&w) {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// The 2-chain of class minimizers for `(1, 0)` and `(0, 1)` on a torus.
pub fn genus_chain(m: &SurfaceMetric) -> Result<ConfigurationChain> {
    if m.genus() != 1 {
        return Err(Error::WrongGenus);
    }
    let pair: Vec<ClosedGeodesicRecord> = [(1, 0), (0, 1)]
        .par_iter()
        .map(|&(p, q)| class_minimizer(m, &SeedClass::Lattice { p, q }))
        .collect::<Result<_>>()?;
    let chain = ConfigurationChain::new(m, pair, ChainPattern::Linked);
    if chain.intersections[0][1] != 1 {
        return Err(Error::IntersectionPatternFailed(format!(
            "class minimizers meet {} times",
            chain.intersections[0][1]
        )));
    }
    Ok(chain)
}

/// Seed chain made of the closed parallel geodesics `v = v_k` of a sphere
/// of revolution.
pub fn parallel_chain(m: &SurfaceMetric, vs: &[f64]) -> Result<ConfigurationChain> {
    if m.kind != SurfaceKind::SphereOfRevolution || !m.is_revolution() {
        return Err(Error::Precondition("parallel chains need a sphere of revolution".into()));
    }
    let mut recs = Vec::new();
    for &v in vs {
        if !is_geodesic_line(m, v, false) {
            return Err(Error::Precondition(format!("parallel v = {v} is not a geodesic")));
        }
        let rho = m.profile(v).map(|p| p.rho).ok_or(Error::PointOutsideChart { u: 0.0, v })?;
        let z = crate::flow::UnitTangent::from_angle(m, SurfacePoint::new(0.0, v), 0.0)?;
        recs.push(ClosedGeodesicRecord::from_orbit(m, &z, std::f64::consts::TAU * rho, HomotopyTag::Contractible(true))?);
    }
    Ok(ConfigurationChain::new(m, recs, ChainPattern::Seed))
}

/// Whether the chart line `v = c` (or `u = c` with `vertical`) is a
/// geodesic: the normal component of `Γ(e, e)` vanishes along it.
fn is_geodesic_line(m: &SurfaceMetric, c: f64, vertical: bool) -> bool {
    let (pu, pv) = m.periods();
    let span = if vertical { pv.unwrap_or(std::f64::consts::PI) } else { pu };
    (0..64).all(|k| {
        let s = span * (k as f64 + 0.5) / 64.0;
        let (p, e, comp) = if vertical {
            (SurfacePoint::new(c, s), [0.0, 1.0], 0)
        } else {
            (SurfacePoint::new(s, c), [1.0, 0.0], 1)
        };
        match m.metric_at(p) {
            Ok(d) => d.christoffel(e, e)[comp].abs() < 1e-9,
            Err(_) => false,
        }
    })
}

/// What a disk shrinks toward: the pole parallel `v = pole` or a point.
#[derive(Debug, Clone, Copy)]
enum Center {
    Pole(f64),
    Point(SurfacePoint),
}

fn shrink(c: &DiscreteCurve, center: Center, lambda: f64) -> DiscreteCurve {
    let pts = c
        .points
        .iter()
        .map(|p| {
            let q = match center {
                Center::Pole(v) => SurfacePoint::new(p.u, v),
                Center::Point(q) => q,
            };
            SurfacePoint::new(p.u + lambda * (q.u - p.u), p.v + lambda * (q.v - p.v))
        })
        .collect();
    DiscreteCurve::new(pts, c.shift)
}

const HUG: f64 = 0.03;
const POLE_GAP: f64 = 0.03;

/// Boundary polygon, shrink center and geodesic check for a disk region.
fn disk_boundary(m: &SurfaceMetric, disk: &RegionSpec) -> Result<(DiscreteCurve, Center)> {
    match *disk {
        RegionSpec::Cap { v_boundary, below } => {
            if m.kind != SurfaceKind::SphereOfRevolution {
                return Err(Error::Precondition("cap disks need a sphere".into()));
            }
            if !is_geodesic_line(m, v_boundary, false) {
                return Err(Error::Precondition(format!("cap boundary v = {v_boundary} is not a geodesic")));
            }
            let c = DiscreteCurve::from_fn(128, [std::f64::consts::TAU, 0.0], |t| {
                SurfacePoint::new(std::f64::consts::TAU * t, v_boundary)
            });
            let pole = if below { POLE_GAP } else { std::f64::consts::PI - POLE_GAP };
            Ok((c, Center::Pole(pole)))
        }
        RegionSpec::Rect { u, v } => {
            let sides = is_geodesic_line(m, v[0], false)
                && is_geodesic_line(m, v[1], false)
                && is_geodesic_line(m, u[0], true)
                && is_geodesic_line(m, u[1], true);
            if !sides {
                return Err(Error::Precondition("rectangle sides are not geodesics".into()));
            }
            let corners = [
                SurfacePoint::new(u[0], v[0]),
                SurfacePoint::new(u[1], v[0]),
                SurfacePoint::new(u[1], v[1]),
                SurfacePoint::new(u[0], v[1]),
            ];
            let mut pts = Vec::with_capacity(128);
            for k in 0..4 {
                let (a, b) = (corners[k], corners[(k + 1) % 4]);
                for i in 0..32 {
                    let t = i as f64 / 32.0;
                    pts.push(SurfacePoint::new(a.u + t * (b.u - a.u), a.v + t * (b.v - a.v)));
                }
            }
            let center = SurfacePoint::new(0.5 * (u[0] + u[1]), 0.5 * (v[0] + v[1]));
            Ok((DiscreteCurve::new(pts, [0.0, 0.0]), Center::Point(center)))
        }
        RegionSpec::Band { .. } => Err(Error::Precondition("a band is not a disk".into())),
    }
}

/// Alternating waist / minmax chain inside a disk bounded by geodesics,
/// ordered from the boundary inward. Empty when a curve hugging the
/// boundary shrinks to a point.
pub fn nested_chain(m: &SurfaceMetric, disk: &RegionSpec) -> Result<ConfigurationChain> {
    let (boundary, center) = disk_boundary(m, disk)?;
    let boundary_len = curve_length(m, &boundary)?;
    let policy = StepPolicy { record_trace: false, ..StepPolicy::default() };
    let mut found = Vec::new();
    let mut outer = boundary;
    loop {
        let hug = shrink(&outer, center, HUG);
        let run = if found.is_empty() {
            region_confined_evolve(m, &hug, *disk, policy)?
        } else {
            evolve(m, &hug, policy)?
        };
        let waist = match run.outcome {
            FlowOutcome::Collapsed { .. } => break,
            FlowOutcome::Running { .. } => return Err(Error::BudgetExhausted("waist search did not settle".into())),
            FlowOutcome::ConvergedGeodesic(rec) => *rec,
        };
        if found.is_empty() && (waist.length - boundary_len).abs() < 1e-6 {
            break;
        }
        let sweep = Sweepout::new((0..33).map(|k| shrink(&waist.curve, center, HUG + (0.97 - HUG) * k as f64 / 32.0)).collect())?;
        found.push(waist);
        match minmax_geodesic(m, &sweep) {
            Ok(rec) => {
                outer = rec.curve.clone();
                found.push(rec);
            }
            Err(Error::SweepoutDegenerated(_)) => break,
            Err(e) => return Err(e),
        }
    }
    let chain = ConfigurationChain::new(m, found, ChainPattern::Nested);
    if !chain.is_valid() {
        return Err(Error::IntersectionPatternFailed("nested chain breaks alternation or disjointness".into()));
    }
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteSystem {
    pub all: Vec<ClosedGeodesicRecord>,
    /// Indices into `all` of the hyperbolic contractible waists.
    pub limit_sub: Vec<usize>,
    /// Return time bound; `None` until checked by the section module.
    pub return_bound: Option<f64>,
}

/// Complementary disks of a chain made of chart lines: the polar caps
/// beyond the extreme parallels on a sphere, the fundamental rectangle cut
/// out by a horizontal and a vertical loop on a torus.
pub fn complementary_disks(m: &SurfaceMetric, chain: &ConfigurationChain) -> Result<Vec<RegionSpec>> {
    let line_level = |c: &DiscreteCurve, vertical: bool| -> Option<f64> {
        let xs: Vec<f64> = c.points.iter().map(|p| if vertical { p.u } else { p.v }).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().all(|x| (x - mean).abs() < 1e-6).then_some(mean)
    };
    if chain.is_empty() {
        return Err(Error::Precondition("empty chain".into()));
    }
    match m.periods() {
        (_, None) => {
            let mut vs = Vec::new();
            for g in &chain.geodesics {
                vs.push(line_level(&g.curve, false).ok_or_else(|| Error::Precondition("chain member is not a parallel".into()))?);
            }
            let lo = vs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok(vec![RegionSpec::Cap { v_boundary: lo, below: true }, RegionSpec::Cap { v_boundary: hi, below: false }])
        }
        (pu, Some(pv)) => {
            let h = chain.geodesics.iter().find_map(|g| line_level(&g.curve, false));
            let v = chain.geodesics.iter().find_map(|g| line_level(&g.curve, true));
            match (h, v) {
                (Some(v0), Some(u0)) if chain.len() == 2 => {
                    Ok(vec![RegionSpec::Rect { u: [u0, u0 + pu], v: [v0, v0 + pv] }])
                }
                _ => Err(Error::Precondition("torus chain must be one horizontal and one vertical loop".into())),
            }
        }
    }
}

/// Chain plus the nested chains of its complementary disks.
pub fn assemble_complete_system(m: &SurfaceMetric, chain: &ConfigurationChain) -> Result<CompleteSystem> {
    if !chain.is_valid() {
        return Err(Error::Precondition("chain is not valid".into()));
    }
    let disks = complementary_disks(m, chain)?;
    let extras: Vec<ConfigurationChain> = disks.par_iter().map(|d| nested_chain(m, d)).collect::<Result<_>>()?;
    let mut all = chain.geodesics.clone();
    let mut limit_sub = Vec::new();
    for rec in extras.into_iter().flat_map(|c| c.geodesics) {
        if rec.is_waist && rec.kind == OrbitType::Hyperbolic && rec.homotopy == HomotopyTag::Contractible(true) {
            limit_sub.push(all.len());
        }
        all.push(rec);
    }
    Ok(CompleteSystem { all, limit_sub, return_bound: None })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BangertReport {
    /// Shortest length reached from the push-off on the left and right.
    pub lengths: [f64; 2],
    pub shorter: [bool; 2],
}

/// Flows push-offs of `rec` by `±delta` along its normal and records
/// whether each side gets strictly shorter than the geodesic.
pub fn bangert_check(m: &SurfaceMetric, rec: &ClosedGeodesicRecord, delta: f64) -> Result<BangertReport> {
    let prof = curvature_profile(m, &rec.curve)?;
    let target = rec.length - 1e-6 * rec.length;
    let sides: Vec<f64> = [1.0, -1.0]
        .par_iter()
        .map(|&sign| {
            let pts = rec
                .curve
                .points
                .iter()
                .zip(&prof.normals)
                .map(|(p, nu)| SurfacePoint::new(p.u + sign * delta * nu[0], p.v + sign * delta * nu[1]))
                .collect();
            let c = DiscreteCurve::new(pts, rec.curve.shift);
            let mut run = CsfRunner::new(m, &c, coarse_policy(), None)?;
            while run.length >= target && !run.collapsed() && run.steps < 200_000 {
                if !run.step()? {
                    break;
                }
            }
            Ok(run.length)
        })
        .collect::<Result<_>>()?;
    let lengths = [sides[0], sides[1]];
    Ok(BangertReport { lengths, shorter: [lengths[0] < rec.length, lengths[1] < rec.length] })
}
