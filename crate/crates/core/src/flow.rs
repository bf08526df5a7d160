//! Geodesic flow on the unit tangent bundle with normal Jacobi fields.
//!
//! The state is `[u, v, u̇, v̇, J, J']` where `J` is the component of a
//! Jacobi field along the left unit normal. Integration uses the
//! Dormand–Prince 5(4) pair with the velocity renormalised to unit length
//! after every accepted step.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::csf::DiscreteCurve;
use crate::geom::{wrap, SurfaceKind, SurfaceMetric, SurfacePoint, TangentVector, POLAR_CAP};
use crate::linalg::{det2, Mat2};
use crate::{Error, Result};

pub type State = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitTangent {
    pub base: SurfacePoint,
    pub dir: TangentVector,
}

impl UnitTangent {
    /// Unit tangent at `base` in the direction of `dir`, normalised in the
    /// metric.
    pub fn new(m: &SurfaceMetric, base: SurfacePoint, dir: TangentVector) -> Result<Self> {
        let d = m.metric_at(base)?;
        let n = d.norm([dir.du, dir.dv]);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Precondition("zero direction".into()));
        }
        Ok(Self { base, dir: TangentVector::new(dir.du / n, dir.dv / n) })
    }

    /// Unit tangent making angle `theta` with `∂_u` (measured towards the
    /// left normal of `∂_u`).
    pub fn from_angle(m: &SurfaceMetric, base: SurfacePoint, theta: f64) -> Result<Self> {
        let d = m.metric_at(base)?;
        let e1 = [1.0 / d.g11.sqrt(), 0.0];
        let e2 = d.left_normal(e1);
        let (s, c) = theta.sin_cos();
        Ok(Self { base, dir: TangentVector::new(c * e1[0] + s * e2[0], c * e1[1] + s * e2[1]) })
    }

    pub fn flip(&self) -> Self {
        Self { base: self.base, dir: TangentVector::new(-self.dir.du, -self.dir.dv) }
    }

    pub fn dir(&self) -> [f64; 2] {
        [self.dir.du, self.dir.dv]
    }

    pub fn state(&self, jac: [f64; 2]) -> State {
        [self.base.u, self.base.v, self.dir.du, self.dir.dv, jac[0], jac[1]]
    }

    pub fn from_state(y: &State) -> Self {
        Self { base: SurfacePoint::new(y[0], y[1]), dir: TangentVector::new(y[2], y[3]) }
    }
}

/// `g(γ̇, ∂_u) = ρ² u̇` on rotationally symmetric models.
pub fn clairaut(m: &SurfaceMetric, z: &UnitTangent) -> Option<f64> {
    if !m.is_revolution() {
        return None;
    }
    let rho = m.profile(z.base.v)?.rho;
    Some(rho * rho * z.dir.du)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub tol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { tol: 1e-12, h_max: 0.25, max_steps: 10_000_000 }
    }
}

impl FlowOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn in_chart(m: &SurfaceMetric, v: f64) -> bool {
    m.kind != SurfaceKind::SphereOfRevolution || (v >= POLAR_CAP && v <= PI - POLAR_CAP)
}

fn rhs(m: &SurfaceMetric, y: &State, t: f64) -> Result<State> {
    if !in_chart(m, y[1]) || !y.iter().all(|x| x.is_finite()) {
        return Err(Error::PoleTransit { t });
    }
    let d = m.metric_unchecked(SurfacePoint::new(y[0], y[1]));
    let w = [y[2], y[3]];
    let acc = d.christoffel(w, w);
    Ok([y[2], y[3], -acc[0], -acc[1], y[5], -d.k * y[4]])
}

/// One Dormand–Prince step; returns the fifth-order solution and the
/// embedded error estimate.
fn dp_step(m: &SurfaceMetric, y: &State, t: f64, h: f64) -> Result<(State, State)> {
    let mut k = [[0.0; 6]; 7];
    k[0] = rhs(m, y, t)?;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..6 {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = rhs(m, &ys, t + C[s] * h)?;
    }
    let mut y5 = *y;
    let mut err = [0.0; 6];
    for i in 0..6 {
        for s in 0..6 {
            y5[i] += h * A[6][s] * k[s][i];
        }
        for s in 0..7 {
            err[i] += h * E[s] * k[s][i];
        }
    }
    Ok((y5, err))
}

fn normalise(m: &SurfaceMetric, y: &mut State) {
    let d = m.metric_unchecked(SurfacePoint::new(y[0], y[1]));
    let n = d.norm([y[2], y[3]]);
    y[2] /= n;
    y[3] /= n;
}

/// State after time `h` from `y` by a single Dormand–Prince step, for dense
/// output between accepted nodes.
pub fn advance(m: &SurfaceMetric, y: &State, t: f64, h: f64) -> Result<State> {
    if h == 0.0 {
        return Ok(*y);
    }
    let (mut y5, _) = dp_step(m, y, t, h)?;
    normalise(m, &mut y5);
    Ok(y5)
}

/// Incremental integrator; `step` advances by one accepted step.
pub struct Stepper<'a> {
    m: &'a SurfaceMetric,
    opts: FlowOptions,
    pub t: f64,
    pub y: State,
    h: f64,
    steps: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(m: &'a SurfaceMetric, z0: &UnitTangent, jac: [f64; 2], opts: FlowOptions) -> Result<Self> {
        let z = UnitTangent::new(m, z0.base, z0.dir)?;
        Ok(Self { m, opts, t: 0.0, y: z.state(jac), h: 0.01, steps: 0 })
    }

    pub fn from_state(m: &'a SurfaceMetric, t: f64, y: State, opts: FlowOptions) -> Self {
        Self { m, opts, t, y, h: 0.01, steps: 0 }
    }

    /// Advances by one accepted step without passing `t_max`.
    pub fn step(&mut self, t_max: f64) -> Result<()> {
        if self.steps >= self.opts.max_steps {
            return Err(Error::StepFailure { t: self.t });
        }
        let natural = self.h.min(self.opts.h_max);
        let clipped = t_max - self.t < natural;
        let mut h = if clipped { t_max - self.t } else { natural };
        loop {
            if !(h > 1e-14) {
                return Err(Error::StepFailure { t: self.t });
            }
            let (y5, err) = match dp_step(self.m, &self.y, self.t, h) {
                Ok(r) => r,
                Err(Error::PoleTransit { t }) => {
                    // a trial stage left the chart; shrink and retry, and give
                    // up only once the step is negligible
                    if h < 1e-9 {
                        return Err(Error::PoleTransit { t });
                    }
                    h *= 0.25;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let tol = self.opts.tol;
            let mut e2 = 0.0;
            for i in 0..6 {
                let sc = tol + tol * self.y[i].abs().max(y5[i].abs());
                e2 += (err[i] / sc).powi(2);
            }
            let e = (e2 / 6.0).sqrt();
            let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            if e <= 1.0 {
                let mut y = y5;
                normalise(self.m, &mut y);
                self.t = if clipped && h == t_max - self.t { t_max } else { self.t + h };
                self.y = y;
                self.steps += 1;
                self.h = if clipped { natural.max(h * fac) } else { h * fac };
                return Ok(());
            }
            h *= fac.min(0.9);
        }
    }
}

/// Integrated orbit with the accepted nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub opts: FlowOptions,
}

pub fn integrate(m: &SurfaceMetric, z0: &UnitTangent, t_end: f64, with_jacobi: bool) -> Result<Trajectory> {
    integrate_with(m, z0, t_end, if with_jacobi { [0.0, 1.0] } else { [0.0, 0.0] }, FlowOptions::default())
}

pub fn integrate_with(m: &SurfaceMetric, z0: &UnitTangent, t_end: f64, jac: [f64; 2], opts: FlowOptions) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Precondition("integration time must be finite and non-negative".into()));
    }
    let mut st = Stepper::new(m, z0, jac, opts)?;
    let mut times = vec![0.0];
    let mut states = vec![st.y];
    while st.t < t_end {
        st.step(t_end)?;
        times.push(st.t);
        states.push(st.y);
    }
    Ok(Trajectory { times, states, opts })
}

impl Trajectory {
    pub fn end(&self) -> &State {
        self.states.last().unwrap()
    }

    pub fn end_tangent(&self) -> UnitTangent {
        UnitTangent::from_state(self.end())
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// State at time `t` by a single Dormand–Prince step from the preceding
    /// node.
    pub fn state_at(&self, m: &SurfaceMetric, t: f64) -> Result<State> {
        let i = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok(self.states[i]),
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let i = i.min(self.times.len() - 1);
        advance(m, &self.states[i], self.times[i], t - self.times[i])
    }

    /// CSV with columns `t,u,v,du,dv,J,dJ` sampled every `dt`.
    pub fn to_csv(&self, m: &SurfaceMetric, dt: f64) -> Result<String> {
        let mut s = String::from("t,u,v,du,dv,J,dJ\n");
        let n = (self.duration() / dt).floor() as usize;
        for k in 0..=n {
            let t = (k as f64 * dt).min(self.duration());
            let y = self.state_at(m, t)?;
            s.push_str(&format!("{t},{},{},{},{},{},{}\n", y[0], y[1], y[2], y[3], y[4], y[5]));
        }
        Ok(s)
    }
}

/// Bisection on `f` over `[a, b]` with `f(a)` and `f(b)` of opposite signs.
pub fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a)?;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Zeros in `(0, T]` of the Jacobi field with `J(0) = 0`, `J'(0) = 1`.
pub fn conjugate_points(m: &SurfaceMetric, z0: &UnitTangent, t_end: f64) -> Result<Vec<f64>> {
    conjugate_points_with(m, z0, t_end, FlowOptions::default())
}

pub fn conjugate_points_with(m: &SurfaceMetric, z0: &UnitTangent, t_end: f64, opts: FlowOptions) -> Result<Vec<f64>> {
    if !(t_end > 0.0) {
        return Err(Error::Precondition("T must be positive".into()));
    }
    let tr = integrate_with(m, z0, t_end, [0.0, 1.0], opts)?;
    let mut out = Vec::new();
    for i in 1..tr.times.len() - 1 {
        let (ja, jb) = (tr.states[i][4], tr.states[i + 1][4]);
        if ja == 0.0 {
            out.push(tr.times[i]);
        } else if ja * jb < 0.0 {
            let t = bisect(|t| Ok(tr.state_at(m, t)?[4]), tr.times[i], tr.times[i + 1], 1e-11)?;
            out.push(t);
        }
    }
    if tr.end()[4] == 0.0 {
        out.push(tr.duration());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitType {
    Hyperbolic,
    Elliptic,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HomotopyTag {
    Torus { p: i32, q: i32 },
    Contractible(bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

/// Floquet data of a closed geodesic. Multipliers are stored as
/// `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Floquet {
    pub sigma: [f64; 2],
    pub sigma_inv: [f64; 2],
    pub kind: OrbitType,
    pub trace: f64,
    pub det: f64,
    /// Rotation angle in `[0, 2π)` of elliptic orbits.
    pub rotation: Option<f64>,
    pub monodromy: Mat2,
}

pub const FLOQUET_TOL: f64 = 1e-6;

impl Floquet {
    pub fn from_monodromy(mm: Mat2) -> Self {
        let tr = mm[0][0] + mm[1][1];
        let det = det2(&mm);
        if tr.abs() > 2.0 + FLOQUET_TOL {
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            let big = 0.5 * (tr + tr.signum() * disc);
            let small = det / big;
            Self { sigma: [big, 0.0], sigma_inv: [small, 0.0], kind: OrbitType::Hyperbolic, trace: tr, det, rotation: None, monodromy: mm }
        } else if tr.abs() < 2.0 - FLOQUET_TOL {
            let base = (0.5 * tr).clamp(-1.0, 1.0).acos();
            let alpha = if mm[0][1] > 0.0 { base } else { TAU - base };
            let (s, c) = alpha.sin_cos();
            Self { sigma: [c, s], sigma_inv: [c, -s], kind: OrbitType::Elliptic, trace: tr, det, rotation: Some(alpha), monodromy: mm }
        } else {
            let x = 0.5 * tr;
            Self { sigma: [x, 0.0], sigma_inv: [det / x, 0.0], kind: OrbitType::Degenerate, trace: tr, det, rotation: None, monodromy: mm }
        }
    }

    /// Eigenvector `(J, J')` for the real eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: f64) -> [f64; 2] {
        let m = &self.monodromy;
        let a = [m[0][1], lambda - m[0][0]];
        let b = [lambda - m[1][1], m[1][0]];
        let (na, nb) = (a[0].hypot(a[1]), b[0].hypot(b[1]));
        let e = if na >= nb { a } else { b };
        let n = e[0].hypot(e[1]);
        [e[0] / n, e[1] / n]
    }
}

fn centred(x: f64, period: f64) -> f64 {
    let r = wrap(x + 0.5 * period, period) - 0.5 * period;
    if r.is_finite() {
        r
    } else {
        x
    }
}

/// Distance between two unit tangents in the chart modulo the periods.
pub fn tangent_gap(m: &SurfaceMetric, a: &UnitTangent, b: &UnitTangent) -> f64 {
    let (pu, pv) = m.periods();
    let du = centred(a.base.u - b.base.u, pu);
    let dv = match pv {
        Some(p) => centred(a.base.v - b.base.v, p),
        None => a.base.v - b.base.v,
    };
    du.hypot(dv) + (a.dir.du - b.dir.du).hypot(a.dir.dv - b.dir.dv)
}

/// Deck translation taking `a` to `b` in the lifted chart.
pub fn deck_shift(m: &SurfaceMetric, a: SurfacePoint, b: SurfacePoint) -> [f64; 2] {
    let (pu, pv) = m.periods();
    let su = ((b.u - a.u) / pu).round() * pu;
    let sv = match pv {
        Some(p) => ((b.v - a.v) / p).round() * p,
        None => 0.0,
    };
    [su, sv]
}

/// Monodromy of the normal Jacobi equation over `[0, ℓ]` and the closing gap
/// of the orbit.
pub fn monodromy(m: &SurfaceMetric, z0: &UnitTangent, length: f64, opts: FlowOptions) -> Result<(Mat2, f64)> {
    let a = integrate_with(m, z0, length, [1.0, 0.0], opts)?;
    let b = integrate_with(m, z0, length, [0.0, 1.0], opts)?;
    let (ya, yb) = (a.end(), b.end());
    let gap = tangent_gap(m, &a.end_tangent(), z0);
    Ok(([[ya[4], yb[4]], [ya[5], yb[5]]], gap))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedGeodesicRecord {
    pub start: UnitTangent,
    /// Unit-speed samples at `t = k ℓ / n`.
    pub curve: DiscreteCurve,
    pub length: f64,
    pub floquet: Floquet,
    pub kind: OrbitType,
    pub conjugate_times: Vec<f64>,
    pub has_conjugate_points: bool,
    pub is_waist: bool,
    pub homotopy: HomotopyTag,
}

pub const RECORD_SAMPLES: usize = 256;

impl ClosedGeodesicRecord {
    /// Record of the closed orbit through `z0` of period `length`. Waist
    /// status of degenerate orbits is left `false` for the caller to decide.
    pub fn from_orbit(m: &SurfaceMetric, z0: &UnitTangent, length: f64, homotopy: HomotopyTag) -> Result<Self> {
        let opts = FlowOptions::default();
        let z0 = UnitTangent::new(m, z0.base, z0.dir)?;
        let (mm, gap) = monodromy(m, &z0, length, opts)?;
        if gap > 1e-6 {
            return Err(Error::NotClosed { gap });
        }
        let fl = Floquet::from_monodromy(mm);
        let tr = integrate_with(m, &z0, length, [0.0, 1.0], opts)?;
        let mut pts = Vec::with_capacity(RECORD_SAMPLES);
        for k in 0..RECORD_SAMPLES {
            let y = tr.state_at(m, length * k as f64 / RECORD_SAMPLES as f64)?;
            pts.push(SurfacePoint::new(y[0], y[1]));
        }
        let end = tr.end();
        let shift = deck_shift(m, z0.base, SurfacePoint::new(end[0], end[1]));
        let span = if fl.kind == OrbitType::Degenerate { 2.0 * length } else { length };
        let conj = conjugate_points_with(m, &z0, span, opts)?;
        let has_conj = !conj.is_empty() || fl.kind == OrbitType::Elliptic || fl.sigma[0] < 0.0;
        Ok(Self {
            start: z0,
            curve: DiscreteCurve::new(pts, shift),
            length,
            floquet: fl,
            kind: fl.kind,
            conjugate_times: conj,
            has_conjugate_points: has_conj,
            is_waist: fl.kind != OrbitType::Degenerate && !has_conj,
            homotopy,
        })
    }

    /// Unit tangent of the orbit at time `t`.
    pub fn tangent_at(&self, m: &SurfaceMetric, t: f64) -> Result<UnitTangent> {
        let tr = integrate_with(m, &self.start, t, [0.0, 0.0], FlowOptions::default())?;
        Ok(tr.end_tangent())
    }
}

pub fn floquet(m: &SurfaceMetric, rec: &ClosedGeodesicRecord) -> Result<Floquet> {
    let (mm, gap) = monodromy(m, &rec.start, rec.length, FlowOptions::default())?;
    if gap > 1e-6 {
        return Err(Error::NotClosed { gap });
    }
    Ok(Floquet::from_monodromy(mm))
}

/// Displaces the unit tangent `z` by the normal Jacobi field `(J, J')`:
/// base point `p + J ν`, direction `v + J' ν − J Γ(v, ν)`.
pub fn displace(m: &SurfaceMetric, z: &UnitTangent, jac: [f64; 2]) -> Result<UnitTangent> {
    let d = m.metric_at(z.base)?;
    let v = z.dir();
    let nu = d.left_normal(v);
    let g = d.christoffel(v, nu);
    let base = SurfacePoint::new(z.base.u + jac[0] * nu[0], z.base.v + jac[0] * nu[1]);
    let dir = TangentVector::new(v[0] + jac[1] * nu[0] - jac[0] * g[0], v[1] + jac[1] * nu[1] - jac[0] * g[1]);
    UnitTangent::new(m, base, dir)
}

/// Seeds on the local stable (or unstable) manifold of a hyperbolic closed
/// geodesic at distance `delta` on the given side, at `count` equally spaced
/// times along the orbit.
pub fn invariant_manifold_seed_with(
    m: &SurfaceMetric,
    rec: &ClosedGeodesicRecord,
    side: Side,
    stable: bool,
    count: usize,
    delta: f64,
) -> Result<Vec<UnitTangent>> {
    if rec.kind != OrbitType::Hyperbolic {
        return Err(Error::NotHyperbolic);
    }
    let lambda = if stable { rec.floquet.sigma_inv[0] } else { rec.floquet.sigma[0] };
    let e = rec.floquet.eigenvector(lambda);
    if e[0].abs() < 1e-12 {
        return Err(Error::Precondition("eigendirection is vertical".into()));
    }
    let tr = integrate_with(m, &rec.start, rec.length, e, FlowOptions::default())?;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let y = tr.state_at(m, rec.length * k as f64 / count as f64)?;
        let z = UnitTangent::from_state(&y);
        let scale = side.sign() * delta / y[4];
        out.push(displace(m, &z, [y[4] * scale, y[5] * scale])?);
    }
    Ok(out)
}

pub fn invariant_manifold_seed(
    m: &SurfaceMetric,
    rec: &ClosedGeodesicRecord,
    side: Side,
    stable: bool,
) -> Result<Vec<UnitTangent>> {
    invariant_manifold_seed_with(m, rec, side, stable, 16, 1e-4 * m.inj_radius_estimate)
}
