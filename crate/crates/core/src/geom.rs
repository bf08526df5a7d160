//! Analytic surface models: spheres and tori of revolution with
//! trigonometric profiles, and conformally flat tori.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::linalg::composite_gl;
use crate::{Error, Result};

/// Parameter radius of the excluded polar caps on sphere charts.
pub const POLAR_CAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceKind {
    SphereOfRevolution,
    TorusOfRevolution,
    ConformalTorus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub du: f64,
    pub dv: f64,
}

impl SurfacePoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

impl TangentVector {
    pub fn new(du: f64, dv: f64) -> Self {
        Self { du, dv }
    }
}

/// `f(x) = Σ_k c_k cos(kx) + s_k sin(kx)` for `k = 0, 1, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { cos, sin }
    }

    /// Value and first two derivatives.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        let n = self.cos.len().max(self.sin.len());
        for k in 0..n {
            let c = self.cos.get(k).copied().unwrap_or(0.0);
            let s = self.sin.get(k).copied().unwrap_or(0.0);
            if c == 0.0 && s == 0.0 {
                continue;
            }
            let kf = k as f64;
            let (sn, cs) = (kf * x).sin_cos();
            out[0] += c * cs + s * sn;
            out[1] += kf * (-c * sn + s * cs);
            out[2] += -kf * kf * (c * cs + s * sn);
        }
        out
    }
}

/// One Fourier mode `c cos θ + s sin θ`, `θ = 2π (kx u / L1 + ky v / L2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub kx: i32,
    pub ky: i32,
    pub c: f64,
    pub s: f64,
}

/// Optional conformal factor `e^{2h}` with `h = A sin v cos(u − u0)` on a
/// sphere of revolution; breaks the rotational symmetry smoothly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    #[serde(default)]
    pub u0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Model {
    Revolution { rho: TrigPoly, z: TrigPoly, bump: Option<Bump> },
    Conformal { f: Vec<FourierMode>, l1: f64, l2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMetric {
    pub kind: SurfaceKind,
    pub name: String,
    pub(crate) model: Model,
    pub inj_radius_estimate: f64,
}

/// First fundamental form, Christoffel symbols `gamma[k][i][j] = Γ^k_ij` and
/// Gaussian curvature at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricData {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    pub gamma: [[[f64; 2]; 2]; 2],
    pub k: f64,
}

impl MetricData {
    pub fn inner(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.g11 * a[0] * b[0] + self.g12 * (a[0] * b[1] + a[1] * b[0]) + self.g22 * a[1] * b[1]
    }

    pub fn norm(&self, a: [f64; 2]) -> f64 {
        self.inner(a, a).sqrt()
    }

    pub fn det(&self) -> f64 {
        self.g11 * self.g22 - self.g12 * self.g12
    }

    /// Unit normal to the left of `a` (rotation by +π/2 in the oriented chart).
    pub fn left_normal(&self, a: [f64; 2]) -> [f64; 2] {
        let sd = self.det().sqrt();
        let n = [-(self.g12 * a[0] + self.g22 * a[1]) / sd, (self.g11 * a[0] + self.g12 * a[1]) / sd];
        let len = self.norm(a);
        [n[0] / len, n[1] / len]
    }

    /// `Γ(a, b)^k = Γ^k_ij a^i b^j`.
    pub fn christoffel(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (k, o) in out.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    *o += self.gamma[k][i][j] * a[i] * b[j];
                }
            }
        }
        out
    }
}

impl SurfaceMetric {
    fn revolution(kind: SurfaceKind, name: &str, rho: TrigPoly, z: TrigPoly, bump: Option<Bump>) -> Self {
        let mut m = Self { kind, name: name.to_string(), model: Model::Revolution { rho, z, bump }, inj_radius_estimate: 0.0 };
        m.inj_radius_estimate = m.estimate_inj_radius();
        m
    }

    /// Sphere of revolution with profile `ρ(v) = Σ b_k sin kv`,
    /// `z(v) = Σ c_k cos kv` for `v ∈ (0, π)`.
    pub fn sphere_of_revolution(name: &str, rho_sin: Vec<f64>, z_cos: Vec<f64>, bump: Option<Bump>) -> Result<Self> {
        let rho = TrigPoly::new(vec![], rho_sin);
        let z = TrigPoly::new(z_cos, vec![]);
        for i in 1..2000 {
            let v = PI * i as f64 / 2000.0;
            if rho.eval(v)[0] <= 0.0 {
                return Err(Error::Precondition(format!("profile radius not positive at v = {v}")));
            }
        }
        let m = Self::revolution(SurfaceKind::SphereOfRevolution, name, rho, z, bump);
        Ok(m)
    }

    pub fn round_sphere() -> Self {
        Self::sphere_of_revolution("round_sphere", vec![0.0, 1.0], vec![0.0, 1.0], None).unwrap()
    }

    /// Ellipsoid with semi-axes `(1, 1, c)`.
    pub fn spheroid(c: f64) -> Self {
        Self::sphere_of_revolution("spheroid", vec![0.0, 1.0], vec![0.0, c], None).unwrap()
    }

    /// `ρ = sin v + a sin 3v`, `z = cos v`; for `a = 0.2` a neck at `v = π/2`
    /// between two bulges.
    pub fn dumbbell(a: f64, bump: Option<Bump>) -> Result<Self> {
        Self::sphere_of_revolution("dumbbell", vec![0.0, 1.0, 0.0, a], vec![0.0, 1.0], bump)
    }

    /// `ρ = sin v + β sin 5v`, `z = cos v`: two necks around a central bulge.
    pub fn two_neck(beta: f64) -> Result<Self> {
        Self::sphere_of_revolution("two_neck", vec![0.0, 1.0, 0.0, 0.0, 0.0, beta], vec![0.0, 1.0], None)
    }

    pub fn torus_of_revolution(big_r: f64, small_r: f64) -> Result<Self> {
        if !(big_r > small_r && small_r > 0.0) {
            return Err(Error::Precondition("torus of revolution needs R > r > 0".into()));
        }
        let rho = TrigPoly::new(vec![big_r, small_r], vec![]);
        let z = TrigPoly::new(vec![], vec![0.0, small_r]);
        Ok(Self::revolution(SurfaceKind::TorusOfRevolution, "torus_of_revolution", rho, z, None))
    }

    pub fn conformal_torus(l1: f64, l2: f64, f: Vec<FourierMode>) -> Result<Self> {
        if !(l1 > 0.0 && l2 > 0.0) {
            return Err(Error::Precondition("torus periods must be positive".into()));
        }
        let mut m = Self {
            kind: SurfaceKind::ConformalTorus,
            name: if f.is_empty() { "flat_torus".into() } else { "conformal_torus".into() },
            model: Model::Conformal { f, l1, l2 },
            inj_radius_estimate: 0.0,
        };
        m.inj_radius_estimate = m.estimate_inj_radius();
        Ok(m)
    }

    pub fn flat_torus(l1: f64, l2: f64) -> Self {
        Self::conformal_torus(l1, l2, vec![]).unwrap()
    }

    pub fn euler_characteristic(&self) -> i32 {
        match self.kind {
            SurfaceKind::SphereOfRevolution => 2,
            _ => 0,
        }
    }

    pub fn genus(&self) -> u32 {
        match self.kind {
            SurfaceKind::SphereOfRevolution => 0,
            _ => 1,
        }
    }

    pub fn is_revolution(&self) -> bool {
        matches!(self.model, Model::Revolution { bump: None, .. })
    }

    /// Periods of the chart in `u` and `v`; `None` for the non-periodic
    /// profile direction of a sphere.
    pub fn periods(&self) -> (f64, Option<f64>) {
        match (&self.model, self.kind) {
            (Model::Conformal { l1, l2, .. }, _) => (*l1, Some(*l2)),
            (_, SurfaceKind::TorusOfRevolution) => (TAU, Some(TAU)),
            _ => (TAU, None),
        }
    }

    /// Range of the `v` coordinate over one fundamental domain.
    pub fn v_range(&self) -> (f64, f64) {
        match self.periods() {
            (_, Some(p)) => (0.0, p),
            (_, None) => (0.0, PI),
        }
    }

    /// Profile radius, its derivatives and the profile speed `a` with `a'`
    /// (surfaces of revolution only).
    pub fn profile(&self, v: f64) -> Option<Profile> {
        match &self.model {
            Model::Revolution { rho, z, .. } => {
                let r = rho.eval(v);
                let zz = z.eval(v);
                let a = (r[1] * r[1] + zz[1] * zz[1]).sqrt();
                let da = (r[1] * r[2] + zz[1] * zz[2]) / a;
                Some(Profile { rho: r[0], drho: r[1], ddrho: r[2], a, da })
            }
            _ => None,
        }
    }

    /// Reduces a point into the fundamental domain; exact and idempotent.
    pub fn reduce(&self, p: SurfacePoint) -> Result<SurfacePoint> {
        let (pu, pv) = self.periods();
        let u = wrap(p.u, pu);
        let v = match pv {
            Some(pv) => wrap(p.v, pv),
            None => {
                if !(p.v >= POLAR_CAP && p.v <= PI - POLAR_CAP) {
                    return Err(Error::PointOutsideChart { u: p.u, v: p.v });
                }
                p.v
            }
        };
        Ok(SurfacePoint { u, v })
    }
}

/// Profile data of a surface of revolution at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub rho: f64,
    pub drho: f64,
    pub ddrho: f64,
    pub a: f64,
    pub da: f64,
}

/// `x mod period` in `[0, period)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBound {
    pub holds: bool,
    pub max_k: f64,
    pub threshold: f64,
}

impl SurfaceMetric {
    /// Metric coefficients, Christoffel symbols and curvature at `p`. Lifted
    /// coordinates are accepted; only the polar caps of sphere charts are
    /// rejected.
    pub fn metric_at(&self, p: SurfacePoint) -> Result<MetricData> {
        if self.kind == SurfaceKind::SphereOfRevolution && !(p.v >= POLAR_CAP && p.v <= PI - POLAR_CAP) {
            return Err(Error::PointOutsideChart { u: p.u, v: p.v });
        }
        Ok(self.metric_unchecked(p))
    }

    pub(crate) fn metric_unchecked(&self, p: SurfacePoint) -> MetricData {
        match &self.model {
            Model::Revolution { bump, .. } => {
                let pr = self.profile(p.v).unwrap();
                let (rho, a) = (pr.rho, pr.a);
                let mut gamma = [[[0.0; 2]; 2]; 2];
                gamma[0][0][1] = pr.drho / rho;
                gamma[0][1][0] = pr.drho / rho;
                gamma[1][0][0] = -rho * pr.drho / (a * a);
                gamma[1][1][1] = pr.da / a;
                let k = -(pr.ddrho * a - pr.drho * pr.da) / (rho * a * a * a);
                let base = MetricData { g11: rho * rho, g12: 0.0, g22: a * a, gamma, k };
                match bump {
                    None => base,
                    Some(b) => conformal_change(&base, &pr, b, p),
                }
            }
            Model::Conformal { f, l1, l2 } => {
                let d = fourier_eval(f, *l1, *l2, p);
                let e = (2.0 * d.f).exp();
                let (fu, fv) = (d.fu, d.fv);
                let mut gamma = [[[0.0; 2]; 2]; 2];
                gamma[0][0][0] = fu;
                gamma[0][0][1] = fv;
                gamma[0][1][0] = fv;
                gamma[0][1][1] = -fu;
                gamma[1][0][0] = -fv;
                gamma[1][0][1] = fu;
                gamma[1][1][0] = fu;
                gamma[1][1][1] = fv;
                MetricData { g11: e, g12: 0.0, g22: e, gamma, k: -d.lap / e }
            }
        }
    }

    /// Quadrature of `F(p) dA` over one fundamental domain.
    fn integrate_area<F: Fn(&MetricData) -> f64>(&self, f: F) -> f64 {
        let (lo, hi) = self.v_range();
        let vq = composite_gl(lo, hi, 64, 16);
        match &self.model {
            Model::Revolution { bump: None, .. } => {
                TAU * vq
                    .iter()
                    .map(|&(v, w)| {
                        let m = self.metric_unchecked(SurfacePoint::new(0.0, v));
                        w * f(&m) * m.det().sqrt()
                    })
                    .sum::<f64>()
            }
            _ => {
                let (pu, _) = self.periods();
                let nu = 128;
                let du = pu / nu as f64;
                let mut total = 0.0;
                for i in 0..nu {
                    let u = i as f64 * du;
                    for &(v, w) in &vq {
                        let m = self.metric_unchecked(SurfacePoint::new(u, v));
                        total += du * w * f(&m) * m.det().sqrt();
                    }
                }
                total
            }
        }
    }

    pub fn total_area(&self) -> f64 {
        self.integrate_area(|_| 1.0)
    }

    /// `∫ K dA`, to be compared with `2π χ(M)`.
    pub fn total_curvature(&self) -> f64 {
        self.integrate_area(|m| m.k)
    }

    pub fn gauss_bonnet_defect(&self) -> f64 {
        (self.total_curvature() - TAU * self.euler_characteristic() as f64).abs()
    }

    /// Largest Gaussian curvature on an `n × n` grid over the fundamental
    /// domain (a single column for rotationally symmetric models).
    pub fn max_curvature(&self, n: usize) -> f64 {
        let (lo, hi) = self.v_range();
        let (pu, _) = self.periods();
        let nu = if self.is_revolution() { 1 } else { n };
        let mut best = f64::NEG_INFINITY;
        for i in 0..nu {
            for j in 0..=n {
                let mut v = lo + (hi - lo) * j as f64 / n as f64;
                if self.periods().1.is_none() {
                    v = v.clamp(lo + 1e-4, hi - 1e-4);
                }
                let m = self.metric_unchecked(SurfacePoint::new(pu * i as f64 / nu as f64, v));
                best = best.max(m.k);
            }
        }
        best
    }

    pub fn check_curvature_bound(&self) -> Result<CurvatureBound> {
        if self.genus() == 0 {
            return Err(Error::WrongGenus);
        }
        let max_k = self.max_curvature(256);
        let threshold = TAU / self.total_area();
        Ok(CurvatureBound { holds: max_k <= threshold, max_k, threshold })
    }

    /// Parameters `v` of the parallels with `ρ'(v) = 0`.
    pub fn critical_parallels(&self) -> Vec<f64> {
        let Some(_) = self.profile(1.0) else { return vec![] };
        let (lo, hi) = self.v_range();
        let periodic = self.periods().1.is_some();
        let n = 4000;
        let d = |v: f64| self.profile(v).unwrap().drho;
        let mut out = Vec::new();
        for i in 0..n {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / n as f64;
            let (mut a, mut b) = (a.max(if periodic { lo } else { 1e-3 }), b);
            let (da, db) = (d(a), d(b));
            if da == 0.0 {
                out.push(a);
                continue;
            }
            if da * db >= 0.0 {
                continue;
            }
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if d(m) * d(a) <= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
                if b - a < 1e-15 {
                    break;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }

    /// Length of a full meridian (`u = const`) loop.
    pub fn meridian_length(&self) -> Option<f64> {
        self.profile(1.0)?;
        let (lo, hi) = self.v_range();
        let one_way: f64 = composite_gl(lo, hi, 64, 16).iter().map(|&(v, w)| w * self.profile(v).unwrap().a).sum();
        Some(if self.periods().1.is_some() { one_way } else { 2.0 * one_way })
    }

    fn estimate_inj_radius(&self) -> f64 {
        let mut best = f64::INFINITY;
        let max_k = self.max_curvature(128);
        if max_k > 0.0 {
            best = best.min(PI / max_k.sqrt());
        }
        match &self.model {
            Model::Revolution { .. } => {
                for v in self.critical_parallels() {
                    best = best.min(PI * self.profile(v).unwrap().rho);
                }
                best = best.min(0.5 * self.meridian_length().unwrap());
            }
            Model::Conformal { f, l1, l2 } => {
                let n = 128;
                let mut fmin = f64::INFINITY;
                for i in 0..n {
                    for j in 0..n {
                        let p = SurfacePoint::new(l1 * i as f64 / n as f64, l2 * j as f64 / n as f64);
                        fmin = fmin.min(fourier_eval(f, *l1, *l2, p).f);
                    }
                }
                best = best.min(0.5 * l1.min(*l2) * fmin.exp());
            }
        }
        best
    }
}

fn conformal_change(base: &MetricData, pr: &Profile, b: &Bump, p: SurfacePoint) -> MetricData {
    let (sv, cv) = p.v.sin_cos();
    let (su, cu) = (p.u - b.u0).sin_cos();
    let h = b.amplitude * sv * cu;
    let dh = [-b.amplitude * sv * su, b.amplitude * cv * cu];
    let (huu, hvv) = (-h, -h);
    let (rho, a) = (pr.rho, pr.a);
    let lap = huu / (rho * rho) + (pr.drho * dh[1] / a + rho * hvv / a - rho * dh[1] * pr.da / (a * a)) / (rho * a);
    let g = [[base.g11, 0.0], [0.0, base.g22]];
    let grad = [dh[0] / base.g11, dh[1] / base.g22];
    let mut gamma = base.gamma;
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                let di = if k == i { dh[j] } else { 0.0 };
                let dj = if k == j { dh[i] } else { 0.0 };
                gk[i][j] += di + dj - g[i][j] * grad[k];
            }
        }
    }
    let e = (2.0 * h).exp();
    MetricData { g11: e * base.g11, g12: 0.0, g22: e * base.g22, gamma, k: (base.k - lap) / e }
}

struct FourierValue {
    f: f64,
    fu: f64,
    fv: f64,
    lap: f64,
}

fn fourier_eval(modes: &[FourierMode], l1: f64, l2: f64, p: SurfacePoint) -> FourierValue {
    let mut out = FourierValue { f: 0.0, fu: 0.0, fv: 0.0, lap: 0.0 };
    for m in modes {
        let wu = TAU * m.kx as f64 / l1;
        let wv = TAU * m.ky as f64 / l2;
        let (sn, cs) = (wu * p.u + wv * p.v).sin_cos();
        let val = m.c * cs + m.s * sn;
        let der = -m.c * sn + m.s * cs;
        out.f += val;
        out.fu += wu * der;
        out.fv += wv * der;
        out.lap -= (wu * wu + wv * wv) * val;
    }
    out
}

fn default_dumbbell() -> f64 {
    0.2
}

/// Surface description as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    RoundSphere,
    Spheroid {
        c: f64,
    },
    Dumbbell {
        #[serde(default = "default_dumbbell")]
        a: f64,
        #[serde(default)]
        bump: Option<Bump>,
    },
    TwoNeck {
        beta: f64,
    },
    SphereProfile {
        rho_sin: Vec<f64>,
        z_cos: Vec<f64>,
        #[serde(default)]
        bump: Option<Bump>,
    },
    TorusOfRevolution {
        big_r: f64,
        small_r: f64,
    },
    FlatTorus {
        l1: f64,
        l2: f64,
    },
    ConformalTorus {
        l1: f64,
        l2: f64,
        modes: Vec<FourierMode>,
    },
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<SurfaceMetric> {
        match self {
            SurfaceSpec::RoundSphere => Ok(SurfaceMetric::round_sphere()),
            SurfaceSpec::Spheroid { c } => {
                if *c <= 0.0 {
                    return Err(Error::Precondition("spheroid axis must be positive".into()));
                }
                Ok(SurfaceMetric::spheroid(*c))
            }
            SurfaceSpec::Dumbbell { a, bump } => SurfaceMetric::dumbbell(*a, *bump),
            SurfaceSpec::TwoNeck { beta } => SurfaceMetric::two_neck(*beta),
            SurfaceSpec::SphereProfile { rho_sin, z_cos, bump } => {
                SurfaceMetric::sphere_of_revolution("sphere_profile", rho_sin.clone(), z_cos.clone(), *bump)
            }
            SurfaceSpec::TorusOfRevolution { big_r, small_r } => SurfaceMetric::torus_of_revolution(*big_r, *small_r),
            SurfaceSpec::FlatTorus { l1, l2 } => SurfaceMetric::conformal_torus(*l1, *l2, vec![]),
            SurfaceSpec::ConformalTorus { l1, l2, modes } => SurfaceMetric::conformal_torus(*l1, *l2, modes.clone()),
        }
    }
}
