//! Execution of scenario steps against the numerical core.

use std::f64::consts::TAU;

use birkhoff_core::csf::{evolve, region_confined_evolve, trace_csv, DiscreteCurve, FlowOutcome, StepPolicy};
use birkhoff_core::finder::{
    assemble_complete_system, class_minimizer, parallel_chain, CompleteSystem, SeedClass,
};
use birkhoff_core::flow::{conjugate_points, ClosedGeodesicRecord, HomotopyTag, Side, UnitTangent};
use birkhoff_core::geom::{SurfaceKind, SurfaceMetric, SurfacePoint};
use birkhoff_core::section::{
    detect_homoclinic, return_map_area_check, trapped_sets, verify_birkhoff, BirkhoffAnnulus, SamplingConfig,
};
use birkhoff_core::csf::polish_closed_geodesic;
use birkhoff_surgery::chain_table;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{AnnulusSpec, CurveSpec, GeodesicSpec, Line, Orientation, SideSpec, StartSpec, Step, SystemSpec};
use crate::svg::curve_svg;
use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn check(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }

    fn close(name: &str, got: f64, want: f64, tol: f64) -> Self {
        Self::check(name, (got - want).abs() <= tol, format!("got {got}, expected {want} ± {tol}"))
    }
}

/// Result of one step: JSON payload, assertions and extra files to write.
#[derive(Debug, Clone, Default)]
pub struct StepOutcome {
    pub result: Value,
    pub assertions: Vec<Assertion>,
    pub files: Vec<(String, String)>,
}

fn rt(e: birkhoff_core::Error) -> LabError {
    LabError::Runtime(e.to_string())
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialise")
}

fn tangent(m: &SurfaceMetric, s: &StartSpec) -> Result<UnitTangent, LabError> {
    UnitTangent::from_angle(m, SurfacePoint::new(s.u, s.v), s.theta).map_err(rt)
}

pub fn geodesic(m: &SurfaceMetric, g: &GeodesicSpec) -> Result<ClosedGeodesicRecord, LabError> {
    let tag = match (g.class, m.kind) {
        (Some([p, q]), _) => HomotopyTag::Torus { p, q },
        (None, SurfaceKind::SphereOfRevolution) => HomotopyTag::Contractible(true),
        (None, _) => return Err(LabError::Config("geodesics on tori need a `class`".into())),
    };
    ClosedGeodesicRecord::from_orbit(m, &tangent(m, &g.start)?, g.length, tag).map_err(rt)
}

pub fn annuli(m: &SurfaceMetric, specs: &[AnnulusSpec]) -> Result<Vec<BirkhoffAnnulus>, LabError> {
    let mut out = Vec::new();
    for a in specs {
        let axis = match a.line {
            Line::U => 0,
            Line::V => 1,
        };
        let revs: &[bool] = match a.orientation {
            Orientation::Forward => &[false],
            Orientation::Backward => &[true],
            Orientation::Both => &[false, true],
        };
        for &r in revs {
            out.push(BirkhoffAnnulus::level(m, axis, a.value, r).map_err(|e| LabError::Config(e.to_string()))?);
        }
    }
    Ok(out)
}

fn side(s: SideSpec) -> Side {
    match s {
        SideSpec::Left => Side::Left,
        SideSpec::Right => Side::Right,
    }
}

fn system(m: &SurfaceMetric, spec: &SystemSpec) -> Result<CompleteSystem, LabError> {
    match spec {
        SystemSpec::Explicit { geodesics, limit_sub } => {
            let all = geodesics.iter().map(|g| geodesic(m, g)).collect::<Result<Vec<_>, _>>()?;
            if limit_sub.iter().any(|&i| i >= all.len()) {
                return Err(LabError::Config("limit_sub index out of range".into()));
            }
            Ok(CompleteSystem { all, limit_sub: limit_sub.clone(), return_bound: None })
        }
        SystemSpec::Parallels { parallels } => {
            let chain = parallel_chain(m, parallels).map_err(rt)?;
            assemble_complete_system(m, &chain).map_err(rt)
        }
    }
}

pub fn run_step(m: &SurfaceMetric, step: &Step, seed: Option<u64>) -> Result<StepOutcome, LabError> {
    let mut out = StepOutcome::default();
    match step {
        Step::SurgeryTable { g_max, expect_formula } => {
            let rows = chain_table(*g_max);
            let mut csv = String::from("G,euler_char,genus,boundary,V,E,F\n");
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.genus_g, r.euler_char, r.surface_genus, r.boundary_count, r.vertices, r.edges, r.faces
                ));
                if *expect_formula {
                    let g = r.genus_g as i64;
                    let ok = r.euler_char == 4 - 8 * g && r.surface_genus == 1 && r.boundary_count as i64 == 8 * g - 4;
                    out.assertions.push(Assertion::check(&format!("chain G={g}"), ok, format!("{r:?}")));
                }
            }
            out.result = to_value(&rows);
            out.files.push(("chain_table.csv".into(), csv));
        }
        Step::ConjugatePoints { start, t_max, expect_first, expect_none, tol } => {
            let times = conjugate_points(m, &tangent(m, start)?, *t_max).map_err(rt)?;
            if let Some(w) = expect_first {
                match times.first() {
                    Some(&t) => out.assertions.push(Assertion::close("first conjugate time", t, *w, *tol)),
                    None => out.assertions.push(Assertion::check("first conjugate time", false, "none found".into())),
                }
            }
            if *expect_none {
                out.assertions.push(Assertion::check("no conjugate points", times.is_empty(), format!("{times:?}")));
            }
            out.result = json!({ "conjugate_times": times });
        }
        Step::Floquet { geodesic: g, expect_kind, expect_sigma, expect_rotation, tol } => {
            let rec = geodesic(m, g)?;
            let f = &rec.floquet;
            if let Some(k) = expect_kind {
                let got = format!("{:?}", f.kind);
                out.assertions.push(Assertion::check("orbit type", &got == k, format!("got {got}, expected {k}")));
            }
            if let Some(s) = expect_sigma {
                let rel = (f.sigma[0] - s).abs() / s.abs();
                out.assertions.push(Assertion::check("multiplier", rel <= *tol, format!("σ = {}, relative error {rel}", f.sigma[0])));
            }
            if let Some(r) = expect_rotation {
                let got = f.rotation.unwrap_or(f64::NAN);
                let d = (got - r.rem_euclid(TAU)).rem_euclid(TAU);
                let d = d.min(TAU - d);
                out.assertions.push(Assertion::check("rotation", d <= *tol, format!("got {got}, expected {r} mod 2π")));
            }
            out.assertions.push(Assertion::close("det", f.det, 1.0, 1e-6));
            out.result = json!({
                "length": rec.length,
                "floquet": to_value(f),
                "conjugate_times": rec.conjugate_times,
                "is_waist": rec.is_waist,
            });
        }
        Step::Csf { curve, region, max_steps, expect_length, expect_collapse, expect_extinction, tol } => {
            let c0 = match curve {
                CurveSpec::Circle { center, r, n } => DiscreteCurve::circle(SurfacePoint::new(center[0], center[1]), *r, *n),
                CurveSpec::SineLoop { base, shift, amp, j, n } => {
                    DiscreteCurve::sine_loop(SurfacePoint::new(base[0], base[1]), *shift, *amp, *j, *n)
                }
            };
            let mut policy = StepPolicy::default();
            if let Some(k) = max_steps {
                policy.max_steps = *k;
            }
            let run = match region {
                Some(r) => region_confined_evolve(m, &c0, r.clone(), policy),
                None => evolve(m, &c0, policy),
            }
            .map_err(rt)?;
            let monotone = run.trace.windows(2).all(|w| w[1].length <= w[0].length);
            out.assertions.push(Assertion::check("length non-increasing", monotone, format!("{} steps", run.steps)));
            let outcome = match &run.outcome {
                FlowOutcome::ConvergedGeodesic(rec) => {
                    if let Some(l) = expect_length {
                        out.assertions.push(Assertion::close("limit length", rec.length, *l, *tol));
                    }
                    json!({ "converged": { "length": rec.length, "kind": format!("{:?}", rec.kind), "is_waist": rec.is_waist } })
                }
                FlowOutcome::Collapsed { point, s_extinct } => {
                    if let Some(e) = expect_extinction {
                        let rel = (s_extinct / e - 1.0).abs();
                        out.assertions.push(Assertion::check("extinction time", rel <= *tol, format!("s = {s_extinct}, relative error {rel}")));
                    }
                    json!({ "collapsed": { "u": point.u, "v": point.v, "s_extinct": s_extinct } })
                }
                FlowOutcome::Running { s, .. } => json!({ "running": { "s": s } }),
            };
            let converged = matches!(run.outcome, FlowOutcome::ConvergedGeodesic(_));
            let collapsed = matches!(run.outcome, FlowOutcome::Collapsed { .. });
            if expect_length.is_some() {
                out.assertions.push(Assertion::check("converged", converged, format!("{outcome}")));
            }
            if *expect_collapse || expect_extinction.is_some() {
                out.assertions.push(Assertion::check("collapsed", collapsed, format!("{outcome}")));
            }
            out.result = json!({ "outcome": outcome, "steps": run.steps, "rejected": run.rejected });
            out.files.push(("csf_trace.csv".into(), trace_csv(&run.trace)));
            out.files.push(("csf_final.csv".into(), run.final_curve.to_csv()));
            out.files.push(("csf_curves.svg".into(), curve_svg(m, &[&c0, &run.final_curve])));
        }
        Step::Minimizer { class, expect_length, tol } => {
            let rec = class_minimizer(m, &SeedClass::Lattice { p: class[0], q: class[1] }).map_err(rt)?;
            if let Some(l) = expect_length {
                out.assertions.push(Assertion::close("minimizer length", rec.length, *l, *tol));
            }
            out.result = json!({ "length": rec.length, "kind": format!("{:?}", rec.kind), "is_waist": rec.is_waist });
            out.files.push(("minimizer.csv".into(), rec.curve.to_csv()));
        }
        Step::VerifyBirkhoff { annuli: specs, n_samples, t_budget, l_bound, expect_section } => {
            let a = annuli(m, specs)?;
            let cfg = SamplingConfig { n_samples: *n_samples, seed: seed.expect("validated"), t_budget: *t_budget };
            let rep = verify_birkhoff(m, &a, cfg, *l_bound).map_err(rt)?;
            if let Some(e) = expect_section {
                out.assertions.push(Assertion::check(
                    "section evidence",
                    rep.is_section_evidence == *e,
                    format!("returned {}/{}, max τ = {}", rep.returned, rep.samples, rep.max_tau),
                ));
            }
            out.files.push(("return_times.csv".into(), rep.histogram_csv()));
            out.result = to_value(&rep);
        }
        Step::TrappedSets { system: spec, n_samples, t_budget, expect_no_trapping, expect_limit_lengths, witness_clairaut, tol } => {
            let sys = system(m, spec)?;
            if let Some(want) = expect_limit_lengths {
                let got: Vec<f64> = sys.limit_sub.iter().map(|&i| sys.all[i].length).collect();
                let ok = got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= *tol);
                out.assertions.push(Assertion::check("limit waists", ok, format!("lengths {got:?}, expected {want:?}")));
            }
            let cfg = SamplingConfig { n_samples: *n_samples, seed: seed.expect("validated"), t_budget: *t_budget };
            let rep = trapped_sets(m, &sys, cfg).map_err(rt)?;
            let witnesses: Vec<_> = rep.trapped_forward.iter().chain(&rep.trapped_backward).collect();
            if *expect_no_trapping {
                out.assertions.push(Assertion::check(
                    "no trapped orbits",
                    witnesses.is_empty(),
                    format!("{} forward, {} backward", rep.trapped_forward.len(), rep.trapped_backward.len()),
                ));
            } else {
                out.assertions.push(Assertion::check("anomalies", rep.anomalies == 0, format!("{}", rep.anomalies)));
                out.assertions.push(Assertion::check("witnesses found", !witnesses.is_empty(), format!("{}", witnesses.len())));
            }
            if let Some(c) = witness_clairaut {
                let worst = witnesses.iter().filter_map(|w| w.clairaut).map(|k| (k.abs() - c).abs()).fold(0.0, f64::max);
                out.assertions.push(Assertion::check("witness Clairaut level", worst <= *tol, format!("max deviation {worst}")));
            }
            out.result = json!({
                "system_lengths": sys.all.iter().map(|r| r.length).collect::<Vec<_>>(),
                "limit_sub": sys.limit_sub,
                "report": to_value(&rep),
            });
        }
        Step::AreaCheck { annulus, n_s, n_phi, t_budget, max_defect } => {
            let spec = AnnulusSpec { orientation: Orientation::Forward, ..*annulus };
            let a = annuli(m, &[spec])?.remove(0);
            let rep = return_map_area_check(m, &a, *n_s, *n_phi, *t_budget).map_err(rt)?;
            out.assertions.push(Assertion::check(
                "area defect",
                rep.max_defect < *max_defect,
                format!("max defect {} over {} points", rep.max_defect, rep.evaluated),
            ));
            out.result = to_value(&rep);
        }
        Step::Homoclinic { waist_v, side_u, side_s, transversal_v, t_budget, expect_nonempty } => {
            let c = DiscreteCurve::from_fn(128, [m.periods().0, 0.0], |t| SurfacePoint::new(m.periods().0 * t, *waist_v));
            let waist = polish_closed_geodesic(m, &c).map_err(rt)?;
            let found = detect_homoclinic(m, &waist, side(*side_u), side(*side_s), *transversal_v, *t_budget).map_err(rt)?;
            if let Some(e) = expect_nonempty {
                out.assertions.push(Assertion::check("homoclinic points", found.is_empty() != *e, format!("{} found", found.len())));
            }
            let mut csv = String::from("s,phi,forward_distance,backward_distance\n");
            for h in &found {
                csv.push_str(&format!("{},{},{},{}\n", h.s, h.phi, h.forward_distance, h.backward_distance));
            }
            out.files.push(("homoclinic.csv".into(), csv));
            out.result = json!({ "waist_length": waist.length, "waist_kind": format!("{:?}", waist.kind), "points": to_value(&found) });
        }
    }
    Ok(out)
}
