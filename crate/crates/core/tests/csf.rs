use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use birkhoff_core::csf::*;
use birkhoff_core::flow::HomotopyTag;
use birkhoff_core::geom::*;
use birkhoff_core::Error;
use proptest::prelude::*;

fn flat() -> &'static SurfaceMetric {
    static M: OnceLock<SurfaceMetric> = OnceLock::new();
    M.get_or_init(|| SurfaceMetric::flat_torus(TAU, TAU))
}

fn torus() -> &'static SurfaceMetric {
    static M: OnceLock<SurfaceMetric> = OnceLock::new();
    M.get_or_init(|| SurfaceMetric::torus_of_revolution(2.0, 1.0).unwrap())
}

fn parallel_curve(v0: f64, n: usize) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, [TAU, 0.0], |t| SurfacePoint::new(TAU * t, v0))
}

#[test]
fn small_flat_circle_has_constant_curvature() {
    for &r in &[0.05, 0.1, 0.3] {
        let c = DiscreteCurve::circle(SurfacePoint::new(1.0, 2.0), r, 200);
        let p = curvature_profile(flat(), &c).unwrap();
        for k in &p.k {
            assert!((k - 1.0 / r).abs() < 1e-3 / r, "k = {k}, r = {r}");
        }
        // inscribed polygon perimeter
        let exact = 200.0 * 2.0 * r * (PI / 200.0).sin();
        assert!((p.length - exact).abs() < 1e-12);
    }
}

#[test]
fn straight_lattice_loops_have_zero_curvature() {
    for &(p, q) in &[(1, 0), (0, 1), (1, 1), (2, 1)] {
        let shift = [p as f64 * TAU, q as f64 * TAU];
        let c = DiscreteCurve::from_fn(64, shift, |t| SurfacePoint::new(0.3 + t * shift[0], 0.7 + t * shift[1]));
        let prof = curvature_profile(flat(), &c).unwrap();
        assert!(prof.max_abs() < 1e-9);
        assert!((prof.length - shift[0].hypot(shift[1])).abs() < 1e-9);
        assert!(is_embedded(flat(), &c));
    }
}

#[test]
fn parallels_of_the_torus_match_profile_formula() {
    let m = torus();
    for &v0 in &[0.3, 1.0, 2.0, 2.8, 4.0] {
        let c = parallel_curve(v0, 400);
        let prof = curvature_profile(m, &c).unwrap();
        // ρ = 2 + cos v, a = 1: k = sin v / (2 + cos v) along +u
        let expect = v0.sin() / (2.0 + v0.cos());
        for k in &prof.k {
            assert!((k - expect).abs() < 1e-10, "v0 = {v0}: {k} vs {expect}");
        }
        // chart chords along a parallel have metric length ρ Δu
        assert!((prof.length - TAU * (2.0 + v0.cos())).abs() < 1e-12);
    }
}

#[test]
fn resampling_equalises_gaps() {
    let m = torus();
    let c = DiscreteCurve::from_fn(97, [TAU, 0.0], |t| {
        let s = t + 0.1 * (TAU * t).sin() / TAU;
        SurfacePoint::new(TAU * s, PI + 0.4 * (TAU * 2.0 * s).sin())
    });
    let r = resample(m, &c, 150).unwrap();
    let gaps: Vec<f64> = (0..r.len())
        .map(|i| {
            let (a, b) = (r.at(i as isize), r.at(i as isize + 1));
            let mid = SurfacePoint::new(0.5 * (a.u + b.u), 0.5 * (a.v + b.v));
            m.metric_at(mid).unwrap().norm([b.u - a.u, b.v - a.v])
        })
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    for g in &gaps {
        assert!((g / mean - 1.0).abs() < 0.01);
    }
}

#[test]
fn embeddedness_detects_crossings() {
    let m = flat();
    let fig8 = DiscreteCurve::from_fn(100, [0.0, 0.0], |t| {
        SurfacePoint::new(3.0 + (TAU * t).sin(), 3.0 + (TAU * t).sin() * (TAU * t).cos())
    });
    assert!(!is_embedded(m, &fig8));
    assert!(is_embedded(m, &DiscreteCurve::circle(SurfacePoint::new(3.0, 3.0), 1.0, 100)));
    // a circle overlapping its own deck translate
    assert!(!is_embedded(m, &DiscreteCurve::circle(SurfacePoint::new(3.0, 3.0), 3.3, 100)));
    // a simple (1,0) polygon whose tower rises past its own vertical translate
    let tower = [(0.0, 3.0), (3.0, 3.0), (3.0, 9.5), (4.0, 9.5), (4.0, 3.5), (6.0, 3.5)];
    let tower = DiscreteCurve::new(tower.iter().map(|&(u, v)| SurfacePoint::new(u, v)).collect(), [TAU, 0.0]);
    assert!(!is_embedded(m, &tower));
    let low = [(0.0, 3.0), (3.0, 3.0), (3.0, 8.5), (4.0, 8.5), (4.0, 3.5), (6.0, 3.5)];
    let low = DiscreteCurve::new(low.iter().map(|&(u, v)| SurfacePoint::new(u, v)).collect(), [TAU, 0.0]);
    assert!(is_embedded(m, &low));
    let gentle = DiscreteCurve::sine_loop(SurfacePoint::new(0.0, 3.0), [TAU, 0.0], 1.0, 1, 128);
    assert!(is_embedded(m, &gentle));
}

#[test]
fn funnel_membership() {
    let m = flat();
    let line = DiscreteCurve::from_fn(64, [TAU, 0.0], |t| SurfacePoint::new(TAU * t, 1.0));
    assert!(funnel_check(m, &line, FunnelWindow { length: TAU, eps: 1e-6 }));
    assert!(!funnel_check(m, &line, FunnelWindow { length: TAU + 0.01, eps: 0.05 }));
    let c = DiscreteCurve::circle(SurfacePoint::new(1.0, 1.0), 0.1, 128);
    assert!(!funnel_check(m, &c, FunnelWindow { length: TAU * 0.1, eps: 0.5 }));
}

#[test]
fn circle_extinction_time() {
    let r0: f64 = 0.5;
    let c = DiscreteCurve::circle(SurfacePoint::new(3.0, 3.0), r0, 128);
    let run = evolve(flat(), &c, StepPolicy::default()).unwrap();
    let FlowOutcome::Collapsed { point, s_extinct } = run.outcome else {
        panic!("expected collapse, got {:?}", run.outcome);
    };
    let expect = r0 * r0 / 2.0;
    assert!((s_extinct / expect - 1.0).abs() < 0.05, "s = {s_extinct}");
    assert!((point.u - 3.0).abs() < 1e-3 && (point.v - 3.0).abs() < 1e-3);
    assert!(run.trace.windows(2).all(|w| w[1].length <= w[0].length));
}

#[test]
fn flat_sine_loop_straightens() {
    let c = DiscreteCurve::sine_loop(SurfacePoint::new(0.0, 2.0), [TAU, 0.0], 0.5, 2, 128);
    let run = evolve(flat(), &c, StepPolicy::default()).unwrap();
    let FlowOutcome::ConvergedGeodesic(rec) = run.outcome else {
        panic!("expected convergence, got {:?}", run.outcome);
    };
    assert!((rec.length - TAU).abs() < 1e-9);
    assert_eq!(rec.homotopy, HomotopyTag::Torus { p: 1, q: 0 });
    assert!(run.trace.windows(2).all(|w| w[1].length <= w[0].length));
}

#[test]
fn torus_loop_converges_to_inner_equator() {
    let m = torus();
    let c = DiscreteCurve::sine_loop(SurfacePoint::new(0.0, PI), [TAU, 0.0], 0.6, 1, 128);
    let run = evolve(m, &c, StepPolicy::default()).unwrap();
    let FlowOutcome::ConvergedGeodesic(rec) = &run.outcome else {
        panic!("expected convergence, got {:?}", run.outcome);
    };
    assert!((rec.length - TAU).abs() < 1e-3, "length {}", rec.length);
    assert!(rec.is_waist);
    let last = run.trace.last().unwrap();
    assert!(last.max_k < 1e-3);
    assert!(run.trace.windows(2).all(|w| w[1].length <= w[0].length));
    assert!(funnel_check(m, &rec.curve, FunnelWindow { length: TAU, eps: 1e-3 }));
    assert!(!trace_csv(&run.trace).is_empty());
}

#[test]
fn dumbbell_band_flow_finds_the_neck() {
    let m = SurfaceMetric::dumbbell(0.2, None).unwrap();
    let c = DiscreteCurve::sine_loop(SurfacePoint::new(0.0, 1.4), [TAU, 0.0], 0.15, 1, 128);
    let band = RegionSpec::Band { v_lo: 1.0, v_hi: 2.1 };
    let run = region_confined_evolve(&m, &c, band, StepPolicy::default()).unwrap();
    let FlowOutcome::ConvergedGeodesic(rec) = &run.outcome else {
        panic!("expected convergence, got {:?}", run.outcome);
    };
    // neck radius ρ(π/2) = 1 − 0.2
    assert!((rec.length - TAU * 0.8).abs() < 1e-6);
    assert_eq!(rec.homotopy, HomotopyTag::Contractible(true));
}

#[test]
fn spheroid_cap_flow_collapses_inside() {
    let m = SurfaceMetric::spheroid(0.6);
    let c = DiscreteCurve::sine_loop(SurfacePoint::new(0.0, 0.7), [TAU, 0.0], 0.1, 2, 128);
    let cap = RegionSpec::Cap { v_boundary: 1.0, below: true };
    let run = region_confined_evolve(&m, &c, cap, StepPolicy::default()).unwrap();
    assert!(matches!(run.outcome, FlowOutcome::Collapsed { .. }), "{:?}", run.outcome);
}

#[test]
fn boundary_start_is_rejected() {
    let m = SurfaceMetric::dumbbell(0.2, None).unwrap();
    let c = parallel_curve(1.0, 64);
    let band = RegionSpec::Band { v_lo: 1.0, v_hi: 2.1 };
    assert!(matches!(region_confined_evolve(&m, &c, band, StepPolicy::default()), Err(Error::Precondition(_))));
}

#[test]
fn budget_exhaustion_reports_running() {
    let c = DiscreteCurve::circle(SurfacePoint::new(3.0, 3.0), 0.5, 128);
    let policy = StepPolicy { max_steps: 10, ..StepPolicy::default() };
    let run = evolve(flat(), &c, policy).unwrap();
    assert!(matches!(run.outcome, FlowOutcome::Running { .. }));
    assert_eq!(run.steps, 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steps_never_lengthen(amp in 0.05f64..0.8, j in 1u32..4, v0 in 0.5f64..5.5) {
        let c = DiscreteCurve::sine_loop(SurfacePoint::new(0.0, v0), [TAU, 0.0], amp, j, 96);
        let mut run = CsfRunner::new(torus(), &c, StepPolicy::default(), None).unwrap();
        let mut prev = run.length;
        for _ in 0..40 {
            prop_assert!(run.step().unwrap());
            prop_assert!(run.length <= prev);
            prev = run.length;
        }
    }

    #[test]
    fn curvature_is_reparametrisation_invariant(r in 0.2f64..1.0, rot in 0usize..50) {
        let c = DiscreteCurve::circle(SurfacePoint::new(2.0, 2.0), r, 50);
        let mut pts = c.points.clone();
        pts.rotate_left(rot);
        let d = DiscreteCurve::new(pts, [0.0, 0.0]);
        let (a, b) = (curvature_profile(flat(), &c).unwrap(), curvature_profile(flat(), &d).unwrap());
        prop_assert!((a.length - b.length).abs() < 1e-12);
        prop_assert!((a.max_abs() - b.max_abs()).abs() < 1e-9);
    }
}
