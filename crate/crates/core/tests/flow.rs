use std::f64::consts::{E, PI, TAU};

use birkhoff_core::flow::*;
use birkhoff_core::geom::*;
use birkhoff_core::Error;
use proptest::prelude::*;

fn torus() -> SurfaceMetric {
    SurfaceMetric::torus_of_revolution(2.0, 1.0).unwrap()
}

/// Unit tangent along the parallel `v = v0` moving in the +u direction.
fn parallel(m: &SurfaceMetric, v0: f64) -> UnitTangent {
    UnitTangent::new(m, SurfacePoint::new(0.0, v0), TangentVector::new(1.0, 0.0)).unwrap()
}

fn parallel_record(m: &SurfaceMetric, v0: f64) -> ClosedGeodesicRecord {
    let rho = m.profile(v0).unwrap().rho;
    ClosedGeodesicRecord::from_orbit(m, &parallel(m, v0), TAU * rho, HomotopyTag::Torus { p: 1, q: 0 }).unwrap()
}

#[test]
fn flat_line_wraps_once() {
    let m = SurfaceMetric::flat_torus(1.0, 1.0);
    let z = parallel(&m, 0.0);
    let tr = integrate(&m, &z, 1.0, false).unwrap();
    let end = tr.end_tangent();
    assert!(tangent_gap(&m, &end, &z) < 1e-12);
    assert!((end.base.u - 1.0).abs() < 1e-12);
}

#[test]
fn closed_orbits_return() {
    let s = SurfaceMetric::round_sphere();
    let z = parallel(&s, PI / 2.0);
    let tr = integrate(&s, &z, TAU, false).unwrap();
    assert!(tangent_gap(&s, &tr.end_tangent(), &z) < 1e-9);

    let m = torus();
    let z = parallel(&m, PI);
    let c0 = clairaut(&m, &z).unwrap();
    let tr = integrate(&m, &z, TAU, false).unwrap();
    assert!(tangent_gap(&m, &tr.end_tangent(), &z) < 1e-9);
    for y in &tr.states {
        let c = clairaut(&m, &UnitTangent::from_state(y)).unwrap();
        assert!((c - c0).abs() < 1e-9);
    }
}

#[test]
fn conjugate_point_oracles() {
    let s = SurfaceMetric::round_sphere();
    let z = UnitTangent::from_angle(&s, SurfacePoint::new(0.4, 1.1), 0.7).unwrap();
    let c = conjugate_points(&s, &z, 4.0).unwrap();
    assert_eq!(c.len(), 1);
    assert!((c[0] - PI).abs() < 1e-4);

    let m = torus();
    let c = conjugate_points(&m, &parallel(&m, 0.0), 6.0).unwrap();
    assert_eq!(c.len(), 1);
    assert!((c[0] - PI * 3f64.sqrt()).abs() < 1e-3);

    let f = SurfaceMetric::flat_torus(1.0, 1.0);
    let z = UnitTangent::from_angle(&f, SurfacePoint::new(0.2, 0.3), 0.9).unwrap();
    assert!(conjugate_points(&f, &z, 50.0).unwrap().is_empty());
}

#[test]
fn sturm_comparison_on_constant_curvature_orbits() {
    let m = torus();
    assert!(conjugate_points(&m, &parallel(&m, PI), 30.0).unwrap().is_empty());
    let s = SurfaceMetric::round_sphere();
    let c = conjugate_points(&s, &parallel(&s, PI / 2.0), 10.0).unwrap();
    assert_eq!(c.len(), 3);
    for (k, t) in c.iter().enumerate() {
        assert!((t - (k + 1) as f64 * PI).abs() < 1e-6);
    }
}

#[test]
fn inner_equator_is_hyperbolic() {
    let m = torus();
    let rec = parallel_record(&m, PI);
    let fl = floquet(&m, &rec).unwrap();
    assert_eq!(fl.kind, OrbitType::Hyperbolic);
    let sigma = E.powf(TAU);
    assert!((fl.sigma[0] / sigma - 1.0).abs() < 1e-3);
    assert!((fl.det - 1.0).abs() < 1e-6);
    assert!((fl.sigma[0] * fl.sigma_inv[0] - 1.0).abs() < 1e-6);
    assert!(rec.is_waist && !rec.has_conjugate_points);
}

#[test]
fn outer_equator_is_elliptic() {
    let m = torus();
    let rec = parallel_record(&m, 0.0);
    assert_eq!(rec.kind, OrbitType::Elliptic);
    let want = (TAU * 3f64.sqrt()).rem_euclid(TAU);
    assert!((rec.floquet.rotation.unwrap() - want).abs() < 1e-3);
    assert!((rec.floquet.det - 1.0).abs() < 1e-6);
    assert!(rec.has_conjugate_points && !rec.is_waist);
}

#[test]
fn flat_closed_geodesic_is_degenerate() {
    let f = SurfaceMetric::flat_torus(1.0, 1.0);
    let rec = ClosedGeodesicRecord::from_orbit(&f, &parallel(&f, 0.25), 1.0, HomotopyTag::Torus { p: 1, q: 0 }).unwrap();
    assert_eq!(rec.kind, OrbitType::Degenerate);
    assert!((rec.floquet.sigma[0] - 1.0).abs() < 1e-9);
    assert!(!rec.has_conjugate_points);
    assert_eq!(invariant_manifold_seed(&f, &rec, Side::Left, true), Err(Error::NotHyperbolic));
}

#[test]
fn wrong_period_is_not_closed() {
    let m = torus();
    let r = ClosedGeodesicRecord::from_orbit(&m, &parallel(&m, PI), 5.0, HomotopyTag::Torus { p: 1, q: 0 });
    assert!(matches!(r, Err(Error::NotClosed { .. })));
}

#[test]
fn stable_seeds_lie_on_the_clairaut_level() {
    let m = torus();
    let rec = parallel_record(&m, PI);
    let delta = 1e-4 * m.inj_radius_estimate;
    for side in [Side::Left, Side::Right] {
        let seeds = invariant_manifold_seed(&m, &rec, side, true).unwrap();
        for z in &seeds {
            let c = clairaut(&m, z).unwrap();
            assert!((c - 1.0).abs() < 10.0 * delta * delta, "{c}");
            // the left normal of +u at the inner equator points to larger v
            assert!(side.sign() * (z.base.v - PI) > 0.0);
        }
    }
}

#[test]
fn neck_unstable_seeds_leave_forward_and_approach_backward() {
    let m = SurfaceMetric::dumbbell(0.2, None).unwrap();
    let rec = parallel_record(&m, PI / 2.0);
    assert_eq!(rec.kind, OrbitType::Hyperbolic);
    let delta = 1e-4 * m.inj_radius_estimate;
    for side in [Side::Left, Side::Right] {
        for z in invariant_manifold_seed(&m, &rec, side, false).unwrap().iter().take(4) {
            let fwd = integrate(&m, z, 6.0, false).unwrap();
            assert!((fwd.end()[1] - PI / 2.0).abs() > 20.0 * delta);
            let back = integrate(&m, &z.flip(), 6.0, false).unwrap();
            assert!((back.end()[1] - PI / 2.0).abs() < 0.1 * delta);
        }
    }
}

#[test]
fn trajectory_csv_has_expected_rows() {
    let m = torus();
    let tr = integrate(&m, &parallel(&m, 0.5), 1.0, true).unwrap();
    let csv = tr.to_csv(&m, 0.25).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("t,u,v,du,dv,J,dJ"));
}

fn revolution_models() -> Vec<SurfaceMetric> {
    vec![torus(), SurfaceMetric::spheroid(0.9), SurfaceMetric::dumbbell(0.2, None).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn clairaut_is_conserved(idx in 0usize..3, v in 0.6f64..2.5, theta in -1.2f64..1.2) {
        let m = &revolution_models()[idx];
        let z = UnitTangent::from_angle(m, SurfacePoint::new(0.3, v), theta).unwrap();
        let c0 = clairaut(m, &z).unwrap();
        let tr = integrate(m, &z, 100.0, false).unwrap();
        for y in &tr.states {
            let c = clairaut(m, &UnitTangent::from_state(y)).unwrap();
            prop_assert!((c - c0).abs() < 1e-8);
        }
    }

    #[test]
    fn time_reversal(idx in 0usize..3, v in 0.6f64..2.5, theta in -3.0f64..3.0) {
        let m = &revolution_models()[idx];
        let z = UnitTangent::from_angle(m, SurfacePoint::new(0.3, v), theta).unwrap();
        let there = integrate(m, &z, 10.0, false).unwrap().end_tangent();
        let back = integrate(m, &there.flip(), 10.0, false).unwrap().end_tangent().flip();
        prop_assert!((back.base.u - z.base.u).abs() + (back.base.v - z.base.v).abs() < 1e-8);
        prop_assert!((back.dir.du - z.dir.du).abs() + (back.dir.dv - z.dir.dv).abs() < 1e-8);
    }

    #[test]
    fn dense_output_is_unit_speed(theta in -3.0f64..3.0, t in 0.0f64..30.0) {
        let m = SurfaceMetric::conformal_torus(1.0, 1.0, vec![FourierMode { kx: 1, ky: 1, c: 0.05, s: 0.02 }]).unwrap();
        let z = UnitTangent::from_angle(&m, SurfacePoint::new(0.1, 0.2), theta).unwrap();
        let tr = integrate(&m, &z, 30.0, true).unwrap();
        let y = tr.state_at(&m, t).unwrap();
        let d = m.metric_at(SurfacePoint::new(y[0], y[1])).unwrap();
        prop_assert!((d.norm([y[2], y[3]]) - 1.0).abs() < 1e-9);
    }
}
