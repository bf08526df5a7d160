use birkhoff_surgery::*;
use proptest::prelude::*;

fn census_by_degree(t: &SectionTopology) -> Vec<(i8, u32)> {
    let mut v: Vec<_> = t.boundary_components.iter().map(|b| (b.sign, b.degree)).collect();
    v.sort_unstable();
    v
}

#[test]
fn single_curve_is_two_untouched_annuli() {
    let t = fried_surgery_topology(&CurveConfiguration::general(0, vec![vec![0]])).unwrap();
    assert!(!t.connected);
    assert_eq!(t.components.len(), 2);
    for c in &t.components {
        assert_eq!((c.euler_char, c.genus, c.boundary_components.len()), (0, 0, 2));
    }
    assert_eq!(t.boundary_components.len(), 4);
    assert!(t.boundary_components.iter().all(|b| b.degree == 1));
}

#[test]
fn two_curves_crossing_once_matches_the_chain() {
    let general = CurveConfiguration::general(1, vec![vec![0, 1], vec![1, 0]]);
    let a = fried_surgery_topology(&general).unwrap();
    let b = fried_surgery_topology(&CurveConfiguration::chain(1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn local_resolution_keeps_euler_characteristic() {
    // four annuli of χ = 0; cutting along the four double arcs and regluing
    // trades the 12 fiber corners for 8, so χ drops from 0 to −4
    let t = fried_surgery_topology(&CurveConfiguration::general(1, vec![vec![0, 1], vec![1, 0]])).unwrap();
    let untouched = fried_surgery_topology(&CurveConfiguration::general(1, vec![vec![0, 0], vec![0, 0]])).unwrap();
    assert_eq!(untouched.euler_char, 0);
    assert_eq!(untouched.edges(), t.edges());
    assert_eq!(untouched.faces(), t.faces());
    assert_eq!(untouched.vertices() - t.vertices(), 4);
}

#[test]
fn invalid_patterns_are_rejected() {
    let mut chain = CurveConfiguration::chain(2);
    chain.intersections[0][2] = 1;
    chain.intersections[2][0] = 1;
    assert!(matches!(fried_surgery_topology(&chain), Err(SurgeryError::InvalidPattern(_))));
    let asym = CurveConfiguration::general(1, vec![vec![0, 1], vec![0, 0]]);
    assert!(matches!(fried_surgery_topology(&asym), Err(SurgeryError::InvalidPattern(_))));
    let diag = CurveConfiguration::general(1, vec![vec![1]]);
    assert!(matches!(fried_surgery_topology(&diag), Err(SurgeryError::InvalidPattern(_))));
}

#[test]
fn repeated_crossings_give_orientable_surfaces() {
    for k in 1..=4 {
        let t = fried_surgery_topology(&CurveConfiguration::general(1, vec![vec![0, k], vec![k, 0]])).unwrap();
        assert!(t.orientable);
        for c in &t.components {
            assert_eq!(c.euler_char, 2 - 2 * c.genus - c.boundary_components.len() as i64);
        }
    }
}

#[test]
fn json_round_trip() {
    let cfg: ConfigFile = serde_json::from_str(r#"{"genus": 1, "intersection_matrix": [[0,1],[1,0]]}"#).unwrap();
    let t = fried_surgery_topology(&cfg.into()).unwrap();
    let s = serde_json::to_string(&t).unwrap();
    let back: SectionTopology = serde_json::from_str(&s).unwrap();
    assert_eq!(back, t);
}

fn small_pattern() -> impl Strategy<Value = Vec<Vec<u32>>> {
    (2usize..6).prop_flat_map(|n| {
        proptest::collection::vec(0u32..3, n * (n - 1) / 2).prop_map(move |upper| {
            let mut m = vec![vec![0; n]; n];
            let mut it = upper.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    let x = it.next().unwrap();
                    m[i][j] = x;
                    m[j][i] = x;
                }
            }
            m
        })
    })
}

proptest! {
    #[test]
    fn chain_is_invariant_under_relabelling(g in 1u32..6, seed in any::<u64>()) {
        let cfg = CurveConfiguration::chain(g);
        let mut perm: Vec<usize> = (0..cfg.n).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = fried_surgery_topology(&cfg).unwrap();
        let b = fried_surgery_topology(&cfg.permuted(&perm)).unwrap();
        prop_assert_eq!(a.euler_char, b.euler_char);
        prop_assert_eq!(a.genus, b.genus);
        prop_assert_eq!(census_by_degree(&a), census_by_degree(&b));
        for bc in &a.boundary_components {
            let n_a = a.boundary_components.iter().filter(|x| **x == *bc).count();
            let moved = BoundaryComponent { curve: perm[bc.curve], ..bc.clone() };
            let n_b = b.boundary_components.iter().filter(|x| **x == moved).count();
            prop_assert_eq!(n_a, n_b);
        }
    }

    #[test]
    fn general_patterns_are_consistent(m in small_pattern()) {
        let t = fried_surgery_topology(&CurveConfiguration::general(1, m)).unwrap();
        prop_assert!(t.orientable);
        for c in &t.components {
            prop_assert_eq!(c.euler_char, c.vertices - c.edges + c.faces);
            prop_assert_eq!(c.euler_char, 2 - 2 * c.genus - c.boundary_components.len() as i64);
            prop_assert!(c.genus >= 0);
        }
    }

    #[test]
    fn topology_is_invariant_under_relabelling(m in small_pattern(), seed in any::<u64>()) {
        // with at most two crossings per curve their cyclic order along the
        // curve is unique, so a relabelling describes the same configuration
        prop_assume!(m.iter().all(|row| row.iter().sum::<u32>() <= 2));
        let n = m.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let cfg = CurveConfiguration::general(1, m);
        let a = fried_surgery_topology(&cfg).unwrap();
        let b = fried_surgery_topology(&cfg.permuted(&perm)).unwrap();
        prop_assert_eq!(a.euler_char, b.euler_char);
        prop_assert_eq!(a.components.len(), b.components.len());
        prop_assert_eq!(census_by_degree(&a), census_by_degree(&b));
    }
}
