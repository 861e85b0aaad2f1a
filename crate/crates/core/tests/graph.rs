mod common;

use netloc::graph::*;
use proptest::prelude::*;

#[test]
fn triangle_is_smallest_cycle() {
    let g = make_cycle(3).unwrap();
    assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
}

#[test]
fn cycle_of_four_is_two_regular() {
    let g = make_cycle(4).unwrap();
    assert_eq!(g.edge_count(), 4);
    assert!(g.degrees().iter().all(|&d| d == 2));
}

#[test]
fn large_cycle_has_leading_eigenvalue_two() {
    let g = make_cycle(200).unwrap();
    assert!(is_connected(&g));
    assert_eq!(g.edge_count(), 200);
    let small = make_cycle(40).unwrap();
    let (lambda, _) = common::oracle_pev(&small);
    assert!((lambda - 2.0).abs() < 1e-10);
    let r = netloc::spectral::power_iteration(&g, 1e-10, 1_000_000).unwrap();
    assert!((r.lambda1 - 2.0).abs() < 1e-8);
}

#[test]
fn deterministic_family_shapes() {
    let star = make_star(5).unwrap();
    assert_eq!(star.degree(0), 4);
    assert!((1..5).all(|v| star.degree(v) == 1));
    let wheel = make_wheel(5).unwrap();
    assert_eq!(wheel.degree(0), 4);
    assert!((1..5).all(|v| wheel.degree(v) == 3));
    let path = make_path(2).unwrap();
    assert_eq!(path.edges(), &[(0, 1)]);
}

#[test]
fn too_small_sizes_are_rejected() {
    assert!(make_cycle(2).is_err());
    assert!(make_path(1).is_err());
    assert!(make_star(1).is_err());
    assert!(make_wheel(3).is_err());
}

#[test]
fn er_with_unit_probability_is_complete() {
    let g = make_er(12, 1.0, 3).unwrap();
    assert_eq!(g, make_complete(12).unwrap());
}

#[test]
fn er_rejects_bad_probability() {
    assert!(matches!(make_er(10, 1.5, 0), Err(netloc::Error::InvalidProbability(_))));
    assert!(make_er(10, -0.1, 0).is_err());
}

#[test]
fn er_mean_edge_count_matches_binomial_expectation() {
    let n = 1000;
    let p = 0.01;
    let seeds = 200;
    let total: f64 = (0..seeds)
        .map(|s| make_er(n, p, s).unwrap().edge_count() as f64)
        .sum();
    let mean = total / seeds as f64;
    let pairs = (n * (n - 1) / 2) as f64;
    let expected = pairs * p;
    let sigma_of_mean = (pairs * p * (1.0 - p) / seeds as f64).sqrt();
    assert!((expected - 4995.0).abs() < 1e-9);
    assert!((mean - expected).abs() < 3.0 * sigma_of_mean, "mean {mean}");
}

#[test]
fn er_is_deterministic_per_seed() {
    assert_eq!(make_er(80, 0.1, 9).unwrap(), make_er(80, 0.1, 9).unwrap());
    assert_ne!(make_er(80, 0.1, 9).unwrap(), make_er(80, 0.1, 10).unwrap());
}

#[test]
fn scale_free_without_growth_is_seed_star() {
    assert_eq!(make_scale_free(3, 2, 1).unwrap(), make_star(3).unwrap());
}

#[test]
fn scale_free_edge_count() {
    for seed in 0..10 {
        let g = make_scale_free(100, 2, seed).unwrap();
        assert_eq!(g.edge_count(), 2 * (100 - 2 - 1) + 2);
        assert!(is_connected(&g));
    }
}

#[test]
fn scale_free_tail_is_heavier_than_er() {
    let n = 300;
    let mut ratios = Vec::new();
    for seed in 0..50 {
        let sf = make_scale_free(n, 2, seed).unwrap();
        let mean_degree = 2.0 * sf.edge_count() as f64 / n as f64;
        let er = make_er(n, mean_degree / (n - 1) as f64, 1000 + seed).unwrap();
        ratios.push(sf.max_degree() as f64 / er.max_degree() as f64);
    }
    let mean: f64 = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean > 2.0, "mean max-degree ratio {mean}");
}

#[test]
fn connectivity() {
    assert!(is_connected(&make_star(5).unwrap()));
    let two_triangles = Graph::new(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
    assert!(!is_connected(&two_triangles));
    assert!(is_connected(&make_er(50, 0.9, 4).unwrap()));
}

#[test]
fn graph_construction_rejects_invalid_edges() {
    assert!(Graph::new(3, [(0, 0)]).is_err());
    assert!(Graph::new(3, [(0, 1), (1, 0)]).is_err());
    assert!(Graph::new(3, [(0, 3)]).is_err());
    assert!(Graph::new(0, []).is_err());
}

#[test]
fn edge_list_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.edges");
    let g = make_scale_free(40, 3, 5).unwrap();
    g.write_edge_list(&path).unwrap();
    assert_eq!(Graph::read_edge_list(&path).unwrap(), g);
}

#[test]
fn edge_list_parse_errors_carry_line_numbers() {
    let origin = std::path::Path::new("bad.edges");
    let err = Graph::parse_edge_list("3 2\n0 1\n1 x\n", origin).unwrap_err();
    match err {
        netloc::Error::Parse { line, .. } => assert_eq!(line, 3),
        other => panic!("unexpected error {other:?}"),
    }
    assert!(Graph::parse_edge_list("3 2\n0 1\n", origin).is_err());
}

#[test]
fn family_generation_respects_minimum_sizes() {
    for fam in [GraphFamily::Cycle, GraphFamily::Path, GraphFamily::Star, GraphFamily::Wheel] {
        let g = fam.generate(fam.min_size(), 0).unwrap();
        assert_eq!(g.n(), fam.min_size());
        assert!(fam.generate(fam.min_size() - 1, 0).is_err());
    }
}

fn any_family() -> impl Strategy<Value = GraphFamily> {
    prop_oneof![
        Just(GraphFamily::Cycle),
        Just(GraphFamily::Path),
        Just(GraphFamily::Star),
        Just(GraphFamily::Wheel),
        (0.0f64..1.0).prop_map(|p| GraphFamily::Er {
            density: ErDensity::Probability(p)
        }),
        (1usize..4).prop_map(|m| GraphFamily::ScaleFree { m }),
    ]
}

proptest! {
    #[test]
    fn generated_graphs_satisfy_invariants(fam in any_family(), extra in 0usize..60, seed in any::<u64>()) {
        let n = fam.min_size() + extra;
        let g = fam.generate(n, seed).unwrap();
        prop_assert_eq!(g.n(), n);
        let degree_sum: usize = g.degrees().iter().sum();
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
        for &(a, b) in g.edges() {
            prop_assert!(a < b);
        }
        let mut sorted = g.edges().to_vec();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), g.edge_count());
        if !fam.is_random() || matches!(fam, GraphFamily::ScaleFree { .. }) {
            prop_assert!(is_connected(&g));
        }
        prop_assert_eq!(fam.generate(n, seed).unwrap().to_edge_list(), g.to_edge_list());
    }

    #[test]
    fn relabeling_preserves_degree_multiset(n in 3usize..30, seed in any::<u64>()) {
        let g = common::random_connected_graph(n, 0.2, seed);
        let perm = common::random_permutation(n, seed ^ 1);
        let h = g.relabel(&perm).unwrap();
        for v in 0..n {
            prop_assert_eq!(g.degree(v), h.degree(perm[v]));
        }
        prop_assert_eq!(g.edge_count(), h.edge_count());
    }
}
