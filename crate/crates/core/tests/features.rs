mod common;

use netloc::features::*;
use netloc::graph::*;
use proptest::prelude::*;

fn approx(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn clustering_reference_values() {
    assert!(clustering_coefficient(&make_complete(4).unwrap())
        .iter()
        .all(|&c| c == 1.0));
    assert!(clustering_coefficient(&make_star(5).unwrap())
        .iter()
        .all(|&c| c == 0.0));
    // hub of W5 sees four rim triangles among its six neighbour pairs
    let wheel = clustering_coefficient(&make_wheel(5).unwrap());
    assert!((wheel[0] - 4.0 / 6.0).abs() < 1e-15);
    assert!(wheel[1..].iter().all(|&c| (c - 2.0 / 3.0).abs() < 1e-15));
}

#[test]
fn pagerank_reference_values() {
    let cycle = pagerank(&make_cycle(10).unwrap(), PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER).unwrap();
    assert!(cycle.iter().all(|&x| (x - 0.1).abs() < 1e-12));
    let star = pagerank(&make_star(5).unwrap(), PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER).unwrap();
    assert!(star[0] > star[1]);
    assert!(star[1..].iter().all(|&x| (x - star[1]).abs() < 1e-14));
}

#[test]
fn pagerank_matches_linear_solve_on_path() {
    let g = make_path(3).unwrap();
    let pr = pagerank(&g, 0.85, PAGERANK_TOL, PAGERANK_MAX_ITER).unwrap();
    let exact = common::pagerank_linear(&g, 0.85);
    assert!(approx(&pr, &exact, 1e-10), "{pr:?} vs {exact:?}");
}

#[test]
fn pagerank_rejects_bad_damping() {
    let g = make_path(3).unwrap();
    assert!(pagerank(&g, 1.0, 1e-10, 100).is_err());
    assert!(pagerank(&g, -0.1, 1e-10, 100).is_err());
}

#[test]
fn betweenness_reference_values() {
    let star = betweenness_centrality(&make_star(5).unwrap());
    assert!((star[0] - 1.0).abs() < 1e-15);
    assert!(star[1..].iter().all(|&x| x == 0.0));
    let cycle = betweenness_centrality(&make_cycle(5).unwrap());
    assert!(cycle.iter().all(|&x| (x - cycle[0]).abs() < 1e-15));
    let path = betweenness_centrality(&make_path(4).unwrap());
    assert!((path[1] - 2.0 / 3.0).abs() < 1e-15 && (path[2] - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(path, common::brute_force_betweenness(&make_path(4).unwrap()));
}

#[test]
fn degree_and_closeness_reference_values() {
    let star = make_star(5).unwrap();
    assert_eq!(degree_centrality(&star)[0], 1.0);
    let c = closeness_centrality(&star).unwrap();
    assert_eq!(c[0], 1.0);
    assert!((c[1] - 4.0 / 7.0).abs() < 1e-15);
    assert!(degree_centrality(&make_cycle(9).unwrap())
        .iter()
        .all(|&d| (d - 2.0 / 8.0).abs() < 1e-15));
    assert_eq!(degree_centrality(&make_path(2).unwrap()), vec![1.0, 1.0]);
    assert!(closeness_centrality(&make_complete(6).unwrap())
        .unwrap()
        .iter()
        .all(|&x| x == 1.0));
}

#[test]
fn closeness_matches_floyd_warshall() {
    let g = make_scale_free(30, 2, 8).unwrap();
    let d = common::floyd_warshall(&g);
    let c = closeness_centrality(&g).unwrap();
    for v in 0..g.n() {
        let total: usize = d[v].iter().sum();
        assert!((c[v] - (g.n() - 1) as f64 / total as f64).abs() < 1e-14);
    }
}

#[test]
fn closeness_rejects_disconnected_graphs() {
    let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
    assert!(closeness_centrality(&g).is_err());
    assert!(build_feature_matrix(&g).is_err());
}

#[test]
fn symmetric_graph_scales_to_zero() {
    let f = build_feature_matrix(&make_cycle(10).unwrap()).unwrap();
    assert!(f.data().iter().all(|&x| x == 0.0));
}

#[test]
fn star_hub_dominates_degree_columns() {
    let g = make_star(5).unwrap();
    let raw = raw_feature_columns(&g).unwrap();
    for col in [1, 2, 3, 4, 5] {
        assert!(raw[col][0] > raw[col][1], "column {}", COLUMN_NAMES[col]);
    }
}

#[test]
fn feature_matrix_shape_and_csv() {
    let g = make_wheel(9).unwrap();
    let f = build_feature_matrix(&g).unwrap();
    assert_eq!(f.shape(), (9, FEATURE_DIM));
    assert!(f.is_finite());
    let csv = features_to_csv(&f);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), COLUMN_NAMES.join(","));
    assert_eq!(lines.count(), 9);
}

#[test]
fn min_max_scaling() {
    let mut col = vec![2.0, 4.0, 3.0];
    min_max_scale(&mut col);
    assert_eq!(col, vec![0.0, 1.0, 0.5]);
    let mut flat = vec![0.3; 4];
    min_max_scale(&mut flat);
    assert_eq!(flat, vec![0.0; 4]);
}

proptest! {
    #[test]
    fn brandes_matches_enumeration(n in 3usize..=12, p in 0.05f64..0.6, seed in any::<u64>()) {
        let g = common::random_connected_graph(n, p, seed);
        let fast = betweenness_centrality(&g);
        let slow = common::brute_force_betweenness(&g);
        prop_assert!(approx(&fast, &slow, 1e-12), "{:?} vs {:?}", fast, slow);
    }

    #[test]
    fn pagerank_sums_to_one(n in 2usize..60, seed in any::<u64>()) {
        let g = common::random_connected_graph(n, 0.1, seed);
        let pr = pagerank(&g, PAGERANK_DAMPING, PAGERANK_TOL, PAGERANK_MAX_ITER).unwrap();
        prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let exact = common::pagerank_linear(&g, PAGERANK_DAMPING);
        prop_assert!(approx(&pr, &exact, 1e-9));
    }

    #[test]
    fn centralities_are_relabeling_invariant(n in 3usize..40, seed in any::<u64>()) {
        let g = common::random_connected_graph(n, 0.15, seed);
        let perm = common::random_permutation(n, seed.wrapping_add(1));
        let h = g.relabel(&perm).unwrap();
        let a = raw_feature_columns(&g).unwrap();
        let b = raw_feature_columns(&h).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            for v in 0..n {
                prop_assert!((ca[v] - cb[perm[v]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaled_features_lie_in_unit_interval(n in 3usize..60, seed in any::<u64>()) {
        let g = common::random_connected_graph(n, 0.1, seed);
        let f = build_feature_matrix(&g).unwrap();
        prop_assert!(f.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
