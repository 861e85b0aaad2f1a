mod common;

use netloc::graph::*;
use netloc::kernels::*;
use netloc::rng::Rng64;
use proptest::prelude::*;

fn random_matrix(rows: usize, cols: usize, rng: &mut Rng64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform_in(-1.0, 1.0))
}

#[test]
fn identity_is_neutral() {
    let mut rng = Rng64::new(1);
    let x = random_matrix(5, 3, &mut rng);
    assert_eq!(matmul(&DenseMatrix::identity(5), &x).unwrap(), x);
}

#[test]
fn worked_propagation_example() {
    let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
    let h = DenseMatrix::from_rows(&[&[1.0, 0.0, 2.0], &[-1.0, 3.0, 1.0]]);
    let w = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0], &[-1.0, 0.0]]);
    let e = matmul(&a, &h).unwrap();
    assert_eq!(e, DenseMatrix::from_rows(&[&[-1.0, 6.0, 4.0], &[-1.0, 12.0, 10.0]]));
    let d = matmul(&e, &w).unwrap();
    assert_eq!(d, DenseMatrix::from_rows(&[&[-5.0, 4.0], &[-11.0, 10.0]]));
}

#[test]
fn shape_mismatch_is_an_error() {
    let a = DenseMatrix::zeros(2, 3);
    assert!(matches!(matmul(&a, &a), Err(netloc::Error::DimensionMismatch(_))));
}

#[test]
fn transposed_products_agree_with_explicit_transpose() {
    let mut rng = Rng64::new(2);
    let a = random_matrix(6, 4, &mut rng);
    let b = random_matrix(6, 3, &mut rng);
    let c = random_matrix(5, 4, &mut rng);
    assert_eq!(matmul_tn(&a, &b).unwrap(), matmul(&a.transpose(), &b).unwrap());
    assert_eq!(matmul_nt(&a, &c).unwrap(), matmul(&a, &c.transpose()).unwrap());
}

#[test]
fn sparse_and_dense_propagation_agree() {
    let g = make_scale_free(40, 2, 3).unwrap();
    let dense = normalized_adjacency(&g);
    let sparse = normalized_adjacency_sparse(&g);
    assert_eq!(sparse.to_dense(), dense);
    let mut rng = Rng64::new(3);
    let x = random_matrix(40, 5, &mut rng);
    let a = sparse.matmul_dense(&x).unwrap();
    let b = matmul(&dense, &x).unwrap();
    for (p, q) in a.data().iter().zip(b.data()) {
        assert!((p - q).abs() < 1e-14);
    }
}

#[test]
fn normalized_adjacency_of_single_edge() {
    let g = make_path(2).unwrap();
    assert_eq!(normalized_adjacency(&g), DenseMatrix::from_rows(&[&[0.5, 0.5], &[0.5, 0.5]]));
}

#[test]
fn normalized_adjacency_is_symmetric() {
    let a = normalized_adjacency(&make_star(5).unwrap());
    assert_eq!(a, a.transpose());
}

#[test]
fn normalized_adjacency_has_unit_spectral_radius() {
    for seed in 0..30 {
        let n = 2 + (seed as usize * 5) % 49;
        let g = common::random_connected_graph(n, 0.12, seed);
        let a = normalized_adjacency(&g);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
        let (vals, _) = common::jacobi_eigen(rows);
        let radius = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((radius - 1.0).abs() < 1e-8, "seed {seed}: {radius}");
    }
}

#[test]
fn activations() {
    assert_eq!(relu(-2.0), 0.0);
    assert_eq!(relu(3.0), 3.0);
    assert_eq!(relu_grad(0.0), 0.0);
    assert_eq!(leaky_relu(-1.0, 0.2), -0.2);
    assert_eq!(leaky_relu_grad(-1.0, 0.2), 0.2);
}

#[test]
fn softmax_examples() {
    for k in 1..6 {
        assert!(softmax(&vec![0.7; k]).iter().all(|&a| (a - 1.0 / k as f64).abs() < 1e-15));
    }
    let a = softmax(&[2f64.ln(), 0.0]);
    assert!((a[0] - 2.0 / 3.0).abs() < 1e-15 && (a[1] - 1.0 / 3.0).abs() < 1e-15);
    let shifted = softmax(&[2f64.ln() + 700.0, 700.0]);
    assert!((shifted[0] - a[0]).abs() < 1e-12);
}

#[test]
fn softmax_jacobian_matches_finite_differences() {
    let mut rng = Rng64::new(4);
    let e: Vec<f64> = (0..4).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
    let alpha = softmax(&e);
    let jac = softmax_jacobian(&alpha);
    for i in 0..4 {
        for j in 0..4 {
            let expected = if i == j { alpha[i] - alpha[i] * alpha[i] } else { -alpha[i] * alpha[j] };
            assert!((jac[(i, j)] - expected).abs() < 1e-15);
            let fd = common::central_diff(
                |x| {
                    let mut p = e.clone();
                    p[j] = x;
                    softmax(&p)[i]
                },
                e[j],
                1e-6,
            );
            assert!((jac[(i, j)] - fd).abs() < 1e-9);
        }
    }
    let upstream: Vec<f64> = (0..4).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
    let back = softmax_backward(&alpha, &upstream);
    for j in 0..4 {
        let via_jac: f64 = (0..4).map(|i| jac[(i, j)] * upstream[i]).sum();
        assert!((back[j] - via_jac).abs() < 1e-15);
    }
}

#[test]
fn glorot_bounds_and_determinism() {
    let w = glorot_init(7, 64, 5);
    let limit = glorot_limit(7, 64);
    assert!((limit - 0.29067).abs() < 1e-4);
    assert!(w.data().iter().all(|x| x.abs() <= limit));
    assert_eq!(w, glorot_init(7, 64, 5));
    assert_ne!(w, glorot_init(7, 64, 6));
}

#[test]
fn glorot_sample_mean_is_centered() {
    let w = glorot_init(1000, 1000, 9);
    let n = w.data().len() as f64;
    let mean = w.data().iter().sum::<f64>() / n;
    let limit = glorot_limit(1000, 1000);
    let sigma = limit / 3f64.sqrt() / n.sqrt();
    assert!(mean.abs() < 4.0 * sigma);
}

#[test]
fn loss_examples() {
    assert_eq!(loss(&[0.3, 0.1], &[0.3, 0.1], LossKind::Mse).unwrap(), 0.0);
    assert!((loss(&[0.3], &[0.25], LossKind::Mse).unwrap() - 0.0025).abs() < 1e-15);
    let l = loss(&[0.1], &[0.01], LossKind::log_mse()).unwrap();
    assert!((l - 10f64.ln().powi(2)).abs() < 1e-12);
    assert!((l - 5.3019).abs() < 1e-4);
    assert!(loss(&[0.1, 0.2], &[0.1], LossKind::Mse).is_err());
    assert!(loss(&[], &[], LossKind::Mse).is_err());
    assert!(loss(&[0.1], &[-0.1], LossKind::log_mse()).is_err());
}

#[test]
fn loss_gradient_coefficients() {
    assert_eq!(loss_grad(&[0.2, 0.4], &[0.2, 0.4], LossKind::Mse).unwrap(), vec![0.0, 0.0]);
    let pred = [0.5, 0.1, 0.3];
    let target = [0.2, 0.4, 0.3];
    let g = loss_grad(&pred, &target, LossKind::Mse).unwrap();
    for i in 0..3 {
        assert!((g[i] - (2.0 / 3.0) * (pred[i] - target[i])).abs() < 1e-15);
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = Rng64::new(6);
    for kind in [LossKind::Mse, LossKind::log_mse()] {
        let pred: Vec<f64> = (0..5).map(|_| rng.uniform_in(0.05, 0.9)).collect();
        let target: Vec<f64> = (0..5).map(|_| rng.uniform_in(0.05, 0.9)).collect();
        let g = loss_grad(&pred, &target, kind).unwrap();
        for i in 0..5 {
            let fd = common::central_diff(
                |x| {
                    let mut p = pred.clone();
                    p[i] = x;
                    loss(&p, &target, kind).unwrap()
                },
                pred[i],
                1e-6,
            );
            assert!(common::rel_err(g[i], fd) < 1e-7, "{kind:?} {i}: {} vs {fd}", g[i]);
        }
    }
}

proptest! {
    #[test]
    fn matmul_is_associative(m in 1usize..12, k in 1usize..12, l in 1usize..12, p in 1usize..12, seed in any::<u64>()) {
        let mut rng = Rng64::new(seed);
        let a = random_matrix(m, k, &mut rng);
        let b = random_matrix(k, l, &mut rng);
        let c = random_matrix(l, p, &mut rng);
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        let scale = left.data().iter().fold(1.0f64, |s, x| s.max(x.abs()));
        for (x, y) in left.data().iter().zip(right.data()) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn activation_gradients_match_finite_differences(x in -5.0f64..5.0) {
        prop_assume!(x.abs() > 1e-4);
        let fd = common::central_diff(relu, x, 1e-6);
        prop_assert!((relu_grad(x) - fd).abs() < 1e-5 * fd.abs().max(1.0));
        let fd = common::central_diff(|t| leaky_relu(t, LEAKY_RELU_SLOPE), x, 1e-6);
        prop_assert!((leaky_relu_grad(x, LEAKY_RELU_SLOPE) - fd).abs() < 1e-5 * fd.abs().max(1.0));
    }
}
