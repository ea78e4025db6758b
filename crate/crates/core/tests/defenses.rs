//! Low-rank and similarity defenses against dense reference computations.

mod common;

use common::dense::{assert_close, dense_forward, dense_rank_r, oracle_singular_values, orthonormality_error, random_matrix, to_na};
use common::{random_features, random_graph};

use gcnpoison::defenses::{low_rank_gcn_forward, remove_dissimilar_edges, truncated_svd};
use gcnpoison::gcn::{gcn_forward, GcnParams};
use gcnpoison::graph::normalized_adjacency;
use gcnpoison::linalg::{LinearOperator, Matrix};
use gcnpoison::rng::rng;
use rand::Rng;

#[test]
fn singular_values_match_dense_oracle() {
    let mut r = rng(11);
    for case in 0..40 {
        let rows = r.gen_range(2..=64);
        let cols = r.gen_range(2..=64);
        let m = random_matrix(&mut r, rows, cols);
        let rank = r.gen_range(1..=rows.min(cols).min(12));
        let f = truncated_svd(&m, rank, case).unwrap();
        let oracle = oracle_singular_values(&m);
        for (i, (got, want)) in f.singular_values().iter().zip(&oracle).enumerate() {
            assert!(
                (got - want).abs() < 1e-8,
                "case {case} ({rows}x{cols}, r={rank}) σ{i}: {got} vs {want}"
            );
        }
        assert!(orthonormality_error(f.u()) < 1e-8);
        assert!(orthonormality_error(f.v()) < 1e-8);

        let recon = f.reconstruct();
        let resid = Matrix::from_fn(rows, cols, |i, j| m[(i, j)] - recon[(i, j)]).frobenius_norm();
        let expected = oracle[rank..].iter().map(|s| s * s).sum::<f64>().sqrt();
        if expected > 1e-6 {
            assert!(
                ((resid - expected) / expected).abs() < 1e-6,
                "case {case}: residual {resid} vs {expected}"
            );
        } else {
            assert!(resid < 1e-6);
        }
    }
}

#[test]
fn random_eight_by_eight_rank_three() {
    let mut r = rng(3);
    let m = Matrix::from_fn(8, 8, |_, _| r.gen_range(-1.0..1.0));
    let f = truncated_svd(&m, 3, 0).unwrap();
    let oracle = oracle_singular_values(&m);
    for (got, want) in f.singular_values().iter().zip(&oracle) {
        assert!((got - want).abs() < 1e-8);
    }
}

#[test]
fn full_rank_low_rank_forward_equals_plain_forward() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let n = 12;
        let d = 6;
        let g = random_graph(&mut r, n, 0.35);
        let x = random_features(&mut r, n, d, 0.5);
        let a = normalized_adjacency(&g, seed % 2 == 0);
        let p = GcnParams::glorot(d, 5, 3, true, &mut rng(100 + seed));
        let af = truncated_svd(&a, n, seed).unwrap();
        let xf = truncated_svd(&x, n.min(d), seed).unwrap();
        let y = low_rank_gcn_forward(&p, &af, &xf).unwrap();
        let plain = gcn_forward(&p, &a, &x).unwrap();
        assert!(y.max_abs_diff(&plain) < 1e-7, "seed {seed}");
        for i in 0..n {
            assert!((y.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(y.row(i).iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn rank_one_fixture() {
    // Outer-product "adjacency" u uᵀ and rank-one features.
    let u = [0.5, 1.0, 0.25, 0.75];
    let a = Matrix::from_fn(4, 4, |i, j| u[i] * u[j]);
    let x = Matrix::from_fn(4, 3, |i, j| u[i] * [1.0, 0.0, 2.0][j]);
    let p = GcnParams::glorot(3, 4, 2, true, &mut rng(1));
    let af = truncated_svd(&a, 1, 0).unwrap();
    let xf = truncated_svd(&x, 1, 0).unwrap();
    let y = low_rank_gcn_forward(&p, &af, &xf).unwrap();
    assert_close(&y, &dense_forward(&p, &to_na(&a), &to_na(&x)), 1e-7);
}

#[test]
fn six_node_rank_two_matches_dense_reconstruction() {
    let mut r = rng(6);
    let g = random_graph(&mut r, 6, 0.5);
    let x = random_features(&mut r, 6, 4, 0.5);
    let a = normalized_adjacency(&g, false);
    let p = GcnParams::glorot(4, 3, 2, true, &mut rng(2));
    let af = truncated_svd(&a, 2, 0).unwrap();
    let xf = truncated_svd(&x, 2, 0).unwrap();
    let y = low_rank_gcn_forward(&p, &af, &xf).unwrap();
    let a_dense = dense_rank_r(&to_na(&a.matrix().to_dense()), 2);
    let x_dense = dense_rank_r(&to_na(&x.to_dense()), 2);
    assert_close(&y, &dense_forward(&p, &a_dense, &x_dense), 1e-7);
}

#[test]
fn factored_products_match_dense_operator() {
    let mut r = rng(8);
    let m = random_matrix(&mut r, 20, 15);
    let f = truncated_svd(&m, 4, 0).unwrap();
    let b = Matrix::from_fn(15, 3, |_, _| r.gen_range(-1.0..1.0));
    assert!(f.apply(&b).max_abs_diff(&f.reconstruct().matmul(&b).unwrap()) < 1e-12);
    assert_eq!(f.shape(), (20, 15));
}

#[test]
fn similarity_removal_postconditions() {
    let mut r = rng(21);
    for _ in 0..50 {
        let n = r.gen_range(2..30);
        let d = r.gen_range(1..8);
        let (pe, pf) = (r.gen_range(0.05..0.6), r.gen_range(0.05..0.5));
        let g = random_graph(&mut r, n, pe);
        let x = random_features(&mut r, n, d, pf);
        let h = remove_dissimilar_edges(&g, &x).unwrap();
        let xd = x.to_dense();
        for u in 0..n {
            for v in 0..n {
                if u == v {
                    continue;
                }
                let overlap: f64 = (0..d).map(|f| xd[(u, f)] * xd[(v, f)]).sum();
                // kept exactly when it was an edge with some shared feature
                assert_eq!(h.has_edge(u, v), g.has_edge(u, v) && overlap > 0.0);
            }
        }
        assert_eq!(remove_dissimilar_edges(&h, &x).unwrap(), h);
    }
}
