//! Dense reference computations for the model and the defenses.

use gcnpoison::data::FeatureMatrix;
use gcnpoison::gcn::{gcn_backward, gcn_loss, Activation, GcnParams};
use gcnpoison::graph::{normalized_adjacency, Graph};
use gcnpoison::linalg::Matrix;
use gcnpoison::rng::rng;
use nalgebra::DMatrix;
use rand::Rng;

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn oracle_singular_values(m: &Matrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn random_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    // Mix of dense Gaussian-like entries and decaying spectra.
    let decay = r.gen_bool(0.5);
    let base = Matrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0));
    if !decay {
        return base;
    }
    Matrix::from_fn(rows, cols, |i, j| base[(i, j)] * 0.7f64.powi((i + j) as i32 % 9))
}

pub fn orthonormality_error(m: &Matrix) -> f64 {
    m.t_matmul(m).unwrap().max_abs_diff(&Matrix::identity(m.cols()))
}

/// Dense `softmax(Â relu(Â X W1 + b1) W2 + b2)`.
pub fn dense_forward(p: &GcnParams, a: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let w1 = to_na(&p.w1);
    let w2 = to_na(&p.w2);
    let mut z1 = a * x * w1;
    if let Some(b) = &p.b1 {
        for mut row in z1.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(b) {
                *v += b;
            }
        }
    }
    let h = z1.map(|v| v.max(0.0));
    let mut z2 = a * h * w2;
    if let Some(b) = &p.b2 {
        for mut row in z2.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(b) {
                *v += b;
            }
        }
    }
    for mut row in z2.row_iter_mut() {
        let max = row.max();
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row.iter_mut().for_each(|v| *v /= sum);
    }
    z2
}

pub fn dense_rank_r(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for &k in &order[..r] {
        out += svd.singular_values[k] * u.column(k) * vt.row(k);
    }
    out
}

pub fn assert_close(a: &Matrix, b: &DMatrix<f64>, tol: f64) {
    assert_eq!((a.rows(), a.cols()), (b.nrows(), b.ncols()));
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            assert!((a[(i, j)] - b[(i, j)]).abs() < tol, "({i},{j}): {} vs {}", a[(i, j)], b[(i, j)]);
        }
    }
}

pub fn model_fixture(seed: u64, n: usize, d: usize) -> (Graph, FeatureMatrix, Vec<usize>) {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen::<f64>() < 0.3 {
                edges.push((u, v));
            }
        }
    }
    let mut entries = Vec::new();
    for i in 0..n {
        for f in 0..d {
            if r.gen::<f64>() < 0.5 {
                entries.push((i, f));
            }
        }
    }
    let labels = (0..n).map(|_| r.gen_range(0..3)).collect();
    (
        Graph::from_edges(n, edges).unwrap(),
        FeatureMatrix::from_entries(n, d, entries).unwrap(),
        labels,
    )
}

/// Central differences of the loss for every parameter entry, returning
/// the max of `|analytic − numeric| / max(|analytic|, |numeric|, 1e-3)`.
pub fn max_rel_error(
    p: &GcnParams,
    g: &Graph,
    x: &FeatureMatrix,
    labels: &[usize],
    self_loops: bool,
) -> f64 {
    let a = normalized_adjacency(g, self_loops);
    let mask: Vec<usize> = (0..x.n_rows()).collect();
    let grads = gcn_backward(p, &a, x, labels, &mask).unwrap();
    let loss = |q: &GcnParams| gcn_loss(q, &a, x, labels, &mask, Activation::Relu).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, perturb: &dyn Fn(&mut GcnParams, f64)| {
        let mut plus = p.clone();
        perturb(&mut plus, h);
        let mut minus = p.clone();
        perturb(&mut minus, -h);
        let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(err);
    };
    for i in 0..p.w1.rows() {
        for j in 0..p.w1.cols() {
            check(grads.w1[(i, j)], &|q, e| q.w1[(i, j)] += e);
        }
    }
    for i in 0..p.w2.rows() {
        for j in 0..p.w2.cols() {
            check(grads.w2[(i, j)], &|q, e| q.w2[(i, j)] += e);
        }
    }
    if let Some(b1) = &grads.b1 {
        for (j, &gb) in b1.iter().enumerate() {
            check(gb, &|q, e| q.b1.as_mut().unwrap()[j] += e);
        }
    }
    if let Some(b2) = &grads.b2 {
        for (j, &gb) in b2.iter().enumerate() {
            check(gb, &|q, e| q.b2.as_mut().unwrap()[j] += e);
        }
    }
    worst
}
