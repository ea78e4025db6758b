//! Preprocessing defenses: removal of edges between nodes with no common
//! attribute, and replacement of `Â` and `X` by low-rank approximations.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::gcn::{
    gcn_forward, gcn_logits, read_checkpoint, train_model, write_checkpoint, Activation, Features, GcnParams,
    TrainConfig, TrainReport,
};
use crate::graph::{normalized_adjacency, Graph, NormalizedAdjacency};
use crate::linalg::{axpy, dot, LinearOperator, Matrix};
use crate::rng::{rng, Pcg64};
use crate::selection::Split;

/// Drops every edge whose endpoints share no active feature.
pub fn remove_dissimilar_edges(g: &Graph, x: &FeatureMatrix) -> Result<Graph> {
    if x.n_rows() != g.n_nodes() {
        return Err(Error::dims(format!(
            "{} nodes but {} feature rows",
            g.n_nodes(),
            x.n_rows()
        )));
    }
    Ok(g.retain_edges(|u, v| x.row_overlap(u, v) > 0))
}

/// Rank-`r` factors `U · diag(S) · Vᵀ` of an `N×M` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankFactors {
    /// `N×r`, orthonormal columns
    u: Matrix,
    /// descending, nonnegative
    s: Vec<f64>,
    /// `M×r`, orthonormal columns
    v: Matrix,
}

impl LowRankFactors {
    pub fn new(u: Matrix, s: Vec<f64>, v: Matrix) -> Result<Self> {
        if u.cols() != s.len() || v.cols() != s.len() {
            return Err(Error::dims(format!(
                "U {}x{}, {} singular values, V {}x{}",
                u.rows(),
                u.cols(),
                s.len(),
                v.rows(),
                v.cols()
            )));
        }
        if s.iter().any(|&x| !(x >= 0.0)) || s.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("singular values must be nonnegative and descending"));
        }
        Ok(LowRankFactors { u, s, v })
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Dense `U · diag(S) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        us.matmul_t(&self.v).expect("factor shapes agree")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_checkpoint(path.as_ref(), "low-rank", self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f: Self = read_checkpoint(path.as_ref(), "low-rank")?;
        LowRankFactors::new(f.u, f.s, f.v)
    }

    fn scale_rows(&self, mut t: Matrix) -> Matrix {
        for (j, s) in self.s.iter().enumerate() {
            t.row_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        t
    }
}

/// Products are evaluated in factored order, `U · (S · (Vᵀ · B))`.
impl LinearOperator for LowRankFactors {
    fn shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    fn apply(&self, b: &Matrix) -> Matrix {
        let t = self.scale_rows(self.v.t_matmul(b).expect("operator shape checked by caller"));
        self.u.matmul(&t).expect("factor shapes agree")
    }

    fn apply_t(&self, b: &Matrix) -> Matrix {
        let t = self.scale_rows(self.u.t_matmul(b).expect("operator shape checked by caller"));
        self.v.matmul(&t).expect("factor shapes agree")
    }

    fn apply_rows(&self, b: &Matrix, rows: &[usize]) -> Matrix {
        let t = self.scale_rows(self.v.t_matmul(b).expect("operator shape checked by caller"));
        let mut out = Matrix::zeros(self.u.rows(), t.cols());
        for &i in rows {
            for (j, &uij) in self.u.row(i).iter().enumerate() {
                axpy(uij, t.row(j), out.row_mut(i));
            }
        }
        out
    }
}

/// Extra sampled directions beyond the requested rank.
pub const SVD_OVERSAMPLING: usize = 8;
/// Subspace iterations always performed before testing convergence.
pub const SVD_MIN_ITERATIONS: usize = 4;
const SVD_MAX_ITERATIONS: usize = 1000;
/// Relative change of the leading singular values that counts as converged.
const SVD_TOLERANCE: f64 = 1e-13;

/// Leading `r` singular triplets by randomized subspace iteration.
///
/// The sampled block has `r + 8` columns (capped by the matrix size).
/// Iteration continues past the first four power steps until the leading
/// singular values stop moving, so accuracy does not depend on the spectral
/// gap beyond run time.
pub fn truncated_svd(m: &dyn LinearOperator, r: usize, seed: u64) -> Result<LowRankFactors> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::invalid(format!(
            "rank {r} is not in 1..={} for a {rows}x{cols} matrix",
            rows.min(cols)
        )));
    }
    let k = (r + SVD_OVERSAMPLING).min(rows.min(cols));
    let mut rng = rng(seed);
    let omega = Matrix::from_fn(cols, k, |_, _| rng.gen_range(-1.0..1.0));
    let mut q = orthonormalize(m.apply(&omega), &mut rng);
    let mut previous: Vec<f64> = Vec::new();
    let mut iteration = 0;
    loop {
        let z = orthonormalize(m.apply_t(&q), &mut rng);
        q = orthonormalize(m.apply(&z), &mut rng);
        iteration += 1;
        // Bᵀ = Mᵀ Q = W Σ Yᵀ, so M ≈ Q B = (Q Y) Σ Wᵀ.
        let (w, sigma, y) = jacobi_svd(m.apply_t(&q));
        let converged = iteration >= SVD_MIN_ITERATIONS
            && previous.len() == r
            && previous
                .iter()
                .zip(&sigma)
                .all(|(p, s)| (p - s).abs() <= SVD_TOLERANCE * sigma[0].max(f64::MIN_POSITIVE));
        if converged || iteration >= SVD_MAX_ITERATIONS {
            if !converged {
                log::warn!("truncated SVD stopped after {iteration} iterations without converging");
            }
            let u = orthonormalize(keep_columns(&q.matmul(&y).expect("shapes agree"), r), &mut rng);
            let v = orthonormalize(keep_columns(&w, r), &mut rng);
            return LowRankFactors::new(u, sigma[..r].to_vec(), v);
        }
        previous = sigma[..r].to_vec();
    }
}

fn keep_columns(m: &Matrix, r: usize) -> Matrix {
    Matrix::from_fn(m.rows(), r, |i, j| m[(i, j)])
}

/// Orthonormal basis for the column span, column by column (modified
/// Gram–Schmidt, two passes). Columns that are numerically dependent on
/// earlier ones are replaced by random directions, so the result always
/// has orthonormal columns.
fn orthonormalize(m: Matrix, rng: &mut Pcg64) -> Matrix {
    let (n, k) = m.shape();
    debug_assert!(k <= n);
    let mut cols = m.transpose();
    for j in 0..k {
        loop {
            let original = norm(cols.row(j));
            for _ in 0..2 {
                for i in 0..j {
                    let (head, tail) = cols.as_mut_slice().split_at_mut(j * n);
                    let qi = &head[i * n..(i + 1) * n];
                    let cj = &mut tail[..n];
                    axpy(-dot(qi, cj), qi, cj);
                }
            }
            let nrm = norm(cols.row(j));
            if original > 0.0 && nrm > 1e-10 * original {
                cols.row_mut(j).iter_mut().for_each(|x| *x /= nrm);
                break;
            }
            let fresh: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            cols.row_mut(j).copy_from_slice(&fresh);
        }
    }
    cols.transpose()
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// One-sided Jacobi SVD of an `n×k` matrix (`k` small): returns `W` (`n×k`),
/// singular values descending and `Y` (`k×k` orthogonal) with
/// `A = W · diag(σ) · Yᵀ`. Columns of `W` for zero singular values are zero.
fn jacobi_svd(a: Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (n, k) = a.shape();
    // Work on rows: row j of `cols` is column j of A, row j of `y` is
    // column j of Y.
    let mut cols = a.transpose();
    let mut y = Matrix::identity(k);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = dot(cols.row(p), cols.row(p));
                let beta = dot(cols.row(q), cols.row(q));
                let gamma = dot(cols.row(p), cols.row(q));
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut cols, p, q, c, s);
                rotate_rows(&mut y, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..k).map(|j| norm(cols.row(j))).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let w = Matrix::from_fn(n, k, |i, j| {
        let c = order[j];
        if sigma[c] > 0.0 {
            cols[(c, i)] / sigma[c]
        } else {
            0.0
        }
    });
    let ymat = Matrix::from_fn(k, k, |i, j| y[(order[j], i)]);
    (w, order.iter().map(|&c| sigma[c]).collect(), ymat)
}

/// `(row p, row q) ← (c·p − s·q, s·p + c·q)`
fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let w = m.cols();
    let (head, tail) = m.as_mut_slice().split_at_mut(q * w);
    let rp = &mut head[p * w..(p + 1) * w];
    let rq = &mut tail[..w];
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Class probabilities with `Â` and `X` replaced by their low-rank factors.
pub fn low_rank_gcn_forward(
    p: &GcnParams,
    adjacency: &LowRankFactors,
    features: &LowRankFactors,
) -> Result<Matrix> {
    gcn_forward(p, adjacency, Features::Operator(features))
}

/// Which defenses to apply before training.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DefenseConfig {
    /// Remove edges between nodes with no common attribute.
    pub remove_dissimilar: bool,
    /// Replace `Â` and `X` by rank-`r` approximations.
    pub low_rank: Option<usize>,
    /// Seed of the randomized SVD.
    pub svd_seed: u64,
}

impl DefenseConfig {
    pub fn is_none(&self) -> bool {
        !self.remove_dissimilar && self.low_rank.is_none()
    }
}

/// The model inputs after applying a [`DefenseConfig`] to a graph and its
/// features.
#[derive(Debug, Clone)]
pub struct DefendedInputs {
    pub graph: Graph,
    pub adjacency: NormalizedAdjacency,
    /// Factors of `Â` and of `X` when the low-rank defense is on.
    pub low_rank: Option<(LowRankFactors, LowRankFactors)>,
}

impl DefendedInputs {
    /// Similarity removal acts on the graph before normalization; the
    /// low-rank step then factors `Â` and `X`. A rank larger than either
    /// matrix allows is lowered to fit.
    pub fn prepare(g: &Graph, x: &FeatureMatrix, cfg: &DefenseConfig, self_loops: bool) -> Result<Self> {
        let graph = if cfg.remove_dissimilar {
            remove_dissimilar_edges(g, x)?
        } else {
            g.clone()
        };
        let adjacency = normalized_adjacency(&graph, self_loops);
        let low_rank = match cfg.low_rank {
            None => None,
            Some(r) => {
                let fit = |dims: (usize, usize)| {
                    let max = dims.0.min(dims.1);
                    if r > max {
                        log::warn!("low-rank defense: rank {r} lowered to {max}");
                    }
                    r.min(max)
                };
                let a = truncated_svd(&adjacency, fit(adjacency.shape()), cfg.svd_seed)?;
                let xf = truncated_svd(x, fit(x.shape()), cfg.svd_seed)?;
                Some((a, xf))
            }
        };
        Ok(DefendedInputs {
            graph,
            adjacency,
            low_rank,
        })
    }

    pub fn adjacency_operator(&self) -> &dyn LinearOperator {
        match &self.low_rank {
            Some((a, _)) => a,
            None => &self.adjacency,
        }
    }

    pub fn features<'a>(&'a self, x: &'a FeatureMatrix) -> Features<'a> {
        match &self.low_rank {
            Some((_, xf)) => Features::Operator(xf),
            None => Features::Binary(x),
        }
    }

    /// Trains the full model on the defended inputs. Input dropout is off
    /// under the low-rank defense (there is no sparse `X` to mask).
    pub fn train(
        &self,
        x: &FeatureMatrix,
        labels: &[usize],
        n_classes: usize,
        split: &Split,
        cfg: &TrainConfig,
    ) -> Result<(GcnParams, TrainReport)> {
        train_model(
            self.adjacency_operator(),
            self.features(x),
            labels,
            n_classes,
            split,
            cfg,
            Activation::Relu,
        )
    }

    pub fn probabilities(&self, p: &GcnParams, x: &FeatureMatrix) -> Result<Matrix> {
        gcn_forward(p, self.adjacency_operator(), self.features(x))
    }

    pub fn logits(&self, p: &GcnParams, x: &FeatureMatrix) -> Result<Matrix> {
        gcn_logits(p, self.adjacency_operator(), self.features(x), Activation::Relu)
    }
}
