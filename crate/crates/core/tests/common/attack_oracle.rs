//! Random attack fixtures and exhaustive dense scoring of every legal
//! candidate.

use gcnpoison::attack::{Adaptation, AttackConfig, AttackMode, AttackSurface, Perturbation};
use gcnpoison::data::{Dataset, FeatureMatrix};
use gcnpoison::graph::Graph;
use gcnpoison::linalg::Matrix;
use gcnpoison::rng::rng;
use gcnpoison::selection::{make_split, SelectionMethod, Split};
use nalgebra::DMatrix;
use rand::Rng;

use super::*;

pub struct Fixture {
    pub ds: Dataset,
    pub split: Split,
    pub w: Matrix,
    pub target: usize,
    pub cfg: AttackConfig,
    pub self_loops: bool,
}

pub fn random_fixture(seed: u64) -> Fixture {
    let mut r = rng(seed);
    let n = r.gen_range(5..=20);
    let d = r.gen_range(1..=8);
    let c = r.gen_range(2..=3);
    let pe = r.gen_range(0.1..0.5);
    let g = random_graph(&mut r, n, pe);
    let x = random_features(&mut r, n, d, 0.4);
    let labels: Vec<usize> = (0..n).map(|i| if i < c { i } else { r.gen_range(0..c) }).collect();
    let ds = Dataset::new("fixture", g, x, labels, c).unwrap();
    let adapted = [Adaptation::None, Adaptation::StratDegree, Adaptation::GreedyCover][r.gen_range(0..3)];
    let method = adapted.selection_method().unwrap_or(SelectionMethod::Random);
    let split = make_split(&ds, method, 0.25, 0.1, seed).unwrap();
    let w = Matrix::from_fn(d, c, |_, _| r.gen_range(-1.0..1.0));
    let mut mode = [AttackMode::Direct, AttackMode::Influencer][r.gen_range(0..2)];
    let mut target = r.gen_range(0..n);
    if mode == AttackMode::Influencer {
        match (0..n).find(|&u| ds.graph.degree((target + u) % n) > 0) {
            Some(k) => target = (target + k) % n,
            None => mode = AttackMode::Direct,
        }
    }
    let cfg = AttackConfig {
        mode,
        surface: [AttackSurface::Structure, AttackSurface::Features, AttackSurface::Both][r.gen_range(0..3)],
        budget: 3,
        adapted,
        unnoticeable: r.gen_bool(0.5),
        eval_stride: 1,
        seed,
        ..Default::default()
    };
    Fixture {
        ds,
        split,
        w,
        target,
        cfg,
        self_loops: r.gen_bool(0.5),
    }
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Exhaustively filtered and scored candidates at one attack state.
pub fn oracle_scores(f: &Fixture, g: &Graph, x: &FeatureMatrix) -> Vec<(Perturbation, f64)> {
    let adj = dense_adjacency(g);
    let orig_degrees = degrees(&dense_adjacency(&f.ds.graph));
    let cur_degrees = degrees(&adj);
    let cands = oracle_candidates(g, x, f.target, f.cfg.mode, f.cfg.surface);
    let pairs: Vec<(usize, usize)> = cands
        .iter()
        .filter_map(|p| match *p {
            Perturbation::EdgeFlip { u, v } => Some((u, v)),
            _ => None,
        })
        .collect();
    let training_keep = match f.cfg.adapted {
        Adaptation::None => vec![true; pairs.len()],
        Adaptation::StratDegree => literal_filter_training(&pairs, &adj, &f.ds.labels, f.split.train_frac, None),
        Adaptation::GreedyCover => {
            let mask = f.split.train_mask();
            literal_filter_training(&pairs, &adj, &f.ds.labels, f.split.train_frac, Some(&mask))
        }
    };
    let xd = dense_features(x);
    let w = to_na(&f.w);
    let class = f.ds.labels[f.target];
    let mut out = Vec::new();
    let mut k = 0;
    for p in cands {
        match p {
            Perturbation::EdgeFlip { u, v } => {
                let keep_training = training_keep[k];
                k += 1;
                let exists = adj[(u, v)] != 0.0;
                if exists && (cur_degrees[u] == 1 || cur_degrees[v] == 1) {
                    continue;
                }
                let mut a2 = adj.clone();
                let val = if exists { 0.0 } else { 1.0 };
                a2[(u, v)] = val;
                a2[(v, u)] = val;
                if f.cfg.unnoticeable && powerlaw_statistic(&orig_degrees, &degrees(&a2)) >= f.cfg.ll_cutoff {
                    continue;
                }
                if !keep_training {
                    continue;
                }
                out.push((p, dense_surrogate_margin(&a2, &xd, &w, f.self_loops, f.target, class)));
            }
            Perturbation::FeatureOff { node, feature } => {
                let mut x2 = xd.clone();
                x2[(node, feature)] = 0.0;
                out.push((p, dense_surrogate_margin(&adj, &x2, &w, f.self_loops, f.target, class)));
            }
        }
    }
    out
}
