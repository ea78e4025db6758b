//! Greedy poisoning of a single target node.
//!
//! Each step enumerates the legal perturbations, passes them through the
//! filter chain (singletons, degree-distribution unnoticeability, and
//! optionally a filter that keeps the training-set selection unchanged),
//! scores every survivor exactly on the linear surrogate and applies the
//! one that lowers the target's surrogate margin the most. The full model
//! is then retrained on the poisoned data to record the real margin.

pub mod powerlaw;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::defenses::{DefendedInputs, DefenseConfig};
use crate::error::{Error, Result};
use crate::gcn::{margin_from_logits, SurrogateParams, TrainConfig};
use crate::graph::{Graph, NodeId};
use crate::linalg::{axpy, Matrix};
use crate::rng::derive_seed;
use crate::selection::{per_class_degree_thresholds, SelectionMethod, Split};

use powerlaw::DegreeStats;
pub use trace::{read_traces, write_traces, TraceRecord};

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::invalid(format!(
                        concat!("unknown ", stringify!($name), " '{}' (expected one of: {})"),
                        s,
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

/// Whether the target's own data or only its neighbors' data is modified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMode {
    Direct,
    Influencer,
}
string_enum!(AttackMode { Direct => "direct", Influencer => "influencer" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackSurface {
    Structure,
    Features,
    Both,
}
string_enum!(AttackSurface { Structure => "structure", Features => "features", Both => "both" });

impl AttackSurface {
    fn structure(self) -> bool {
        matches!(self, AttackSurface::Structure | AttackSurface::Both)
    }
    fn features(self) -> bool {
        matches!(self, AttackSurface::Features | AttackSurface::Both)
    }
}

/// Which training-set selector the attacker avoids disturbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adaptation {
    #[default]
    None,
    StratDegree,
    GreedyCover,
}
string_enum!(Adaptation { None => "none", StratDegree => "strat-degree", GreedyCover => "greedy-cover" });

impl Adaptation {
    pub fn selection_method(self) -> Option<SelectionMethod> {
        match self {
            Adaptation::None => None,
            Adaptation::StratDegree => Some(SelectionMethod::StratDegree),
            Adaptation::GreedyCover => Some(SelectionMethod::GreedyCover),
        }
    }
}

/// One atomic change. The derived order (edge flips first, then by indices)
/// is the tie-break among equally scored candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    /// Adds the edge if absent, removes it otherwise; `u < v`.
    EdgeFlip { u: NodeId, v: NodeId },
    /// Turns a feature that is currently on off.
    FeatureOff { node: NodeId, feature: usize },
}

impl Perturbation {
    /// Edge flip with endpoints put in canonical order.
    pub fn edge(a: NodeId, b: NodeId) -> Self {
        Perturbation::EdgeFlip {
            u: a.min(b),
            v: a.max(b),
        }
    }

    /// Applies the perturbation, checking that it is legal.
    pub fn apply(&self, g: &mut Graph, x: &mut FeatureMatrix) -> Result<()> {
        match *self {
            Perturbation::EdgeFlip { u, v } => *g = g.flip_edge(u, v)?,
            Perturbation::FeatureOff { node, feature } => {
                if node >= x.n_rows() || feature >= x.n_cols() {
                    return Err(Error::invalid(format!("feature ({node},{feature}) out of range")));
                }
                *x = x.with_entry_off(node, feature)?
            }
        }
        Ok(())
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::EdgeFlip { u, v } => write!(f, "flip({u},{v})"),
            Perturbation::FeatureOff { node, feature } => write!(f, "off({node},{feature})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub mode: AttackMode,
    pub surface: AttackSurface,
    pub budget: usize,
    pub adapted: Adaptation,
    /// Apply the power-law degree test to edge flips.
    pub unnoticeable: bool,
    pub ll_cutoff: f64,
    /// Retrain and record the margin every this many steps (and at the end).
    pub eval_stride: usize,
    /// Parent of the seeds of the retraining runs.
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            mode: AttackMode::Direct,
            surface: AttackSurface::Both,
            budget: 50,
            adapted: Adaptation::None,
            unnoticeable: true,
            ll_cutoff: powerlaw::DEFAULT_CUTOFF,
            eval_stride: 1,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("attack budget must be at least 1"));
        }
        if self.eval_stride == 0 {
            return Err(Error::invalid("eval_stride must be at least 1"));
        }
        if !(self.ll_cutoff > 0.0) {
            return Err(Error::invalid("ll_cutoff must be positive"));
        }
        Ok(())
    }
}

/// Result of attacking one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    pub target: NodeId,
    pub true_class: usize,
    /// Full-model margin after `i` perturbations; `None` where no
    /// evaluation happened. `margins[0]` is the clean model's margin.
    pub margins: Vec<Option<f64>>,
    /// Surrogate margin after `i` perturbations.
    pub surrogate_margins: Vec<f64>,
    pub applied: Vec<Perturbation>,
    /// The filters left no candidate before the budget was spent.
    pub exhausted: bool,
    pub eval_stride: usize,
}

impl AttackTrace {
    /// Replays the applied perturbations on clean data.
    pub fn replay(&self, g: &Graph, x: &FeatureMatrix) -> Result<(Graph, FeatureMatrix)> {
        let (mut g, mut x) = (g.clone(), x.clone());
        for p in &self.applied {
            p.apply(&mut g, &mut x)?;
        }
        Ok((g, x))
    }

    /// Steps at which a margin was recorded.
    pub fn evaluated_steps(&self) -> Vec<usize> {
        (0..self.margins.len()).filter(|&i| self.margins[i].is_some()).collect()
    }
}

/// Nodes whose data the attacker may change.
pub fn select_attackers(g: &Graph, target: NodeId, mode: AttackMode) -> Result<Vec<NodeId>> {
    if target >= g.n_nodes() {
        return Err(Error::invalid(format!("target {target} out of range")));
    }
    match mode {
        AttackMode::Direct => Ok(vec![target]),
        AttackMode::Influencer => {
            let n = g.neighbors(target).to_vec();
            if n.is_empty() {
                return Err(Error::Target {
                    target,
                    msg: "isolated node has no influencers".into(),
                });
            }
            Ok(n)
        }
    }
}

/// Every perturbation available to the attackers, sorted and deduplicated.
/// Influencer attacks never touch the target itself.
pub fn candidate_perturbations(
    g: &Graph,
    x: &FeatureMatrix,
    attackers: &[NodeId],
    target: NodeId,
    mode: AttackMode,
    surface: AttackSurface,
) -> Vec<Perturbation> {
    let mut out = Vec::new();
    let spare_target = mode == AttackMode::Influencer;
    if surface.structure() {
        for &a in attackers {
            for v in 0..g.n_nodes() {
                if v != a && !(spare_target && v == target) {
                    out.push(Perturbation::edge(a, v));
                }
            }
        }
    }
    if surface.features() {
        for &a in attackers {
            out.extend(x.row(a).iter().map(|&f| Perturbation::FeatureOff {
                node: a,
                feature: f,
            }));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Drops edge removals that would leave an endpoint without neighbors.
pub fn filter_singletons(cands: Vec<Perturbation>, g: &Graph) -> Vec<Perturbation> {
    cands
        .into_iter()
        .filter(|p| match *p {
            Perturbation::EdgeFlip { u, v } => {
                !(g.has_edge(u, v) && (g.degree(u) == 1 || g.degree(v) == 1))
            }
            Perturbation::FeatureOff { .. } => true,
        })
        .collect()
}

/// Keeps edge flips after which the degree sequence still passes the
/// power-law likelihood-ratio test against the original graph.
pub fn unnoticeable_structure(
    cands: Vec<Perturbation>,
    current: &Graph,
    original: &Graph,
    cutoff: f64,
) -> Vec<Perturbation> {
    let orig = DegreeStats::of_graph(original);
    let cur = DegreeStats::of_graph(current);
    cands
        .into_iter()
        .filter(|p| match *p {
            Perturbation::EdgeFlip { u, v } => {
                let (du, dv) = (current.degree(u), current.degree(v));
                let (nu, nv) = if current.has_edge(u, v) {
                    (du - 1, dv - 1)
                } else {
                    (du + 1, dv + 1)
                };
                let after = cur.with_change(du, nu).with_change(dv, nv);
                powerlaw::likelihood_ratio(&orig, &after) < cutoff
            }
            Perturbation::FeatureOff { .. } => true,
        })
        .collect()
}

/// Removes edge flips that would change which nodes the given selection
/// method puts in the training set. Feature perturbations pass through.
///
/// * strat-degree: a flip is removed if either endpoint's degree crosses
///   its class threshold, i.e. `old < thr ≤ new` or `new ≤ thr < old`.
/// * greedy-cover: with `n_i` the number of non-training neighbors,
///   additions between a near-minimal training node (`n ≤ minT + 1`) and
///   a non-training node are removed, as are deletions between a
///   near-maximal non-training node (`n ≥ maxNT − 1`) and a training node.
pub fn filter_training(
    cands: Vec<Perturbation>,
    g: &Graph,
    labels: &[usize],
    n_classes: usize,
    split: &Split,
    adapted: Adaptation,
) -> Result<Vec<Perturbation>> {
    let Some(method) = adapted.selection_method() else {
        return Ok(cands);
    };
    if split.method != method {
        return Err(Error::invalid(format!(
            "attack adapted to {method} but the split was made by {}",
            split.method
        )));
    }
    if labels.len() != g.n_nodes() {
        return Err(Error::dims("labels length"));
    }
    let keep: Box<dyn Fn(NodeId, NodeId) -> bool> = match adapted {
        Adaptation::None => unreachable!(),
        Adaptation::StratDegree => {
            let thr = per_class_degree_thresholds(g, labels, n_classes, split.train_frac)?;
            Box::new(move |u, v| {
                let adding = !g.has_edge(u, v);
                let crosses = |i: NodeId| {
                    let old = g.degree(i) as f64;
                    let new = if adding { old + 1.0 } else { old - 1.0 };
                    let t = thr[labels[i]];
                    (old < t && new >= t) || (old > t && new <= t)
                };
                !(crosses(u) || crosses(v))
            })
        }
        Adaptation::GreedyCover => {
            let in_train = split.train_mask();
            if in_train.len() != g.n_nodes() {
                return Err(Error::dims("split size differs from graph size"));
            }
            let outside: Vec<i64> = (0..g.n_nodes())
                .map(|i| g.neighbors(i).iter().filter(|&&j| !in_train[j]).count() as i64)
                .collect();
            let min_t = (0..g.n_nodes()).filter(|&i| in_train[i]).map(|i| outside[i]).min();
            let max_nt = (0..g.n_nodes()).filter(|&i| !in_train[i]).map(|i| outside[i]).max();
            let border: Vec<bool> = (0..g.n_nodes())
                .map(|i| {
                    if in_train[i] {
                        min_t.is_some_and(|m| outside[i] <= m + 1)
                    } else {
                        max_nt.is_some_and(|m| outside[i] >= m - 1)
                    }
                })
                .collect();
            Box::new(move |u, v| {
                let (tu, tv) = (in_train[u], in_train[v]);
                if g.has_edge(u, v) {
                    // deletion between a borderline non-training node and a training node
                    !((border[u] && !tu && tv) || (border[v] && !tv && tu))
                } else {
                    // addition between a borderline training node and a non-training node
                    !((border[u] && tu && !tv) || (border[v] && tv && !tu))
                }
            })
        }
    };
    Ok(cands
        .into_iter()
        .filter(|p| match *p {
            Perturbation::EdgeFlip { u, v } => keep(u, v),
            Perturbation::FeatureOff { .. } => true,
        })
        .collect())
}

/// Exact surrogate margins of one target under hypothetical perturbations.
///
/// Keeps `X·W` for the current features; a candidate is scored by
/// recomputing the target's row of `Â²·X·W` with the perturbation overlaid.
#[derive(Debug, Clone)]
pub struct SurrogateScorer {
    w: Matrix,
    xw: Matrix,
    self_loops: bool,
}

impl SurrogateScorer {
    pub fn new(s: &SurrogateParams, x: &FeatureMatrix, self_loops: bool) -> Result<Self> {
        Ok(SurrogateScorer {
            w: s.w.clone(),
            xw: x.matmul(&s.w, None)?,
            self_loops,
        })
    }

    /// Updates the cached `X·W` after `X[node, feature]` was turned off.
    pub fn feature_turned_off(&mut self, node: NodeId, feature: usize) {
        let (w, xw) = (&self.w, &mut self.xw);
        axpy(-1.0, w.row(feature), xw.row_mut(node));
    }

    /// Surrogate logits of `target` with `flip` (if any) applied to `g` and
    /// `X·W` row `node` shifted by `−W[feature]` (if `off` is given).
    fn target_logits(
        &self,
        g: &Graph,
        target: NodeId,
        flip: Option<(NodeId, NodeId)>,
        off: Option<(NodeId, usize)>,
    ) -> Vec<f64> {
        let adding = flip.is_some_and(|(u, v)| !g.has_edge(u, v));
        let loops = usize::from(self.self_loops);
        let other_end = |k: NodeId| match flip {
            Some((u, v)) if k == u => Some(v),
            Some((u, v)) if k == v => Some(u),
            _ => None,
        };
        let degree = |k: NodeId| {
            let d = g.degree(k) + loops;
            match other_end(k) {
                Some(_) if adding => d + 1,
                Some(_) => d - 1,
                None => d,
            }
        };
        // Visits the (possibly perturbed) neighbors of k, self included
        // when self-loops are on.
        let for_each_neighbor = |k: NodeId, f: &mut dyn FnMut(NodeId)| {
            let other = other_end(k);
            for &j in g.neighbors(k) {
                if !(other == Some(j) && !adding) {
                    f(j);
                }
            }
            if let (Some(j), true) = (other, adding) {
                f(j);
            }
            if self.self_loops {
                f(k);
            }
        };
        let c = self.xw.cols();
        let xw_row = |j: NodeId, acc: &mut [f64], weight: f64| {
            axpy(weight, self.xw.row(j), acc);
            if let Some((node, feature)) = off {
                if node == j {
                    axpy(-weight, self.w.row(feature), acc);
                }
            }
        };
        let mut out = vec![0.0; c];
        let dt = degree(target);
        if dt == 0 {
            return out;
        }
        let mut hidden = vec![0.0; c];
        for_each_neighbor(target, &mut |k| {
            let dk = degree(k);
            hidden.iter_mut().for_each(|h| *h = 0.0);
            for_each_neighbor(k, &mut |j| {
                xw_row(j, &mut hidden, 1.0 / ((dk * degree(j)) as f64).sqrt());
            });
            axpy(1.0 / ((dt * dk) as f64).sqrt(), &hidden, &mut out);
        });
        out
    }

    /// Surrogate margin of `target` on the current data.
    pub fn margin(&self, g: &Graph, target: NodeId, class: usize) -> f64 {
        margin_from_logits(&self.target_logits(g, target, None, None), class)
    }

    /// Surrogate margin of `target` if `p` were applied.
    pub fn score(&self, g: &Graph, p: &Perturbation, target: NodeId, class: usize) -> f64 {
        let logits = match *p {
            Perturbation::EdgeFlip { u, v } => self.target_logits(g, target, Some((u, v)), None),
            Perturbation::FeatureOff { node, feature } => {
                self.target_logits(g, target, None, Some((node, feature)))
            }
        };
        margin_from_logits(&logits, class)
    }
}

/// Surrogate margin of `target` after hypothetically applying `p` to the
/// graph `g` and features `x`.
pub fn score_perturbation(
    s: &SurrogateParams,
    g: &Graph,
    x: &FeatureMatrix,
    p: &Perturbation,
    target: NodeId,
    true_class: usize,
    self_loops: bool,
) -> Result<f64> {
    let scorer = SurrogateScorer::new(s, x, self_loops)?;
    Ok(scorer.score(g, p, target, true_class))
}

/// Scores closer than this (relative to their magnitude) count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// The candidate with the lowest score; among (numerically) tied scores,
/// the one listed first. Callers pass candidates in [`Perturbation`] order.
pub fn pick_best(scored: impl IntoIterator<Item = (Perturbation, f64)>) -> Option<(Perturbation, f64)> {
    let mut best: Option<(Perturbation, f64)> = None;
    for (p, s) in scored {
        match best {
            Some((_, b)) if s >= b - TIE_TOLERANCE * b.abs().max(1.0) => {}
            _ => best = Some((p, s)),
        }
    }
    best
}

/// How the full model's margin is measured during an attack.
pub trait MarginEvaluator: Sync {
    /// Margin of `target` under the clean model.
    fn clean_margin(&self, target: NodeId) -> Result<f64>;
    /// Margin of `target` after training on poisoned data; `step` is the
    /// number of perturbations applied so far.
    fn poisoned_margin(&self, g: &Graph, x: &FeatureMatrix, target: NodeId, step: usize) -> Result<f64>;
}

/// Retrains the full model from scratch on the poisoned data, with any
/// defenses applied, for every evaluation.
#[derive(Debug, Clone)]
pub struct RetrainEvaluator<'a> {
    pub ds: &'a Dataset,
    pub split: &'a Split,
    pub train: TrainConfig,
    pub defense: DefenseConfig,
    /// Per-target, per-step training seeds derive from this.
    pub seed: u64,
    /// Logits of the clean model.
    pub clean_logits: Matrix,
}

impl<'a> RetrainEvaluator<'a> {
    /// Trains the clean model with `train.seed`.
    pub fn new(ds: &'a Dataset, split: &'a Split, train: TrainConfig, defense: DefenseConfig, seed: u64) -> Result<Self> {
        let inputs = DefendedInputs::prepare(&ds.graph, &ds.features, &defense, train.self_loops)?;
        let (p, _) = inputs.train(&ds.features, &ds.labels, ds.n_classes, split, &train)?;
        let clean_logits = inputs.logits(&p, &ds.features)?;
        Ok(RetrainEvaluator {
            ds,
            split,
            train,
            defense,
            seed,
            clean_logits,
        })
    }
}

impl MarginEvaluator for RetrainEvaluator<'_> {
    fn clean_margin(&self, target: NodeId) -> Result<f64> {
        Ok(margin_from_logits(self.clean_logits.row(target), self.ds.labels[target]))
    }

    fn poisoned_margin(&self, g: &Graph, x: &FeatureMatrix, target: NodeId, step: usize) -> Result<f64> {
        let inputs = DefendedInputs::prepare(g, x, &self.defense, self.train.self_loops)?;
        let cfg = self.train.with_seed(derive_seed(self.seed, &[target as u64, step as u64]));
        let (p, _) = inputs.train(x, &self.ds.labels, self.ds.n_classes, self.split, &cfg)?;
        let logits = inputs.logits(&p, x)?;
        Ok(margin_from_logits(logits.row(target), self.ds.labels[target]))
    }
}

/// The filter chain applied to candidates at every step.
pub fn legal_candidates(
    ds: &Dataset,
    split: &Split,
    g: &Graph,
    x: &FeatureMatrix,
    attackers: &[NodeId],
    target: NodeId,
    cfg: &AttackConfig,
) -> Result<Vec<Perturbation>> {
    let mut cands = candidate_perturbations(g, x, attackers, target, cfg.mode, cfg.surface);
    cands = filter_singletons(cands, g);
    if cfg.unnoticeable {
        cands = unnoticeable_structure(cands, g, &ds.graph, cfg.ll_cutoff);
    }
    filter_training(cands, g, &ds.labels, ds.n_classes, split, cfg.adapted)
}

/// Runs the greedy attack on one target.
pub fn attack_target(
    ds: &Dataset,
    split: &Split,
    surrogate: &SurrogateParams,
    target: NodeId,
    cfg: &AttackConfig,
    self_loops: bool,
    evaluator: &dyn MarginEvaluator,
) -> Result<AttackTrace> {
    cfg.validate()?;
    if target >= ds.n_nodes() {
        return Err(Error::invalid(format!("target {target} out of range")));
    }
    let wrap = |e: Error| match e {
        e @ Error::Target { .. } => e,
        e => Error::Target {
            target,
            msg: e.to_string(),
        },
    };
    let class = ds.labels[target];
    let clean = evaluator.clean_margin(target).map_err(wrap)?;
    if !(clean > 0.0) {
        return Err(Error::Target {
            target,
            msg: format!("misclassified by the clean model (margin {clean})"),
        });
    }
    let attackers = select_attackers(&ds.graph, target, cfg.mode)?;
    let mut g = ds.graph.clone();
    let mut x = ds.features.clone();
    let mut scorer = SurrogateScorer::new(surrogate, &x, self_loops)?;

    let mut trace = AttackTrace {
        target,
        true_class: class,
        margins: vec![Some(clean)],
        surrogate_margins: vec![scorer.margin(&g, target, class)],
        applied: Vec::new(),
        exhausted: false,
        eval_stride: cfg.eval_stride,
    };
    for step in 1..=cfg.budget {
        let cands = legal_candidates(ds, split, &g, &x, &attackers, target, cfg).map_err(wrap)?;
        let scored = cands.iter().map(|p| (*p, scorer.score(&g, p, target, class)));
        let Some((best, score)) = pick_best(scored) else {
            trace.exhausted = true;
            break;
        };
        best.apply(&mut g, &mut x).map_err(wrap)?;
        if let Perturbation::FeatureOff { node, feature } = best {
            scorer.feature_turned_off(node, feature);
        }
        trace.applied.push(best);
        trace.surrogate_margins.push(score);
        let evaluate = step % cfg.eval_stride == 0 || step == cfg.budget;
        trace.margins.push(if evaluate {
            Some(evaluator.poisoned_margin(&g, &x, target, step).map_err(wrap)?)
        } else {
            None
        });
    }
    // A truncated trace still ends with an evaluated margin.
    let last = trace.applied.len();
    if trace.margins[last].is_none() {
        trace.margins[last] = Some(evaluator.poisoned_margin(&g, &x, target, last).map_err(wrap)?);
    }
    Ok(trace)
}
