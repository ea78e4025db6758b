//! Training / validation / test split construction.
//!
//! Three ways to choose the training set are provided: stratified random
//! sampling, per-class highest degree ([`strat_degree`]) and the greedy
//! neighborhood cover ([`greedy_cover`]). Whatever is not chosen for
//! training is split into validation and test by stratified random sampling.

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMethod {
    Random,
    StratDegree,
    GreedyCover,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 3] = [
        SelectionMethod::Random,
        SelectionMethod::StratDegree,
        SelectionMethod::GreedyCover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Random => "random",
            SelectionMethod::StratDegree => "strat-degree",
            SelectionMethod::GreedyCover => "greedy-cover",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SelectionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown selection method '{s}'")))
    }
}

/// A partition of the nodes into training, validation and test sets.
/// Each list is sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
    pub method: SelectionMethod,
    pub train_frac: f64,
    pub val_frac: f64,
    pub seed: u64,
    /// How the validation count was derived.
    pub val_rule: String,
}

const VAL_RULE: &str = "round(val_frac * class size) per class, from the non-training remainder";

impl Split {
    pub fn n_nodes(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn train_mask(&self) -> Vec<bool> {
        crate::graph::mask_from(self.n_nodes(), &self.train)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Split> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let split: Split = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        split.validate()?;
        Ok(split)
    }

    /// Checks that the three sets partition `0..n`.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        for &u in self.train.iter().chain(&self.val).chain(&self.test) {
            if u >= n || std::mem::replace(&mut seen[u], true) {
                return Err(Error::invalid(format!(
                    "split does not partition 0..{n} (node {u})"
                )));
            }
        }
        Ok(())
    }
}

/// Round half up, tolerant of representation error in products like `0.15 * 30`.
pub(crate) fn round_count(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

pub(crate) fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

fn check_fracs(t: f64, v: f64) -> Result<()> {
    if !(t > 0.0 && v >= 0.0 && t + v < 1.0) {
        return Err(Error::invalid(format!(
            "need 0 < train_frac, 0 <= val_frac, train_frac + val_frac < 1 (got {t}, {v})"
        )));
    }
    Ok(())
}

/// Stratified random split of the non-training nodes into validation and test.
fn split_remainder(
    ds: &Dataset,
    train: Vec<NodeId>,
    v: f64,
    seed: u64,
) -> (Vec<NodeId>, Vec<NodeId>, Vec<NodeId>) {
    let in_train = crate::graph::mask_from(ds.n_nodes(), &train);
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (c, members) in ds.class_members().into_iter().enumerate() {
        let mut rest: Vec<NodeId> = members.iter().copied().filter(|&u| !in_train[u]).collect();
        rest.shuffle(&mut rng(derive_seed(seed, &[1, c as u64])));
        let n_val = round_count(v * members.len() as f64).min(rest.len());
        val.extend_from_slice(&rest[..n_val]);
        test.extend_from_slice(&rest[n_val..]);
    }
    let mut train = train;
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    (train, val, test)
}

fn finish(
    ds: &Dataset,
    train: Vec<NodeId>,
    method: SelectionMethod,
    t: f64,
    v: f64,
    seed: u64,
) -> Split {
    let (train, val, test) = split_remainder(ds, train, v, seed);
    Split {
        train,
        val,
        test,
        method,
        train_frac: t,
        val_frac: v,
        seed,
        val_rule: VAL_RULE.to_string(),
    }
}

/// Random training selection; per-class when `stratified`.
pub fn random_split(ds: &Dataset, t: f64, v: f64, seed: u64, stratified: bool) -> Result<Split> {
    check_fracs(t, v)?;
    if stratified {
        let mut train = Vec::new();
        for (c, mut members) in ds.class_members().into_iter().enumerate() {
            members.shuffle(&mut rng(derive_seed(seed, &[0, c as u64])));
            let n_train = round_count(t * members.len() as f64).min(members.len());
            train.extend_from_slice(&members[..n_train]);
        }
        return Ok(finish(ds, train, SelectionMethod::Random, t, v, seed));
    }
    let n = ds.n_nodes();
    let mut order: Vec<NodeId> = (0..n).collect();
    order.shuffle(&mut rng(derive_seed(seed, &[0])));
    let n_train = round_count(t * n as f64).min(n);
    let n_val = round_count(v * n as f64).min(n - n_train);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        val,
        test,
        method: SelectionMethod::Random,
        train_frac: t,
        val_frac: v,
        seed,
        val_rule: "round(val_frac * N), unstratified".to_string(),
    })
}

/// Per class, the `round(t·|class|)` highest-degree nodes form the training
/// set. Degree ties are broken by lower node index.
pub fn strat_degree(ds: &Dataset, t: f64, v: f64, seed: u64) -> Result<Split> {
    check_fracs(t, v)?;
    let mut train = Vec::new();
    for mut members in ds.class_members() {
        members.sort_by_key(|&u| (Reverse(ds.graph.degree(u)), u));
        let n_train = round_count(t * members.len() as f64).min(members.len());
        train.extend_from_slice(&members[..n_train]);
    }
    Ok(finish(ds, train, SelectionMethod::StratDegree, t, v, seed))
}

/// Training selection by greedy neighborhood cover. Not class-stratified.
pub fn greedy_cover(ds: &Dataset, t: f64, v: f64, seed: u64) -> Result<Split> {
    check_fracs(t, v)?;
    let target = ceil_count(t * ds.n_nodes() as f64);
    let train = greedy_cover_train(&ds.graph, target);
    Ok(finish(ds, train, SelectionMethod::GreedyCover, t, v, seed))
}

/// Builds a split with the named method (random is stratified).
pub fn make_split(
    ds: &Dataset,
    method: SelectionMethod,
    t: f64,
    v: f64,
    seed: u64,
) -> Result<Split> {
    match method {
        SelectionMethod::Random => random_split(ds, t, v, seed, true),
        SelectionMethod::StratDegree => strat_degree(ds, t, v, seed),
        SelectionMethod::GreedyCover => greedy_cover(ds, t, v, seed),
    }
}

/// Marks maintained by the greedy cover.
///
/// `marks[u]` is `-1` for training nodes and otherwise the number of
/// training neighbors of `u`; `k` is the current cover threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverState {
    pub marks: Vec<i64>,
    pub k: i64,
    pub train: Vec<NodeId>,
}

impl CoverState {
    pub fn new(n: usize) -> Self {
        CoverState {
            marks: vec![0; n],
            k: 0,
            train: Vec::new(),
        }
    }

    pub fn in_train(&self, u: NodeId) -> bool {
        self.marks[u] == -1
    }

    /// Number of neighbors of `u` whose mark equals `k`.
    pub fn score(&self, g: &Graph, u: NodeId) -> usize {
        g.neighbors(u)
            .iter()
            .filter(|&&w| self.marks[w] == self.k)
            .count()
    }

    fn add(&mut self, g: &Graph, v: NodeId) {
        self.marks[v] = -1;
        self.train.push(v);
        for &w in g.neighbors(v) {
            if self.marks[w] != -1 {
                self.marks[w] += 1;
            }
        }
    }

    /// Fills the training set with the lowest-index remaining nodes. Used once
    /// `k` exceeds the maximum degree, when no remaining node can score.
    fn fill_lowest(&mut self, g: &Graph, target: usize) {
        let mut u = 0;
        while self.train.len() < target && u < g.n_nodes() {
            if !self.in_train(u) {
                self.add(g, u);
            }
            u += 1;
        }
    }
}

/// Greedy cover selection of `target` training nodes, evaluating every
/// candidate's score at each iteration (`O(|V||E|)`).
pub fn greedy_cover_train(g: &Graph, target: usize) -> Vec<NodeId> {
    greedy_cover_observed(g, target, |_| {})
}

/// Same as [`greedy_cover_train`], calling `observe` after every iteration.
pub fn greedy_cover_observed(
    g: &Graph,
    target: usize,
    mut observe: impl FnMut(&CoverState),
) -> Vec<NodeId> {
    let n = g.n_nodes();
    let target = target.min(n);
    let max_deg = g.max_degree() as i64;
    let mut state = CoverState::new(n);
    while state.train.len() < target {
        if state.k > max_deg {
            state.fill_lowest(g, target);
            observe(&state);
            break;
        }
        let mut best: Option<(usize, NodeId)> = None;
        for u in (0..n).filter(|&u| !state.in_train(u)) {
            let s = state.score(g, u);
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, u));
            }
        }
        match best {
            Some((s, v)) if s > 0 => state.add(g, v),
            _ => state.k += 1,
        }
        observe(&state);
    }
    state.train
}

/// Greedy cover with candidates kept in an ordered set keyed by score, so
/// each addition only touches the two-hop neighborhood of the new node.
/// Produces the same training set as [`greedy_cover_train`].
pub fn greedy_cover_train_pq(g: &Graph, target: usize) -> Vec<NodeId> {
    let n = g.n_nodes();
    let target = target.min(n);
    let max_deg = g.max_degree() as i64;
    let mut state = CoverState::new(n);
    let mut scores = vec![0usize; n];
    let mut queue: BTreeSet<(Reverse<usize>, NodeId)> = BTreeSet::new();

    let rebuild = |state: &CoverState,
                   scores: &mut Vec<usize>,
                   queue: &mut BTreeSet<(Reverse<usize>, NodeId)>| {
        queue.clear();
        for u in (0..n).filter(|&u| !state.in_train(u)) {
            scores[u] = state.score(g, u);
            queue.insert((Reverse(scores[u]), u));
        }
    };
    rebuild(&state, &mut scores, &mut queue);

    let bump = |u: NodeId,
                delta: isize,
                scores: &mut Vec<usize>,
                queue: &mut BTreeSet<(Reverse<usize>, NodeId)>,
                state: &CoverState| {
        if state.in_train(u) {
            return;
        }
        queue.remove(&(Reverse(scores[u]), u));
        scores[u] = scores[u]
            .checked_add_signed(delta)
            .expect("score stays non-negative");
        queue.insert((Reverse(scores[u]), u));
    };

    while state.train.len() < target {
        if state.k > max_deg {
            state.fill_lowest(g, target);
            break;
        }
        let &(Reverse(best), v) = queue.first().expect("nodes remain while short of target");
        if best == 0 {
            state.k += 1;
            rebuild(&state, &mut scores, &mut queue);
            continue;
        }
        queue.remove(&(Reverse(best), v));
        let k = state.k;
        let old_v = state.marks[v];
        let changed: Vec<(NodeId, i64)> = g
            .neighbors(v)
            .iter()
            .filter(|&&w| !state.in_train(w))
            .map(|&w| (w, state.marks[w]))
            .collect();
        state.add(g, v);
        // v's mark leaves the value old_v; each neighbor w's mark goes up by one.
        if old_v == k {
            for &x in g.neighbors(v) {
                bump(x, -1, &mut scores, &mut queue, &state);
            }
        }
        for (w, old) in changed {
            let delta = i64::from(old + 1 == k) - i64::from(old == k);
            if delta != 0 {
                for &x in g.neighbors(w) {
                    bump(x, delta as isize, &mut scores, &mut queue, &state);
                }
            }
        }
    }
    state.train
}

/// Per-class degree thresholds: the class's degrees sorted ascending, indexed
/// at `floor(|class|·(1 − t))`. Nodes at or above the threshold are the
/// ones degree-based selection would pick for training.
pub fn per_class_degree_thresholds(
    g: &Graph,
    labels: &[usize],
    n_classes: usize,
    t: f64,
) -> Result<Vec<f64>> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (u, &c) in labels.iter().enumerate() {
        per_class[c].push(g.degree(u));
    }
    per_class
        .into_iter()
        .enumerate()
        .map(|(c, mut degs)| {
            if degs.is_empty() {
                return Err(Error::invalid(format!("class {c} has no members")));
            }
            degs.sort_unstable();
            let idx = ((degs.len() as f64 * (1.0 - t)).floor() as usize).min(degs.len() - 1);
            Ok(degs[idx] as f64)
        })
        .collect()
}
