//! One-hidden-layer graph convolutional classifier and its linear surrogate.
//!
//! The full model is `Y = softmax(Â · σ(Â X W1 + b1) · W2 + b2)` with σ the
//! rectifier. The surrogate drops σ and the biases, collapsing to
//! `softmax(Â² X W)` with `W = W1 W2`.

use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureMatrix};
use crate::error::{Error, Result};
use crate::graph::{normalized_adjacency, NodeId, NormalizedAdjacency};
use crate::linalg::{log_sum_exp, LinearOperator, Matrix};
use crate::rng::{derive_seed, rng, Pcg64};
use crate::selection::Split;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnParams {
    /// `d×h`
    pub w1: Matrix,
    /// `h×C`
    pub w2: Matrix,
    pub b1: Option<Vec<f64>>,
    pub b2: Option<Vec<f64>>,
}

impl GcnParams {
    pub fn zeros(d: usize, h: usize, c: usize, bias: bool) -> Self {
        GcnParams {
            w1: Matrix::zeros(d, h),
            w2: Matrix::zeros(h, c),
            b1: bias.then(|| vec![0.0; h]),
            b2: bias.then(|| vec![0.0; c]),
        }
    }

    /// Uniform in `±sqrt(6/(fan_in+fan_out))`, zero biases.
    pub fn glorot(d: usize, h: usize, c: usize, bias: bool, rng: &mut Pcg64) -> Self {
        let mut init = |rows: usize, cols: usize| {
            let r = (6.0 / (rows + cols) as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-r..=r))
        };
        let w1 = init(d, h);
        let w2 = init(h, c);
        GcnParams {
            w1,
            w2,
            b1: bias.then(|| vec![0.0; h]),
            b2: bias.then(|| vec![0.0; c]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w2.is_finite()
            && self
                .b1
                .iter()
                .chain(&self.b2)
                .flatten()
                .all(|x| x.is_finite())
    }

    /// `W1 · W2`, the surrogate weights of this model.
    pub fn collapse(&self) -> SurrogateParams {
        SurrogateParams {
            w: self.w1.matmul(&self.w2).expect("hidden sizes agree"),
        }
    }

    fn check(&self, a: &dyn LinearOperator, x: Features) -> Result<()> {
        let (n, d) = x.shape();
        if a.shape() != (n, n) {
            return Err(Error::dims(format!(
                "adjacency is {:?}, features have {n} rows",
                a.shape()
            )));
        }
        if self.w1.rows() != d || self.w1.cols() != self.w2.rows() {
            return Err(Error::dims(format!(
                "W1 {}x{}, W2 {}x{}, features have {} columns",
                self.w1.rows(),
                self.w1.cols(),
                self.w2.rows(),
                self.w2.cols(),
                d
            )));
        }
        if self.b1.as_ref().is_some_and(|b| b.len() != self.w1.cols())
            || self.b2.as_ref().is_some_and(|b| b.len() != self.w2.cols())
        {
            return Err(Error::dims("bias length"));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_checkpoint(path.as_ref(), "gcn", self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_checkpoint(path.as_ref(), "gcn")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    /// `d×C`
    pub w: Matrix,
}

impl SurrogateParams {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_checkpoint(path.as_ref(), "surrogate", self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_checkpoint(path.as_ref(), "surrogate")
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint<T> {
    format_version: u32,
    kind: String,
    params: T,
}

pub(crate) fn write_checkpoint<T: Serialize>(path: &Path, kind: &str, params: &T) -> Result<()> {
    let ck = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        params,
    };
    let text = serde_json::to_string(&ck).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_checkpoint<T: serde::de::DeserializeOwned>(
    path: &Path,
    kind: &str,
) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint<T> = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if ck.format_version != CHECKPOINT_VERSION || ck.kind != kind {
        return Err(Error::invalid(format!(
            "{}: expected {kind} checkpoint v{CHECKPOINT_VERSION}, found {} v{}",
            path.display(),
            ck.kind,
            ck.format_version
        )));
    }
    Ok(ck.params)
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 penalty `weight_decay · ‖W1‖² / 2`.
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout_rate: f64,
    pub hidden: usize,
    pub bias: bool,
    /// Normalize `A + I` instead of `A`.
    pub self_loops: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            max_epochs: 200,
            patience: 30,
            dropout_rate: 0.5,
            hidden: 16,
            bias: true,
            self_loops: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::invalid(
                "learning_rate must be positive and weight_decay non-negative",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout_rate must be in [0, 1)"));
        }
        if self.max_epochs == 0 || self.patience == 0 || self.patience > self.max_epochs {
            return Err(Error::invalid("need 0 < patience <= max_epochs"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("hidden size must be positive"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TrainConfig {
            seed,
            ..self.clone()
        }
    }
}

/// Node attributes as the model sees them: the sparse binary matrix, or an
/// operator standing in for it (such as a low-rank reconstruction). Input
/// dropout only applies to the binary form.
#[derive(Clone, Copy)]
pub enum Features<'a> {
    Binary(&'a FeatureMatrix),
    Operator(&'a dyn LinearOperator),
}

impl<'a> From<&'a FeatureMatrix> for Features<'a> {
    fn from(x: &'a FeatureMatrix) -> Self {
        Features::Binary(x)
    }
}

impl Features<'_> {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Features::Binary(x) => (x.n_rows(), x.n_cols()),
            Features::Operator(op) => op.shape(),
        }
    }

    fn matmul(&self, w: &Matrix, scale: Option<&[f64]>) -> Result<Matrix> {
        match self {
            Features::Binary(x) => x.matmul(w, scale),
            Features::Operator(op) => Ok(op.apply(w)),
        }
    }

    fn t_matmul(&self, g: &Matrix, scale: Option<&[f64]>) -> Result<Matrix> {
        match self {
            Features::Binary(x) => x.t_matmul(g, scale),
            Features::Operator(op) => Ok(op.apply_t(g)),
        }
    }

    fn nnz(&self) -> usize {
        match self {
            Features::Binary(x) => x.nnz(),
            Features::Operator(_) => 0,
        }
    }
}

/// Dropout scale factors: one per feature nonzero and one per hidden unit.
struct DropoutMasks {
    features: Vec<f64>,
    hidden: Matrix,
}

impl DropoutMasks {
    fn feature_scale(&self) -> Option<&[f64]> {
        (!self.features.is_empty()).then_some(self.features.as_slice())
    }

    fn sample(rate: f64, x: Features, h: usize, rng: &mut Pcg64) -> Self {
        let keep = 1.0 / (1.0 - rate);
        // Each 64-bit draw yields two 32-bit Bernoulli trials.
        let threshold = (rate * 4294967296.0) as u64;
        let mut spare: Option<u64> = None;
        let mut draw = || {
            let bits = match spare.take() {
                Some(b) => b,
                None => {
                    let r = rng.next_u64();
                    spare = Some(r >> 32);
                    r & 0xffff_ffff
                }
            };
            if bits < threshold {
                0.0
            } else {
                keep
            }
        };
        let features = (0..x.nnz()).map(|_| draw()).collect();
        let hidden = Matrix::from_fn(x.shape().0, h, |_, _| draw());
        DropoutMasks { features, hidden }
    }
}

struct Forward {
    /// pre-activation of the hidden layer
    z1: Matrix,
    /// hidden layer after activation and dropout
    hd: Matrix,
    /// output logits
    logits: Matrix,
}

fn forward_cache(
    p: &GcnParams,
    a: &dyn LinearOperator,
    x: Features,
    act: Activation,
    masks: Option<&DropoutMasks>,
    out_rows: Option<&[NodeId]>,
) -> Result<Forward> {
    p.check(a, x)?;
    let xw = x.matmul(&p.w1, masks.and_then(DropoutMasks::feature_scale))?;
    let mut z1 = a.apply(&xw);
    if let Some(b) = &p.b1 {
        z1.add_row_vector(b);
    }
    let mut hd = z1.clone();
    if act == Activation::Relu {
        hd.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    }
    if let Some(m) = masks {
        for (v, s) in hd.as_mut_slice().iter_mut().zip(m.hidden.as_slice()) {
            *v *= s;
        }
    }
    // Only the requested logit rows are computed.
    let hw = hd.matmul(&p.w2)?;
    let mut logits = match out_rows {
        Some(rows) => a.apply_rows(&hw, rows),
        None => a.apply(&hw),
    };
    if let Some(b) = &p.b2 {
        logits.add_row_vector(b);
    }
    Ok(Forward { z1, hd, logits })
}

/// Output logits of the model with the given activation, no dropout.
pub fn gcn_logits<'a>(
    p: &GcnParams,
    a: &dyn LinearOperator,
    x: impl Into<Features<'a>>,
    act: Activation,
) -> Result<Matrix> {
    Ok(forward_cache(p, a, x.into(), act, None, None)?.logits)
}

/// Class probabilities `softmax(Â σ(Â X W1 + b1) W2 + b2)`.
pub fn gcn_forward<'a>(
    p: &GcnParams,
    a: &dyn LinearOperator,
    x: impl Into<Features<'a>>,
) -> Result<Matrix> {
    let mut y = gcn_logits(p, a, x, Activation::Relu)?;
    y.softmax_rows();
    Ok(y)
}

/// `Â² X W` logits of the surrogate.
pub fn surrogate_logits(
    s: &SurrogateParams,
    a: &NormalizedAdjacency,
    x: &FeatureMatrix,
) -> Result<Matrix> {
    if s.w.rows() != x.n_cols() || a.n_nodes() != x.n_rows() {
        return Err(Error::dims(format!(
            "surrogate W {}x{} vs features {}x{} and {} nodes",
            s.w.rows(),
            s.w.cols(),
            x.n_rows(),
            x.n_cols(),
            a.n_nodes()
        )));
    }
    let xw = x.matmul(&s.w, None)?;
    let a = a.matrix();
    a.spmm(&a.spmm(&xw)?)
}

pub fn surrogate_forward(
    s: &SurrogateParams,
    a: &NormalizedAdjacency,
    x: &FeatureMatrix,
) -> Result<Matrix> {
    let mut y = surrogate_logits(s, a, x)?;
    y.softmax_rows();
    Ok(y)
}

/// Gradients of the mean cross-entropy over a node mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnGradients {
    pub loss: f64,
    pub w1: Matrix,
    pub w2: Matrix,
    pub b1: Option<Vec<f64>>,
    pub b2: Option<Vec<f64>>,
}

fn cross_entropy(logits: &Matrix, labels: &[usize], mask: &[NodeId]) -> f64 {
    let total: f64 = mask
        .iter()
        .map(|&i| log_sum_exp(logits.row(i)) - logits[(i, labels[i])])
        .sum();
    total / mask.len() as f64
}

fn backward(
    p: &GcnParams,
    a: &dyn LinearOperator,
    x: Features,
    labels: &[usize],
    mask: &[NodeId],
    act: Activation,
    masks: Option<&DropoutMasks>,
) -> Result<GcnGradients> {
    if mask.is_empty() {
        return Err(Error::invalid("empty node mask"));
    }
    let n = x.shape().0;
    if labels.len() != n {
        return Err(Error::dims("labels length"));
    }
    let fwd = forward_cache(p, a, x, act, masks, Some(mask))?;
    let loss = cross_entropy(&fwd.logits, labels, mask);
    let c = p.n_classes();

    // d loss / d logits: (softmax − onehot) / |mask| on masked rows.
    let mut g2 = Matrix::zeros(n, c);
    let inv = 1.0 / mask.len() as f64;
    for &i in mask {
        let row = g2.row_mut(i);
        row.copy_from_slice(fwd.logits.row(i));
        crate::linalg::softmax_in_place(row);
        row[labels[i]] -= 1.0;
        row.iter_mut().for_each(|v| *v *= inv);
    }
    let a_g2 = a.apply_t_rows(&g2, mask);
    let w2 = fwd.hd.t_matmul(&a_g2)?;
    let b2 = p.b2.as_ref().map(|_| g2.column_sums());

    let mut dz1 = a_g2.matmul_t(&p.w2)?;
    if let Some(m) = masks {
        for (v, s) in dz1.as_mut_slice().iter_mut().zip(m.hidden.as_slice()) {
            *v *= s;
        }
    }
    if act == Activation::Relu {
        for (v, z) in dz1.as_mut_slice().iter_mut().zip(fwd.z1.as_slice()) {
            if *z <= 0.0 {
                *v = 0.0;
            }
        }
    }
    let b1 = p.b1.as_ref().map(|_| dz1.column_sums());
    let a_dz1 = a.apply_t(&dz1);
    let w1 = x.t_matmul(&a_dz1, masks.and_then(DropoutMasks::feature_scale))?;
    Ok(GcnGradients {
        loss,
        w1,
        w2,
        b1,
        b2,
    })
}

/// Analytic gradient of the mean cross-entropy over `mask` (no dropout,
/// no weight decay).
pub fn gcn_backward<'a>(
    p: &GcnParams,
    a: &dyn LinearOperator,
    x: impl Into<Features<'a>>,
    labels: &[usize],
    mask: &[NodeId],
) -> Result<GcnGradients> {
    backward(p, a, x.into(), labels, mask, Activation::Relu, None)
}

/// Mean cross-entropy over `mask`, no dropout.
pub fn gcn_loss<'a>(
    p: &GcnParams,
    a: &dyn LinearOperator,
    x: impl Into<Features<'a>>,
    labels: &[usize],
    mask: &[NodeId],
    act: Activation,
) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::invalid("empty node mask"));
    }
    let fwd = forward_cache(p, a, x.into(), act, None, Some(mask))?;
    Ok(cross_entropy(&fwd.logits, labels, mask))
}

/// Adam state for one parameter block.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, t: i32) {
        let bc1 = 1.0 - Self::BETA1.powi(t);
        let bc2 = 1.0 - Self::BETA2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + Self::EPS);
        }
    }
}

/// What happened during a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Training loss of the initial parameters (no dropout).
    pub initial_train_loss: f64,
    /// Training loss of the returned parameters (no dropout).
    pub final_train_loss: f64,
    pub best_val_loss: f64,
    /// Dropout-on training loss per epoch.
    pub train_loss_history: Vec<f64>,
    pub val_loss_history: Vec<f64>,
}

/// Full-batch Adam on the training nodes with early stopping on validation
/// loss; the parameters with the lowest validation loss are returned.
pub fn train_model<'a>(
    a: &dyn LinearOperator,
    x: impl Into<Features<'a>>,
    labels: &[usize],
    n_classes: usize,
    split: &Split,
    cfg: &TrainConfig,
    act: Activation,
) -> Result<(GcnParams, TrainReport)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let x = x.into();
    let bias = cfg.bias && act == Activation::Relu;
    let mut params = GcnParams::glorot(
        x.shape().1,
        cfg.hidden,
        n_classes,
        bias,
        &mut rng(derive_seed(cfg.seed, &[1])),
    );
    let mut drop_rng = rng(derive_seed(cfg.seed, &[2]));
    let mut opt_w1 = Adam::new(params.w1.as_slice().len());
    let mut opt_w2 = Adam::new(params.w2.as_slice().len());
    let mut opt_b1 = Adam::new(cfg.hidden);
    let mut opt_b2 = Adam::new(n_classes);

    // Without a validation set, early stopping watches the training loss.
    let watch: &[NodeId] = if split.val.is_empty() {
        &split.train
    } else {
        &split.val
    };
    let initial_train_loss = gcn_loss(&params, a, x, labels, &split.train, act)?;
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut train_hist = Vec::new();
    let mut val_hist = Vec::new();
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        let masks = (cfg.dropout_rate > 0.0)
            .then(|| DropoutMasks::sample(cfg.dropout_rate, x, cfg.hidden, &mut drop_rng));
        let mut g = backward(&params, a, x, labels, &split.train, act, masks.as_ref())?;
        let wd = cfg.weight_decay;
        for (gw, w) in g.w1.as_mut_slice().iter_mut().zip(params.w1.as_slice()) {
            *gw += wd * w;
        }
        let t = (epoch + 1) as i32;
        let lr = cfg.learning_rate;
        opt_w1.step(params.w1.as_mut_slice(), g.w1.as_slice(), lr, t);
        opt_w2.step(params.w2.as_mut_slice(), g.w2.as_slice(), lr, t);
        if let (Some(b), Some(gb)) = (params.b1.as_mut(), g.b1.as_ref()) {
            opt_b1.step(b, gb, lr, t);
        }
        if let (Some(b), Some(gb)) = (params.b2.as_mut(), g.b2.as_ref()) {
            opt_b2.step(b, gb, lr, t);
        }
        train_hist.push(g.loss);

        let val_loss = gcn_loss(&params, a, x, labels, watch, act)?;
        val_hist.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, epoch, params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (best_val_loss, best_epoch, params) = best;
    let final_train_loss = gcn_loss(&params, a, x, labels, &split.train, act)?;
    let report = TrainReport {
        epochs_run: train_hist.len(),
        best_epoch,
        initial_train_loss,
        final_train_loss,
        best_val_loss,
        train_loss_history: train_hist,
        val_loss_history: val_hist,
    };
    Ok((params, report))
}

/// Trains the full GCN on a dataset.
pub fn gcn_train(ds: &Dataset, split: &Split, cfg: &TrainConfig) -> Result<GcnParams> {
    let a = normalized_adjacency(&ds.graph, cfg.self_loops);
    let (p, _) = train_model(
        &a,
        &ds.features,
        &ds.labels,
        ds.n_classes,
        split,
        cfg,
        Activation::Relu,
    )?;
    Ok(p)
}

/// Trains the linearized model (identity activation, no biases) and
/// collapses it to `W = W1 W2`.
pub fn surrogate_train(ds: &Dataset, split: &Split, cfg: &TrainConfig) -> Result<SurrogateParams> {
    let a = normalized_adjacency(&ds.graph, cfg.self_loops);
    let (p, _) = train_model(
        &a,
        &ds.features,
        &ds.labels,
        ds.n_classes,
        split,
        cfg,
        Activation::Identity,
    )?;
    Ok(p.collapse())
}

/// `log(p_c / max_{c'≠c} p_c')`; `-inf` when `p_c = 0`.
pub fn margin(prob_row: &[f64], class: usize) -> f64 {
    let pc = prob_row[class];
    if pc <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let other = prob_row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != class)
        .map(|(_, &p)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    (pc / other).ln()
}

/// The same margin computed from logits, `z_c − max_{c'≠c} z_c'`.
pub fn margin_from_logits(logits: &[f64], class: usize) -> f64 {
    let other = logits
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != class)
        .map(|(_, &z)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    logits[class] - other
}

/// Row-wise argmax; ties go to the lower class index.
pub fn predict(scores: &Matrix) -> Vec<usize> {
    (0..scores.rows())
        .map(|i| {
            let row = scores.row(i);
            (0..row.len()).fold(0, |best, j| if row[j] > row[best] { j } else { best })
        })
        .collect()
}

/// Unweighted mean of per-class F1 over `0..n_classes`. A class with no
/// true, predicted or correct members scores 0.
pub fn f1_macro(
    predictions: &[usize],
    labels: &[usize],
    mask: &[NodeId],
    n_classes: usize,
) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::invalid("empty mask"));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fnn = vec![0usize; n_classes];
    for &i in mask {
        let (p, y) = (predictions[i], labels[i]);
        if p == y {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnn[y] += 1;
        }
    }
    let total: f64 = (0..n_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fnn[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / n_classes as f64)
}

pub fn accuracy(predictions: &[usize], labels: &[usize], mask: &[NodeId]) -> f64 {
    let hits = mask
        .iter()
        .filter(|&&i| predictions[i] == labels[i])
        .count();
    hits as f64 / mask.len().max(1) as f64
}
