//! End-to-end trials: split, clean training, target selection, attacks and
//! the aggregated tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::budget::{budget_vs_success, margin_quantile_curve, BudgetCurve};
use super::targets::{select_targets, TargetCounts, TargetGroups};
use crate::attack::{attack_target, AttackConfig, AttackMode, AttackTrace, MarginEvaluator, RetrainEvaluator, TraceRecord};
use crate::data::{generate_sbm, load_dataset, write_results, BudgetRow, Dataset, MarginRow, SbmConfig, TrialRow};
use crate::defenses::DefenseConfig;
use crate::error::{Error, Result};
use crate::gcn::{f1_macro, margin_from_logits, predict, surrogate_train, TrainConfig};
use crate::graph::avg_training_neighbors;
use crate::rng::derive_seed;
use crate::selection::{make_split, SelectionMethod, Split};

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    /// Generated from a blockmodel configuration.
    Sbm(SbmConfig),
    /// A dataset directory on disk.
    Dir { path: PathBuf },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Sbm(SbmConfig::default())
    }
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Sbm(cfg) => generate_sbm(cfg),
            DatasetSource::Dir { path } => load_dataset(path),
        }
    }
}

fn default_method() -> SelectionMethod {
    SelectionMethod::Random
}

/// A complete experiment. The attack budget doubles as the maximum number
/// of perturbations per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_method")]
    pub method: SelectionMethod,
    pub train_frac: f64,
    pub val_frac: f64,
    pub attack: AttackConfig,
    pub defense: DefenseConfig,
    pub train: TrainConfig,
    pub n_trials: usize,
    pub targets: TargetCounts,
    /// A target counts as defeated once its margin is at or below this.
    pub success_threshold: f64,
    /// Success probabilities at which budgets are reported.
    pub success_probs: Vec<f64>,
    /// Quantiles of the margin distribution written per step.
    pub quantiles: Vec<f64>,
    pub seed: u64,
    /// Draw a fresh blockmodel graph for every trial instead of reusing
    /// one graph. Only valid for generated datasets.
    pub regenerate_graph: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::default(),
            method: SelectionMethod::Random,
            train_frac: 0.1,
            val_frac: 0.1,
            attack: AttackConfig::default(),
            defense: DefenseConfig::default(),
            train: TrainConfig::default(),
            n_trials: 5,
            targets: TargetCounts::default(),
            success_threshold: 0.0,
            success_probs: (1..20).map(|i| i as f64 / 20.0).collect(),
            quantiles: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            seed: 0,
            regenerate_graph: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        self.train.validate()?;
        if self.n_trials == 0 {
            return Err(Error::invalid("n_trials must be at least 1"));
        }
        if self.targets.total() == 0 {
            return Err(Error::invalid("no targets requested"));
        }
        for &p in self.success_probs.iter().chain(&self.quantiles) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
            }
        }
        if self.regenerate_graph && !matches!(self.dataset, DatasetSource::Sbm(_)) {
            return Err(Error::invalid("regenerate_graph needs a generated (sbm) dataset"));
        }
        if let Some(m) = self.attack.adapted.selection_method() {
            if m != self.method {
                return Err(Error::invalid(format!(
                    "attack adapted to {m} but training nodes are selected by {}",
                    self.method
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

/// Seeds used by one trial, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub trial: u64,
    pub split: u64,
    pub clean_model: u64,
    pub surrogate: u64,
    pub targets: u64,
    /// Parent of the per-target, per-step retraining seeds.
    pub retrain: u64,
    /// Seed of the trial's own graph when graphs are regenerated.
    pub graph: u64,
}

impl TrialSeeds {
    pub fn derive(master: u64, trial: usize) -> Self {
        let t = derive_seed(master, &[trial as u64]);
        TrialSeeds {
            trial: t,
            split: derive_seed(t, &[0]),
            clean_model: derive_seed(t, &[1]),
            surrogate: derive_seed(t, &[2]),
            targets: derive_seed(t, &[3]),
            retrain: derive_seed(t, &[4]),
            graph: derive_seed(t, &[5]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seeds: TrialSeeds,
    pub split: Split,
    /// Average number of training neighbors of non-training nodes.
    pub avg_training_neighbors: f64,
    /// Clean-model macro-F1 on the test nodes.
    pub macro_f1: f64,
    pub targets: TargetGroups,
    /// One trace per target, in the order of `targets.all()`.
    pub traces: Vec<AttackTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub clean_seconds: f64,
    pub attack_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialOutcome>,
    pub budget: BudgetCurve,
    pub timings: Timings,
}

struct Prepared<'a> {
    seeds: TrialSeeds,
    split: &'a Split,
    evaluator: RetrainEvaluator<'a>,
    surrogate: crate::gcn::SurrogateParams,
    avg_training_neighbors: f64,
    macro_f1: f64,
    targets: TargetGroups,
}

fn prepare_trial<'a>(cfg: &ExperimentConfig, ds: &'a Dataset, split: &'a Split, seeds: TrialSeeds) -> Result<Prepared<'a>> {
    let evaluator = RetrainEvaluator::new(
        ds,
        split,
        cfg.train.with_seed(seeds.clean_model),
        cfg.defense.clone(),
        seeds.retrain,
    )?;
    let logits = &evaluator.clean_logits;
    let macro_f1 = f1_macro(&predict(logits), &ds.labels, &split.test, ds.n_classes)?;
    let margins: Vec<f64> = (0..ds.n_nodes())
        .map(|u| margin_from_logits(logits.row(u), ds.labels[u]))
        .collect();
    let influencer = cfg.attack.mode == AttackMode::Influencer;
    let correct: Vec<bool> = (0..ds.n_nodes())
        .map(|u| margins[u] > 0.0 && !(influencer && ds.graph.degree(u) == 0))
        .collect();
    let targets = select_targets(&split.test, &margins, &correct, &cfg.targets, seeds.targets)?;
    if targets.all().is_empty() {
        return Err(Error::invalid("no correctly classified test node to attack"));
    }
    let surrogate = surrogate_train(ds, split, &cfg.train.with_seed(seeds.surrogate))?;
    Ok(Prepared {
        seeds,
        split,
        avg_training_neighbors: avg_training_neighbors(&ds.graph, &split.train)?,
        macro_f1,
        targets,
        surrogate,
        evaluator,
    })
}

/// Runs every trial. Trials and targets run in parallel on the current
/// rayon pool; the result does not depend on the number of threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.regenerate_graph {
        let DatasetSource::Sbm(sbm) = &cfg.dataset else {
            unreachable!("validated above")
        };
        let datasets: Vec<Dataset> = trial_seeds(cfg)
            .iter()
            .map(|s| {
                generate_sbm(&SbmConfig {
                    seed: s.graph,
                    ..sbm.clone()
                })
            })
            .collect::<Result<_>>()?;
        return run_trials(cfg, &datasets.iter().collect::<Vec<_>>());
    }
    let ds = cfg.dataset.load()?;
    run_experiment_on(cfg, &ds)
}

/// [`run_experiment`] on an already loaded dataset, shared by every trial.
pub fn run_experiment_on(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ExperimentResult> {
    cfg.validate()?;
    if cfg.regenerate_graph {
        return Err(Error::invalid("regenerate_graph cannot be used with a fixed dataset"));
    }
    run_trials(cfg, &vec![ds; cfg.n_trials])
}

fn trial_seeds(cfg: &ExperimentConfig) -> Vec<TrialSeeds> {
    (0..cfg.n_trials).map(|t| TrialSeeds::derive(cfg.seed, t)).collect()
}

/// Runs trial `t` on `datasets[t]`.
fn run_trials(cfg: &ExperimentConfig, datasets: &[&Dataset]) -> Result<ExperimentResult> {
    let trial_err = |trial: usize| move |e: Error| Error::Trial { trial, source: Box::new(e) };
    let started = Instant::now();
    let seeds = trial_seeds(cfg);
    let splits: Vec<Split> = seeds
        .iter()
        .enumerate()
        .map(|(t, s)| {
            make_split(datasets[t], cfg.method, cfg.train_frac, cfg.val_frac, s.split).map_err(trial_err(t))
        })
        .collect::<Result<_>>()?;
    let prepared: Vec<Prepared> = seeds
        .par_iter()
        .zip(&splits)
        .enumerate()
        .map(|(t, (s, split))| prepare_trial(cfg, datasets[t], split, *s).map_err(trial_err(t)))
        .collect::<Result<_>>()?;
    let clean_seconds = started.elapsed().as_secs_f64();

    let jobs: Vec<(usize, usize)> = prepared
        .iter()
        .enumerate()
        .flat_map(|(t, p)| p.targets.all().into_iter().map(move |u| (t, u)))
        .collect();
    let attack_started = Instant::now();
    let traces: Vec<AttackTrace> = jobs
        .par_iter()
        .map(|&(t, target)| {
            let p = &prepared[t];
            let acfg = AttackConfig {
                seed: p.seeds.retrain,
                ..cfg.attack.clone()
            };
            attack_target(datasets[t], p.split, &p.surrogate, target, &acfg, cfg.train.self_loops, &p.evaluator as &dyn MarginEvaluator)
                .map_err(trial_err(t))
        })
        .collect::<Result<_>>()?;
    let attack_seconds = attack_started.elapsed().as_secs_f64();

    let mut traces = traces.into_iter();
    let trials: Vec<TrialOutcome> = prepared
        .into_iter()
        .enumerate()
        .map(|(t, p)| {
            let n = p.targets.all().len();
            TrialOutcome {
                trial: t,
                seeds: p.seeds,
                split: p.split.clone(),
                avg_training_neighbors: p.avg_training_neighbors,
                macro_f1: p.macro_f1,
                targets: p.targets,
                traces: traces.by_ref().take(n).collect(),
            }
        })
        .collect();
    let per_trial: Vec<Vec<AttackTrace>> = trials.iter().map(|t| t.traces.clone()).collect();
    let budget = budget_vs_success(&per_trial, &cfg.success_probs, cfg.success_threshold, cfg.attack.budget)?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        trials,
        budget,
        timings: Timings {
            clean_seconds,
            attack_seconds,
            threads: rayon::current_num_threads(),
        },
    })
}

impl ExperimentResult {
    pub fn budget_rows(&self) -> Vec<BudgetRow> {
        self.budget
            .points
            .iter()
            .map(|p| BudgetRow {
                method: self.config.method.to_string(),
                success_prob: p.success_prob,
                budget_mean: p.mean,
                budget_stderr: p.stderr,
            })
            .collect()
    }

    pub fn margin_rows(&self) -> Result<Vec<MarginRow>> {
        margin_rows(
            self.trials.iter().map(|t| (t.trial, t.traces.as_slice())),
            &self.config.method.to_string(),
            &self.config.attack,
            &self.config.quantiles,
        )
    }

    pub fn trial_rows(&self) -> Vec<TrialRow> {
        self.trials
            .iter()
            .map(|t| TrialRow {
                trial: t.trial,
                method: self.config.method.to_string(),
                n_train: t.split.train.len(),
                avg_training_neighbors: t.avg_training_neighbors,
                macro_f1: t.macro_f1,
                n_targets: t.traces.len(),
                n_exhausted: t.traces.iter().filter(|tr| tr.exhausted).count(),
            })
            .collect()
    }

    pub fn trace_records(&self) -> Vec<TraceRecord> {
        self.trials
            .iter()
            .flat_map(|t| {
                t.traces.iter().map(move |tr| {
                    let cfg = AttackConfig {
                        seed: t.seeds.retrain,
                        ..self.config.attack.clone()
                    };
                    TraceRecord::new(tr, &cfg, t.trial, self.config.method.as_str())
                })
            })
            .collect()
    }

    /// Writes `budget.csv`, `margins.csv`, `trials.csv`, `traces.jsonl` and
    /// `manifest.json` into `dir`. Only the manifest carries timings.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_results(&self.budget_rows(), dir.join("budget.csv"))?;
        write_results(&self.margin_rows()?, dir.join("margins.csv"))?;
        write_results(&self.trial_rows(), dir.join("trials.csv"))?;
        crate::attack::write_traces(&self.trace_records(), dir.join("traces.jsonl"))?;
        let manifest = serde_json::json!({
            "config": self.config,
            "seeds": self.trials.iter().map(|t| t.seeds).collect::<Vec<_>>(),
            "version": env!("CARGO_PKG_VERSION"),
            "timings": self.timings,
            "stderr_undefined": self.budget.stderr_undefined,
            "eval_stride": self.config.attack.eval_stride,
        });
        write_json(&dir.join("manifest.json"), &manifest)
    }
}

/// Margin quantile rows for groups of traces, one group per trial.
pub fn margin_rows<'a>(
    trials: impl IntoIterator<Item = (usize, &'a [AttackTrace])>,
    method: &str,
    attack: &AttackConfig,
    quantiles: &[f64],
) -> Result<Vec<MarginRow>> {
    let mut rows = Vec::new();
    for (trial, traces) in trials {
        for &q in quantiles {
            for (step, m) in margin_quantile_curve(traces, q)? {
                rows.push(MarginRow {
                    trial,
                    method: method.to_string(),
                    surface: attack.surface.to_string(),
                    mode: attack.mode.to_string(),
                    quantile: q,
                    perturbations: step,
                    margin: Some(m),
                });
            }
        }
    }
    Ok(rows)
}

/// Budget and margin tables from stored traces, grouped by selection
/// method and trial. `budget` defaults to the largest budget recorded.
pub fn report(
    records: &[TraceRecord],
    tau: f64,
    success_probs: &[f64],
    quantiles: &[f64],
    budget: Option<usize>,
) -> Result<(Vec<BudgetRow>, Vec<MarginRow>)> {
    if records.is_empty() {
        return Err(Error::invalid("no traces to report on"));
    }
    let mut groups: BTreeMap<&str, BTreeMap<usize, Vec<AttackTrace>>> = BTreeMap::new();
    for r in records {
        groups
            .entry(r.method.as_str())
            .or_default()
            .entry(r.trial)
            .or_default()
            .push(r.to_trace()?);
    }
    let mut budget_rows = Vec::new();
    let mut rows = Vec::new();
    for (method, trials) in &groups {
        let in_group = || records.iter().filter(|r| r.method == *method);
        let b = budget.unwrap_or_else(|| in_group().map(|r| r.config.budget).max().unwrap_or(0));
        let per_trial: Vec<Vec<AttackTrace>> = trials.values().cloned().collect();
        let curve = budget_vs_success(&per_trial, success_probs, tau, b)?;
        budget_rows.extend(curve.points.iter().map(|p| BudgetRow {
            method: method.to_string(),
            success_prob: p.success_prob,
            budget_mean: p.mean,
            budget_stderr: p.stderr,
        }));
        let first = in_group().next().expect("group is non-empty");
        rows.extend(margin_rows(
            trials.iter().map(|(t, tr)| (*t, tr.as_slice())),
            method,
            &first.config,
            quantiles,
        )?);
    }
    Ok((budget_rows, rows))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
