//! Command-line front end: one subcommand per pipeline stage.
//!
//! Every subcommand prints a one-line JSON summary on stdout and writes its
//! data to files. Exit codes: 0 on success, 1 on a usage error, 2 when the
//! command itself fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use gcnpoison::attack::{
    attack_target, write_traces, Adaptation, AttackConfig, AttackMode, AttackSurface, MarginEvaluator,
    RetrainEvaluator, TraceRecord,
};
use gcnpoison::data::{generate_sbm, load_dataset, save_dataset, write_results, Dataset, SbmConfig};
use gcnpoison::defenses::{DefendedInputs, DefenseConfig};
use gcnpoison::eval::{report, run_experiment, select_targets, ExperimentConfig, TargetCounts};
use gcnpoison::gcn::{f1_macro, margin_from_logits, predict, accuracy, surrogate_train, SurrogateParams, TrainConfig};
use gcnpoison::graph::avg_training_neighbors;
use gcnpoison::selection::{make_split, random_split, SelectionMethod, Split};
use gcnpoison::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "gcnpoison", version, about = "Training-set selection, poisoning attacks and defenses for GCN vertex classification")]
struct Cli {
    /// Worker threads for trials and targets (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a stochastic-blockmodel dataset directory
    Sbm(SbmArgs),
    /// Choose training, validation and test nodes
    Select(SelectArgs),
    /// Train the GCN (or the linear surrogate) and report clean metrics
    Train(TrainArgs),
    /// Poison the data against chosen targets and record margin traces
    Attack(AttackArgs),
    /// Apply defenses to a dataset, optionally training a model on the result
    Defend(DefendArgs),
    /// Run a full experiment from a JSON configuration
    Experiment(ExperimentArgs),
    /// Turn stored traces into budget and margin tables
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SbmArgs {
    /// Block sizes, one per class
    #[arg(long, value_delimiter = ',', default_value = "400,400,400,400,400")]
    blocks: Vec<usize>,
    /// Within-block excess edge probability
    #[arg(long, default_value_t = 0.0125)]
    inprob: f64,
    /// Number of binary features
    #[arg(long, default_value_t = 50)]
    n_features: usize,
    /// Features owned by each class
    #[arg(long, default_value_t = 10)]
    class_features: usize,
    /// Probability that a node has one of its class's features
    #[arg(long, default_value_t = 0.35)]
    p_on: f64,
    /// Probability that a node has any other feature
    #[arg(long, default_value_t = 0.1)]
    p_off: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitFracs {
    /// Fraction of nodes used for training
    #[arg(long, default_value_t = 0.1)]
    train_frac: f64,
    /// Fraction of nodes used for validation
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
}

#[derive(Args, Debug)]
struct SelectArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// random, strat-degree or greedy-cover
    #[arg(long, default_value = "random")]
    method: SelectionMethod,
    #[command(flatten)]
    fracs: SplitFracs,
    /// Draw random training nodes without class stratification
    #[arg(long)]
    unstratified: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output split file
    #[arg(long, default_value = "split.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainFlags {
    /// Hidden units
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// L2 penalty on the first layer
    #[arg(long, default_value_t = 5e-4)]
    weight_decay: f64,
    /// Dropout rate
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    /// Epochs without validation improvement before stopping
    #[arg(long, default_value_t = 30)]
    patience: usize,
    /// Train without bias terms
    #[arg(long)]
    no_bias: bool,
    /// Normalize A + I instead of A
    #[arg(long)]
    self_loops: bool,
}

impl TrainFlags {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            weight_decay: self.weight_decay,
            max_epochs: self.max_epochs,
            patience: self.patience,
            dropout_rate: self.dropout,
            hidden: self.hidden,
            bias: !self.no_bias,
            self_loops: self.self_loops,
            seed,
        }
    }
}

#[derive(Args, Debug)]
struct DefenseFlags {
    /// Remove edges between nodes without a shared feature
    #[arg(long)]
    remove_dissimilar: bool,
    /// Replace the adjacency and features by rank-R approximations
    #[arg(long, value_name = "R")]
    low_rank: Option<usize>,
    /// Seed of the randomized SVD
    #[arg(long, default_value_t = 0)]
    svd_seed: u64,
}

impl DefenseFlags {
    fn config(&self) -> DefenseConfig {
        DefenseConfig {
            remove_dissimilar: self.remove_dissimilar,
            low_rank: self.low_rank,
            svd_seed: self.svd_seed,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Split file
    #[arg(long)]
    split: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    defense: DefenseFlags,
    /// Train the linear surrogate instead of the full model
    #[arg(long)]
    surrogate: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model file
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AttackArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Split file
    #[arg(long)]
    split: PathBuf,
    /// Surrogate weights; trained from the split when absent
    #[arg(long)]
    surrogate: Option<PathBuf>,
    /// Comma-separated target nodes; chosen by clean margin when absent
    #[arg(long, value_delimiter = ',')]
    targets: Vec<usize>,
    /// Targets with the largest clean margins
    #[arg(long, default_value_t = 10)]
    high: usize,
    /// Targets with the smallest clean margins
    #[arg(long, default_value_t = 10)]
    low: usize,
    /// Further targets drawn at random
    #[arg(long, default_value_t = 20)]
    random: usize,
    /// direct or influencer
    #[arg(long, default_value = "direct")]
    mode: AttackMode,
    /// structure, features or both
    #[arg(long, default_value = "both")]
    surface: AttackSurface,
    /// Perturbations per target
    #[arg(long, default_value_t = 50)]
    budget: usize,
    /// none, strat-degree or greedy-cover
    #[arg(long, default_value = "none")]
    adapted: Adaptation,
    /// Skip the degree-distribution test
    #[arg(long)]
    no_unnoticeable: bool,
    /// Cutoff of the degree-distribution likelihood-ratio test
    #[arg(long, default_value_t = 0.004)]
    ll_cutoff: f64,
    /// Retrain and record the margin every this many perturbations
    #[arg(long, default_value_t = 1)]
    eval_stride: usize,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    defense: DefenseFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output trace file
    #[arg(long, default_value = "traces.jsonl")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DefendArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    defense: DefenseFlags,
    /// Also train a model on the defended inputs with this split
    #[arg(long)]
    split: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment configuration (JSON)
    #[arg(long, required_unless_present = "print_default_config")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Print the default configuration and exit
    #[arg(long)]
    print_default_config: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Trace files to combine
    #[arg(long, required = true, num_args = 1..)]
    traces: Vec<PathBuf>,
    /// Success threshold on the margin
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tau: f64,
    /// Success probabilities at which to report budgets
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95")]
    success_probs: Vec<f64>,
    /// Margin quantiles to tabulate
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.75,0.9")]
    quantiles: Vec<f64>,
    /// Budget used when a curve never crosses (default: the recorded budget)
    #[arg(long)]
    budget: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "report")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let text = s.to_string();
                if !msg.contains(&text) {
                    msg.push_str(&format!(": {text}"));
                }
                source = s.source();
            }
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<Value> {
    match cmd {
        Command::Sbm(a) => sbm(a),
        Command::Select(a) => select(a),
        Command::Train(a) => train(a),
        Command::Attack(a) => attack(a),
        Command::Defend(a) => defend(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn sbm(a: SbmArgs) -> Result<Value> {
    let ds = generate_sbm(&SbmConfig {
        block_sizes: a.blocks,
        inprob: a.inprob,
        n_features: a.n_features,
        per_class_feature_count: a.class_features,
        p_feature_on_class: a.p_on,
        p_feature_off_class: a.p_off,
        seed: a.seed,
    })?;
    save_dataset(&ds, &a.out)?;
    Ok(json!({
        "command": "sbm",
        "out": a.out,
        "n_nodes": ds.n_nodes(),
        "n_edges": ds.graph.n_edges(),
        "n_features": ds.n_features(),
        "n_classes": ds.n_classes,
    }))
}

fn select(a: SelectArgs) -> Result<Value> {
    let ds = load_dataset(&a.data)?;
    let (t, v) = (a.fracs.train_frac, a.fracs.val_frac);
    let split = if a.unstratified {
        if a.method != SelectionMethod::Random {
            return Err(Error::InvalidArgument("--unstratified only applies to random selection".into()));
        }
        random_split(&ds, t, v, a.seed, false)?
    } else {
        make_split(&ds, a.method, t, v, a.seed)?
    };
    split.save(&a.out)?;
    Ok(json!({
        "command": "select",
        "out": a.out,
        "method": split.method,
        "n_train": split.train.len(),
        "n_val": split.val.len(),
        "n_test": split.test.len(),
        "avg_training_neighbors": avg_training_neighbors(&ds.graph, &split.train)?,
    }))
}

fn load_inputs(data: &Path, split: &Path) -> Result<(Dataset, Split)> {
    let ds = load_dataset(data)?;
    let split = Split::load(split)?;
    if split.n_nodes() != ds.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "split covers {} nodes, dataset has {}",
            split.n_nodes(),
            ds.n_nodes()
        )));
    }
    Ok((ds, split))
}

fn train(a: TrainArgs) -> Result<Value> {
    let (ds, split) = load_inputs(&a.data, &a.split)?;
    let cfg = a.train.config(a.seed);
    if a.surrogate {
        let s = surrogate_train(&ds, &split, &cfg)?;
        s.save(&a.out)?;
        return Ok(json!({"command": "train", "out": a.out, "model": "surrogate"}));
    }
    let inputs = DefendedInputs::prepare(&ds.graph, &ds.features, &a.defense.config(), cfg.self_loops)?;
    let (p, rep) = inputs.train(&ds.features, &ds.labels, ds.n_classes, &split, &cfg)?;
    p.save(&a.out)?;
    let pred = predict(&inputs.logits(&p, &ds.features)?);
    Ok(json!({
        "command": "train",
        "out": a.out,
        "model": "gcn",
        "epochs_run": rep.epochs_run,
        "best_epoch": rep.best_epoch,
        "best_val_loss": rep.best_val_loss,
        "test_accuracy": accuracy(&pred, &ds.labels, &split.test),
        "test_macro_f1": f1_macro(&pred, &ds.labels, &split.test, ds.n_classes)?,
    }))
}

fn attack(a: AttackArgs) -> Result<Value> {
    let (ds, split) = load_inputs(&a.data, &a.split)?;
    let cfg = AttackConfig {
        mode: a.mode,
        surface: a.surface,
        budget: a.budget,
        adapted: a.adapted,
        unnoticeable: !a.no_unnoticeable,
        ll_cutoff: a.ll_cutoff,
        eval_stride: a.eval_stride,
        seed: a.seed,
    };
    cfg.validate()?;
    let train_cfg = a.train.config(a.seed);
    let surrogate = match &a.surrogate {
        Some(p) => SurrogateParams::load(p)?,
        None => surrogate_train(&ds, &split, &train_cfg)?,
    };
    let evaluator = RetrainEvaluator::new(&ds, &split, train_cfg.clone(), a.defense.config(), a.seed)?;
    let targets = if a.targets.is_empty() {
        let margins: Vec<f64> = (0..ds.n_nodes())
            .map(|u| margin_from_logits(evaluator.clean_logits.row(u), ds.labels[u]))
            .collect();
        let correct: Vec<bool> = (0..ds.n_nodes())
            .map(|u| margins[u] > 0.0 && !(a.mode == AttackMode::Influencer && ds.graph.degree(u) == 0))
            .collect();
        let counts = TargetCounts {
            high: a.high,
            low: a.low,
            random: a.random,
        };
        select_targets(&split.test, &margins, &correct, &counts, a.seed)?.all()
    } else {
        a.targets.clone()
    };
    use rayon::prelude::*;
    let traces = targets
        .par_iter()
        .map(|&t| {
            attack_target(&ds, &split, &surrogate, t, &cfg, train_cfg.self_loops, &evaluator as &dyn MarginEvaluator)
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<TraceRecord> = traces
        .iter()
        .map(|t| TraceRecord::new(t, &cfg, 0, split.method.as_str()))
        .collect();
    write_traces(&records, &a.out)?;
    let defeated = traces
        .iter()
        .filter(|t| t.margins.iter().rev().find_map(|m| *m).is_some_and(|m| m <= 0.0))
        .count();
    Ok(json!({
        "command": "attack",
        "out": a.out,
        "n_targets": traces.len(),
        "n_defeated": defeated,
        "n_exhausted": traces.iter().filter(|t| t.exhausted).count(),
    }))
}

fn defend(a: DefendArgs) -> Result<Value> {
    let ds = load_dataset(&a.data)?;
    let cfg = a.defense.config();
    let train_cfg = a.train.config(a.seed);
    let inputs = DefendedInputs::prepare(&ds.graph, &ds.features, &cfg, train_cfg.self_loops)?;
    let defended = ds.with_graph(inputs.graph.clone());
    save_dataset(&defended, &a.out)?;
    let mut summary = json!({
        "command": "defend",
        "out": a.out,
        "n_edges_before": ds.graph.n_edges(),
        "n_edges_after": defended.graph.n_edges(),
    });
    if let Some((af, xf)) = &inputs.low_rank {
        af.save(a.out.join("adjacency_factors.json"))?;
        xf.save(a.out.join("feature_factors.json"))?;
        summary["rank"] = json!(af.rank());
    }
    if let Some(split) = &a.split {
        let split = Split::load(split)?;
        let (p, rep) = inputs.train(&ds.features, &ds.labels, ds.n_classes, &split, &train_cfg)?;
        let model = a.out.join("model.json");
        p.save(&model)?;
        let pred = predict(&inputs.logits(&p, &ds.features)?);
        summary["model"] = json!(model);
        summary["epochs_run"] = json!(rep.epochs_run);
        summary["test_macro_f1"] = json!(f1_macro(&pred, &ds.labels, &split.test, ds.n_classes)?);
    }
    Ok(summary)
}

fn experiment(a: ExperimentArgs) -> Result<Value> {
    if a.print_default_config {
        return serde_json::to_value(ExperimentConfig::default())
            .map_err(|e| Error::InvalidArgument(e.to_string()));
    }
    let path = a.config.expect("clap requires --config");
    let cfg = ExperimentConfig::load(&path)?;
    let res = run_experiment(&cfg)?;
    res.write(&a.out)?;
    let f1: Vec<f64> = res.trials.iter().map(|t| t.macro_f1).collect();
    Ok(json!({
        "command": "experiment",
        "out": a.out,
        "method": cfg.method,
        "n_trials": res.trials.len(),
        "n_traces": res.trials.iter().map(|t| t.traces.len()).sum::<usize>(),
        "macro_f1": f1,
        "budget": res.budget.points.iter().map(|p| json!([p.success_prob, p.mean, p.stderr])).collect::<Vec<_>>(),
        "seconds": res.timings.clean_seconds + res.timings.attack_seconds,
    }))
}

fn report_cmd(a: ReportArgs) -> Result<Value> {
    let mut records = Vec::new();
    for p in &a.traces {
        records.extend(gcnpoison::attack::read_traces(p)?);
    }
    let (budget, margins) = report(&records, a.tau, &a.success_probs, &a.quantiles, a.budget)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    write_results(&budget, a.out.join("budget.csv"))?;
    write_results(&margins, a.out.join("margins.csv"))?;
    Ok(json!({
        "command": "report",
        "out": a.out,
        "n_traces": records.len(),
        "n_budget_rows": budget.len(),
        "n_margin_rows": margins.len(),
    }))
}
