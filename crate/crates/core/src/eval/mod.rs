//! Experiment orchestration and the budget metrics.

mod budget;
mod experiment;
mod targets;

pub use budget::{
    aligned_margins, budget_vs_success, margin_quantile_curve, mean_stderr, quantile, required_budget, BudgetCurve,
    BudgetPoint, Curve,
};
pub use experiment::{
    margin_rows, report, run_experiment, run_experiment_on, DatasetSource, ExperimentConfig, ExperimentResult, Timings,
    TrialOutcome, TrialSeeds,
};
pub use targets::{select_targets, TargetCounts, TargetGroups};
