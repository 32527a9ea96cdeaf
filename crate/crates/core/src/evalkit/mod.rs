//! Metrics, leave-last-out evaluation, multi-seed experiments, significance
//! tests and ablations.

mod ablation;
mod evaluate;
mod experiment;
mod metrics;
pub mod stats;

pub use ablation::{ablation_suite, AblationTable, ArmResult};
pub use evaluate::{activation_rate, analyze_cases, evaluate, prediction_rows, score_cases, Case, EvalOutcome, PredictionRow, Target};
pub use experiment::{
    fit_seed, multi_seed_run, relative_improvement, run_seed, summarize, EvalReport, ExperimentConfig, ExperimentData,
    MetricSummary, SeedFit, SeedResult,
};
pub use metrics::{
    continuous_metrics, hit_rate_at_k, mrr, ndcg_at_k, rank_of, top_k, MetricSet, RankingMetrics, RegressionMetrics, CUTOFFS,
};
pub use stats::{paired_t_test, Degenerate, TTest};
