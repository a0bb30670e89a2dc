//! Filtered ranking metrics, coverage-ratio benchmarking and the
//! sampling-ratio extrapolation sweep.

mod coverage;
mod evaluate;
mod metrics;
mod sweep;

pub use coverage::{coverage_ratio, entity_covered, CoverageRecord, CoverageTable};
pub use evaluate::{
    evaluate, rank_queries, rank_query, split_queries, summarize, EvalOptions, FilterIndex,
    QueryOutcome,
};
pub use metrics::{random_scorer_mrr, rank_filtered, MetricAccumulator, MetricReport};
pub use sweep::{extrapolation_sweep, SweepMatrix};
