//! Point-estimate VAR baselines, centralities and NDCG ranking evaluation.

pub mod benchmark;
pub mod centrality;
pub mod ndcg;
pub mod ngc;

pub use benchmark::{
    run_benchmark, BenchmarkConfig, BenchmarkResults, Cell, ExternalScores, Marker, Method,
    ReplicateRecord, Scenario, ScenarioKind,
};
pub use centrality::{centralities, Centralities, CentralityKind};
pub use ndcg::{ndcg, rank, RankingResult};
pub use ngc::{benjamini_hochberg, fit_ngc, NgcGraph};
