//! Anomaly scorers and the metrics used to compare them.

pub mod metrics;
pub mod rank;
pub mod scorers;
pub mod trial;

pub use metrics::{auprc, auroc, average_ranks, evaluate, write_scores, EvalReport};
pub use rank::{rank_table, AurocMatrix, RankTable, DEFAULT_FAIL_THRESHOLD};
pub use scorers::{
    entropy_estimate, pca_baseline_score, slt_score, typicality_from_nll, typicality_score, PcaModel, ScoreVector,
};
pub use trial::{run_trial, LikelihoodTest, TrialSpec};
