//! Metrics, fold protocols and parameter sweeps.

mod metrics;
mod protocol;

pub use metrics::{accuracy, auc_score, f1_score, mean_std, Confusion, FoldMetrics};
pub use protocol::{
    fold_seed, protocol_folds, report_csv, run_protocol, score_bundle, sweep, sweep_csv, write_report, write_sweep,
    MetricReport, SweepParameter, SweepPoint, SweepResult,
};
