//! Link-prediction metrics, node classification and sweeps.

pub mod classify;
pub mod metrics;
pub mod report;
pub mod sweep;

pub use classify::{classify, f1_scores};
pub use metrics::{auc, average_precision, average_precision_seeded};
pub use report::{AblationRow, MetricReport, SweepRow};
pub use sweep::{ablation, perturb_edges, robustness_sweep, topn_sweep};
