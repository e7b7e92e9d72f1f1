//! Missingness tests and evaluation metrics.

pub mod bh;
pub mod chi2;
pub mod mcar;
pub mod metrics;
pub mod wilcoxon;

pub use bh::{benjamini_hochberg, BhOutcome};
pub use chi2::{chi_square_sf, regularized_gamma_q, StatsError};
pub use mcar::{little_mcar_test, McarTestResult};
pub use metrics::{accuracy, auroc, balanced_accuracy, MetricError};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonError, WilcoxonResult};
