//! Run orchestration: configs, parallel estimates, cross-checks and reports.

pub mod checks;
pub mod config;
pub mod estimate;
pub mod report;

pub use checks::{
    compare_to_oracle, martingale_check, run_bounds, BoundsReport, oracle_solution, run_semigroup_check, verify_lemma22, CompareReport,
    Lemma22Report, MartingaleReport, SemigroupReport,
};
pub use config::{config_hash, ReportFormat, RunConfig};
pub use estimate::{run_field_estimate, run_mc_estimate, EstimateResult, Estimator};
pub use report::{emit_report, render, Tabular};
