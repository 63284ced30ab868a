//! Experiment harness: convergence traces, three-approach comparisons and
//! adherence sweeps, written as CSV with a reproducibility manifest.

pub mod config;
pub mod output;
pub mod record;
pub mod run;
pub mod stats;

pub use config::{parse_approaches, parse_grid, parse_seeds, Approach, ExperimentConfig, LearnerSettings};
pub use output::{write_run, Manifest};
pub use record::{read_csv, write_csv, RunRecord, CSV_HEADER};
pub use run::{oracle_report, run_comparison, run_convergence, run_theta_sweep, train, ComparisonSummary, Output};
