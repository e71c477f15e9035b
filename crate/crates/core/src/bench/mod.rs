//! Experiment orchestration: cohort construction, the estimator × method ×
//! `T` sweep, threshold curves, result files and figures.

mod cohort;
mod config;
pub mod plot;
mod run;
pub mod stats;

pub use cohort::{auto_grid, build_cohort, cohort_csv, CohortMember};
pub use config::{CellSpec, CohortSpec, ExperimentConfig, MethodKind, MethodSpec, Threads};
pub use run::{
    manifest, parse_grid, parse_records, records_csv, run_benchmark, run_items, sample_seed, standardize, sweep_csv,
    threshold_sweep, threshold_sweep_on, with_pool, write_atomic, write_outputs, BenchOutput, RunRecord, SweepRow,
    RECORD_HEADER, SWEEP_HEADER,
};
