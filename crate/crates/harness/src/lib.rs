//! Comparative study runner for sequential and one-shot experimental designs.

pub mod config;
pub mod study;
pub mod summary;
pub mod sweep;
pub mod validation;

pub use config::{design_seed, Schedule, StudyConfig, StudyStrategy};
pub use study::{
    resolve_workers, run_study, write_outputs, write_results, write_summary, Failure, ReplicationRecord, StepRow,
    StudyOutcome, SummaryRow, RESULTS_HEADER, SUMMARY_HEADER,
};
pub use summary::{boundary_fraction, box_stats, nearest_rank, summarize, BoxStats};
pub use sweep::{parse_grid, sweep_init_add, write_sweep, write_sweep_file, GridCell, SweepRow, SWEEP_HEADER};
pub use validation::{validation_set, ValidationSet};
