//! Scenario configuration, seeded batch execution and CSV output.

mod batch;
mod config;
mod output;
mod presets;
pub mod registry;
mod summary;

pub use batch::{run_batch, run_batch_full, with_pool, BatchOutput, ExperimentRecord, RoundRow, THREADS_ENV};
pub use config::{ConfigError, ScenarioConfig};
pub use output::{emit_csv, load_records, to_csv_string, write_csv, CsvError, CsvRow};
pub use presets::{ensemble, preset, PRESETS};
pub use registry::{Estimator, RunContext, RunResult};
pub use summary::{summarize, SummaryError, SummaryStats};
