//! File formats, reports, parallel execution and the command-line front
//! end around `imputelab-core`.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod exec;
pub mod external;
pub mod report;
pub mod tasks;

pub use config::{ConfigError, Overrides, RunConfig, StrategyEntry, Task};
pub use csvio::{load_dataset_csv, read_dataset, write_dataset, write_dataset_csv, IoError, WideCsvSchema};
pub use exec::RayonExecutor;
pub use external::ExternalPredictor;
pub use report::{write_report, ReportDocument, Table};
pub use tasks::{execute, run_task, RunError, Summary, TaskOutput};
