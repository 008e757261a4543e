//! Configuration, run orchestration and file output for the `sim` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{parse_config, CheckpointSpec, Mode, OutputFormat, RawConfig, RunConfig};
pub use error::{CliError, ConfigError, Result};
pub use plot::emit_plot_script;
pub use run::{run, RunSummary};
