//! Run configuration, orchestration and the command-line surface.

pub mod cli;
pub mod config;
pub mod run;

pub use cli::cli_dispatch;
pub use config::{rate_to_block, RunConfig};
pub use run::{run_coverage, run_end_to_end, RunOutput};
