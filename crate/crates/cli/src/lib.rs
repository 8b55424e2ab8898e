//! Library side of the `cac` command: a TOML config in, a CSV table and
//! optional event traces out.

pub mod config;
pub mod csv;
pub mod experiment;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, OutputSettings, SimSettings};
pub use experiment::{run_experiment, CellFailure, ExperimentOutput, Mode};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    /// Some cells failed to converge or simulate; completed rows were written.
    pub const SOLVER: i32 = 2;
}
