//! Library side of the `dcmg` command: configuration and the simulate, tune
//! and compare workflows.

pub mod commands;
pub mod config;

pub use commands::{CliError, CompareReport};
pub use config::RunConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Failure writing outputs or any other unexpected error.
    pub const FAILURE: i32 = 1;
    /// Unreadable, unparseable or invalid configuration.
    pub const CONFIG: i32 = 2;
    /// The simulation diverged.
    pub const DIVERGENCE: i32 = 3;
    /// No tuned fuzzy system at the given path.
    pub const MISSING_FIS: i32 = 4;
}
