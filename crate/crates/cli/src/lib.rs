//! Command-line front end for `tui-core`: subcommands, file formats and a
//! threaded executor.

pub mod formats;
pub mod pool;

mod commands;

pub use commands::{run, Cli};

/// Process exit codes.
pub mod exit {
    pub const CLEAN: i32 = 0;
    pub const INPUT: i32 = 1;
    pub const GENERATION: i32 = 2;
    pub const BUDGET: i32 = 3;
    pub const WARNINGS: i32 = 4;
}
