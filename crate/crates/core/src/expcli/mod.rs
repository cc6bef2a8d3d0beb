//! Experiment runner behind the `meshctrl` binary.

mod commands;
mod config;

pub use commands::{
    cmd_compare, cmd_converge, cmd_interp_bench, cmd_run, default_converge_solver, interp_error, loglog_slope,
    solve_case, CompareRow, ConvergeReport, DecayRow, InterpRow, RunReport, SolveOutcome,
};
pub use config::{ExperimentConfig, InterpBenchConfig, MethodBlock, PointRule, TestFunction};

use crate::error::Error;

/// Process exit code for an error: 2 for configuration problems, 3 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        _ => 3,
    }
}
