//! Scenario files, CSV exports and the `tcplan` commands.

pub mod commands;
pub mod export;
pub mod scenario_file;

/// Process exit codes. These never change meaning.
pub mod exit {
    pub const OK: u8 = 0;
    /// I/O failure or an internal error.
    pub const INTERNAL: u8 = 1;
    /// Bad command line arguments.
    pub const USAGE: u8 = 2;
    /// The scenario could not be read, parsed or validated.
    pub const PARSE: u8 = 3;
    /// The graph search or bound extraction found no path.
    pub const SEARCH: u8 = 4;
    /// Region generation failed.
    pub const REGIONS: u8 = 5;
    /// The QP has no solution, including rectangular corridors too steep for their duration.
    pub const QP_INFEASIBLE: u8 = 6;
    /// The solver stopped without converging or rejected the problem.
    pub const SOLVER: u8 = 7;
}
