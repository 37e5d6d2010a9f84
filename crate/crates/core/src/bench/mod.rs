//! Benchmark harness: configuration, offline and online runs, reference
//! solves, term-count sweeps, reports and figures.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use report::{ErrorReport, SweepResult};
pub use run::{cmd_offline, cmd_online, cmd_reference, cmd_report, cmd_sweep, SweepKind};
