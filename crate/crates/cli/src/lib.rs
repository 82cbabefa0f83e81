//! Config parsing, experiment orchestration and CSV output for the `rabi`
//! command-line tool.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{
    parse_config, parse_config_for, render, ConfigError, ExperimentKind, ExperimentParams,
    ExperimentSpec, Numerics, Problem, StartState,
};
pub use output::{format_float, Cell, Table};
pub use runner::{execute, manifest_path, run, RunError, RunOutput, RunReport};
