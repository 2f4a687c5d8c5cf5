//! Scenario runner, trace verifier and flow-table inspector.

pub mod scenario;
pub mod table;
pub mod tracefile;

use std::fs;
use std::path::{Path, PathBuf};

use open5g_core::netsim::{Channel, SimError, Simulation};
use thiserror::Error;

pub use scenario::ScenarioFile;
pub use tracefile::{Divergence, TraceLine};

pub const EXIT_OK: u8 = 0;
pub const EXIT_MISMATCH: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_SIM: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{}: {}", path.display(), source.line, source.message)]
    Parse { path: PathBuf, source: ParseError },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } | CliError::UnknownNode(_) => EXIT_PARSE,
            CliError::Sim(_) => EXIT_SIM,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_with<T>(path: &Path, f: impl FnOnce(&str) -> Result<T, ParseError>) -> Result<T, CliError> {
    let text = read(path)?;
    f(&text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioFile, CliError> {
    parse_with(path, ScenarioFile::parse)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceLine>, CliError> {
    parse_with(path, tracefile::parse)
}

pub fn load_table(path: &Path) -> Result<Vec<table::Row>, CliError> {
    parse_with(path, table::parse)
}

/// Runs a scenario to quiescence and returns the rendered trace.
pub fn run_file(scenario: &ScenarioFile) -> Result<String, CliError> {
    let mut sim = Simulation::new(scenario.scenario())?;
    sim.run()?;
    Ok(tracefile::render(sim.trace()))
}

/// `run`: writes the trace and returns the number of records.
pub fn cmd_run(scenario_path: &Path, out_path: &Path) -> Result<usize, CliError> {
    let trace = run_file(&load_scenario(scenario_path)?)?;
    fs::write(out_path, &trace).map_err(|source| CliError::Io {
        path: out_path.to_path_buf(),
        source,
    })?;
    Ok(trace.lines().filter(|l| !l.starts_with('#')).count())
}

/// `verify`: the first divergence, if any.
pub fn cmd_verify(
    trace_path: &Path,
    golden_path: &Path,
    channels: Option<&[Channel]>,
) -> Result<Option<Divergence>, CliError> {
    let trace = load_trace(trace_path)?;
    let golden = load_trace(golden_path)?;
    Ok(tracefile::compare(&trace, &golden, channels))
}

/// Flow table of `node` once `at_step` trace records exist.
pub fn table_rows(
    scenario: &ScenarioFile,
    node: &str,
    at_step: u64,
    include_common: bool,
) -> Result<Vec<table::Row>, CliError> {
    let mut sim = Simulation::new(scenario.scenario())?;
    if sim.node(node).is_none() {
        return Err(CliError::UnknownNode(node.to_string()));
    }
    sim.run_to_step(at_step)?;
    let n = sim.node(node).expect("checked above");
    Ok(table::rows(n.switch(), include_common))
}

/// `table`: the rendered dump.
pub fn cmd_table(scenario_path: &Path, node: &str, at_step: u64, include_common: bool) -> Result<String, CliError> {
    let rows = table_rows(&load_scenario(scenario_path)?, node, at_step, include_common)?;
    Ok(table::render(&format!("flow table of {node} at step {at_step}"), &rows))
}

pub fn describe_divergence(d: &Divergence) -> String {
    let show = |l: &Option<TraceLine>| {
        l.as_ref().map_or_else(
            || "<end of trace>".to_string(),
            |l| format!("{} -> {} {} {}", l.src, l.dst, l.channel, l.kind),
        )
    };
    format!(
        "divergence at step {}\n  expected: {}\n  actual:   {}",
        d.step,
        show(&d.expected),
        show(&d.actual)
    )
}
