use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use open5g_core::netsim::Channel;
use open5g_sim::{cmd_run, cmd_table, cmd_verify, describe_divergence, CliError, EXIT_MISMATCH};

#[derive(Parser, Debug)]
#[command(name = "open5g-sim", version, about = "Open5G RAN simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write its trace
    Run {
        scenario: PathBuf,
        #[arg(short, long, value_name = "TRACE")]
        out: PathBuf,
    },
    /// Compare a trace against a golden
    Verify {
        trace: PathBuf,
        #[arg(long, value_name = "FILE")]
        golden: PathBuf,
        /// Only compare these channels, e.g. srb0,srb1,ngap,open5g
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<Channel>>,
    },
    /// Print a node's flow table after a given trace step
    Table {
        scenario: PathBuf,
        #[arg(long)]
        node: String,
        #[arg(long, default_value_t = u64::MAX)]
        at: u64,
        /// Include the common SRB0 entries
        #[arg(long)]
        all: bool,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { scenario, out } => {
            let n = cmd_run(&scenario, &out)?;
            eprintln!("{n} records written to {}", out.display());
        }
        Command::Verify {
            trace,
            golden,
            channels,
        } => {
            if let Some(d) = cmd_verify(&trace, &golden, channels.as_deref())? {
                println!("{}", describe_divergence(&d));
                return Ok(ExitCode::from(EXIT_MISMATCH));
            }
            println!("ok");
        }
        Command::Table {
            scenario,
            node,
            at,
            all,
        } => print!("{}", cmd_table(&scenario, &node, at, all)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
