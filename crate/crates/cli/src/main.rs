use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::{CompareArgs, EvaluateArgs, SolveArgs, TrainArgs, ValidateArgs};

/// Exact solvers, learners and evaluation for multi-agent KL-control MDPs.
///
/// Verbosity is read from KLC_OPI_LOG (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "klc-opi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Value iteration to V*; writes vstar.csv and pistar.json.
    Solve(SolveArgs),
    /// Run the sync or async learner; writes trace.csv, vfinal.csv and policy.json.
    Train(TrainArgs),
    /// Monte-Carlo returns of one policy; writes evaluate.csv.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo comparison of two policies; writes compare.csv.
    Compare(CompareArgs),
    /// Report which modelling assumptions the model satisfies.
    Validate(ValidateArgs),
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files. Exit code 2.
    Config(String),
    /// Non-convergence or numeric breakdown. Exit code 3.
    Numeric(String),
    /// Failure writing outputs. Exit code 1.
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            CliError::Output(msg) => write!(f, "output error: {msg}"),
        }
    }
}

impl From<klc_opi::Error> for CliError {
    fn from(e: klc_opi::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KLC_OPI_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(args) => commands::solve(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Compare(args) => commands::compare(args),
        Command::Validate(args) => commands::validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("klc-opi: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
