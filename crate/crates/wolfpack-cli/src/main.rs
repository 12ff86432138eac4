//! `wolfpack` — population-based optimization of LLM decoding configs and
//! prompt templates, plus a standard grey-wolf benchmark runner.
//!
//! Exit codes are a stable contract for CI: 0 success, 1 runtime failure
//! (a checkpoint remains for resumption), 2 configuration error, 3 data
//! leakage refusal.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Exit 2.
    Config(String),
    /// Exit 1.
    Runtime(String),
    /// Exit 3.
    Leakage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::Leakage(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) | CliError::Leakage(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "wolfpack", version, about = "Grey-wolf optimization of LLM agent configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimization loop (resumes an interrupted run directory).
    Run(RunArgs),
    /// Resume a run from its checkpoint using the echoed config.
    Resume(ResumeArgs),
    /// Evaluate a champion config on a held-out test split.
    Eval(EvalArgs),
    /// Run the standard optimizer on a benchmark function.
    Bench(BenchArgs),
    /// Re-emit report files (history CSV, champion, usage) from a run.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// TOML config file; built-in mock defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-key override applied after the file, e.g. --set gwo.seed=7.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for --set gwo.seed=SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory for config echo, checkpoints, and reports.
    #[arg(long, default_value = "wolfpack-run")]
    out_dir: PathBuf,
    /// Log raw LLM request/response JSON to the run directory.
    #[arg(long)]
    trace_llm: bool,
}

#[derive(Args)]
pub struct ResumeArgs {
    /// Run directory containing config.json and state.ckpt.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    trace_llm: bool,
}

#[derive(Args)]
pub struct EvalArgs {
    /// champion.json produced by a run.
    #[arg(long)]
    champion: PathBuf,
    /// JSONL test split; must be disjoint from the optimization pool.
    #[arg(long)]
    test_split: PathBuf,
    /// Provider config; defaults to config.json next to the champion.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write eval.json; defaults next to the champion.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for per-item generation calls.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
pub struct BenchArgs {
    /// sphere | rastrigin | rosenbrock
    #[arg(long)]
    function: String,
    #[arg(long, default_value_t = 5)]
    dims: usize,
    /// Population size N.
    #[arg(long, default_value_t = 30)]
    population: usize,
    /// Max iterations T.
    #[arg(long, default_value_t = 500)]
    iterations: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Convergence CSV output path.
    #[arg(long, default_value = "gwo-bench.csv")]
    out: PathBuf,
    /// Update leaders too, as the literal pseudocode does.
    #[arg(long)]
    no_elitism: bool,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Run directory holding state.ckpt.json.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::cmd_run(args),
        Command::Resume(args) => commands::cmd_resume(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Bench(args) => commands::cmd_bench(args),
        Command::Report(args) => commands::cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
