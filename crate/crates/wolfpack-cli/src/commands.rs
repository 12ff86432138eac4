//! Subcommand implementations.

use crate::config::{config_path, echo_config, load_echoed_config, resolve_config};
use crate::{BenchArgs, CliError, EvalArgs, ReportArgs, ResumeArgs, RunArgs};
use std::path::Path;
use wolfpack_core::benchfns::BenchFunction;
use wolfpack_core::data;
use wolfpack_core::gwo::{gwo_minimize, GwoOptions, GwoSchedule};
use wolfpack_core::orchestrator::{evaluate_champion, OrchestratorError, Runner};
use wolfpack_core::{AgentConfig, RunConfig, RunState};

fn map_run_error(err: OrchestratorError, out_dir: &Path) -> CliError {
    match err {
        OrchestratorError::Config(m) => CliError::Config(m),
        OrchestratorError::StateMismatch(m) => CliError::Config(m),
        OrchestratorError::Leakage(m) => CliError::Leakage(format!("leakage: {m}")),
        OrchestratorError::Data(e) => CliError::Config(e.to_string()),
        OrchestratorError::Gwo(e) => CliError::Config(e.to_string()),
        other => CliError::Runtime(format!(
            "{other}; checkpoint retained at {}",
            Runner::state_path(out_dir).display()
        )),
    }
}

fn start_runner(config: RunConfig, out_dir: &Path, trace_llm: bool) -> Result<(), CliError> {
    let runner = Runner::new(config, out_dir, trace_llm).map_err(|e| map_run_error(e, out_dir))?;
    let outcome = runner.run().map_err(|e| map_run_error(e, out_dir))?;
    println!("champion: {}", Runner::champion_path(out_dir).display());
    println!(
        "best_composite={:.4} at iteration {}",
        outcome.best.composite, outcome.best.iteration
    );
    Ok(())
}

pub fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let config = resolve_config(args.config.as_deref(), args.seed, &args.set)?;

    // A run directory binds to its resolved config. Same config: resume
    // or no-op. Different config: refuse rather than corrupt.
    if config_path(&args.out_dir).exists() {
        let existing = load_echoed_config(&args.out_dir)?;
        if existing != config {
            return Err(CliError::Config(format!(
                "{} was created with a different config; refusing to overwrite",
                args.out_dir.display()
            )));
        }
    } else {
        echo_config(&config, &args.out_dir)?;
    }
    start_runner(config, &args.out_dir, args.trace_llm)
}

pub fn cmd_resume(args: ResumeArgs) -> Result<(), CliError> {
    if !Runner::state_path(&args.out_dir).exists() {
        return Err(CliError::Config(format!(
            "no checkpoint at {}",
            Runner::state_path(&args.out_dir).display()
        )));
    }
    let config = load_echoed_config(&args.out_dir)?;
    start_runner(config, &args.out_dir, args.trace_llm)
}

pub fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let champion_text = std::fs::read_to_string(&args.champion)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.champion.display())))?;
    let champion: AgentConfig = serde_json::from_str(&champion_text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.champion.display())))?;

    let run_dir = args
        .champion
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let config = match &args.config {
        Some(path) => resolve_config(Some(path), None, &[])?,
        None => load_echoed_config(&run_dir)?,
    };

    let task_kind = match &config.dataset {
        wolfpack_core::orchestrator::DatasetSpec::Jsonl { task_kind, .. } => *task_kind,
        wolfpack_core::orchestrator::DatasetSpec::OfficialPair { task_kind, .. } => *task_kind,
        _ => wolfpack_core::TaskKind::Numeric,
    };
    let test_split = data::load_dataset(&args.test_split, task_kind)
        .map_err(|e| CliError::Config(e.to_string()))?;

    // The optimization pool ids recorded in the checkpoint guard against
    // evaluating on contaminated splits.
    let pool_ids: Vec<String> = match Runner::load_state(&run_dir) {
        Ok(Some(state)) => state.pool_ids,
        _ => Vec::new(),
    };

    let built = config
        .build_provider(None)
        .map_err(|e| map_run_error(e, &run_dir))?;
    let evaluator = wolfpack_core::orchestrator::FitnessEvaluator::new(
        &config,
        built.agent_client,
        built.judge_client,
    )
    .map_err(|e| map_run_error(e, &run_dir))?;

    let accuracy = evaluate_champion(&champion, &test_split, &evaluator, &pool_ids, args.seed)
        .map_err(|e| map_run_error(e, &run_dir))?;

    println!("accuracy={accuracy:.4}");
    let out = args.out.unwrap_or_else(|| run_dir.join("eval.json"));
    let payload = serde_json::json!({
        "accuracy": accuracy,
        "test_items": test_split.len(),
        "champion": args.champion.display().to_string(),
        "test_split": args.test_split.display().to_string(),
    });
    std::fs::write(&out, format!("{}\n", serde_json::to_string_pretty(&payload).expect("serializes")))
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", out.display())))?;
    Ok(())
}

pub fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let function: BenchFunction = args
        .function
        .parse()
        .map_err(|e: String| CliError::Config(e))?;
    let space = function
        .default_space(args.dims)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let schedule = GwoSchedule::new(args.iterations).map_err(|e| CliError::Config(e.to_string()))?;
    let options = GwoOptions {
        elitism: !args.no_elitism,
    };
    let outcome = gwo_minimize(
        |x| function.eval(x),
        &space,
        args.population,
        schedule,
        args.seed,
        &options,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let mut csv = String::from("iteration,best_value\n");
    for (ix, value) in outcome.trace.iter().enumerate() {
        csv.push_str(&format!("{},{value}\n", ix + 1));
    }
    std::fs::write(&args.out, csv)
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", args.out.display())))?;
    println!(
        "{} D={} N={} T={} seed={} final_best={:e}",
        function.name(),
        args.dims,
        args.population,
        args.iterations,
        args.seed,
        outcome.value
    );
    println!("trace: {}", args.out.display());
    Ok(())
}

pub fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let state: RunState = Runner::load_state(&args.out_dir)
        .map_err(|e| CliError::Config(e.to_string()))?
        .ok_or_else(|| {
            CliError::Config(format!(
                "no checkpoint at {}",
                Runner::state_path(&args.out_dir).display()
            ))
        })?;
    let alpha = state.alpha_index.ok_or_else(|| {
        CliError::Config("run has not completed any iteration yet".to_string())
    })?;
    let champion = &state.population[alpha];
    let paths = data::emit_report(&state.history, champion, &state.usage, &args.out_dir)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("history: {}", paths.history_csv.display());
    println!("champion: {}", paths.champion_json.display());
    println!("usage: {}", paths.usage_json.display());
    Ok(())
}
