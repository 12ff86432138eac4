//! The agent optimization loop: initialize a population, then iterate
//! generate -> evaluate -> rank -> update with elites carried over
//! unchanged, checkpointing each half-step so runs can resume exactly.

mod config;
mod evaluator;

pub use config::{
    DatasetSpec, GwoSection, JudgeSection, PromptSection, ProviderSpec, RunConfig,
};
pub use evaluator::{FitnessEvaluator, PromptAdapter};

use crate::agent::{
    elite_ramp_weights, single_elite_update, weighted_elite_update, AgentConfig, AgentError,
    PromptTemplate, UpdateStrategy,
};
use crate::data::{self, DataError, IterationRecord, QAItem};
use crate::fitness::{rank_population, FitnessError, FitnessMode, FitnessReport};
use crate::gwo::GwoError;
use crate::prompt::{AdaptationInstruction, PromptError};
use crate::provider::{ProviderClient, ProviderError, UsageTotals};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("leakage: {0}")]
    Leakage(String),
    #[error("provider outage at iteration {iteration}: all {calls} generation calls failed")]
    Outage { iteration: u64, calls: usize },
    #[error("checkpoint incompatible with config: {0}")]
    StateMismatch(String),
    #[error(transparent)]
    Gwo(#[from] GwoError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Prompt(PromptError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("state serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Where a checkpoint sits inside an iteration. `Ranked` means evaluation
/// and ranking are committed but updates have not been applied yet, so an
/// abort never loses a completed evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterationPhase {
    Pending,
    Ranked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSoFar {
    pub agent: AgentConfig,
    pub composite: f64,
    pub iteration: u64,
}

/// Full serializable optimization state; round-trips losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub completed_iterations: u64,
    pub phase: IterationPhase,
    pub population: Vec<AgentConfig>,
    pub latest_reports: Vec<FitnessReport>,
    pub ranking: Option<Vec<usize>>,
    pub alpha_index: Option<usize>,
    pub best: Option<BestSoFar>,
    pub master_seed: u64,
    pub instruction_hash: String,
    pub judge_prompt_hash: String,
    pub pool_ids: Vec<String>,
    pub history: Vec<IterationRecord>,
    pub usage: BTreeMap<String, UsageTotals>,
}

/// Sample initial decoding configs and draw prompts for `n` agents.
pub fn initialize_population(
    config: &RunConfig,
    templates: &[PromptTemplate],
    provider_ref: &str,
) -> Result<Vec<AgentConfig>, OrchestratorError> {
    let n = config.gwo.n;
    let seed = config.gwo.seed;
    let prompts = crate::prompt::init_prompt_pool(
        templates,
        n,
        &mut rng::stream(seed, "init.prompts", &[]),
    )?;
    let population = (0..n)
        .map(|id| {
            let mut draw = rng::stream(seed, "init.decoding", &[id as u64]);
            let decoding = crate::agent::sample_decoding(&config.sampling, &mut draw);
            AgentConfig {
                id,
                decoding,
                prompt: prompts[id].clone(),
                provider_ref: provider_ref.to_string(),
            }
        })
        .collect();
    Ok(population)
}

impl RunState {
    pub fn initial(
        config: &RunConfig,
        population: Vec<AgentConfig>,
        instruction_hash: String,
        judge_prompt_hash: String,
        pool_ids: Vec<String>,
    ) -> Self {
        Self {
            completed_iterations: 0,
            phase: IterationPhase::Pending,
            population,
            latest_reports: Vec::new(),
            ranking: None,
            alpha_index: None,
            best: None,
            master_seed: config.gwo.seed,
            instruction_hash,
            judge_prompt_hash,
            pool_ids,
            history: Vec::new(),
            usage: BTreeMap::new(),
        }
    }
}

/// Item indices for one iteration's batch: positions are taken from a
/// virtual concatenation of per-epoch shuffles of the pool, so draws are
/// without replacement within an epoch and reshuffled across epochs.
/// `stream_tag` 0 is the shared batch; per-agent batches use `id + 1`.
pub(crate) fn batch_item_indices(
    seed: u64,
    pool_len: usize,
    batch_size: usize,
    iteration: u64,
    stream_tag: u64,
) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let start = (iteration - 1) * batch_size as u64;
    let mut out = Vec::with_capacity(batch_size);
    let mut epoch_perm: Option<(u64, Vec<usize>)> = None;
    for offset in 0..batch_size as u64 {
        let position = start + offset;
        let epoch = position / pool_len as u64;
        let slot = (position % pool_len as u64) as usize;
        let perm = match &epoch_perm {
            Some((e, perm)) if *e == epoch => perm,
            _ => {
                let mut perm: Vec<usize> = (0..pool_len).collect();
                perm.shuffle(&mut rng::stream(seed, "batch.perm", &[stream_tag, epoch]));
                epoch_perm = Some((epoch, perm));
                &epoch_perm.as_ref().expect("just set").1
            }
        };
        out.push(perm[slot]);
    }
    out
}

/// Evaluate every agent on the iteration batch, rank, and record history.
/// Leaves the state in the `Ranked` phase.
pub fn evaluate_and_rank(
    state: &RunState,
    config: &RunConfig,
    evaluator: &FitnessEvaluator,
    pool: &[QAItem],
    client: &ProviderClient,
) -> Result<RunState, OrchestratorError> {
    debug_assert_eq!(state.phase, IterationPhase::Pending);
    let k = state.completed_iterations + 1;
    let seed = state.master_seed;
    let batch_size = config.gwo.batch_size.min(pool.len()).max(1);

    let shared: Vec<usize> = batch_item_indices(seed, pool.len(), batch_size, k, 0);
    let agent_batch = |agent_id: usize| -> Vec<&QAItem> {
        let indices = if config.gwo.per_agent_batch {
            batch_item_indices(seed, pool.len(), batch_size, k, agent_id as u64 + 1)
        } else {
            shared.clone()
        };
        indices.into_iter().map(|i| &pool[i]).collect()
    };

    // Fan out one thread per agent; the rank step below is the barrier.
    let results: Vec<Result<(FitnessReport, usize), OrchestratorError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = state
                .population
                .iter()
                .map(|agent| {
                    let batch = agent_batch(agent.id);
                    scope.spawn(move || evaluator.evaluate_agent(agent, &batch, seed, k))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation thread panicked"))
                .collect()
        });

    let mut reports = Vec::with_capacity(results.len());
    let mut successes = 0usize;
    for result in results {
        let (report, ok_calls) = result?;
        successes += ok_calls;
        reports.push(report);
    }
    if successes == 0 {
        return Err(OrchestratorError::Outage {
            iteration: k,
            calls: state.population.len() * batch_size,
        });
    }

    let ranking = rank_population(&reports)?;
    let alpha = ranking.alpha();
    let alpha_composite = reports[alpha].composite;

    let mut next = state.clone();
    let improved = next
        .best
        .as_ref()
        .map_or(true, |b| alpha_composite > b.composite);
    if improved {
        next.best = Some(BestSoFar {
            agent: next.population[alpha].clone(),
            composite: alpha_composite,
            iteration: k,
        });
    }
    let champion_composite = next.best.as_ref().expect("best just set").composite;
    next.history.push(IterationRecord {
        k,
        per_agent_composite: reports.iter().map(|r| r.composite).collect(),
        elites: ranking.elites(config.gwo.elite).to_vec(),
        alpha_composite,
        champion_composite,
    });
    next.latest_reports = reports;
    next.ranking = Some(ranking.order().to_vec());
    next.alpha_index = Some(alpha);
    next.phase = IterationPhase::Ranked;
    next.usage = client.ledger().snapshot();
    Ok(next)
}

/// Apply decoding updates and prompt adaptation to every non-elite agent.
/// Elites are carried over unchanged. Advances to the next iteration.
pub fn apply_updates(
    state: &RunState,
    config: &RunConfig,
    adapter: &PromptAdapter,
    client: &ProviderClient,
) -> Result<RunState, OrchestratorError> {
    debug_assert_eq!(state.phase, IterationPhase::Ranked);
    let k = state.completed_iterations + 1;
    let seed = state.master_seed;
    let order = state
        .ranking
        .as_ref()
        .ok_or_else(|| OrchestratorError::Config("ranked phase without ranking".into()))?;
    let m = config.gwo.elite;
    let elite_set: Vec<usize> = order[..m.min(order.len())].to_vec();

    let weights: Vec<f64> = if m == 3 {
        config.gwo.leader_weights.as_array().to_vec()
    } else {
        elite_ramp_weights(m)
    };
    let elite_decodings: Vec<&crate::agent::DecodingConfig> = elite_set
        .iter()
        .map(|&i| &state.population[i].decoding)
        .collect();
    // Prompt guidance always takes three slots; smaller elite sets cycle.
    let prompt_elites: [&PromptTemplate; 3] = [
        &state.population[elite_set[0]].prompt,
        &state.population[elite_set[1 % elite_set.len()]].prompt,
        &state.population[elite_set[2 % elite_set.len()]].prompt,
    ];

    let mut next = state.clone();
    for agent_ix in 0..state.population.len() {
        if elite_set.contains(&agent_ix) {
            continue;
        }
        let agent = &state.population[agent_ix];
        let mut update_rng = rng::stream(seed, "update.decoding", &[k, agent.id as u64]);
        let decoding = match config.gwo.strategy {
            UpdateStrategy::WeightedAverage => weighted_elite_update(
                &agent.decoding,
                &elite_decodings,
                &weights,
                config.gwo.sigma,
                &config.sampling,
                &mut update_rng,
            ),
            UpdateStrategy::SingleLeader => single_elite_update(
                &agent.decoding,
                &elite_decodings,
                &weights,
                config.gwo.sigma,
                &config.sampling,
                &mut update_rng,
            ),
        };
        let outcome = adapter.adapt(
            &agent.prompt,
            prompt_elites,
            rng::derive_u64(seed, "update.prompt", &[k, agent.id as u64]),
            k,
        );
        next.population[agent_ix] = AgentConfig {
            id: agent.id,
            decoding,
            prompt: outcome.new_prompt,
            provider_ref: agent.provider_ref.clone(),
        };
    }
    next.completed_iterations = k;
    next.phase = IterationPhase::Pending;
    next.ranking = None;
    next.usage = client.ledger().snapshot();
    Ok(next)
}

/// One full iteration: evaluate, rank, update.
pub fn run_iteration(
    state: &RunState,
    config: &RunConfig,
    evaluator: &FitnessEvaluator,
    adapter: &PromptAdapter,
    pool: &[QAItem],
    client: &ProviderClient,
) -> Result<RunState, OrchestratorError> {
    let ranked = evaluate_and_rank(state, config, evaluator, pool, client)?;
    apply_updates(&ranked, config, adapter, client)
}

/// Exact-match accuracy of a champion on the held-out test split. The test
/// split must be disjoint from the recorded optimization pool; results
/// never feed back into search.
pub fn evaluate_champion(
    champion: &AgentConfig,
    test_split: &[QAItem],
    evaluator: &FitnessEvaluator,
    pool_ids: &[String],
    seed: u64,
) -> Result<f64, OrchestratorError> {
    if test_split.is_empty() {
        return Err(OrchestratorError::Config("test split is empty".into()));
    }
    if let Err(err) = data::check_disjoint(
        pool_ids.iter().map(|s| s.as_str()),
        test_split.iter().map(|i| i.id.as_str()),
    ) {
        return Err(OrchestratorError::Leakage(err.to_string()));
    }
    evaluator.exact_match_accuracy(champion, test_split, seed)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Final alpha agent.
    pub champion: AgentConfig,
    pub best: BestSoFar,
    pub history: Vec<IterationRecord>,
    pub state: RunState,
}

/// Owns a run directory and drives the loop with two checkpoints per
/// iteration.
pub struct Runner {
    config: RunConfig,
    out_dir: PathBuf,
    evaluator: FitnessEvaluator,
    adapter: PromptAdapter,
    client: Arc<ProviderClient>,
    instruction: AdaptationInstruction,
    templates: Vec<PromptTemplate>,
    pool: Vec<QAItem>,
    test: Vec<QAItem>,
}

impl Runner {
    pub fn new(config: RunConfig, out_dir: &Path, trace_llm: bool) -> Result<Self, OrchestratorError> {
        config.validate().map_err(OrchestratorError::Config)?;
        std::fs::create_dir_all(out_dir)?;

        let (pool, test) = config.load_splits()?;
        if config.fitness_mode == FitnessMode::Verifiable {
            for item in pool.iter().chain(&test) {
                if item.gold.is_none() {
                    return Err(OrchestratorError::Config(format!(
                        "verifiable mode requires gold labels; item {} has none",
                        item.id
                    )));
                }
            }
        }

        let trace_path = trace_llm.then(|| out_dir.join("llm_trace.jsonl"));
        let built = config.build_provider(trace_path.as_deref())?;
        let instruction = config.load_instruction()?;
        let templates = config.load_templates(&built.agent_client)?;

        let evaluator = FitnessEvaluator::new(&config, built.agent_client.clone(), built.judge_client)?;
        let adapter = PromptAdapter::new(built.adapter_client, instruction.clone());

        Ok(Self {
            config,
            out_dir: out_dir.to_path_buf(),
            evaluator,
            adapter,
            client: built.agent_client,
            instruction,
            templates,
            pool,
            test,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn pool(&self) -> &[QAItem] {
        &self.pool
    }

    pub fn test_split(&self) -> &[QAItem] {
        &self.test
    }

    pub fn evaluator(&self) -> &FitnessEvaluator {
        &self.evaluator
    }

    pub fn state_path(out_dir: &Path) -> PathBuf {
        out_dir.join("state.ckpt.json")
    }

    pub fn history_path(out_dir: &Path) -> PathBuf {
        out_dir.join("history.jsonl")
    }

    pub fn champion_path(out_dir: &Path) -> PathBuf {
        out_dir.join("champion.json")
    }

    pub fn load_state(out_dir: &Path) -> Result<Option<RunState>, OrchestratorError> {
        let path = Self::state_path(out_dir);
        if !path.exists() {
            return Ok(None);
        }
        let state: RunState = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(Some(state))
    }

    fn initial_state(&self) -> Result<RunState, OrchestratorError> {
        let population = initialize_population(
            &self.config,
            &self.templates,
            self.client.provider_id(),
        )?;
        Ok(RunState::initial(
            &self.config,
            population,
            self.instruction.hash(),
            self.evaluator
                .judge_prompt_hash()
                .unwrap_or_default(),
            self.pool.iter().map(|i| i.id.clone()).collect(),
        ))
    }

    fn checkpoint(&self, state: &RunState) -> Result<(), OrchestratorError> {
        let mut state_json = serde_json::to_string_pretty(state)?;
        state_json.push('\n');
        atomic_write(&Self::state_path(&self.out_dir), state_json.as_bytes())?;

        let mut history = String::new();
        for record in &state.history {
            history.push_str(&serde_json::to_string(record)?);
            history.push('\n');
        }
        atomic_write(&Self::history_path(&self.out_dir), history.as_bytes())?;
        Ok(())
    }

    /// Run (or resume) until `K` iterations are complete, then write the
    /// champion file and return the final alpha.
    pub fn run(&self) -> Result<RunOutcome, OrchestratorError> {
        let mut state = match Self::load_state(&self.out_dir)? {
            Some(existing) => {
                self.verify_resumable(&existing)?;
                self.client.ledger().reset_to(existing.usage.clone());
                existing
            }
            None => {
                let state = self.initial_state()?;
                self.checkpoint(&state)?;
                state
            }
        };

        loop {
            match state.phase {
                IterationPhase::Pending
                    if state.completed_iterations >= self.config.gwo.iterations =>
                {
                    break;
                }
                IterationPhase::Pending => {
                    state = evaluate_and_rank(
                        &state,
                        &self.config,
                        &self.evaluator,
                        &self.pool,
                        &self.client,
                    )?;
                    self.checkpoint(&state)?;
                }
                IterationPhase::Ranked => {
                    state = apply_updates(&state, &self.config, &self.adapter, &self.client)?;
                    self.checkpoint(&state)?;
                }
            }
        }

        let alpha_index = state
            .alpha_index
            .ok_or_else(|| OrchestratorError::Config("run finished without any ranking".into()))?;
        let champion = state.population[alpha_index].clone();
        let mut champion_json = serde_json::to_string_pretty(&champion)?;
        champion_json.push('\n');
        atomic_write(&Self::champion_path(&self.out_dir), champion_json.as_bytes())?;

        let best = state.best.clone().expect("best set after first ranking");
        Ok(RunOutcome {
            champion,
            best,
            history: state.history.clone(),
            state,
        })
    }

    fn verify_resumable(&self, state: &RunState) -> Result<(), OrchestratorError> {
        if state.master_seed != self.config.gwo.seed {
            return Err(OrchestratorError::StateMismatch(format!(
                "checkpoint seed {} != config seed {}",
                state.master_seed, self.config.gwo.seed
            )));
        }
        if state.population.len() != self.config.gwo.n {
            return Err(OrchestratorError::StateMismatch(format!(
                "checkpoint population {} != config n {}",
                state.population.len(),
                self.config.gwo.n
            )));
        }
        if state.instruction_hash != self.instruction.hash() {
            return Err(OrchestratorError::StateMismatch(
                "adaptation instruction changed since checkpoint".into(),
            ));
        }
        Ok(())
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
