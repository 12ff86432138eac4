//! Per-agent fitness evaluation and prompt adaptation handles used by the
//! optimization loop.

use super::config::editor_decoding;
use super::{OrchestratorError, RunConfig};
use crate::agent::{AgentConfig, DecodingConfig, PromptTemplate};
use crate::data::QAItem;
use crate::fitness::{
    exact_match_fitness, extract_answer, judge_averaged, ExtractedAnswer, FitnessMode,
    FitnessReport, JudgeClient, JudgeScores, JudgeWeights,
};
use crate::prompt::{adapt_prompt, AdaptationInstruction, AdaptationOutcome};
use crate::provider::{GenerationRequest, ProviderClient};
use crate::rng;
use std::sync::Arc;

/// Evaluates one agent on a question batch: generation, answer extraction,
/// exact-match accuracy, and optional judge scoring.
pub struct FitnessEvaluator {
    client: Arc<ProviderClient>,
    judge: Option<JudgeClient>,
    judge_weights: JudgeWeights,
    judge_seeds: [u64; 3],
    mode: FitnessMode,
}

impl FitnessEvaluator {
    pub fn new(
        config: &RunConfig,
        client: Arc<ProviderClient>,
        judge: Option<JudgeClient>,
    ) -> Result<Self, OrchestratorError> {
        Ok(Self {
            client,
            judge,
            judge_weights: config.judge.weights,
            judge_seeds: config.judge.seeds,
            mode: config.fitness_mode,
        })
    }

    pub fn judge_prompt_hash(&self) -> Option<String> {
        self.judge.as_ref().map(|j| j.prompt_hash().to_string())
    }

    fn generate(
        &self,
        agent: &AgentConfig,
        item: &QAItem,
        seed: u64,
    ) -> Result<String, crate::provider::ProviderError> {
        let request = GenerationRequest {
            system_text: String::new(),
            user_text: agent.prompt.render(&item.question),
            decoding: agent.decoding.clone(),
            seed: Some(seed),
        };
        self.client.generate(&request).map(|r| r.text)
    }

    /// Evaluate an agent on the batch. Individual item failures are scored
    /// incorrect and logged; the second return value counts successful
    /// generation calls so the caller can detect a total outage.
    pub fn evaluate_agent(
        &self,
        agent: &AgentConfig,
        batch: &[&QAItem],
        master_seed: u64,
        iteration: u64,
    ) -> Result<(FitnessReport, usize), OrchestratorError> {
        let mut answers: Vec<ExtractedAnswer> = Vec::with_capacity(batch.len());
        let mut golds: Vec<&str> = Vec::with_capacity(batch.len());
        let mut first_trajectory: Option<(&str, String)> = None;
        let mut ok_calls = 0usize;

        for (slot, item) in batch.iter().enumerate() {
            let seed = rng::derive_u64(
                master_seed,
                "gen",
                &[iteration, agent.id as u64, slot as u64],
            );
            match self.generate(agent, item, seed) {
                Ok(text) => {
                    ok_calls += 1;
                    if first_trajectory.is_none() {
                        first_trajectory = Some((&item.question, text.clone()));
                    }
                    answers.push(extract_answer(&text, item.task_kind));
                }
                Err(err) => {
                    log::warn!(
                        "agent {} item {} generation failed, scoring incorrect: {err}",
                        agent.id,
                        item.id
                    );
                    answers.push(ExtractedAnswer::Missing);
                }
            }
            golds.push(item.gold.as_deref().unwrap_or(""));
        }

        let judge_scores = match (&self.judge, &first_trajectory) {
            (Some(judge), Some((question, trajectory))) => {
                match judge_averaged(question, trajectory, judge, self.judge_seeds) {
                    Ok(scores) => Some(scores),
                    Err(err) => {
                        log::warn!("judge unavailable for agent {}: {err}", agent.id);
                        None
                    }
                }
            }
            _ => None,
        };

        let report = match self.mode {
            FitnessMode::Verifiable => {
                let accuracy = exact_match_fitness(&answers, &golds)?;
                FitnessReport::verifiable(accuracy, judge_scores, &self.judge_weights, batch.len())?
            }
            FitnessMode::NonVerifiable => {
                let scores = judge_scores.unwrap_or_else(|| {
                    log::warn!("no judge scores for agent {}; composite is 0", agent.id);
                    JudgeScores::new(0.0, 0.0, 0.0, self.judge_seeds.to_vec())
                        .expect("zeros are valid scores")
                });
                FitnessReport::non_verifiable(scores, &self.judge_weights, batch.len())?
            }
        };
        Ok((report, ok_calls))
    }

    /// Held-out exact-match accuracy of a single agent.
    pub fn exact_match_accuracy(
        &self,
        agent: &AgentConfig,
        items: &[QAItem],
        seed: u64,
    ) -> Result<f64, OrchestratorError> {
        let mut answers = Vec::with_capacity(items.len());
        let mut golds = Vec::with_capacity(items.len());
        for (slot, item) in items.iter().enumerate() {
            let call_seed = rng::derive_u64(seed, "eval", &[slot as u64]);
            match self.generate(agent, item, call_seed) {
                Ok(text) => answers.push(extract_answer(&text, item.task_kind)),
                Err(err) => {
                    log::warn!("eval item {} failed, scoring incorrect: {err}", item.id);
                    answers.push(ExtractedAnswer::Missing);
                }
            }
            golds.push(item.gold.as_deref().unwrap_or(""));
        }
        Ok(exact_match_fitness(&answers, &golds)?)
    }
}

/// Adapts follower prompts under the frozen instruction.
pub struct PromptAdapter {
    client: Arc<ProviderClient>,
    instruction: AdaptationInstruction,
    editor_decoding: DecodingConfig,
}

impl PromptAdapter {
    pub fn new(client: Arc<ProviderClient>, instruction: AdaptationInstruction) -> Self {
        Self {
            client,
            instruction,
            editor_decoding: editor_decoding(),
        }
    }

    pub fn instruction(&self) -> &AdaptationInstruction {
        &self.instruction
    }

    pub fn adapt(
        &self,
        current: &PromptTemplate,
        elites: [&PromptTemplate; 3],
        seed: u64,
        iteration: u64,
    ) -> AdaptationOutcome {
        adapt_prompt(
            current,
            elites,
            &self.instruction,
            &self.client,
            &self.editor_decoding,
            seed,
            iteration,
        )
    }
}
