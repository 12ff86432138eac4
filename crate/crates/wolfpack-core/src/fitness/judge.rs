//! LLM-judge client: frozen rubric prompt, three-seed averaging, scale
//! normalization.

use super::{FitnessError, JudgeScores};
use crate::agent::DecodingConfig;
use crate::provider::{GenerationRequest, ProviderClient};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Version tag of the shipped rubric; bumped whenever the text changes.
pub const JUDGE_RUBRIC_VERSION: &str = "judge-rubric-v1";

/// The frozen rubric prompt shipped with the crate.
pub const DEFAULT_JUDGE_PROMPT: &str = include_str!("../resources/judge_prompt_v1.txt");

/// Request payload serialized into the judge's user message.
#[derive(Debug, Serialize)]
struct JudgeRequestPayload<'a> {
    question: &'a str,
    trajectory: &'a str,
    rubric_version: &'a str,
}

/// Expected response shape: three numeric scores.
#[derive(Debug, Deserialize)]
struct JudgeResponsePayload {
    logic: f64,
    creativity: f64,
    completeness: f64,
}

/// Judge backend handle. Model, prompt, and decoding stay fixed for the
/// whole run; the prompt hash is recorded in run state.
#[derive(Clone)]
pub struct JudgeClient {
    client: Arc<ProviderClient>,
    prompt_text: String,
    prompt_hash: String,
    rubric_version: String,
    decoding: DecodingConfig,
}

impl JudgeClient {
    pub fn new(client: Arc<ProviderClient>) -> Self {
        Self::with_prompt(client, JUDGE_RUBRIC_VERSION, DEFAULT_JUDGE_PROMPT)
    }

    pub fn with_prompt(
        client: Arc<ProviderClient>,
        rubric_version: impl Into<String>,
        prompt_text: impl Into<String>,
    ) -> Self {
        let prompt_text = prompt_text.into();
        let prompt_hash = rng::sha256_hex(prompt_text.as_bytes());
        Self {
            client,
            prompt_text,
            prompt_hash,
            rubric_version: rubric_version.into(),
            decoding: judge_decoding(),
        }
    }

    pub fn prompt_hash(&self) -> &str {
        &self.prompt_hash
    }

    pub fn rubric_version(&self) -> &str {
        &self.rubric_version
    }

    fn run_once(&self, question: &str, trajectory: &str, seed: u64) -> Result<[f64; 3], FitnessError> {
        let payload = JudgeRequestPayload {
            question,
            trajectory,
            rubric_version: &self.rubric_version,
        };
        let request = GenerationRequest {
            system_text: self.prompt_text.clone(),
            user_text: serde_json::to_string(&payload).expect("payload serializes"),
            decoding: self.decoding.clone(),
            seed: Some(seed),
        };
        let response = self
            .client
            .generate(&request)
            .map_err(|e| FitnessError::JudgeCall(e.to_string()))?;
        parse_judge_scores(&response.text)
    }
}

/// Frozen decoding configuration for judge calls: greedy and short.
fn judge_decoding() -> DecodingConfig {
    DecodingConfig {
        temperature: 0.0,
        top_p: 1.0,
        frequency_penalty: 0.0,
        presence_penalty: 0.0,
        max_tokens: 256,
    }
}

/// Parse `{logic, creativity, completeness}` out of a judge completion,
/// normalizing integer 0-100 scales down to [0, 1].
pub fn parse_judge_scores(text: &str) -> Result<[f64; 3], FitnessError> {
    let start = text.find('{');
    let end = text.rfind('}');
    let json = match (start, end) {
        (Some(s), Some(e)) if s < e => &text[s..=e],
        _ => return Err(FitnessError::JudgeResponse("no JSON object in response".into())),
    };
    let payload: JudgeResponsePayload = serde_json::from_str(json)
        .map_err(|e| FitnessError::JudgeResponse(format!("bad judge JSON: {e}")))?;
    let mut scores = [payload.logic, payload.creativity, payload.completeness];
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(FitnessError::JudgeResponse("non-finite judge score".into()));
    }
    // Integer-scaled responses (0-100) are detected by any score above 1.
    if scores.iter().any(|&s| s > 1.0) {
        for s in &mut scores {
            *s /= 100.0;
        }
    }
    for s in &mut scores {
        *s = s.clamp(0.0, 1.0);
    }
    Ok(scores)
}

/// Componentwise mean of three judge runs with the given seeds.
pub fn judge_averaged(
    question: &str,
    trajectory: &str,
    judge: &JudgeClient,
    seeds: [u64; 3],
) -> Result<JudgeScores, FitnessError> {
    let mut completed: Vec<[f64; 3]> = Vec::with_capacity(3);
    for seed in seeds {
        match judge.run_once(question, trajectory, seed) {
            Ok(scores) => completed.push(scores),
            Err(e) => {
                return Err(FitnessError::JudgePartial {
                    completed: completed.len(),
                    message: e.to_string(),
                })
            }
        }
    }
    let mean = |ix: usize| completed.iter().map(|s| s[ix]).sum::<f64>() / completed.len() as f64;
    JudgeScores::new(mean(0), mean(1), mean(2), seeds.to_vec())
}
