//! Prompt adaptation: LLM-driven edits of a follower's prompt guided by
//! the elite prompts, under a fixed, hash-pinned system instruction.
//!
//! The editor's output is only trusted structurally: placeholders must
//! survive, text must be nonempty, and length is budgeted. Any violation
//! falls back to the input prompt so the optimization loop never stalls
//! on a bad edit.

use crate::agent::{AgentError, DecodingConfig, EditKind, PromptTemplate, QUESTION_MARKER};
use crate::provider::{GenerationRequest, ProviderClient, ProviderError};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("empty prompt pool and no generator configured")]
    EmptyPool,
    #[error("generated template invalid: {0}")]
    InvalidGenerated(String),
    #[error("prompt pool file: {0}")]
    PoolFile(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Version tag of the shipped instruction; bumped whenever the text
/// changes.
pub const INSTRUCTION_VERSION: &str = "adaptation-instruction-v1";

/// The frozen editor instruction shipped with the crate.
pub const DEFAULT_INSTRUCTION: &str = include_str!("resources/adaptation_instruction_v1.txt");

pub(crate) const PROMPT_BLOCK_BEGIN: &str = "<<<PROMPT>>>";
pub(crate) const PROMPT_BLOCK_END: &str = "<<<END PROMPT>>>";

/// Fixed system instruction for the editor model. The hash is recorded in
/// run state; it never varies within a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationInstruction {
    version: String,
    system_text: String,
}

impl AdaptationInstruction {
    pub fn builtin() -> Self {
        Self::from_text(INSTRUCTION_VERSION, DEFAULT_INSTRUCTION)
    }

    pub fn from_text(version: impl Into<String>, system_text: impl Into<String>) -> Self {
        Self {
            version: version.into(),
            system_text: system_text.into(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_text(format!("file:{}", path.display()), text))
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn system_text(&self) -> &str {
        &self.system_text
    }

    pub fn hash(&self) -> String {
        rng::sha256_hex(self.system_text.as_bytes())
    }

    /// The only edit kinds the editor is permitted to perform.
    pub fn allowed_edits() -> [EditKind; 3] {
        [
            EditKind::ReorderSteps,
            EditKind::Paraphrase,
            EditKind::AdjustFormatConstraints,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionReason {
    Empty,
    PlaceholderLost,
    OverLength,
    ProviderFailure,
}

/// Result of one adaptation attempt. Rejections always carry the input
/// prompt unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationOutcome {
    pub new_prompt: PromptTemplate,
    pub accepted: bool,
    pub rejection_reason: Option<RejectionReason>,
}

impl AdaptationOutcome {
    fn rejected(current: &PromptTemplate, reason: RejectionReason) -> Self {
        Self {
            new_prompt: current.clone(),
            accepted: false,
            rejection_reason: Some(reason),
        }
    }
}

fn block(text: &str) -> String {
    format!("{PROMPT_BLOCK_BEGIN}\n{text}\n{PROMPT_BLOCK_END}")
}

/// First delimited prompt block in an adaptation request; mock backends
/// use this to echo the current prompt.
pub(crate) fn extract_prompt_block(text: &str) -> Option<&str> {
    let start = text.find(PROMPT_BLOCK_BEGIN)? + PROMPT_BLOCK_BEGIN.len();
    let end = text[start..].find(PROMPT_BLOCK_END)? + start;
    Some(text[start..end].trim_matches('\n'))
}

fn adaptation_user_text(current: &PromptTemplate, elites: [&PromptTemplate; 3]) -> String {
    format!(
        "CURRENT PROMPT:\n{}\n\nELITE PROMPT 1 (best):\n{}\n\nELITE PROMPT 2:\n{}\n\nELITE PROMPT 3:\n{}\n",
        block(current.text()),
        block(elites[0].text()),
        block(elites[1].text()),
        block(elites[2].text()),
    )
}

/// Strip a wrapping markdown code fence, if the editor added one.
fn strip_fence(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let Some(inner) = rest.strip_suffix("```") else {
        return trimmed;
    };
    // Drop an optional language tag on the opening fence line.
    match inner.split_once('\n') {
        Some((first, body)) if !first.contains(' ') => body.trim_matches('\n'),
        _ => inner.trim_matches('\n'),
    }
}

/// Validate an editor response against the current prompt's structural
/// requirements and the length budget (2x the longest elite, in chars).
fn validate_revision(
    revised: &str,
    current: &PromptTemplate,
    elites: [&PromptTemplate; 3],
) -> Result<(), RejectionReason> {
    if revised.trim().is_empty() {
        return Err(RejectionReason::Empty);
    }
    if PromptTemplate::validate_text(revised, current.placeholder_markers()).is_err() {
        return Err(RejectionReason::PlaceholderLost);
    }
    let budget = elites
        .iter()
        .map(|e| e.text().chars().count())
        .max()
        .unwrap_or(0)
        * 2;
    if revised.chars().count() > budget {
        return Err(RejectionReason::OverLength);
    }
    Ok(())
}

/// Ask the editor model for a revision of `current` guided by the ranked
/// elite prompts. Never fails: structural problems and provider failures
/// degrade to a no-op outcome.
pub fn adapt_prompt(
    current: &PromptTemplate,
    elites: [&PromptTemplate; 3],
    instruction: &AdaptationInstruction,
    client: &ProviderClient,
    editor_decoding: &DecodingConfig,
    seed: u64,
    iteration: u64,
) -> AdaptationOutcome {
    let request = GenerationRequest {
        system_text: instruction.system_text().to_string(),
        user_text: adaptation_user_text(current, elites),
        decoding: editor_decoding.clone(),
        seed: Some(seed),
    };
    let response = match client.generate(&request) {
        Ok(response) => response,
        Err(err) => {
            log::warn!("prompt adaptation call failed: {err}");
            return AdaptationOutcome::rejected(current, RejectionReason::ProviderFailure);
        }
    };
    let revised = strip_fence(&response.text);
    if let Err(reason) = validate_revision(revised, current, elites) {
        return AdaptationOutcome::rejected(current, reason);
    }
    let new_prompt = current
        .with_edited_text(revised, iteration, EditKind::Combined)
        .expect("validated revision satisfies template invariants");
    AdaptationOutcome {
        new_prompt,
        accepted: true,
        rejection_reason: None,
    }
}

/// The CoT template pool shipped with the crate.
pub fn builtin_prompt_pool() -> Vec<PromptTemplate> {
    parse_pool_json(include_str!("resources/prompt_pool_v1.json"))
        .expect("shipped pool is valid")
}

/// Load a pool file: a JSON array of template strings.
pub fn load_prompt_pool(path: &Path) -> Result<Vec<PromptTemplate>, PromptError> {
    let text = std::fs::read_to_string(path).map_err(|e| PromptError::PoolFile(e.to_string()))?;
    parse_pool_json(&text)
}

fn parse_pool_json(text: &str) -> Result<Vec<PromptTemplate>, PromptError> {
    let raw: Vec<String> =
        serde_json::from_str(text).map_err(|e| PromptError::PoolFile(e.to_string()))?;
    raw.into_iter()
        .map(|t| {
            let markers = if t.contains(QUESTION_MARKER) {
                vec![QUESTION_MARKER.to_string()]
            } else {
                vec![]
            };
            PromptTemplate::new(t, markers).map_err(PromptError::from)
        })
        .collect()
}

/// Draw `n` templates from a pool: distinct picks while the pool lasts,
/// with replacement only when the pool is smaller than `n`.
pub fn init_prompt_pool(
    pool: &[PromptTemplate],
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<PromptTemplate>, PromptError> {
    if pool.is_empty() {
        return Err(PromptError::EmptyPool);
    }
    if pool.len() >= n {
        let mut indices: Vec<usize> = (0..pool.len()).collect();
        indices.shuffle(rng);
        Ok(indices[..n].iter().map(|&i| pool[i].clone()).collect())
    } else {
        Ok((0..n)
            .map(|_| pool[rng.gen_range(0..pool.len())].clone())
            .collect())
    }
}

/// Generate `n` templates by asking the provider for fresh prompts.
pub fn generate_prompt_pool(
    client: &ProviderClient,
    decoding: &DecodingConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<PromptTemplate>, PromptError> {
    let meta = format!(
        "Write one prompt that instructs a model to solve a reasoning \
         problem step by step and state the final answer clearly. Include \
         the placeholder {QUESTION_MARKER} exactly once where the problem \
         statement belongs. Reply with the prompt text only."
    );
    (0..n)
        .map(|i| {
            let request = GenerationRequest {
                system_text: String::new(),
                user_text: meta.clone(),
                decoding: decoding.clone(),
                seed: Some(rng::derive_u64(seed, "prompt.generate", &[i as u64])),
            };
            let response = client.generate(&request)?;
            let text = strip_fence(&response.text).to_string();
            let markers = if text.contains(QUESTION_MARKER) {
                vec![QUESTION_MARKER.to_string()]
            } else {
                vec![]
            };
            PromptTemplate::new(text, markers)
                .map_err(|e| PromptError::InvalidGenerated(e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::mock::{MockBackend, MockBackendSpec};
    use std::sync::Arc;

    fn template(text: &str) -> PromptTemplate {
        let markers = if text.contains(QUESTION_MARKER) {
            vec![QUESTION_MARKER.to_string()]
        } else {
            vec![]
        };
        PromptTemplate::new(text, markers).unwrap()
    }

    fn scripted_client(responses: Vec<String>) -> ProviderClient {
        ProviderClient::for_tests(Arc::new(MockBackend::new(
            MockBackendSpec::Scripted { responses },
            0,
        )))
    }

    fn editor_decoding() -> DecodingConfig {
        DecodingConfig {
            temperature: 0.7,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            max_tokens: 512,
        }
    }

    fn elite_fixture() -> [PromptTemplate; 3] {
        [
            template(
                "Explain your steps one at a time, check each against the question, \
                 then state the final answer on its own line.\n\n{question}",
            ),
            template("Reason first, answer last.\n\n{question}"),
            template("Answer with care.\n\n{question}"),
        ]
    }

    #[test]
    fn echo_edit_is_accepted_identity() {
        let current = template("Solve it slowly.\n\n{question}");
        let elites = elite_fixture();
        let client = scripted_client(vec![current.text().to_string()]);
        let outcome = adapt_prompt(
            &current,
            [&elites[0], &elites[1], &elites[2]],
            &AdaptationInstruction::builtin(),
            &client,
            &editor_decoding(),
            1,
            1,
        );
        assert!(outcome.accepted);
        assert_eq!(outcome.new_prompt.text(), current.text());
        assert_eq!(outcome.new_prompt.lineage().len(), 1);
    }

    #[test]
    fn placeholder_loss_falls_back() {
        let current = template("Solve it slowly.\n\n{question}");
        let elites = elite_fixture();
        let client = scripted_client(vec!["I dropped the placeholder entirely.".into()]);
        let outcome = adapt_prompt(
            &current,
            [&elites[0], &elites[1], &elites[2]],
            &AdaptationInstruction::builtin(),
            &client,
            &editor_decoding(),
            1,
            1,
        );
        assert!(!outcome.accepted);
        assert_eq!(outcome.rejection_reason, Some(RejectionReason::PlaceholderLost));
        assert_eq!(outcome.new_prompt, current);
    }

    #[test]
    fn empty_and_oversized_responses_fall_back() {
        let current = template("Solve it slowly.\n\n{question}");
        let elites = elite_fixture();
        let huge = format!("{} {}", "pad ".repeat(200), QUESTION_MARKER);
        let client = scripted_client(vec!["   ".into(), huge]);
        let instruction = AdaptationInstruction::builtin();
        let first = adapt_prompt(
            &current,
            [&elites[0], &elites[1], &elites[2]],
            &instruction,
            &client,
            &editor_decoding(),
            1,
            1,
        );
        assert_eq!(first.rejection_reason, Some(RejectionReason::Empty));
        let second = adapt_prompt(
            &current,
            [&elites[0], &elites[1], &elites[2]],
            &instruction,
            &client,
            &editor_decoding(),
            2,
            1,
        );
        assert_eq!(second.rejection_reason, Some(RejectionReason::OverLength));
        assert_eq!(second.new_prompt, current);
    }

    #[test]
    fn provider_failure_falls_back_without_aborting() {
        let current = template("Solve it slowly.\n\n{question}");
        let elites = elite_fixture();
        let client = scripted_client(vec![]); // exhausted immediately
        let outcome = adapt_prompt(
            &current,
            [&elites[0], &elites[1], &elites[2]],
            &AdaptationInstruction::builtin(),
            &client,
            &editor_decoding(),
            1,
            1,
        );
        assert_eq!(outcome.rejection_reason, Some(RejectionReason::ProviderFailure));
        assert_eq!(outcome.new_prompt, current);
    }

    #[test]
    fn paraphrase_merge_within_budget_is_accepted() {
        let current = template("You are given short scenarios with quantities. Answer the question.\n\n{question}");
        let elites = elite_fixture();
        // A longer merged revision that keeps the marker and stays under
        // twice the longest elite's length.
        let revision = "You are presented with short scenarios involving quantities. \
                        Read carefully, pick out the numbers, then answer.\n\n{question}";
        let client = scripted_client(vec![revision.into()]);
        let outcome = adapt_prompt(
            &current,
            [&elites[0], &elites[1], &elites[2]],
            &AdaptationInstruction::builtin(),
            &client,
            &editor_decoding(),
            3,
            2,
        );
        assert!(outcome.accepted, "reason: {:?}", outcome.rejection_reason);
        assert_eq!(outcome.new_prompt.text(), revision);
        assert_eq!(outcome.new_prompt.lineage().len(), 1);
        assert_eq!(outcome.new_prompt.lineage()[0].iteration, 2);
    }

    #[test]
    fn fence_stripping() {
        assert_eq!(strip_fence("```\nbody\n```"), "body");
        assert_eq!(strip_fence("```text\nbody\n```"), "body");
        assert_eq!(strip_fence("plain"), "plain");
    }

    #[test]
    fn prompt_block_round_trip() {
        let user = adaptation_user_text(
            &template("current {question}"),
            [
                &template("e1 {question}"),
                &template("e2 {question}"),
                &template("e3 {question}"),
            ],
        );
        assert_eq!(extract_prompt_block(&user), Some("current {question}"));
    }

    #[test]
    fn builtin_pool_is_valid_and_hash_pinned() {
        let pool = builtin_prompt_pool();
        assert_eq!(pool.len(), 5);
        for t in &pool {
            assert_eq!(t.placeholder_markers(), &[QUESTION_MARKER.to_string()]);
        }
        let instruction = AdaptationInstruction::builtin();
        assert_eq!(instruction.hash().len(), 64);
        assert_eq!(instruction.hash(), AdaptationInstruction::builtin().hash());
    }

    #[test]
    fn pool_exhaustive_draw_is_permutation() {
        let pool = builtin_prompt_pool();
        let mut r = crate::rng::stream(3, "pool", &[]);
        let drawn = init_prompt_pool(&pool, 5, &mut r).unwrap();
        let mut texts: Vec<&str> = drawn.iter().map(|t| t.text()).collect();
        texts.sort_unstable();
        let mut expected: Vec<&str> = pool.iter().map(|t| t.text()).collect();
        expected.sort_unstable();
        assert_eq!(texts, expected);
    }

    #[test]
    fn pool_smaller_than_population_repeats() {
        let pool = vec![template("a {question}"), template("b {question}")];
        let mut r = crate::rng::stream(4, "pool", &[]);
        let drawn = init_prompt_pool(&pool, 5, &mut r).unwrap();
        assert_eq!(drawn.len(), 5);
        assert!(drawn
            .iter()
            .all(|t| t.text() == pool[0].text() || t.text() == pool[1].text()));
    }

    #[test]
    fn empty_pool_is_configuration_error() {
        let mut r = crate::rng::stream(5, "pool", &[]);
        assert!(matches!(
            init_prompt_pool(&[], 3, &mut r),
            Err(PromptError::EmptyPool)
        ));
    }

    #[test]
    fn generated_pool_from_scripted_transcript() {
        let responses: Vec<String> = (1..=5)
            .map(|i| format!("Template {i}: think, then answer.\n\n{QUESTION_MARKER}"))
            .collect();
        let client = scripted_client(responses);
        let pool = generate_prompt_pool(&client, &editor_decoding(), 5, 7).unwrap();
        assert_eq!(pool.len(), 5);
        let mut texts: Vec<&str> = pool.iter().map(|t| t.text()).collect();
        texts.dedup();
        assert_eq!(texts.len(), 5, "templates should be distinct");
    }
}
