//! Deterministic mock backends for offline runs and tests.
//!
//! Scripted mode replays a fixed transcript. Landscape mode answers
//! synthetic echo questions correctly with a probability that peaks at a
//! known decoding configuration, which makes end-to-end convergence
//! testable without a network. The landscape backend also recognizes
//! prompt-adaptation and judge requests by their structural markers and
//! serves deterministic stand-in responses for them.

use super::{GenerationRequest, GenerationResponse, ProviderError, TextBackend};
use crate::agent::{ContinuousField, DecodingConfig, CONTINUOUS_FIELDS};
use crate::prompt;
use crate::rng;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::{Mutex, OnceLock};

/// Unimodal correctness landscape over the continuous decoding fields.
/// Only fields with a configured peak contribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSpec {
    pub peak_temperature: Option<f64>,
    pub peak_top_p: Option<f64>,
    pub peak_frequency_penalty: Option<f64>,
    pub peak_presence_penalty: Option<f64>,
    pub width: f64,
}

impl LandscapeSpec {
    /// Peak in every continuous field.
    pub fn peak_all(peak: f64, width: f64) -> Self {
        Self {
            peak_temperature: Some(peak),
            peak_top_p: Some(peak),
            peak_frequency_penalty: Some(peak),
            peak_presence_penalty: Some(peak),
            width,
        }
    }

    /// Peak over temperature only; other fields do not affect correctness.
    pub fn temperature_only(peak: f64, width: f64) -> Self {
        Self {
            peak_temperature: Some(peak),
            peak_top_p: None,
            peak_frequency_penalty: None,
            peak_presence_penalty: None,
            width,
        }
    }

    fn peak(&self, field: ContinuousField) -> Option<f64> {
        match field {
            ContinuousField::Temperature => self.peak_temperature,
            ContinuousField::TopP => self.peak_top_p,
            ContinuousField::FrequencyPenalty => self.peak_frequency_penalty,
            ContinuousField::PresencePenalty => self.peak_presence_penalty,
        }
    }
}

/// Correctness probability `exp(-sum(((x - peak) / width)^2))`; 1.0 at the
/// peak, symmetric around it.
pub fn mock_fitness_landscape(decoding: &DecodingConfig, spec: &LandscapeSpec) -> f64 {
    let mut acc = 0.0;
    for field in CONTINUOUS_FIELDS {
        if let Some(peak) = spec.peak(field) {
            let z = (decoding.get(field) - peak) / spec.width;
            acc += z * z;
        }
    }
    (-acc).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MockBackendSpec {
    /// Replay responses in order; exhausting the transcript is an error.
    Scripted { responses: Vec<String> },
    /// Synthetic landscape over echo questions.
    Landscape(LandscapeSpec),
}

pub struct MockBackend {
    spec: MockBackendSpec,
    seed: u64,
    cursor: Mutex<usize>,
    id: String,
}

impl MockBackend {
    pub fn new(spec: MockBackendSpec, seed: u64) -> Self {
        let id = match &spec {
            MockBackendSpec::Scripted { .. } => "mock-scripted",
            MockBackendSpec::Landscape(_) => "mock-landscape",
        };
        Self {
            spec,
            seed,
            cursor: Mutex::new(0),
            id: id.to_string(),
        }
    }

    fn respond(&self, request: &GenerationRequest, text: String) -> GenerationResponse {
        let prompt_tokens = ((request.system_text.len() + request.user_text.len()) / 4).max(1) as u64;
        let completion_tokens = (text.len() / 4).max(1) as u64;
        GenerationResponse::capped(
            text,
            prompt_tokens,
            completion_tokens,
            0,
            self.id.clone(),
            request.decoding.max_tokens,
        )
    }

    fn landscape_answer(
        &self,
        request: &GenerationRequest,
        spec: &LandscapeSpec,
    ) -> Result<String, ProviderError> {
        // Prompt-adaptation requests: return the current prompt unchanged.
        if let Some(block) = prompt::extract_prompt_block(&request.user_text) {
            return Ok(block.to_string());
        }
        // Judge requests: constant integer-scaled scores.
        if is_judge_payload(&request.user_text) {
            return Ok(r#"{"logic": 90, "creativity": 70, "completeness": 85}"#.to_string());
        }
        // Echo question: answer correctly with landscape probability.
        let gold = parse_echo_gold(&request.user_text).ok_or_else(|| {
            ProviderError::Protocol(
                "landscape backend needs an echo question (\"State the number N.\")".into(),
            )
        })?;
        let p = mock_fitness_landscape(&request.decoding, spec);
        let content_key = rng::sha256_hex(
            serde_json::to_string(request)
                .expect("request serializes")
                .as_bytes(),
        );
        let mut draw = rng::stream(
            self.seed,
            "mock.landscape",
            &[
                request.seed.unwrap_or(0),
                u64::from_le_bytes(content_key.as_bytes()[..8].try_into().expect("hex is long")),
            ],
        );
        let correct = draw.gen::<f64>() < p;
        if correct {
            Ok(format!("Working through it step by step. The answer is {gold}."))
        } else {
            Ok(format!("Working through it step by step. The answer is {}.", gold + 1))
        }
    }
}

impl TextBackend for MockBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        let text = match &self.spec {
            MockBackendSpec::Scripted { responses } => {
                let mut cursor = self.cursor.lock().expect("cursor lock");
                if *cursor >= responses.len() {
                    return Err(ProviderError::ScriptExhausted { served: *cursor });
                }
                let text = responses[*cursor].clone();
                *cursor += 1;
                text
            }
            MockBackendSpec::Landscape(spec) => self.landscape_answer(request, spec)?,
        };
        Ok(self.respond(request, text))
    }

    fn provider_id(&self) -> &str {
        &self.id
    }
}

fn echo_gold_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[Ss]tate the number (-?\d+)").expect("static regex"))
}

/// Gold label embedded in a synthetic echo question.
pub fn parse_echo_gold(text: &str) -> Option<i64> {
    echo_gold_regex()
        .captures(text)
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().parse().ok())
}

fn is_judge_payload(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .map(|v| {
            v.get("question").is_some()
                && v.get("trajectory").is_some()
                && v.get("rubric_version").is_some()
        })
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decoding(temperature: f64) -> DecodingConfig {
        DecodingConfig {
            temperature,
            top_p: 0.6,
            frequency_penalty: 0.6,
            presence_penalty: 0.6,
            max_tokens: 512,
        }
    }

    #[test]
    fn landscape_peak_is_one() {
        let spec = LandscapeSpec::peak_all(0.6, 0.2);
        let at_peak = DecodingConfig {
            temperature: 0.6,
            top_p: 0.6,
            frequency_penalty: 0.6,
            presence_penalty: 0.6,
            max_tokens: 512,
        };
        assert_eq!(mock_fitness_landscape(&at_peak, &spec), 1.0);
    }

    #[test]
    fn landscape_symmetric_offsets() {
        let spec = LandscapeSpec::peak_all(0.6, 0.2);
        let plus = decoding(0.6 + 0.15);
        let minus = decoding(0.6 - 0.15);
        assert!(
            (mock_fitness_landscape(&plus, &spec) - mock_fitness_landscape(&minus, &spec)).abs()
                < 1e-15
        );
    }

    #[test]
    fn landscape_one_width_off_is_inverse_e() {
        let spec = LandscapeSpec::temperature_only(0.6, 0.2);
        let off = decoding(0.8);
        let p = mock_fitness_landscape(&off, &spec);
        assert!((p - (-1.0f64).exp()).abs() < 1e-12, "p = {p}");
    }

    fn echo_request(text: &str, temperature: f64, seed: u64) -> GenerationRequest {
        GenerationRequest {
            system_text: String::new(),
            user_text: text.to_string(),
            decoding: decoding(temperature),
            seed: Some(seed),
        }
    }

    #[test]
    fn scripted_replay_and_exhaustion() {
        let backend = MockBackend::new(
            MockBackendSpec::Scripted {
                responses: vec!["first".into(), "second".into()],
            },
            0,
        );
        let request = echo_request("anything", 0.5, 1);
        assert_eq!(backend.generate(&request).unwrap().text, "first");
        assert_eq!(backend.generate(&request).unwrap().text, "second");
        assert!(matches!(
            backend.generate(&request),
            Err(ProviderError::ScriptExhausted { served: 2 })
        ));
    }

    #[test]
    fn landscape_at_peak_answers_correctly() {
        let backend = MockBackend::new(
            MockBackendSpec::Landscape(LandscapeSpec::temperature_only(0.6, 0.2)),
            7,
        );
        for seed in 0..20 {
            let request = echo_request("State the number 42.", 0.6, seed);
            let response = backend.generate(&request).unwrap();
            assert!(response.text.contains("The answer is 42."), "{}", response.text);
        }
    }

    #[test]
    fn landscape_is_deterministic_per_request() {
        let backend = MockBackend::new(
            MockBackendSpec::Landscape(LandscapeSpec::temperature_only(0.6, 0.2)),
            7,
        );
        let request = echo_request("State the number 13.", 0.2, 5);
        let a = backend.generate(&request).unwrap();
        let b = backend.generate(&request).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn landscape_rejects_non_echo_questions() {
        let backend = MockBackend::new(
            MockBackendSpec::Landscape(LandscapeSpec::temperature_only(0.6, 0.2)),
            7,
        );
        let request = echo_request("What is the capital of France?", 0.6, 1);
        assert!(matches!(
            backend.generate(&request),
            Err(ProviderError::Protocol(_))
        ));
    }

    #[test]
    fn landscape_serves_judge_payloads() {
        let backend = MockBackend::new(
            MockBackendSpec::Landscape(LandscapeSpec::temperature_only(0.6, 0.2)),
            7,
        );
        let request = echo_request(
            r#"{"question": "q", "trajectory": "t", "rubric_version": "v"}"#,
            0.6,
            1,
        );
        let response = backend.generate(&request).unwrap();
        assert!(response.text.contains("\"logic\": 90"));
    }

    #[test]
    fn parse_echo_gold_cases() {
        assert_eq!(parse_echo_gold("State the number 42."), Some(42));
        assert_eq!(parse_echo_gold("Please state the number -7."), Some(-7));
        assert_eq!(parse_echo_gold("no marker"), None);
    }
}
