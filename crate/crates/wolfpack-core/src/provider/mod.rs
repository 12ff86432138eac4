//! Uniform interface to text-generation backends.
//!
//! `TextBackend` is the seam: an HTTP chat-completions client for real
//! providers and deterministic mocks for offline runs. `ProviderClient`
//! wraps any backend with retries, a concurrency cap, usage accounting,
//! and a per-run response cache keyed by (request hash, seed).

pub mod http;
pub mod mock;

use crate::agent::DecodingConfig;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("rate limited: {message}")]
    Throttled {
        retry_after: Option<Duration>,
        message: String,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("scripted transcript exhausted after {served} response(s)")]
    ScriptExhausted { served: usize },
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    /// Transient failures are worth retrying; protocol and configuration
    /// failures are not.
    pub fn is_transient(&self) -> bool {
        matches!(self, Self::Transport { .. } | Self::Throttled { .. })
    }
}

/// One generation call. Decoding fields are transmitted to the backend
/// verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub system_text: String,
    pub user_text: String,
    pub decoding: DecodingConfig,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    /// Stable cache key over the full request content.
    pub fn cache_key(&self) -> String {
        let canonical = serde_json::to_string(self).expect("request serializes");
        rng::sha256_hex(canonical.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub token_counts: TokenCounts,
    pub latency_ms: u64,
    pub provider_id: String,
}

impl GenerationResponse {
    /// Build a response, capping the reported completion count at the
    /// request's token budget.
    pub fn capped(
        text: String,
        prompt_tokens: u64,
        completion_tokens: u64,
        latency_ms: u64,
        provider_id: String,
        max_tokens: u32,
    ) -> Self {
        Self {
            text,
            token_counts: TokenCounts {
                prompt: prompt_tokens,
                completion: completion_tokens.min(max_tokens as u64),
            },
            latency_ms,
            provider_id,
        }
    }
}

/// A text-generation backend. Implementations must be safe to share across
/// concurrent evaluation tasks.
pub trait TextBackend: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError>;
    fn provider_id(&self) -> &str;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Cumulative per-provider token and call counts; monotone nondecreasing,
/// internally synchronized.
#[derive(Debug, Default)]
pub struct UsageLedger {
    inner: Mutex<BTreeMap<String, UsageTotals>>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn restore(snapshot: BTreeMap<String, UsageTotals>) -> Self {
        Self {
            inner: Mutex::new(snapshot),
        }
    }

    pub fn record(&self, provider_id: &str, counts: TokenCounts) {
        let mut inner = self.inner.lock().expect("ledger lock");
        let entry = inner.entry(provider_id.to_string()).or_default();
        entry.calls += 1;
        entry.prompt_tokens += counts.prompt;
        entry.completion_tokens += counts.completion;
    }

    pub fn snapshot(&self) -> BTreeMap<String, UsageTotals> {
        self.inner.lock().expect("ledger lock").clone()
    }

    /// Replace the totals with a checkpoint snapshot. Only valid on a
    /// fresh ledger at resume time; totals stay monotone afterwards.
    pub fn reset_to(&self, snapshot: BTreeMap<String, UsageTotals>) {
        *self.inner.lock().expect("ledger lock") = snapshot;
    }

    pub fn total(&self) -> UsageTotals {
        let inner = self.inner.lock().expect("ledger lock");
        let mut total = UsageTotals::default();
        for t in inner.values() {
            total.calls += t.calls;
            total.prompt_tokens += t.prompt_tokens;
            total.completion_tokens += t.completion_tokens;
        }
        total
    }
}

/// Exponential backoff with jitter. Delays are
/// `base * factor^(attempt-1) * (1 +- jitter)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay_ms: 1000,
            factor: 2.0,
            jitter: 0.2,
        }
    }
}

impl RetryPolicy {
    /// Delay before retrying after the given 1-based failed attempt.
    pub fn delay(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let exp = self.base_delay_ms as f64 * self.factor.powi(attempt.saturating_sub(1) as i32);
        let scale = 1.0 + self.jitter * (2.0 * rng.gen::<f64>() - 1.0);
        Duration::from_millis((exp * scale).max(0.0) as u64)
    }
}

/// Minimal counting semaphore for the per-provider concurrency cap.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore lock");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

/// Backend wrapper enforcing retries, the concurrency cap, usage
/// accounting, tracing, and response caching.
pub struct ProviderClient {
    backend: Arc<dyn TextBackend>,
    ledger: Arc<UsageLedger>,
    cache: Mutex<HashMap<String, GenerationResponse>>,
    limiter: Semaphore,
    retry: RetryPolicy,
    retry_seed: u64,
    trace: Option<Mutex<std::fs::File>>,
}

impl ProviderClient {
    pub fn new(
        backend: Arc<dyn TextBackend>,
        ledger: Arc<UsageLedger>,
        retry: RetryPolicy,
        concurrency_cap: usize,
    ) -> Self {
        Self {
            backend,
            ledger,
            cache: Mutex::new(HashMap::new()),
            limiter: Semaphore::new(concurrency_cap),
            retry,
            retry_seed: 0,
            trace: None,
        }
    }

    /// Zero-delay retries and a fresh ledger; convenient in tests.
    pub fn for_tests(backend: Arc<dyn TextBackend>) -> Self {
        Self::new(
            backend,
            Arc::new(UsageLedger::new()),
            RetryPolicy {
                base_delay_ms: 0,
                ..RetryPolicy::default()
            },
            8,
        )
    }

    /// Log request/response JSON lines to the given file. API keys never
    /// enter `GenerationRequest`, so the trace carries no credentials.
    pub fn with_trace_file(mut self, path: &Path) -> std::io::Result<Self> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        self.trace = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn ledger(&self) -> &Arc<UsageLedger> {
        &self.ledger
    }

    pub fn provider_id(&self) -> &str {
        self.backend.provider_id()
    }

    pub fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
        let key = request.cache_key();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }

        let _permit = self.limiter.acquire();
        let mut backoff_rng = rng::stream(self.retry_seed, "provider.backoff", &[]);
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.backend.generate(request) {
                Ok(response) => {
                    // Record exactly once per acknowledged generation;
                    // retries of failures never double-count.
                    self.ledger.record(&response.provider_id, response.token_counts);
                    self.trace_entry(request, &response);
                    self.cache
                        .lock()
                        .expect("cache lock")
                        .insert(key, response.clone());
                    return Ok(response);
                }
                Err(err) if err.is_transient() && attempt < self.retry.max_attempts => {
                    let delay = match &err {
                        ProviderError::Throttled {
                            retry_after: Some(after),
                            ..
                        } => *after,
                        _ => self.retry.delay(attempt, &mut backoff_rng),
                    };
                    log::warn!("generation attempt {attempt} failed ({err}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                }
                Err(err) if err.is_transient() => {
                    return Err(ProviderError::Transport {
                        attempts: attempt,
                        message: err.to_string(),
                    });
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn trace_entry(&self, request: &GenerationRequest, response: &GenerationResponse) {
        if let Some(trace) = &self.trace {
            let line = serde_json::json!({ "request": request, "response": response });
            let mut file = trace.lock().expect("trace lock");
            let _ = writeln!(file, "{line}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct FlakyBackend {
        failures_before_success: AtomicU32,
    }

    impl TextBackend for FlakyBackend {
        fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ProviderError> {
            if self.failures_before_success.fetch_update(
                Ordering::SeqCst,
                Ordering::SeqCst,
                |n| n.checked_sub(1),
            ).is_ok()
            {
                return Err(ProviderError::Transport {
                    attempts: 1,
                    message: "connection reset".into(),
                });
            }
            Ok(GenerationResponse::capped(
                "ok".into(),
                3,
                1,
                0,
                "flaky".into(),
                request.decoding.max_tokens,
            ))
        }

        fn provider_id(&self) -> &str {
            "flaky"
        }
    }

    fn request() -> GenerationRequest {
        GenerationRequest {
            system_text: String::new(),
            user_text: "hello".into(),
            decoding: DecodingConfig {
                temperature: 0.0,
                top_p: 1.0,
                frequency_penalty: 0.0,
                presence_penalty: 0.0,
                max_tokens: 16,
            },
            seed: Some(1),
        }
    }

    #[test]
    fn retries_transient_failures_then_succeeds() {
        let backend = Arc::new(FlakyBackend {
            failures_before_success: AtomicU32::new(2),
        });
        let client = ProviderClient::for_tests(backend);
        let response = client.generate(&request()).unwrap();
        assert_eq!(response.text, "ok");
        // Exactly one acknowledged generation in the ledger.
        assert_eq!(client.ledger().total().calls, 1);
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let backend = Arc::new(FlakyBackend {
            failures_before_success: AtomicU32::new(u32::MAX),
        });
        let client = ProviderClient::for_tests(backend);
        match client.generate(&request()) {
            Err(ProviderError::Transport { attempts, .. }) => assert_eq!(attempts, 5),
            other => panic!("expected transport failure, got {other:?}"),
        }
    }

    #[test]
    fn cache_serves_repeat_requests_without_new_calls() {
        let backend = Arc::new(FlakyBackend {
            failures_before_success: AtomicU32::new(0),
        });
        let client = ProviderClient::for_tests(backend);
        let first = client.generate(&request()).unwrap();
        let second = client.generate(&request()).unwrap();
        assert_eq!(first, second);
        assert_eq!(client.ledger().total().calls, 1);
    }

    #[test]
    fn ledger_totals_are_sums() {
        let ledger = UsageLedger::new();
        ledger.record("a", TokenCounts { prompt: 10, completion: 5 });
        ledger.record("a", TokenCounts { prompt: 7, completion: 2 });
        ledger.record("b", TokenCounts { prompt: 1, completion: 1 });
        let total = ledger.total();
        assert_eq!(total.calls, 3);
        assert_eq!(total.prompt_tokens, 18);
        assert_eq!(total.completion_tokens, 8);
        let snap = ledger.snapshot();
        assert_eq!(snap["a"].calls, 2);
        assert_eq!(snap["b"].prompt_tokens, 1);
    }

    #[test]
    fn backoff_delays_within_jitter_bounds() {
        let policy = RetryPolicy::default();
        let mut r = crate::rng::stream(1, "t", &[]);
        for attempt in 1..=4u32 {
            let expected = 1000.0 * 2f64.powi(attempt as i32 - 1);
            for _ in 0..50 {
                let d = policy.delay(attempt, &mut r).as_millis() as f64;
                assert!(d >= expected * 0.8 - 1.0 && d <= expected * 1.2 + 1.0, "attempt {attempt}: {d}");
            }
        }
    }

    #[test]
    fn response_caps_completion_tokens() {
        let response = GenerationResponse::capped("x".into(), 5, 99, 0, "p".into(), 8);
        assert_eq!(response.token_counts.completion, 8);
    }
}
