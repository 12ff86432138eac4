//! Resolved run configuration and the wiring it implies: backends,
//! datasets, splits, instruction and template resources.

use super::OrchestratorError;
use crate::agent::{DecodingConfig, LeaderWeights, SamplingPolicy, UpdateStrategy};
use crate::data::{self, QAItem};
use crate::fitness::{FitnessMode, JudgeClient, JudgeWeights, TaskKind};
use crate::prompt::{self, AdaptationInstruction, PromptError};
use crate::provider::http::{HttpBackend, HttpBackendConfig};
use crate::provider::mock::{LandscapeSpec, MockBackend, MockBackendSpec};
use crate::provider::{ProviderClient, RetryPolicy, TextBackend, UsageLedger};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwoSection {
    /// Population size n.
    pub n: usize,
    /// Optimization iterations K.
    pub iterations: u64,
    /// Elite set size m.
    pub elite: usize,
    /// Questions per fitness evaluation. 1 reproduces the one-question
    /// protocol literally.
    pub batch_size: usize,
    pub seed: u64,
    /// Stddev of leader-centered sampling in the update rules.
    pub sigma: f64,
    pub strategy: UpdateStrategy,
    pub leader_weights: LeaderWeights,
    /// Draw an independent batch per agent instead of one shared batch.
    pub per_agent_batch: bool,
}

impl Default for GwoSection {
    fn default() -> Self {
        Self {
            n: 5,
            iterations: 10,
            elite: 3,
            batch_size: 16,
            seed: 42,
            sigma: 0.1,
            strategy: UpdateStrategy::default(),
            leader_weights: LeaderWeights::default(),
            per_agent_batch: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeSection {
    pub enabled: bool,
    pub weights: JudgeWeights,
    pub seeds: [u64; 3],
}

impl Default for JudgeSection {
    fn default() -> Self {
        Self {
            enabled: false,
            weights: JudgeWeights::default(),
            seeds: [101, 102, 103],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProviderSpec {
    MockLandscape {
        #[serde(flatten)]
        landscape: LandscapeSpec,
    },
    MockScripted {
        responses: Vec<String>,
    },
    Http {
        base_url: Option<String>,
        agent_model: String,
        judge_model: Option<String>,
        #[serde(default = "default_concurrency")]
        concurrency: usize,
    },
}

fn default_concurrency() -> usize {
    8
}

impl Default for ProviderSpec {
    fn default() -> Self {
        Self::MockLandscape {
            landscape: LandscapeSpec::temperature_only(0.6, 0.2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DatasetSpec {
    /// Self-labeling echo questions; no files needed.
    Synthetic {
        #[serde(default = "default_synthetic_count")]
        count: usize,
        #[serde(default = "default_split_seed")]
        split_seed: u64,
    },
    /// One JSONL file split by the fixed-seed holdout protocol.
    Jsonl {
        path: PathBuf,
        #[serde(default)]
        task_kind: TaskKind,
        #[serde(default = "default_split_seed")]
        split_seed: u64,
    },
    /// Official pre-split files; disjointness is verified.
    OfficialPair {
        pool_path: PathBuf,
        test_path: PathBuf,
        #[serde(default)]
        task_kind: TaskKind,
    },
}

fn default_synthetic_count() -> usize {
    80
}

fn default_split_seed() -> u64 {
    1
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self::Synthetic {
            count: default_synthetic_count(),
            split_seed: default_split_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    /// JSON array of template strings; the built-in pool when absent.
    pub pool_file: Option<PathBuf>,
    /// Generate the initial templates with the provider instead of drawing
    /// from a pool.
    pub generate: bool,
    /// Override for the shipped adaptation instruction.
    pub instruction_file: Option<PathBuf>,
}

/// Resolved run configuration. Field defaults match the reference setup:
/// 5 agents, 10 iterations, 3 elites.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gwo: GwoSection,
    pub sampling: SamplingPolicy,
    pub judge: JudgeSection,
    pub provider: ProviderSpec,
    pub dataset: DatasetSpec,
    pub prompts: PromptSection,
    pub fitness_mode: FitnessMode,
    pub retry: RetryPolicy,
}

impl RunConfig {
    /// All structural checks that must hold before a run starts. The first
    /// violation is returned as the error message.
    pub fn validate(&self) -> Result<(), String> {
        if self.gwo.elite < 1 {
            return Err("elite count m >= 1 required".into());
        }
        if self.gwo.n < self.gwo.elite {
            return Err(format!(
                "n >= m required (n={}, m={})",
                self.gwo.n, self.gwo.elite
            ));
        }
        if self.gwo.n < 3 {
            return Err(format!("population n >= 3 required (n={})", self.gwo.n));
        }
        if self.gwo.iterations < 1 {
            return Err("iterations K >= 1 required".into());
        }
        if self.gwo.batch_size < 1 {
            return Err("batch_size >= 1 required".into());
        }
        if self.gwo.sigma < 0.0 || !self.gwo.sigma.is_finite() {
            return Err(format!("sigma must be a nonnegative real, got {}", self.gwo.sigma));
        }
        self.sampling.validate().map_err(|e| e.to_string())?;
        if self.fitness_mode == FitnessMode::NonVerifiable && !self.judge.enabled {
            return Err("non-verifiable fitness requires judge.enabled = true".into());
        }
        if self.prompts.generate && self.prompts.pool_file.is_some() {
            return Err("prompts.generate and prompts.pool_file are mutually exclusive".into());
        }
        Ok(())
    }

    /// Load the dataset and produce (optimization pool, test split).
    pub fn load_splits(&self) -> Result<(Vec<QAItem>, Vec<QAItem>), OrchestratorError> {
        match &self.dataset {
            DatasetSpec::Synthetic { count, split_seed } => {
                let items = data::synthetic_echo_dataset(*count, self.gwo.seed);
                let spec = data::SplitSpec::FixedSeedHoldout { seed: *split_seed };
                Ok(data::make_split(items, &spec)?)
            }
            DatasetSpec::Jsonl {
                path,
                task_kind,
                split_seed,
            } => {
                let items = data::load_dataset(path, *task_kind)?;
                let spec = data::SplitSpec::FixedSeedHoldout { seed: *split_seed };
                Ok(data::make_split(items, &spec)?)
            }
            DatasetSpec::OfficialPair {
                pool_path,
                test_path,
                task_kind,
            } => {
                let pool = data::load_dataset(pool_path, *task_kind)?;
                let test = data::load_dataset(test_path, *task_kind)?;
                Ok(data::make_official_split(pool, test)?)
            }
        }
    }

    pub fn load_instruction(&self) -> Result<AdaptationInstruction, OrchestratorError> {
        match &self.prompts.instruction_file {
            Some(path) => Ok(AdaptationInstruction::from_file(path)?),
            None => Ok(AdaptationInstruction::builtin()),
        }
    }

    pub fn load_templates(
        &self,
        client: &Arc<ProviderClient>,
    ) -> Result<Vec<crate::agent::PromptTemplate>, OrchestratorError> {
        if self.prompts.generate {
            return Ok(prompt::generate_prompt_pool(
                client,
                &editor_decoding(),
                self.gwo.n,
                self.gwo.seed,
            )?);
        }
        match &self.prompts.pool_file {
            Some(path) => Ok(prompt::load_prompt_pool(path)?),
            None => Ok(prompt::builtin_prompt_pool()),
        }
    }

    /// Construct the provider clients this config describes. Mock providers
    /// serve agent, judge, and adaptation roles from one backend; HTTP
    /// providers may route judge calls to a separate model. All clients
    /// share one usage ledger.
    pub fn build_provider(
        &self,
        trace_path: Option<&Path>,
    ) -> Result<BuiltProvider, OrchestratorError> {
        let ledger = Arc::new(UsageLedger::new());
        let concurrency = match &self.provider {
            ProviderSpec::Http { concurrency, .. } => *concurrency,
            _ => default_concurrency(),
        };

        let make_client = |backend: Arc<dyn TextBackend>| -> Result<Arc<ProviderClient>, OrchestratorError> {
            let mut client = ProviderClient::new(backend, ledger.clone(), self.retry.clone(), concurrency);
            if let Some(path) = trace_path {
                client = client.with_trace_file(path)?;
            }
            Ok(Arc::new(client))
        };

        match &self.provider {
            ProviderSpec::MockLandscape { landscape } => {
                let backend: Arc<dyn TextBackend> = Arc::new(MockBackend::new(
                    MockBackendSpec::Landscape(landscape.clone()),
                    self.gwo.seed,
                ));
                let client = make_client(backend)?;
                let judge = self
                    .judge
                    .enabled
                    .then(|| JudgeClient::new(client.clone()));
                Ok(BuiltProvider {
                    agent_client: client.clone(),
                    adapter_client: client,
                    judge_client: judge,
                })
            }
            ProviderSpec::MockScripted { responses } => {
                let backend: Arc<dyn TextBackend> = Arc::new(MockBackend::new(
                    MockBackendSpec::Scripted {
                        responses: responses.clone(),
                    },
                    self.gwo.seed,
                ));
                let client = make_client(backend)?;
                let judge = self
                    .judge
                    .enabled
                    .then(|| JudgeClient::new(client.clone()));
                Ok(BuiltProvider {
                    agent_client: client.clone(),
                    adapter_client: client,
                    judge_client: judge,
                })
            }
            ProviderSpec::Http {
                base_url,
                agent_model,
                judge_model,
                ..
            } => {
                let agent_backend: Arc<dyn TextBackend> = Arc::new(HttpBackend::new(
                    HttpBackendConfig::from_env(base_url.clone(), agent_model.clone())?,
                )?);
                let agent_client = make_client(agent_backend)?;
                let judge_client = if self.judge.enabled {
                    let judge_model = judge_model.clone().unwrap_or_else(|| agent_model.clone());
                    let judge_backend: Arc<dyn TextBackend> = Arc::new(HttpBackend::new(
                        HttpBackendConfig::from_env(base_url.clone(), judge_model)?,
                    )?);
                    Some(JudgeClient::new(make_client(judge_backend)?))
                } else {
                    None
                };
                Ok(BuiltProvider {
                    agent_client: agent_client.clone(),
                    adapter_client: agent_client,
                    judge_client,
                })
            }
        }
    }
}

pub struct BuiltProvider {
    pub agent_client: Arc<ProviderClient>,
    pub adapter_client: Arc<ProviderClient>,
    pub judge_client: Option<JudgeClient>,
}

/// Fixed decoding for editor (adaptation and template-generation) calls.
pub(crate) fn editor_decoding() -> DecodingConfig {
    DecodingConfig {
        temperature: 0.7,
        top_p: 1.0,
        frequency_penalty: 0.0,
        presence_penalty: 0.0,
        max_tokens: 768,
    }
}

impl From<PromptError> for OrchestratorError {
    fn from(err: PromptError) -> Self {
        match err {
            PromptError::EmptyPool => OrchestratorError::Config(err.to_string()),
            other => OrchestratorError::Prompt(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.gwo.n, 5);
        assert_eq!(config.gwo.iterations, 10);
        assert_eq!(config.gwo.elite, 3);
    }

    #[test]
    fn n_less_than_m_is_rejected_with_stable_message() {
        let mut config = RunConfig::default();
        config.gwo.n = 2;
        let message = config.validate().unwrap_err();
        assert!(message.contains("n >= m required"), "got: {message}");
    }

    #[test]
    fn non_verifiable_requires_judge() {
        let mut config = RunConfig {
            fitness_mode: FitnessMode::NonVerifiable,
            ..RunConfig::default()
        };
        assert!(config.validate().is_err());
        config.judge.enabled = true;
        config.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_with_defaults() {
        let toml_text = r#"
            [gwo]
            n = 6
            seed = 7

            [provider]
            kind = "mock-landscape"
            peak_temperature = 0.6
            width = 0.2

            [dataset]
            source = "synthetic"
            count = 40
        "#;
        let config: RunConfig = toml::from_str(toml_text).unwrap();
        assert_eq!(config.gwo.n, 6);
        assert_eq!(config.gwo.seed, 7);
        assert_eq!(config.gwo.iterations, 10);
        match &config.dataset {
            DatasetSpec::Synthetic { count, .. } => assert_eq!(*count, 40),
            other => panic!("unexpected dataset {other:?}"),
        }
        // JSON echo round-trips to the same resolved config.
        let json = serde_json::to_string(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn synthetic_split_sizes() {
        let config = RunConfig::default();
        let (pool, test) = config.load_splits().unwrap();
        assert_eq!(pool.len(), 16);
        assert_eq!(test.len(), 64);
    }
}
