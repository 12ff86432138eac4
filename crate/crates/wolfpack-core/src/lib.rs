//! Population-based optimization of LLM decoding configurations and
//! prompt templates, driven by grey-wolf leader-follower updates, plus the
//! standard continuous grey wolf optimizer it builds on.
//!
//! Offline verification runs against deterministic mock backends; real
//! providers are reached through a chat-completions HTTP client.

pub mod agent;
pub mod benchfns;
pub mod data;
pub mod fitness;
pub mod gwo;
pub mod orchestrator;
pub mod prompt;
pub mod provider;
pub mod rng;

pub use agent::{
    clip, sample_decoding, single_leader_update, weighted_leader_update, AgentConfig,
    DecodingConfig, Interval, LeaderWeights, PromptTemplate, SamplingPolicy, UpdateStrategy,
};
pub use fitness::{
    exact_match_fitness, extract_answer, judge_composite, rank_population, FitnessMode,
    FitnessReport, JudgeScores, JudgeWeights, Ranking, TaskKind,
};
pub use gwo::{
    encircle, gwo_minimize, leader_average_update, schedule_coefficient, GwoOptions, GwoOutcome,
    GwoSchedule, LeaderSet, SearchSpace, WolfPosition,
};
pub use orchestrator::{
    evaluate_champion, initialize_population, run_iteration, RunConfig, RunOutcome, RunState,
    Runner,
};
pub use provider::mock::{mock_fitness_landscape, LandscapeSpec, MockBackend, MockBackendSpec};
pub use provider::{GenerationRequest, GenerationResponse, ProviderClient, TextBackend, UsageLedger};
