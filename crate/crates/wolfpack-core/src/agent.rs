//! Agent search space: decoding hyperparameters plus a prompt template.
//!
//! Continuous fields are sampled from clipped Gaussians and updated by
//! leader-guided rules; the token budget is a discrete field with its own
//! snap-to-set handling. Prompt text is never edited here (see
//! [`crate::prompt`]).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid interval: lower {lower} > upper {upper}")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("invalid leader weights ({0}, {1}, {2}): need strictly decreasing positives summing to 1")]
    InvalidLeaderWeights(f64, f64, f64),
    #[error("invalid sampling policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("decoding config violates policy: {0}")]
    PolicyViolation(String),
}

/// Closed interval used for clipping. `lower <= upper` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self, AgentError> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(AgentError::InvalidInterval { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn clip(&self, x: f64) -> f64 {
        self.lower.max(x.min(self.upper))
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = AgentError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Self::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lower, i.upper]
    }
}

/// `clip(x, [a, b]) = max(a, min(x, b))`.
pub fn clip(x: f64, interval: Interval) -> f64 {
    interval.clip(x)
}

/// Decoding hyperparameter vector sent verbatim to the text backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub max_tokens: u32,
}

/// The four continuous decoding fields, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousField {
    Temperature,
    TopP,
    FrequencyPenalty,
    PresencePenalty,
}

pub const CONTINUOUS_FIELDS: [ContinuousField; 4] = [
    ContinuousField::Temperature,
    ContinuousField::TopP,
    ContinuousField::FrequencyPenalty,
    ContinuousField::PresencePenalty,
];

impl DecodingConfig {
    pub fn get(&self, field: ContinuousField) -> f64 {
        match field {
            ContinuousField::Temperature => self.temperature,
            ContinuousField::TopP => self.top_p,
            ContinuousField::FrequencyPenalty => self.frequency_penalty,
            ContinuousField::PresencePenalty => self.presence_penalty,
        }
    }

    pub fn set(&mut self, field: ContinuousField, value: f64) {
        match field {
            ContinuousField::Temperature => self.temperature = value,
            ContinuousField::TopP => self.top_p = value,
            ContinuousField::FrequencyPenalty => self.frequency_penalty = value,
            ContinuousField::PresencePenalty => self.presence_penalty = value,
        }
    }
}

/// Gaussian sampling rule for one continuous field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPolicy {
    pub mean: f64,
    pub stddev: f64,
    pub clip: Interval,
}

impl FieldPolicy {
    pub fn new(mean: f64, stddev: f64, clip: Interval) -> Result<Self, AgentError> {
        let policy = Self { mean, stddev, clip };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.stddev < 0.0 || !self.stddev.is_finite() {
            return Err(AgentError::InvalidPolicy(format!(
                "stddev {} must be a nonnegative real",
                self.stddev
            )));
        }
        if !self.clip.contains(self.mean) {
            return Err(AgentError::InvalidPolicy(format!(
                "mean {} outside clip interval [{}, {}]",
                self.mean,
                self.clip.lower(),
                self.clip.upper()
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.clip.clip(self.mean + self.stddev * z)
    }
}

/// Token-budget rule: a fixed constant for fixed-length tasks, or a uniform
/// draw from a discrete set for adaptive-length tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MaxTokensPolicy {
    Fixed { value: u32 },
    Range { min: u32, max: u32 },
    Set { values: Vec<u32> },
}

impl MaxTokensPolicy {
    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            Self::Fixed { value } if *value == 0 => {
                Err(AgentError::InvalidPolicy("fixed max_tokens must be positive".into()))
            }
            Self::Range { min, max } if min > max || *min == 0 => Err(AgentError::InvalidPolicy(
                format!("max_tokens range [{min}, {max}] invalid"),
            )),
            Self::Set { values } if values.is_empty() || values.contains(&0) => Err(
                AgentError::InvalidPolicy("max_tokens set must be nonempty and positive".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, v: u32) -> bool {
        match self {
            Self::Fixed { value } => v == *value,
            Self::Range { min, max } => (*min..=*max).contains(&v),
            Self::Set { values } => values.contains(&v),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        match self {
            Self::Fixed { value } => *value,
            Self::Range { min, max } => rng.gen_range(*min..=*max),
            Self::Set { values } => values[rng.gen_range(0..values.len())],
        }
    }

    /// Snap a real-valued target to the nearest member, ties toward the
    /// larger value (favoring the bigger reasoning budget).
    pub fn nearest(&self, target: f64) -> u32 {
        match self {
            Self::Fixed { value } => *value,
            Self::Range { min, max } => {
                let clamped = target.max(*min as f64).min(*max as f64);
                // round half up = ties toward the larger value
                (clamped + 0.5).floor() as u32
            }
            Self::Set { values } => {
                let mut best = values[0];
                let mut best_dist = (target - best as f64).abs();
                for &v in &values[1..] {
                    let dist = (target - v as f64).abs();
                    if dist < best_dist || (dist == best_dist && v > best) {
                        best = v;
                        best_dist = dist;
                    }
                }
                best
            }
        }
    }
}

/// Full sampling policy for a decoding configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    pub temperature: FieldPolicy,
    pub top_p: FieldPolicy,
    pub frequency_penalty: FieldPolicy,
    pub presence_penalty: FieldPolicy,
    pub max_tokens: MaxTokensPolicy,
}

impl Default for SamplingPolicy {
    /// Baseline configuration: mean 0.6, stddev 0.1 on every continuous
    /// field, token budget uniform on 1274..=1524.
    fn default() -> Self {
        let clipped = |lo: f64, hi: f64| FieldPolicy {
            mean: 0.6,
            stddev: 0.1,
            clip: Interval::new(lo, hi).expect("static interval"),
        };
        Self {
            temperature: clipped(0.0, 1.0),
            top_p: clipped(0.05, 1.0),
            frequency_penalty: clipped(-2.0, 2.0),
            presence_penalty: clipped(-2.0, 2.0),
            max_tokens: MaxTokensPolicy::Range { min: 1274, max: 1524 },
        }
    }
}

impl SamplingPolicy {
    pub fn field(&self, field: ContinuousField) -> &FieldPolicy {
        match field {
            ContinuousField::Temperature => &self.temperature,
            ContinuousField::TopP => &self.top_p,
            ContinuousField::FrequencyPenalty => &self.frequency_penalty,
            ContinuousField::PresencePenalty => &self.presence_penalty,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        for field in CONTINUOUS_FIELDS {
            self.field(field).validate()?;
        }
        self.max_tokens.validate()
    }

    /// Check a decoding config against every interval and set invariant.
    pub fn check(&self, config: &DecodingConfig) -> Result<(), AgentError> {
        for field in CONTINUOUS_FIELDS {
            let value = config.get(field);
            let clip = self.field(field).clip;
            if !clip.contains(value) {
                return Err(AgentError::PolicyViolation(format!(
                    "{field:?} = {value} outside [{}, {}]",
                    clip.lower(),
                    clip.upper()
                )));
            }
        }
        if !self.max_tokens.contains(config.max_tokens) {
            return Err(AgentError::PolicyViolation(format!(
                "max_tokens = {} not in the configured set",
                config.max_tokens
            )));
        }
        Ok(())
    }
}

/// Draw a fresh decoding configuration: clipped Gaussian per continuous
/// field, token budget per its mode.
pub fn sample_decoding(policy: &SamplingPolicy, rng: &mut impl Rng) -> DecodingConfig {
    DecodingConfig {
        temperature: policy.temperature.sample(rng),
        top_p: policy.top_p.sample(rng),
        frequency_penalty: policy.frequency_penalty.sample(rng),
        presence_penalty: policy.presence_penalty.sample(rng),
        max_tokens: policy.max_tokens.sample(rng),
    }
}

/// Weights for the three leaders: strictly decreasing, positive, sum 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct LeaderWeights {
    alpha: f64,
    beta: f64,
    delta: f64,
}

impl LeaderWeights {
    pub fn new(alpha: f64, beta: f64, delta: f64) -> Result<Self, AgentError> {
        let ordered = alpha > beta && beta > delta && delta > 0.0;
        let normalized = (alpha + beta + delta - 1.0).abs() <= 1e-12;
        if !(ordered && normalized) {
            return Err(AgentError::InvalidLeaderWeights(alpha, beta, delta));
        }
        Ok(Self { alpha, beta, delta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.delta]
    }
}

impl Default for LeaderWeights {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.3,
            delta: 0.2,
        }
    }
}

impl TryFrom<[f64; 3]> for LeaderWeights {
    type Error = AgentError;

    fn try_from(w: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(w[0], w[1], w[2])
    }
}

impl From<LeaderWeights> for [f64; 3] {
    fn from(w: LeaderWeights) -> Self {
        w.as_array()
    }
}

/// Strictly decreasing normalized ramp `(m, m-1, ..., 1) / sum` for elite
/// sets of size other than three.
pub fn elite_ramp_weights(m: usize) -> Vec<f64> {
    let total: f64 = (1..=m).sum::<usize>() as f64;
    (0..m).map(|i| (m - i) as f64 / total).collect()
}

/// Weighted-average update: sample around each elite's value and combine.
/// Token budget takes the noiseless weighted sum snapped to the policy set.
pub fn weighted_elite_update(
    follower: &DecodingConfig,
    elites: &[&DecodingConfig],
    weights: &[f64],
    sigma: f64,
    policy: &SamplingPolicy,
    rng: &mut impl Rng,
) -> DecodingConfig {
    debug_assert_eq!(elites.len(), weights.len());
    let mut out = follower.clone();
    for field in CONTINUOUS_FIELDS {
        let mut acc = 0.0;
        for (elite, w) in elites.iter().zip(weights) {
            let z: f64 = rng.sample(StandardNormal);
            acc += w * (elite.get(field) + sigma * z);
        }
        out.set(field, policy.field(field).clip.clip(acc));
    }
    out.max_tokens = match &policy.max_tokens {
        MaxTokensPolicy::Fixed { value } => *value,
        other => {
            let target: f64 = elites
                .iter()
                .zip(weights)
                .map(|(e, w)| w * e.max_tokens as f64)
                .sum();
            other.nearest(target)
        }
    };
    out
}

/// Single-leader update: pick one elite by weight, then perturb and clip
/// every continuous field around it. Token budget snaps to the chosen
/// elite's value.
pub fn single_elite_update(
    follower: &DecodingConfig,
    elites: &[&DecodingConfig],
    weights: &[f64],
    sigma: f64,
    policy: &SamplingPolicy,
    rng: &mut impl Rng,
) -> DecodingConfig {
    debug_assert_eq!(elites.len(), weights.len());
    let u: f64 = rng.gen();
    let mut cumulative = 0.0;
    let mut chosen = elites.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        cumulative += w;
        if u < cumulative {
            chosen = i;
            break;
        }
    }
    let leader = elites[chosen];
    let mut out = follower.clone();
    for field in CONTINUOUS_FIELDS {
        let z: f64 = rng.sample(StandardNormal);
        let value = leader.get(field) + sigma * z;
        out.set(field, policy.field(field).clip.clip(value));
    }
    out.max_tokens = match &policy.max_tokens {
        MaxTokensPolicy::Fixed { value } => *value,
        _ => leader.max_tokens,
    };
    out
}

/// Weighted-average update over the (alpha, beta, delta) triple.
pub fn weighted_leader_update(
    follower: &DecodingConfig,
    leaders: (&DecodingConfig, &DecodingConfig, &DecodingConfig),
    weights: &LeaderWeights,
    sigma: f64,
    policy: &SamplingPolicy,
    rng: &mut impl Rng,
) -> DecodingConfig {
    weighted_elite_update(
        follower,
        &[leaders.0, leaders.1, leaders.2],
        &weights.as_array(),
        sigma,
        policy,
        rng,
    )
}

/// Single-leader update over the (alpha, beta, delta) triple.
pub fn single_leader_update(
    follower: &DecodingConfig,
    leaders: (&DecodingConfig, &DecodingConfig, &DecodingConfig),
    weights: &LeaderWeights,
    sigma: f64,
    policy: &SamplingPolicy,
    rng: &mut impl Rng,
) -> DecodingConfig {
    single_elite_update(
        follower,
        &[leaders.0, leaders.1, leaders.2],
        &weights.as_array(),
        sigma,
        policy,
        rng,
    )
}

/// Which update rule followers use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateStrategy {
    #[default]
    WeightedAverage,
    SingleLeader,
}

/// Marker substituted with the task question when a prompt is rendered.
pub const QUESTION_MARKER: &str = "{question}";

/// Kinds of prompt edits tracked in a template's lineage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditKind {
    ReorderSteps,
    Paraphrase,
    AdjustFormatConstraints,
    /// An accepted editor revision; the editor may combine the allowed
    /// kinds and we do not classify which were used.
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub iteration: u64,
    pub edit: EditKind,
}

/// Prompt template with required placeholder substrings and edit history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    text: String,
    placeholder_markers: Vec<String>,
    lineage: Vec<LineageRecord>,
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>, placeholder_markers: Vec<String>) -> Result<Self, AgentError> {
        let text = text.into();
        Self::validate_text(&text, &placeholder_markers)?;
        Ok(Self {
            text,
            placeholder_markers,
            lineage: Vec::new(),
        })
    }

    /// Nonempty text in which every marker occurs exactly once.
    pub fn validate_text(text: &str, markers: &[String]) -> Result<(), AgentError> {
        if text.trim().is_empty() {
            return Err(AgentError::InvalidTemplate("text is empty".into()));
        }
        for marker in markers {
            let count = text.matches(marker.as_str()).count();
            if count != 1 {
                return Err(AgentError::InvalidTemplate(format!(
                    "marker {marker:?} occurs {count} times, expected exactly once"
                )));
            }
        }
        Ok(())
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn placeholder_markers(&self) -> &[String] {
        &self.placeholder_markers
    }

    pub fn lineage(&self) -> &[LineageRecord] {
        &self.lineage
    }

    /// Replacement template with the same markers, validated, and the edit
    /// appended to the lineage.
    pub fn with_edited_text(
        &self,
        text: impl Into<String>,
        iteration: u64,
        edit: EditKind,
    ) -> Result<Self, AgentError> {
        let text = text.into();
        Self::validate_text(&text, &self.placeholder_markers)?;
        let mut lineage = self.lineage.clone();
        lineage.push(LineageRecord { iteration, edit });
        Ok(Self {
            text,
            placeholder_markers: self.placeholder_markers.clone(),
            lineage,
        })
    }

    /// Fill the question slot, or append the question when the template
    /// carries no marker.
    pub fn render(&self, question: &str) -> String {
        if self.text.contains(QUESTION_MARKER) {
            self.text.replace(QUESTION_MARKER, question)
        } else {
            format!("{}\n\nQuestion: {question}", self.text)
        }
    }
}

/// One wolf: decoding config, prompt template, and the shared-model handle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub id: usize,
    pub decoding: DecodingConfig,
    pub prompt: PromptTemplate,
    pub provider_ref: String,
}
