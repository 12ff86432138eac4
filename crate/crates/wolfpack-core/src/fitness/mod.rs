//! Fitness computation and ranking: exact-match accuracy for verifiable
//! tasks, judge-based composites otherwise, judge sub-scores as the tie
//! break.

pub mod extract;
pub mod judge;

pub use extract::{extract_answer, normalize_answer, ExtractedAnswer, TaskKind};
pub use judge::{judge_averaged, JudgeClient, DEFAULT_JUDGE_PROMPT, JUDGE_RUBRIC_VERSION};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitnessError {
    #[error("empty evaluation batch")]
    EmptyBatch,
    #[error("shape mismatch: {answers} answers vs {golds} golds")]
    Shape { answers: usize, golds: usize },
    #[error("invalid judge score {0}: must lie in [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("invalid judge weights ({0}, {1}, {2}): need positives summing to 1")]
    InvalidJudgeWeights(f64, f64, f64),
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error("need at least 3 reports to rank, got {0}")]
    TooFewReports(usize),
    #[error("judge call failed: {0}")]
    JudgeCall(String),
    #[error("judge response unusable: {0}")]
    JudgeResponse(String),
    #[error("judge failed after {completed} completed runs: {message}")]
    JudgePartial { completed: usize, message: String },
}

/// Normalized judge sub-scores in `[0, 1]`, averaged over the recorded
/// seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeScores {
    pub logic: f64,
    pub creativity: f64,
    pub completeness: f64,
    pub seeds_used: Vec<u64>,
}

impl JudgeScores {
    pub fn new(
        logic: f64,
        creativity: f64,
        completeness: f64,
        seeds_used: Vec<u64>,
    ) -> Result<Self, FitnessError> {
        for score in [logic, creativity, completeness] {
            if !(0.0..=1.0).contains(&score) {
                return Err(FitnessError::ScoreOutOfRange(score));
            }
        }
        Ok(Self {
            logic,
            creativity,
            completeness,
            seeds_used,
        })
    }
}

/// Weights for the judge composite. Positive, sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct JudgeWeights {
    w1: f64,
    w2: f64,
    w3: f64,
}

impl JudgeWeights {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self, FitnessError> {
        let positive = w1 > 0.0 && w2 > 0.0 && w3 > 0.0;
        let normalized = (w1 + w2 + w3 - 1.0).abs() <= 1e-9;
        if !(positive && normalized) {
            return Err(FitnessError::InvalidJudgeWeights(w1, w2, w3));
        }
        Ok(Self { w1, w2, w3 })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.w1, self.w2, self.w3]
    }
}

impl Default for JudgeWeights {
    /// Calibrated values: logic 0.5, creativity 0.2, completeness 0.3.
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.2,
            w3: 0.3,
        }
    }
}

impl TryFrom<[f64; 3]> for JudgeWeights {
    type Error = FitnessError;

    fn try_from(w: [f64; 3]) -> Result<Self, Self::Error> {
        Self::new(w[0], w[1], w[2])
    }
}

impl From<JudgeWeights> for [f64; 3] {
    fn from(w: JudgeWeights) -> Self {
        w.as_array()
    }
}

/// `w1 * logic + w2 * creativity + w3 * completeness`, in `[0, 1]`.
pub fn judge_composite(scores: &JudgeScores, weights: &JudgeWeights) -> f64 {
    let [w1, w2, w3] = weights.as_array();
    w1 * scores.logic + w2 * scores.creativity + w3 * scores.completeness
}

/// Fraction of positions where the extracted answer matches the gold label
/// after normalization.
pub fn exact_match_fitness(
    answers: &[ExtractedAnswer],
    golds: &[impl AsRef<str>],
) -> Result<f64, FitnessError> {
    if answers.len() != golds.len() {
        return Err(FitnessError::Shape {
            answers: answers.len(),
            golds: golds.len(),
        });
    }
    if answers.is_empty() {
        return Err(FitnessError::EmptyBatch);
    }
    let correct = answers
        .iter()
        .zip(golds)
        .filter(|(a, g)| a.matches(g.as_ref()))
        .count();
    Ok(correct as f64 / answers.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessMode {
    #[default]
    Verifiable,
    NonVerifiable,
}

/// One agent's evaluation for one iteration; the ranking key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub accuracy: Option<f64>,
    pub judge: Option<JudgeScores>,
    /// Precomputed judge composite, kept so ranking needs no weights.
    pub judge_composite: Option<f64>,
    pub composite: f64,
    pub mode: FitnessMode,
    pub batch_size: usize,
}

impl FitnessReport {
    /// Verifiable task: composite is the exact-match accuracy; judge scores
    /// are optional tie-break material.
    pub fn verifiable(
        accuracy: f64,
        judge: Option<JudgeScores>,
        weights: &JudgeWeights,
        batch_size: usize,
    ) -> Result<Self, FitnessError> {
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(FitnessError::InvalidReport(format!(
                "accuracy {accuracy} outside [0, 1]"
            )));
        }
        if batch_size == 0 {
            return Err(FitnessError::InvalidReport("batch_size must be positive".into()));
        }
        let judge_composite = judge.as_ref().map(|s| judge_composite(s, weights));
        Ok(Self {
            accuracy: Some(accuracy),
            judge,
            judge_composite,
            composite: accuracy,
            mode: FitnessMode::Verifiable,
            batch_size,
        })
    }

    /// Non-verifiable task: composite is the weighted judge score.
    pub fn non_verifiable(
        judge: JudgeScores,
        weights: &JudgeWeights,
        batch_size: usize,
    ) -> Result<Self, FitnessError> {
        if batch_size == 0 {
            return Err(FitnessError::InvalidReport("batch_size must be positive".into()));
        }
        let composite = judge_composite(&judge, weights);
        Ok(Self {
            accuracy: None,
            judge: Some(judge),
            judge_composite: Some(composite),
            composite,
            mode: FitnessMode::NonVerifiable,
            batch_size,
        })
    }

    /// Bare composite with no judge material; used when replaying recorded
    /// scores.
    pub fn from_composite(composite: f64, batch_size: usize) -> Self {
        Self {
            accuracy: None,
            judge: None,
            judge_composite: None,
            composite,
            mode: FitnessMode::NonVerifiable,
            batch_size,
        }
    }
}

/// Population order, best first. The first three entries are alpha, beta,
/// delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn alpha(&self) -> usize {
        self.order[0]
    }

    pub fn beta(&self) -> usize {
        self.order[1]
    }

    pub fn delta(&self) -> usize {
        self.order[2]
    }

    /// Top `m` agent indices.
    pub fn elites(&self, m: usize) -> &[usize] {
        &self.order[..m.min(self.order.len())]
    }
}

/// Rank agents best-first: descending composite, then descending judge
/// composite among exact ties, then ascending agent index.
pub fn rank_population(reports: &[FitnessReport]) -> Result<Ranking, FitnessError> {
    if reports.len() < 3 {
        return Err(FitnessError::TooFewReports(reports.len()));
    }
    let tie_break = |i: usize| reports[i].judge_composite.unwrap_or(f64::NEG_INFINITY);
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by(|&i, &j| {
        reports[j]
            .composite
            .total_cmp(&reports[i].composite)
            .then_with(|| tie_break(j).total_cmp(&tie_break(i)))
            .then(i.cmp(&j))
    });
    Ok(Ranking { order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(l: f64, c: f64, p: f64) -> JudgeScores {
        JudgeScores::new(l, c, p, vec![1, 2, 3]).unwrap()
    }

    #[test]
    fn exact_match_counting() {
        let answers = vec![
            ExtractedAnswer::Found("10".into()),
            ExtractedAnswer::Found("3".into()),
            ExtractedAnswer::Found("7.0".into()),
            ExtractedAnswer::Missing,
        ];
        let golds = ["10", "4", "7", "1"];
        assert_eq!(exact_match_fitness(&answers, &golds).unwrap(), 0.5);

        let all = vec![ExtractedAnswer::Found("5".into()); 4];
        let golds5 = ["5"; 4];
        assert_eq!(exact_match_fitness(&all, &golds5).unwrap(), 1.0);
    }

    #[test]
    fn exact_match_three_of_four() {
        let answers = vec![
            ExtractedAnswer::Found("1".into()),
            ExtractedAnswer::Found("2".into()),
            ExtractedAnswer::Found("3".into()),
            ExtractedAnswer::Found("9".into()),
        ];
        let golds = ["1", "2", "3", "4"];
        assert_eq!(exact_match_fitness(&answers, &golds).unwrap(), 0.75);
    }

    #[test]
    fn exact_match_guards() {
        let none: Vec<ExtractedAnswer> = vec![];
        let golds: [&str; 0] = [];
        assert!(matches!(
            exact_match_fitness(&none, &golds),
            Err(FitnessError::EmptyBatch)
        ));
        let one = vec![ExtractedAnswer::Found("1".into())];
        let two = ["1", "2"];
        assert!(matches!(
            exact_match_fitness(&one, &two),
            Err(FitnessError::Shape { .. })
        ));
    }

    #[test]
    fn exact_match_permutation_invariant() {
        let answers: Vec<ExtractedAnswer> = ["1", "5", "7", "9"]
            .iter()
            .map(|s| ExtractedAnswer::Found((*s).into()))
            .collect();
        let golds = ["1", "4", "7", "8"];
        let base = exact_match_fitness(&answers, &golds).unwrap();
        let perm = [2usize, 0, 3, 1];
        let answers_p: Vec<ExtractedAnswer> = perm.iter().map(|&i| answers[i].clone()).collect();
        let golds_p: Vec<&str> = perm.iter().map(|&i| golds[i]).collect();
        assert_eq!(exact_match_fitness(&answers_p, &golds_p).unwrap(), base);
    }

    #[test]
    fn composite_hand_oracle() {
        let w = JudgeWeights::default();
        let got = judge_composite(&scores(0.90, 0.70, 0.85), &w);
        assert!((got - 0.845).abs() < 1e-12);
        assert_eq!(judge_composite(&scores(1.0, 1.0, 1.0), &w), 1.0);
        assert_eq!(judge_composite(&scores(0.0, 0.0, 0.0), &w), 0.0);
    }

    #[test]
    fn composite_monotone_and_bounded() {
        let w = JudgeWeights::default();
        let base = judge_composite(&scores(0.5, 0.5, 0.5), &w);
        assert!(judge_composite(&scores(0.6, 0.5, 0.5), &w) > base);
        assert!(judge_composite(&scores(0.5, 0.6, 0.5), &w) > base);
        assert!(judge_composite(&scores(0.5, 0.5, 0.6), &w) > base);
        assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn judge_weights_validation() {
        assert!(JudgeWeights::new(0.5, 0.2, 0.3).is_ok());
        assert!(JudgeWeights::new(0.5, 0.5, 0.5).is_err());
        assert!(JudgeWeights::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn judge_scores_range_check() {
        assert!(JudgeScores::new(1.2, 0.5, 0.5, vec![]).is_err());
        assert!(JudgeScores::new(-0.1, 0.5, 0.5, vec![]).is_err());
    }

    #[test]
    fn ranking_with_judge_tie_break() {
        // accuracies (0.9, 0.7, 0.9, 0.5); judge tie-break favors index 2.
        let w = JudgeWeights::default();
        let reports = vec![
            FitnessReport::verifiable(0.9, Some(scores(0.8, 0.8, 0.8)), &w, 4).unwrap(),
            FitnessReport::verifiable(0.7, None, &w, 4).unwrap(),
            FitnessReport::verifiable(0.9, Some(scores(0.85, 0.85, 0.85)), &w, 4).unwrap(),
            FitnessReport::verifiable(0.5, None, &w, 4).unwrap(),
        ];
        let ranking = rank_population(&reports).unwrap();
        assert_eq!(ranking.order(), &[2, 0, 1, 3]);
        assert_eq!(ranking.alpha(), 2);
    }

    #[test]
    fn ranking_total_tie_falls_back_to_index() {
        let reports = vec![FitnessReport::from_composite(0.5, 1); 4];
        let ranking = rank_population(&reports).unwrap();
        assert_eq!(ranking.order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn ranking_requires_three_reports() {
        let reports = vec![FitnessReport::from_composite(0.5, 1); 2];
        assert!(matches!(
            rank_population(&reports),
            Err(FitnessError::TooFewReports(2))
        ));
    }

    #[test]
    fn ranking_replay_of_recorded_totals() {
        // Recorded iteration-1 totals (82, 83, 78, 76, 85): the elite set is
        // agents 2, 5, 1 in 1-based numbering.
        let reports: Vec<FitnessReport> = [82.0, 83.0, 78.0, 76.0, 85.0]
            .iter()
            .map(|&c| FitnessReport::from_composite(c, 1))
            .collect();
        let ranking = rank_population(&reports).unwrap();
        let mut elite_set: Vec<usize> = ranking.elites(3).to_vec();
        elite_set.sort_unstable();
        assert_eq!(elite_set, vec![0, 1, 4]);
        // Descending composite order puts 85 first.
        assert_eq!(ranking.order(), &[4, 1, 0, 2, 3]);
    }

    #[test]
    fn ranking_unchanged_under_positive_scaling() {
        let composites = [0.3, 0.9, 0.1, 0.9, 0.44];
        let mk = |scale: f64| {
            composites
                .iter()
                .map(|&c| FitnessReport::from_composite(c * scale, 1))
                .collect::<Vec<_>>()
        };
        let base = rank_population(&mk(1.0)).unwrap();
        let scaled = rank_population(&mk(17.5)).unwrap();
        assert_eq!(base.order(), scaled.order());
    }
}
