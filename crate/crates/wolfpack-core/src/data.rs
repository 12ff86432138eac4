//! Dataset ingestion, split construction, and run-report emission.
//!
//! Ingestion format is JSONL: one object per line with fields
//! `{id?, question, answer?, task_kind?}`. All emitted files are UTF-8
//! with LF line endings.

use crate::agent::AgentConfig;
use crate::fitness::TaskKind;
use crate::provider::UsageTotals;
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate item id: {id}")]
    DuplicateId { id: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("item {id}: {message}")]
    InvalidItem { id: String, message: String },
    #[error("holdout split needs at least 5 items, got {0}")]
    TooFewItems(usize),
    #[error("splits overlap on {count} id(s), first: {first}")]
    Overlap { count: usize, first: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One question with its optional gold label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub id: String,
    pub question: String,
    pub gold: Option<String>,
    pub task_kind: TaskKind,
}

#[derive(Debug, Deserialize)]
struct RawItem {
    id: Option<String>,
    question: String,
    answer: Option<String>,
    task_kind: Option<TaskKind>,
}

/// Parse JSONL text into validated items. Missing ids become the 1-based
/// line number.
pub fn parse_jsonl(text: &str, default_kind: TaskKind) -> Result<Vec<QAItem>, DataError> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (ix, line) in text.lines().enumerate() {
        let line_no = ix + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawItem = serde_json::from_str(line).map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let id = raw.id.unwrap_or_else(|| line_no.to_string());
        if raw.question.trim().is_empty() {
            return Err(DataError::InvalidItem {
                id,
                message: "question is empty".into(),
            });
        }
        if let Some(answer) = &raw.answer {
            if answer.trim().is_empty() {
                return Err(DataError::InvalidItem {
                    id,
                    message: "answer is present but empty".into(),
                });
            }
        }
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId { id });
        }
        items.push(QAItem {
            id,
            question: raw.question,
            gold: raw.answer,
            task_kind: raw.task_kind.unwrap_or(default_kind),
        });
    }
    if items.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok(items)
}

/// Load and validate a JSONL dataset file.
pub fn load_dataset(path: &Path, default_kind: TaskKind) -> Result<Vec<QAItem>, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_jsonl(&text, default_kind)
}

/// Validation : test ratio of the fixed-seed holdout protocol.
pub const HOLDOUT_RATIO: (usize, usize) = (1, 4);

/// How the optimization pool and test set are constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SplitSpec {
    /// Fixed-seed random holdout in the 1:4 ratio.
    FixedSeedHoldout { seed: u64 },
    /// Caller supplies both sides; only disjointness is verified.
    Official,
}

/// Split items into (optimization pool, test set) per the split mode.
/// Official splits arrive as two files and go through
/// [`make_official_split`] instead.
pub fn make_split(
    items: Vec<QAItem>,
    spec: &SplitSpec,
) -> Result<(Vec<QAItem>, Vec<QAItem>), DataError> {
    match spec {
        SplitSpec::FixedSeedHoldout { seed } => make_holdout_split(items, *seed),
        SplitSpec::Official => Err(DataError::InvalidItem {
            id: "-".into(),
            message: "official mode takes pre-split files; see make_official_split".into(),
        }),
    }
}

/// Fixed-seed holdout. Pool size is `round(N / 5)`, at least 1; splits are
/// disjoint, cover the input, and depend only on (seed, dataset).
pub fn make_holdout_split(
    items: Vec<QAItem>,
    seed: u64,
) -> Result<(Vec<QAItem>, Vec<QAItem>), DataError> {
    let n = items.len();
    if n < HOLDOUT_RATIO.0 + HOLDOUT_RATIO.1 {
        return Err(DataError::TooFewItems(n));
    }
    let denom = (HOLDOUT_RATIO.0 + HOLDOUT_RATIO.1) as f64;
    let pool_n = ((n as f64 / denom).round() as usize).max(1);

    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng::stream(seed, "split.holdout", &[n as u64]));
    let mut pool_ix: Vec<usize> = indices[..pool_n].to_vec();
    let mut test_ix: Vec<usize> = indices[pool_n..].to_vec();
    pool_ix.sort_unstable();
    test_ix.sort_unstable();

    let mut items: Vec<Option<QAItem>> = items.into_iter().map(Some).collect();
    let take = |ixs: &[usize], items: &mut Vec<Option<QAItem>>| {
        ixs.iter()
            .map(|&i| items[i].take().expect("index taken once"))
            .collect::<Vec<_>>()
    };
    let pool = take(&pool_ix, &mut items);
    let test = take(&test_ix, &mut items);
    Ok((pool, test))
}

/// Passthrough for official splits; refuses overlapping ids.
pub fn make_official_split(
    pool: Vec<QAItem>,
    test: Vec<QAItem>,
) -> Result<(Vec<QAItem>, Vec<QAItem>), DataError> {
    check_disjoint(
        pool.iter().map(|i| i.id.as_str()),
        test.iter().map(|i| i.id.as_str()),
    )?;
    Ok((pool, test))
}

/// Error when any id appears on both sides.
pub fn check_disjoint<'a>(
    left: impl Iterator<Item = &'a str>,
    right: impl Iterator<Item = &'a str>,
) -> Result<(), DataError> {
    let left: HashSet<&str> = left.collect();
    let mut shared: Vec<&str> = right.filter(|id| left.contains(id)).collect();
    if shared.is_empty() {
        return Ok(());
    }
    shared.sort_unstable();
    Err(DataError::Overlap {
        count: shared.len(),
        first: shared[0].to_string(),
    })
}

/// Synthetic echo dataset: each question carries its own gold label, which
/// lets the landscape mock answer correctly with a known probability.
/// Questions read "State the number N." with gold "N".
pub fn synthetic_echo_dataset(count: usize, seed: u64) -> Vec<QAItem> {
    use rand::Rng;
    let mut r = rng::stream(seed, "synthetic.echo", &[]);
    (0..count)
        .map(|i| {
            let value: i64 = r.gen_range(10..=99);
            QAItem {
                id: format!("synthetic-{}", i + 1),
                question: format!("State the number {value}."),
                gold: Some(value.to_string()),
                task_kind: TaskKind::Numeric,
            }
        })
        .collect()
}

/// One optimization iteration as recorded in `history.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub k: u64,
    pub per_agent_composite: Vec<f64>,
    /// Elite agent indices, best first.
    pub elites: Vec<usize>,
    pub alpha_composite: f64,
    /// Best-so-far composite; nondecreasing in `k`.
    pub champion_composite: f64,
}

#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub history_csv: PathBuf,
    pub champion_json: PathBuf,
    pub usage_json: PathBuf,
}

/// Write the run report: history CSV with a fixed column order, the
/// champion config, and the usage summary.
pub fn emit_report(
    history: &[IterationRecord],
    champion: &AgentConfig,
    usage: &BTreeMap<String, UsageTotals>,
    out_dir: &Path,
) -> Result<ReportPaths, DataError> {
    std::fs::create_dir_all(out_dir)?;
    let agent_count = history.first().map_or(0, |r| r.per_agent_composite.len());

    let mut csv = String::new();
    csv.push_str("iteration,best_composite,mean_composite");
    for i in 0..agent_count {
        csv.push_str(&format!(",agent_{i}"));
    }
    csv.push('\n');
    for record in history {
        let mean = record.per_agent_composite.iter().sum::<f64>()
            / record.per_agent_composite.len().max(1) as f64;
        csv.push_str(&format!("{},{},{}", record.k, record.champion_composite, mean));
        for value in &record.per_agent_composite {
            csv.push_str(&format!(",{value}"));
        }
        csv.push('\n');
    }
    let history_csv = out_dir.join("history.csv");
    std::fs::write(&history_csv, csv)?;

    let champion_json = out_dir.join("champion.json");
    let mut champion_text = serde_json::to_string_pretty(champion)?;
    champion_text.push('\n');
    std::fs::write(&champion_json, champion_text)?;

    let usage_json = out_dir.join("usage.json");
    let mut usage_text = serde_json::to_string_pretty(usage)?;
    usage_text.push('\n');
    std::fs::write(&usage_json, usage_text)?;

    Ok(ReportPaths {
        history_csv,
        champion_json,
        usage_json,
    })
}
