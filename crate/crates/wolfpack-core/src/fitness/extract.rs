//! Answer extraction and normalization for exact-match scoring.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    #[default]
    Numeric,
    MultipleChoice,
    FreeForm,
}

/// Extraction result. `Missing` is a marker scored as incorrect, never an
/// error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractedAnswer {
    Found(String),
    Missing,
}

impl ExtractedAnswer {
    pub fn matches(&self, gold: &str) -> bool {
        match self {
            Self::Found(answer) => normalize_answer(answer) == normalize_answer(gold),
            Self::Missing => false,
        }
    }

    pub fn as_found(&self) -> Option<&str> {
        match self {
            Self::Found(s) => Some(s),
            Self::Missing => None,
        }
    }
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[-+]?\$?\d[\d,]*(?:\.\d+)?").expect("static regex"))
}

fn choice_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([A-E])\b").expect("static regex"))
}

/// Pull the final answer out of a completion.
///
/// Numeric: the last number, in canonical decimal form. Multiple choice:
/// the last standalone option letter A-E. Free form: the trimmed final
/// nonempty line.
pub fn extract_answer(completion_text: &str, task_kind: TaskKind) -> ExtractedAnswer {
    match task_kind {
        TaskKind::Numeric => match number_regex().find_iter(completion_text).last() {
            Some(m) => ExtractedAnswer::Found(canonical_decimal(m.as_str())),
            None => ExtractedAnswer::Missing,
        },
        TaskKind::MultipleChoice => match choice_regex().find_iter(completion_text).last() {
            Some(m) => ExtractedAnswer::Found(m.as_str().to_string()),
            None => ExtractedAnswer::Missing,
        },
        TaskKind::FreeForm => completion_text
            .lines()
            .rev()
            .map(str::trim)
            .find(|line| !line.is_empty())
            .map(|line| ExtractedAnswer::Found(line.to_string()))
            .unwrap_or(ExtractedAnswer::Missing),
    }
}

/// Last number appearing in arbitrary text, canonicalized. Used by mock
/// backends that must agree with the numeric extractor.
pub fn last_number(text: &str) -> Option<String> {
    number_regex()
        .find_iter(text)
        .last()
        .map(|m| canonical_decimal(m.as_str()))
}

/// Canonical decimal form: no sign for zero, no currency/commas, no
/// leading zeros, no trailing fractional zeros ("10.0" == "10").
pub fn canonical_decimal(token: &str) -> String {
    let cleaned: String = token
        .chars()
        .filter(|c| !matches!(c, '$' | ',' | '+'))
        .collect();
    let (negative, digits) = match cleaned.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, cleaned.as_str()),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    let int_trimmed = int_part.trim_start_matches('0');
    let int_canon = if int_trimmed.is_empty() { "0" } else { int_trimmed };
    let frac_canon = frac_part.trim_end_matches('0');

    let mut out = String::new();
    if negative && !(int_canon == "0" && frac_canon.is_empty()) {
        out.push('-');
    }
    out.push_str(int_canon);
    if !frac_canon.is_empty() {
        out.push('.');
        out.push_str(frac_canon);
    }
    out
}

/// Normalization applied to both sides of the exact-match comparison:
/// trim, case-fold, strip terminal punctuation, canonicalize numerics.
pub fn normalize_answer(raw: &str) -> String {
    let trimmed = raw
        .trim()
        .trim_end_matches(['.', ',', '!', '?', ';', ':'])
        .trim();
    let folded = trimmed.to_lowercase();
    let stripped: String = folded.chars().filter(|c| *c != ',').collect();
    let numeric_like = !stripped.is_empty()
        && stripped
            .trim_start_matches(['-', '+', '$'])
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.')
        && stripped.chars().any(|c| c.is_ascii_digit());
    if numeric_like {
        canonical_decimal(&stripped)
    } else {
        folded
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_takes_last_number() {
        let got = extract_answer("The answer is 3 + 7 = 10", TaskKind::Numeric);
        assert_eq!(got, ExtractedAnswer::Found("10".into()));
    }

    #[test]
    fn numeric_handles_final_sentence() {
        let text = "Adding both days gives 3 + 7.\nSo she ended up with 10 bags of cans altogether.";
        let got = extract_answer(text, TaskKind::Numeric);
        assert_eq!(got, ExtractedAnswer::Found("10".into()));
        assert!(got.matches("10"));
    }

    #[test]
    fn numeric_missing_marker() {
        assert_eq!(extract_answer("no numbers here", TaskKind::Numeric), ExtractedAnswer::Missing);
        assert!(!ExtractedAnswer::Missing.matches("10"));
    }

    #[test]
    fn numeric_strips_currency_and_commas() {
        let got = extract_answer("total cost is $1,234.50", TaskKind::Numeric);
        assert_eq!(got, ExtractedAnswer::Found("1234.5".into()));
    }

    #[test]
    fn numeric_trailing_period_not_captured() {
        let got = extract_answer("the count is 42.", TaskKind::Numeric);
        assert_eq!(got, ExtractedAnswer::Found("42".into()));
    }

    #[test]
    fn multiple_choice_last_standalone_letter() {
        let got = extract_answer("Options C and D are close but the answer is (B)", TaskKind::MultipleChoice);
        assert_eq!(got, ExtractedAnswer::Found("B".into()));
        assert_eq!(
            extract_answer("no options mentioned", TaskKind::MultipleChoice),
            ExtractedAnswer::Missing
        );
    }

    #[test]
    fn free_form_last_nonempty_line() {
        let got = extract_answer("thinking...\n\n  Paris  \n\n", TaskKind::FreeForm);
        assert_eq!(got, ExtractedAnswer::Found("Paris".into()));
    }

    #[test]
    fn canonical_decimal_cases() {
        assert_eq!(canonical_decimal("10.0"), "10");
        assert_eq!(canonical_decimal("010"), "10");
        assert_eq!(canonical_decimal("3.50"), "3.5");
        assert_eq!(canonical_decimal("$1,000"), "1000");
        assert_eq!(canonical_decimal("-0"), "0");
        assert_eq!(canonical_decimal("-0.0"), "0");
        assert_eq!(canonical_decimal("+7"), "7");
    }

    #[test]
    fn normalize_makes_numeric_forms_equal() {
        assert_eq!(normalize_answer("10"), normalize_answer("10.0"));
        assert_eq!(normalize_answer(" 1,000 "), normalize_answer("1000"));
        assert_eq!(normalize_answer("Paris."), normalize_answer("paris"));
        assert_ne!(normalize_answer("10"), normalize_answer("11"));
    }
}
