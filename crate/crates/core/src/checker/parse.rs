use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::data::{CheckerAnalysis, CorrectionOption, MAX_OPTIONS};

const VERDICT_MARKER: &str = "is the sentence correct?";
const UNSPECIFIED_REASON: &str = "unspecified";

/// Separators between a corrected sentence and its explanation, in
/// priority order.
const EXPLANATION_DELIMITERS: [&str; 6] = [" — ", " – ", " -- ", " - ", " (", " Explanation:"];

static OPTION_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^option\s*([123])\s*[:.)\-]\s*(.*)$").expect("valid regex"));

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("checker output has no \"Is the sentence correct?\" line with Yes or No")]
    MissingVerdict,
}

/// Strip list bullets, markdown emphasis and brackets around a line.
fn clean(line: &str) -> &str {
    line.trim()
        .trim_start_matches(['-', '•', '>'])
        .trim()
        .trim_matches(|c| c == '*' || c == '_')
        .trim()
}

fn strip_wrappers(s: &str) -> String {
    s.trim()
        .trim_matches(|c| matches!(c, '*' | '[' | ']' | '"' | '“' | '”' | '`'))
        .trim()
        .to_string()
}

fn split_option(rest: &str) -> CorrectionOption {
    let cut = EXPLANATION_DELIMITERS
        .iter()
        .filter_map(|d| rest.find(d).map(|i| (i, *d)))
        .min_by_key(|(i, _)| *i);
    match cut {
        Some((i, d)) => {
            let mut explanation = rest[i + d.len()..].trim();
            if d == " (" {
                explanation = explanation.strip_suffix(')').unwrap_or(explanation).trim();
            }
            CorrectionOption::new(strip_wrappers(&rest[..i]), explanation)
        }
        None => CorrectionOption::new(strip_wrappers(rest), ""),
    }
}

/// Read the verdict, reason and up to three options from checker output.
/// A "No" without parseable options is valid (the draft then needs a human).
pub fn parse_checker_output(completion: &str) -> Result<CheckerAnalysis, ParseError> {
    let mut verdict = None;
    let mut reason = None;
    let mut options: Vec<(u8, CorrectionOption)> = Vec::new();
    for raw in completion.lines() {
        let line = clean(raw);
        let lower = line.to_lowercase();
        if verdict.is_none() {
            if let Some(pos) = lower.find(VERDICT_MARKER) {
                let answer = strip_wrappers(&lower[pos + VERDICT_MARKER.len()..]);
                if answer.starts_with("yes") {
                    verdict = Some(true);
                } else if answer.starts_with("no") {
                    verdict = Some(false);
                }
                continue;
            }
        }
        if reason.is_none() && lower.starts_with("reason") {
            if let Some((_, text)) = line.split_once(':') {
                let text = text.trim().trim_matches('*').trim().to_string();
                if !text.is_empty() && !text.eq_ignore_ascii_case("n/a") {
                    reason = Some(text);
                }
            }
            continue;
        }
        if let Some(caps) = OPTION_LINE.captures(line) {
            let n: u8 = caps[1].parse().expect("regex captures a digit");
            let option = split_option(&caps[2]);
            if !option.text.is_empty() && !options.iter().any(|(m, _)| *m == n) {
                options.push((n, option));
            }
        }
    }
    let is_correct = verdict.ok_or(ParseError::MissingVerdict)?;
    if is_correct {
        return Ok(CheckerAnalysis {
            is_correct: true,
            reason,
            options: Vec::new(),
        });
    }
    options.sort_by_key(|(n, _)| *n);
    let mut options: Vec<CorrectionOption> = options.into_iter().map(|(_, o)| o).collect();
    options.truncate(MAX_OPTIONS);
    Ok(CheckerAnalysis {
        is_correct: false,
        reason: Some(reason.unwrap_or_else(|| UNSPECIFIED_REASON.to_string())),
        options,
    })
}

/// Render an analysis in the checker's output format; the inverse of
/// [`parse_checker_output`] for options free of explanation delimiters.
pub fn render_analysis(analysis: &CheckerAnalysis) -> String {
    let mut out = format!(
        "Is the sentence correct? {}\n",
        if analysis.is_correct { "Yes" } else { "No" }
    );
    out.push_str(&format!(
        "Reason for Incorrectness (if applicable): {}\n",
        analysis.reason.as_deref().unwrap_or("N/A")
    ));
    out.push_str("Corrections (if incorrect):\n");
    for (i, o) in analysis.options.iter().enumerate() {
        if o.explanation.is_empty() {
            out.push_str(&format!("  Option {}: {}\n", i + 1, o.text));
        } else {
            out.push_str(&format!("  Option {}: {} — {}\n", i + 1, o.text, o.explanation));
        }
    }
    out
}
