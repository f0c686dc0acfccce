//! Dataset statistics and triage reporting.

use std::collections::HashMap;
use std::fmt::Write;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::annotation::MergedDecision;
use crate::checker::{percent, TriageSummary};
use crate::data::{CheckedDraft, Draft, ErrorCategory, TriageStatus, Verdict};
use crate::text::word_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstructionType {
    OpenEnded,
    Definition,
    Explanation,
    ListGeneration,
}

static LIST: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\bdonne[sz]?\b.*\bexemples?\b|\blist(?:e|es|ez)\b|\bénumére[sz]?\b|\bénumère[sz]?\b|\bcite[sz]?\s+(?:\d+|deux|trois|quatre|cinq|six|sept|huit|neuf|dix)\b",
    )
    .expect("valid regex")
});
static DEFINITION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"qu['’]est[- ]ce qu|\bdéfinis(?:sez)?\b|\bque signifie\b|\bdéfinition\b").expect("valid regex")
});
static EXPLANATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\bexpliquez?\b|\bpourquoi\b|\bdécri(?:s|vez) le fonctionnement\b").expect("valid regex")
});

/// First matching pattern family wins: list, definition, explanation;
/// anything else is open-ended.
pub fn classify_instruction_type(instr_fr: &str) -> InstructionType {
    let text = instr_fr.to_lowercase();
    if LIST.is_match(&text) {
        InstructionType::ListGeneration
    } else if DEFINITION.is_match(&text) {
        InstructionType::Definition
    } else if EXPLANATION.is_match(&text) {
        InstructionType::Explanation
    } else {
        InstructionType::OpenEnded
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionBuckets {
    /// Up to 10 words (empty instructions included).
    pub up_to_10: usize,
    pub from_11_to_20: usize,
    pub over_20: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseBuckets {
    pub under_50: usize,
    pub from_50_to_100: usize,
    /// Breaks the response limit; flagged.
    pub over_100: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCounts {
    pub open_ended: usize,
    pub definition: usize,
    pub explanation: usize,
    pub list_generation: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub instructions: InstructionBuckets,
    pub responses: ResponseBuckets,
    pub cot_count: usize,
    pub types: TypeCounts,
}

/// Length buckets use the target-language instruction and response word
/// counts; types come from the French instruction.
pub fn dataset_stats(drafts: &[Draft]) -> DatasetStats {
    let mut s = DatasetStats {
        total: drafts.len(),
        ..DatasetStats::default()
    };
    for d in drafts {
        match word_count(&d.instr_lrl) {
            0..=10 => s.instructions.up_to_10 += 1,
            11..=20 => s.instructions.from_11_to_20 += 1,
            _ => s.instructions.over_20 += 1,
        }
        match word_count(&d.resp_lrl) {
            0..=49 => s.responses.under_50 += 1,
            50..=100 => s.responses.from_50_to_100 += 1,
            _ => s.responses.over_100 += 1,
        }
        if d.has_cot() {
            s.cot_count += 1;
        }
        match classify_instruction_type(&d.instr_fr) {
            InstructionType::OpenEnded => s.types.open_ended += 1,
            InstructionType::Definition => s.types.definition += 1,
            InstructionType::Explanation => s.types.explanation += 1,
            InstructionType::ListGeneration => s.types.list_generation += 1,
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub label: String,
    pub count: usize,
    pub pct: f64,
}

impl StatRow {
    fn new(label: &str, count: usize, of: usize) -> Self {
        Self {
            label: label.to_string(),
            count,
            pct: percent(count, of),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageStats {
    pub summary: TriageSummary,
    /// Human error categories on top-priority drafts, as a share of all
    /// top-priority drafts. Empty without annotations.
    pub top_categories: Vec<StatRow>,
    /// Human outcome on low-priority drafts, as a share of all low-priority
    /// drafts. Empty without annotations.
    pub low_outcomes: Vec<StatRow>,
}

pub fn triage_stats(checked: &[CheckedDraft], decisions: &[MergedDecision]) -> TriageStats {
    let summary = TriageSummary::from_checked(checked);
    let by_id: HashMap<&str, &MergedDecision> = decisions
        .iter()
        .filter(|d| !d.needs_adjudication)
        .map(|d| (d.draft_id.as_str(), d))
        .collect();
    let decided = |status: TriageStatus| {
        checked
            .iter()
            .filter(move |c| c.status == status)
            .filter_map(|c| by_id.get(c.draft.id.as_str()).copied())
    };
    let mut top_categories = Vec::new();
    if summary.top_priority > 0 && !by_id.is_empty() {
        for cat in ErrorCategory::ALL {
            let n = decided(TriageStatus::TopPriority)
                .filter(|d| d.verdict == Some(Verdict::No) && d.error_category == Some(cat))
                .count();
            if n > 0 {
                top_categories.push(StatRow::new(cat.label(), n, summary.top_priority));
            }
        }
    }
    let mut low_outcomes = Vec::new();
    if summary.low_priority > 0 && !by_id.is_empty() {
        let yes = decided(TriageStatus::LowPriority)
            .filter(|d| d.verdict == Some(Verdict::Yes))
            .count();
        let no = decided(TriageStatus::LowPriority)
            .filter(|d| d.verdict == Some(Verdict::No))
            .count();
        low_outcomes.push(StatRow::new("Already correct", yes, summary.low_priority));
        low_outcomes.push(StatRow::new("Further adjustments", no, summary.low_priority));
    }
    TriageStats {
        summary,
        top_categories,
        low_outcomes,
    }
}

fn row(out: &mut String, label: &str, count: usize, pct: f64) {
    let _ = writeln!(out, "  {label:<36} {count:>8} {pct:>7.2}");
}

/// Plain-text report of both tables.
pub fn render_stats(stats: &DatasetStats, triage: Option<&TriageStats>) -> String {
    let n = stats.total;
    let mut out = String::from("Dataset characteristics\n");
    row(&mut out, "Instructions with 1-10 words", stats.instructions.up_to_10, percent(stats.instructions.up_to_10, n));
    row(&mut out, "Instructions with 11-20 words", stats.instructions.from_11_to_20, percent(stats.instructions.from_11_to_20, n));
    row(&mut out, "Instructions with >20 words", stats.instructions.over_20, percent(stats.instructions.over_20, n));
    row(&mut out, "Responses with <50 words", stats.responses.under_50, percent(stats.responses.under_50, n));
    row(&mut out, "Responses with 50-100 words", stats.responses.from_50_to_100, percent(stats.responses.from_50_to_100, n));
    if stats.responses.over_100 > 0 {
        row(&mut out, "Responses with >100 words (flagged)", stats.responses.over_100, percent(stats.responses.over_100, n));
    }
    row(&mut out, "Instructions with CoT", stats.cot_count, percent(stats.cot_count, n));
    row(&mut out, "Open-ended questions", stats.types.open_ended, percent(stats.types.open_ended, n));
    row(&mut out, "Definition requests", stats.types.definition, percent(stats.types.definition, n));
    row(&mut out, "Explanation tasks", stats.types.explanation, percent(stats.types.explanation, n));
    row(&mut out, "List generation tasks", stats.types.list_generation, percent(stats.types.list_generation, n));
    if let Some(t) = triage {
        let s = &t.summary;
        out.push_str("Quality assessment\n");
        row(&mut out, "Total drafts processed", s.total, if s.total > 0 { 100.0 } else { 0.0 });
        row(&mut out, "Accepted without correction", s.accepted, s.accepted_pct);
        row(&mut out, "Low priority (auto-corrected)", s.low_priority, s.low_priority_pct);
        row(&mut out, "Top priority (needs review)", s.top_priority, s.top_priority_pct);
        if !t.top_categories.is_empty() {
            out.push_str("Human validation, top priority\n");
            for r in &t.top_categories {
                row(&mut out, &r.label, r.count, r.pct);
            }
        }
        if !t.low_outcomes.is_empty() {
            out.push_str("Human validation, low priority\n");
            for r in &t.low_outcomes {
                row(&mut out, &r.label, r.count, r.pct);
            }
        }
    }
    out
}
