//! Domain types shared by every stage, their canonical serialized form and
//! draft validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::word_count;

/// Sentinel stored in `CoT_lrl` when a draft carries no chain of thought.
pub const NO_COT: &str = "N/A";
/// Upper bound on `resp_lrl` length, in words.
pub const MAX_RESPONSE_WORDS: usize = 100;
/// Upper bound on `CoT_lrl` length, in words.
pub const MAX_COT_WORDS: usize = 200;
/// A checker verdict carries at most this many correction options.
pub const MAX_OPTIONS: usize = 3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid language code {0:?}: expected a short lowercase tag")]
    InvalidLanguage(String),
    #[error("topic catalog: {0}")]
    Catalog(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// Short lowercase language tag such as `dje` for Zarma.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: impl Into<String>) -> Result<Self, DataError> {
        let code = code.into();
        let ok = !code.is_empty()
            && code.len() <= 8
            && code.chars().all(|c| c.is_ascii_lowercase() || c == '-' || c == '_');
        if ok {
            Ok(Self(code))
        } else {
            Err(DataError::InvalidLanguage(code))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = DataError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<LanguageCode> for String {
    fn from(value: LanguageCode) -> Self {
        value.0
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topic {
    pub id: u32,
    pub name_fr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_en: Option<String>,
    pub description_fr: String,
    pub requires_cot: bool,
}

/// The topic list seeds are drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicCatalog {
    topics: Vec<Topic>,
}

impl TopicCatalog {
    pub fn new(topics: Vec<Topic>) -> Result<Self, DataError> {
        if topics.is_empty() {
            return Err(DataError::Catalog("catalog is empty".into()));
        }
        let mut ids = BTreeSet::new();
        let mut names = BTreeSet::new();
        for topic in &topics {
            if !ids.insert(topic.id) {
                return Err(DataError::Catalog(format!("duplicate topic id {}", topic.id)));
            }
            if topic.name_fr.trim().is_empty() {
                return Err(DataError::Catalog(format!("topic {} has an empty name", topic.id)));
            }
            if !names.insert(topic.name_fr.as_str()) {
                return Err(DataError::Catalog(format!("duplicate topic name {:?}", topic.name_fr)));
            }
        }
        Ok(Self { topics })
    }

    /// Like [`TopicCatalog::new`] but also pins the catalog size.
    pub fn with_expected_size(topics: Vec<Topic>, expected: usize) -> Result<Self, DataError> {
        if topics.len() != expected {
            return Err(DataError::Catalog(format!(
                "expected {expected} topics, found {}",
                topics.len()
            )));
        }
        Self::new(topics)
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let topics: Vec<Topic> = serde_json::from_str(text).map_err(|source| DataError::Json {
            path: "<topics>".into(),
            source,
        })?;
        Self::new(topics)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let topics: Vec<Topic> = serde_json::from_str(&text).map_err(|source| DataError::Json {
            path: path.display().to_string(),
            source,
        })?;
        Self::new(topics)
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn by_name(&self, name_fr: &str) -> Option<&Topic> {
        self.topics.iter().find(|t| t.name_fr == name_fr)
    }

    pub fn by_id(&self, id: u32) -> Option<&Topic> {
        self.topics.iter().find(|t| t.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedInstruction {
    pub id: String,
    pub instruction_fr: String,
    pub context_fr: String,
}

/// One instruction-response pair in the target language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Draft {
    pub id: String,
    pub instr_fr: String,
    pub instr_lrl: String,
    pub resp_lrl: String,
    #[serde(rename = "CoT_lrl")]
    pub cot_lrl: String,
    pub topic_fr: String,
    pub lang: LanguageCode,
}

impl Draft {
    pub fn has_cot(&self) -> bool {
        self.cot_lrl != NO_COT
    }
}

/// A broken draft invariant. Validation never fails; it reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    EmptyField(&'static str),
    ResponseTooLong { words: usize },
    CotTooLong { words: usize },
    MissingCot { topic: String },
    UnexpectedCot { topic: String },
    UnknownTopic(String),
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyField(name) => write!(f, "{name} is empty"),
            Self::ResponseTooLong { words } => write!(
                f,
                "response exceeds {MAX_RESPONSE_WORDS} words ({words} words)"
            ),
            Self::CotTooLong { words } => {
                write!(f, "chain of thought exceeds {MAX_COT_WORDS} words ({words} words)")
            }
            Self::MissingCot { topic } => {
                write!(f, "missing CoT for reasoning topic {topic:?}")
            }
            Self::UnexpectedCot { topic } => write!(
                f,
                "CoT mismatch: topic {topic:?} takes no chain of thought, CoT_lrl must be \"{NO_COT}\""
            ),
            Self::UnknownTopic(name) => write!(f, "unknown topic {name:?}"),
        }
    }
}

/// Check every draft invariant against the catalog. An empty report means
/// the draft is valid.
pub fn validate_draft(draft: &Draft, topics: &TopicCatalog) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    for (name, value) in [
        ("id", &draft.id),
        ("instr_fr", &draft.instr_fr),
        ("instr_lrl", &draft.instr_lrl),
        ("resp_lrl", &draft.resp_lrl),
        ("CoT_lrl", &draft.cot_lrl),
    ] {
        if value.trim().is_empty() {
            issues.push(ValidationIssue::EmptyField(name));
        }
    }
    let words = word_count(&draft.resp_lrl);
    if words > MAX_RESPONSE_WORDS {
        issues.push(ValidationIssue::ResponseTooLong { words });
    }
    if draft.has_cot() {
        let words = word_count(&draft.cot_lrl);
        if words > MAX_COT_WORDS {
            issues.push(ValidationIssue::CotTooLong { words });
        }
    }
    match topics.by_name(&draft.topic_fr) {
        None => issues.push(ValidationIssue::UnknownTopic(draft.topic_fr.clone())),
        Some(topic) => {
            let cot_present = draft.has_cot() && !draft.cot_lrl.trim().is_empty();
            if topic.requires_cot && !cot_present {
                issues.push(ValidationIssue::MissingCot {
                    topic: topic.name_fr.clone(),
                });
            } else if !topic.requires_cot && draft.has_cot() {
                issues.push(ValidationIssue::UnexpectedCot {
                    topic: topic.name_fr.clone(),
                });
            }
        }
    }
    issues
}

/// Closed set of error categories used by the rule engine and annotators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Fluency,
    SuffixMisuse,
    TenseInconsistency,
    Orthography,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        Self::Fluency,
        Self::SuffixMisuse,
        Self::TenseInconsistency,
        Self::Orthography,
    ];

    /// Wire token, e.g. `suffix_misuse`.
    pub fn token(self) -> &'static str {
        match self {
            Self::Fluency => "fluency",
            Self::SuffixMisuse => "suffix_misuse",
            Self::TenseInconsistency => "tense_inconsistency",
            Self::Orthography => "orthography",
        }
    }

    /// Human-readable label used in review sheets, e.g. `Suffix Misuse`.
    pub fn label(self) -> &'static str {
        match self {
            Self::Fluency => "Fluency",
            Self::SuffixMisuse => "Suffix Misuse",
            Self::TenseInconsistency => "Tense Inconsistency",
            Self::Orthography => "Orthography",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ErrorCategory {
    type Err = String;

    /// Accepts either the wire token or the sheet label.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|c| c.token() == s || c.label() == s)
            .ok_or_else(|| format!("unknown error category {s:?}"))
    }
}

/// Routing decision of the automated checker. Ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageStatus {
    Accepted,
    LowPriority,
    TopPriority,
}

impl TriageStatus {
    pub const ALL: [TriageStatus; 3] = [Self::Accepted, Self::LowPriority, Self::TopPriority];

    pub fn token(self) -> &'static str {
        match self {
            Self::Accepted => "accepted",
            Self::LowPriority => "low_priority",
            Self::TopPriority => "top_priority",
        }
    }

    /// Sort key putting the drafts that need a human most urgently first.
    pub fn review_rank(self) -> u8 {
        match self {
            Self::TopPriority => 0,
            Self::LowPriority => 1,
            Self::Accepted => 2,
        }
    }
}

impl fmt::Display for TriageStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for TriageStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.token() == s.trim())
            .ok_or_else(|| format!("unknown triage status {s:?}"))
    }
}

/// Half-open token index range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

/// A rule-engine finding. `rule_id` 0 marks lexicon or glossary findings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: u8,
    pub category: ErrorCategory,
    pub span: TokenSpan,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionOption {
    pub text: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub explanation: String,
}

impl CorrectionOption {
    pub fn new(text: impl Into<String>, explanation: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            explanation: explanation.into(),
        }
    }
}

/// Structured verdict for one checked sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerAnalysis {
    pub is_correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<CorrectionOption>,
}

impl CheckerAnalysis {
    pub fn correct() -> Self {
        Self {
            is_correct: true,
            reason: None,
            options: Vec::new(),
        }
    }

    pub fn incorrect(reason: impl Into<String>, mut options: Vec<CorrectionOption>) -> Self {
        options.truncate(MAX_OPTIONS);
        Self {
            is_correct: false,
            reason: Some(reason.into()),
            options,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.options.len() > MAX_OPTIONS {
            return Err(format!("more than {MAX_OPTIONS} correction options"));
        }
        if self.is_correct && !self.options.is_empty() {
            return Err("a correct sentence carries no correction options".into());
        }
        if !self.is_correct && self.reason.is_none() {
            return Err("an incorrect verdict needs a reason".into());
        }
        if self.options.iter().any(|o| o.text.trim().is_empty()) {
            return Err("correction option with empty text".into());
        }
        Ok(())
    }
}

/// Per-field verdicts of a checked draft.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldAnalyses {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instr_lrl: Option<CheckerAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resp_lrl: Option<CheckerAnalysis>,
    #[serde(default, rename = "CoT_lrl", skip_serializing_if = "Option::is_none")]
    pub cot_lrl: Option<CheckerAnalysis>,
}

/// Corrected text per field, present only for low-priority drafts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppliedCorrection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instr_lrl: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resp_lrl: Option<String>,
    #[serde(default, rename = "CoT_lrl", skip_serializing_if = "Option::is_none")]
    pub cot_lrl: Option<String>,
}

impl AppliedCorrection {
    pub fn is_empty(&self) -> bool {
        self.instr_lrl.is_none() && self.resp_lrl.is_none() && self.cot_lrl.is_none()
    }
}

/// A draft after automated checking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CheckedDraftRecord", into = "CheckedDraftRecord")]
pub struct CheckedDraft {
    pub draft: Draft,
    pub status: TriageStatus,
    pub analysis: Option<FieldAnalyses>,
    pub applied_correction: Option<AppliedCorrection>,
}

impl CheckedDraft {
    pub fn validate(&self) -> Result<(), String> {
        let corrected = self.applied_correction.as_ref().is_some_and(|c| !c.is_empty());
        match (self.status, corrected) {
            (TriageStatus::LowPriority, false) => {
                Err(format!("draft {}: low_priority without applied_correction", self.draft.id))
            }
            (TriageStatus::Accepted | TriageStatus::TopPriority, true) => Err(format!(
                "draft {}: applied_correction is only allowed on low_priority drafts",
                self.draft.id
            )),
            _ => Ok(()),
        }
    }

    /// The draft with any applied correction substituted in.
    pub fn corrected_draft(&self) -> Draft {
        let mut draft = self.draft.clone();
        if let Some(c) = &self.applied_correction {
            if let Some(t) = &c.instr_lrl {
                draft.instr_lrl = t.clone();
            }
            if let Some(t) = &c.resp_lrl {
                draft.resp_lrl = t.clone();
            }
            if let Some(t) = &c.cot_lrl {
                draft.cot_lrl = t.clone();
            }
        }
        draft
    }
}

/// Flat on-disk layout of [`CheckedDraft`]: draft fields followed by the
/// checker outputs.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckedDraftRecord {
    id: String,
    instr_fr: String,
    instr_lrl: String,
    resp_lrl: String,
    #[serde(rename = "CoT_lrl")]
    cot_lrl: String,
    topic_fr: String,
    lang: LanguageCode,
    status: TriageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    analysis: Option<FieldAnalyses>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    applied_correction: Option<AppliedCorrection>,
}

impl TryFrom<CheckedDraftRecord> for CheckedDraft {
    type Error = String;
    fn try_from(r: CheckedDraftRecord) -> Result<Self, Self::Error> {
        let checked = CheckedDraft {
            draft: Draft {
                id: r.id,
                instr_fr: r.instr_fr,
                instr_lrl: r.instr_lrl,
                resp_lrl: r.resp_lrl,
                cot_lrl: r.cot_lrl,
                topic_fr: r.topic_fr,
                lang: r.lang,
            },
            status: r.status,
            analysis: r.analysis,
            applied_correction: r.applied_correction,
        };
        checked.validate()?;
        Ok(checked)
    }
}

impl From<CheckedDraft> for CheckedDraftRecord {
    fn from(c: CheckedDraft) -> Self {
        let d = c.draft;
        CheckedDraftRecord {
            id: d.id,
            instr_fr: d.instr_fr,
            instr_lrl: d.instr_lrl,
            resp_lrl: d.resp_lrl,
            cot_lrl: d.cot_lrl,
            topic_fr: d.topic_fr,
            lang: d.lang,
            status: c.status,
            analysis: c.analysis,
            applied_correction: c.applied_correction,
        }
    }
}

/// Annotator's yes/no judgement of a draft.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Yes => "Yes",
            Self::No => "No",
        }
    }
}

impl FromStr for Verdict {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Ok(Self::Yes),
            "no" => Ok(Self::No),
            other => Err(format!("expected Yes or No, found {other:?}")),
        }
    }
}

/// One annotator's verdict on one draft.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationRecord {
    pub draft_id: String,
    pub annotator_id: String,
    pub is_correct: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_category: Option<ErrorCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comments: Option<String>,
}

/// Field-level problem with an annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationIssue {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for AnnotationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<(), AnnotationIssue> {
        let blank = |v: &Option<String>| v.as_deref().is_none_or(|s| s.trim().is_empty());
        if self.draft_id.trim().is_empty() {
            return Err(AnnotationIssue {
                field: "draft_id",
                message: "is empty".into(),
            });
        }
        if self.annotator_id.trim().is_empty() {
            return Err(AnnotationIssue {
                field: "annotator_id",
                message: "is empty".into(),
            });
        }
        if self.is_correct == Verdict::No {
            if blank(&self.corrected_response) {
                return Err(AnnotationIssue {
                    field: "corrected_response",
                    message: "required when is_correct is No".into(),
                });
            }
            if self.error_category.is_none() {
                return Err(AnnotationIssue {
                    field: "error_category",
                    message: "required when is_correct is No".into(),
                });
            }
        }
        Ok(())
    }
}
