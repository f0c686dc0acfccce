use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::Serialize;

use super::parse::parse_checker_output;
use super::prompt::{
    render_checker_context, render_checker_prompt, render_glossary_info, render_grammar_check,
    Exemplar,
};
use super::triage::{field_status, triage, TriageSummary};
use super::CheckError;
use crate::checkpoint::CheckpointLog;
use crate::data::{CheckedDraft, CheckerAnalysis, Draft, FieldAnalyses, TriageStatus};
use crate::gateway::{Gateway, GenerationRequest};
use crate::grammar::{tokenize, Grammar};
use crate::pool::map_ordered;
use crate::retrieval::{glossary_info, KnowledgeBase};

/// Judges one target-language sentence.
pub trait SentenceChecker: Send + Sync {
    /// `tag` identifies the call for replay; it is unique per sentence and
    /// attempt within a run.
    fn analyze(&self, sentence: &str, tag: &str) -> Result<CheckerAnalysis, CheckError>;
}

/// Model-backed checker grounded in rule-engine findings, glossary matches,
/// retrieved clean sentences and worked examples.
#[derive(Debug, Clone)]
pub struct RagChecker {
    gateway: Gateway,
    kb: Arc<KnowledgeBase>,
    grammar: Arc<Grammar>,
    exemplars: Vec<Exemplar>,
    language: String,
    pub top_k: usize,
    pub n_shot: usize,
    pub max_output_tokens: u32,
    pub temperature: f32,
}

impl RagChecker {
    pub fn new(
        gateway: Gateway,
        kb: Arc<KnowledgeBase>,
        grammar: Arc<Grammar>,
        exemplars: Vec<Exemplar>,
        language: impl Into<String>,
    ) -> Self {
        Self {
            gateway,
            kb,
            grammar,
            exemplars,
            language: language.into(),
            top_k: 5,
            n_shot: 3,
            max_output_tokens: 512,
            temperature: 0.0,
        }
    }

    /// The request sent for `sentence`.
    pub fn request(&self, sentence: &str, tag: &str) -> GenerationRequest {
        let violations = self.grammar.check(sentence);
        let words: Vec<&str> = tokenize(sentence)
            .into_iter()
            .filter(|t| t.is_word())
            .map(|t| t.text)
            .collect();
        let matches = glossary_info(&self.kb, &words);
        let user = render_checker_prompt(
            &self.language,
            sentence,
            &render_grammar_check(sentence, &violations),
            &render_glossary_info(&self.language, &matches),
        );
        let hits = self.kb.retrieve(sentence, self.top_k);
        let shots = &self.exemplars[..self.n_shot.min(self.exemplars.len())];
        let system = render_checker_context(self.kb.rules(), &violations, &hits, shots);
        GenerationRequest::new(system, user, tag)
            .with_sampling(self.max_output_tokens, self.temperature)
    }
}

impl SentenceChecker for RagChecker {
    fn analyze(&self, sentence: &str, tag: &str) -> Result<CheckerAnalysis, CheckError> {
        let result = self.gateway.generate(&self.request(sentence, tag))?;
        parse_checker_output(&result.text).map_err(|source| CheckError::Parse {
            tag: tag.to_string(),
            source,
        })
    }
}

/// Offline checker: the rule engine's verdict and suggestions only.
#[derive(Debug, Clone)]
pub struct RuleChecker {
    grammar: Arc<Grammar>,
}

impl RuleChecker {
    pub fn new(grammar: Arc<Grammar>) -> Self {
        Self { grammar }
    }
}

impl SentenceChecker for RuleChecker {
    fn analyze(&self, sentence: &str, _tag: &str) -> Result<CheckerAnalysis, CheckError> {
        let violations = self.grammar.check(sentence);
        if violations.is_empty() {
            return Ok(CheckerAnalysis::correct());
        }
        let reason = violations
            .iter()
            .map(|v| v.message.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        Ok(CheckerAnalysis::incorrect(reason, self.grammar.suggest(sentence, &violations)))
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub workers: usize,
    /// Attempts per field when the checker output cannot be parsed.
    pub max_attempts: u32,
    /// Check the chain of thought of drafts that would otherwise be accepted.
    pub check_cot: bool,
    pub checkpoint: Option<PathBuf>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            workers: 4,
            max_attempts: 3,
            check_cot: true,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    /// In input order.
    pub checked: Vec<CheckedDraft>,
    pub summary: TriageSummary,
    /// Drafts taken from the checkpoint instead of being re-checked.
    pub resumed: usize,
}

const UNPARSEABLE: &str = "checker output could not be parsed";

fn analyze_field(
    checker: &dyn SentenceChecker,
    draft_id: &str,
    field: &str,
    text: &str,
    max_attempts: u32,
) -> Result<CheckerAnalysis, CheckError> {
    for attempt in 0..max_attempts.max(1) {
        match checker.analyze(text, &format!("check/{draft_id}/{field}/{attempt}")) {
            Ok(a) => return Ok(a),
            Err(CheckError::Parse { tag, source }) => {
                tracing::warn!(%tag, error = %source, "retrying checker call");
            }
            Err(e) => return Err(e),
        }
    }
    // Nothing usable after the retry budget: route to mandatory review.
    Ok(CheckerAnalysis::incorrect(UNPARSEABLE, Vec::new()))
}

/// Check one draft: instruction and response, then the chain of thought
/// when both pass.
pub fn check_draft(
    draft: &Draft,
    checker: &dyn SentenceChecker,
    options: &BatchOptions,
) -> Result<CheckedDraft, CheckError> {
    let field = |name: &str, text: &str| analyze_field(checker, &draft.id, name, text, options.max_attempts);
    let mut analyses = FieldAnalyses {
        instr_lrl: Some(field("instr_lrl", &draft.instr_lrl)?),
        resp_lrl: Some(field("resp_lrl", &draft.resp_lrl)?),
        cot_lrl: None,
    };
    let passed = [&analyses.instr_lrl, &analyses.resp_lrl]
        .into_iter()
        .flatten()
        .all(|a| field_status(a) == TriageStatus::Accepted);
    if passed && options.check_cot && draft.has_cot() {
        analyses.cot_lrl = Some(field("CoT_lrl", &draft.cot_lrl)?);
    }
    Ok(triage(draft.clone(), Some(analyses)))
}

/// Check and triage every draft. Output order equals input order. With a
/// checkpoint, completed drafts are logged as they finish and skipped on the
/// next run. A gateway failure stops the batch; finished work stays logged.
pub fn run_batch(
    drafts: &[Draft],
    checker: &dyn SentenceChecker,
    options: &BatchOptions,
) -> Result<BatchReport, CheckError> {
    let mut seen = HashSet::new();
    if let Some(d) = drafts.iter().find(|d| !seen.insert(d.id.as_str())) {
        return Err(CheckError::DuplicateDraft(d.id.clone()));
    }
    let (log, prior) = match &options.checkpoint {
        Some(path) => {
            let (log, prior) = CheckpointLog::<CheckedDraft>::open(path)?;
            (Some(log), prior)
        }
        None => (None, Vec::new()),
    };
    let mut done: HashMap<String, CheckedDraft> = prior
        .into_iter()
        .map(|c| (c.draft.id.clone(), c))
        .collect();
    // An entry only counts if it was produced from the same draft.
    done.retain(|id, c| drafts.iter().any(|d| &d.id == id && *d == c.draft));
    let resumed = done.len();

    let pending: Vec<&Draft> = drafts.iter().filter(|d| !done.contains_key(&d.id)).collect();
    let abort = AtomicBool::new(false);
    let results = map_ordered(&pending, options.workers, |draft| {
        if abort.load(Ordering::Relaxed) {
            return None;
        }
        let outcome = check_draft(draft, checker, options).and_then(|c| {
            if let Some(log) = &log {
                log.append(&c)?;
            }
            Ok(c)
        });
        if outcome.is_err() {
            abort.store(true, Ordering::Relaxed);
        }
        Some(outcome)
    });
    for outcome in results.into_iter().flatten() {
        let c = outcome?;
        done.insert(c.draft.id.clone(), c);
    }
    if done.len() < drafts.len() {
        return Err(CheckError::Aborted);
    }
    let checked: Vec<CheckedDraft> = drafts
        .iter()
        .map(|d| done.remove(&d.id).expect("every draft checked"))
        .collect();
    Ok(BatchReport {
        summary: TriageSummary::from_checked(&checked),
        checked,
        resumed,
    })
}
