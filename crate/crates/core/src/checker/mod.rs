//! Automated quality check: prompt assembly, verdict parsing, triage and
//! checker evaluation.
//!
//! Each draft's `instr_lrl` and `resp_lrl` are judged separately; the draft
//! takes the worst field status (accepted < low priority < top priority).

mod batch;
mod eval;
mod gleu;
mod parse;
mod prompt;
mod triage;

use thiserror::Error;

pub use batch::{check_draft, run_batch, BatchOptions, BatchReport, RagChecker, RuleChecker, SentenceChecker};
pub use eval::{evaluate_checker, CheckerMetrics, EvalItem};
pub use gleu::{gleu, EmptyReference, MAX_ORDER};
pub use parse::{parse_checker_output, render_analysis, ParseError};
pub use prompt::{
    parse_exemplars, render_checker_context, render_checker_prompt, render_glossary_info,
    render_grammar_check, Exemplar, NO_GLOSSARY_MATCHES, NO_VIOLATIONS,
};
pub use triage::{field_status, percent, triage, TriageSummary};

use crate::checkpoint::CheckpointError;
use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("checker output for {tag}: {source}")]
    Parse {
        tag: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Gleu(#[from] EmptyReference),
    #[error("test set has no {0} sentences")]
    EmptyPartition(&'static str),
    #[error("duplicate draft id {0:?}")]
    DuplicateDraft(String),
    #[error("batch stopped before every draft was checked")]
    Aborted,
}
