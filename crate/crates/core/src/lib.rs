//! Instruction-tuning dataset pipeline for low-resource languages.
//!
//! The crate covers every stage of the workflow: French seed generation,
//! target-language draft generation, rule- and retrieval-grounded automated
//! checking with three-way triage, the annotation round-trip with agreement
//! statistics, dataset analytics and production-cost modeling.
//!
//! All model access goes through [`gateway::Gateway`], which has a
//! deterministic record/replay backend so the whole pipeline can be run and
//! tested offline.

pub mod analytics;
pub mod annotation;
pub mod assets;
pub mod checker;
pub mod checkpoint;
pub mod config;
pub mod cost;
pub mod data;
pub mod draft;
pub mod gateway;
pub mod glossary;
pub mod grammar;
pub mod jsonl;
pub mod pipeline;
mod pool;
pub mod retrieval;
pub mod seed;
pub mod text;

pub use data::{
    AnnotationRecord, CheckedDraft, CheckerAnalysis, CorrectionOption, Draft, ErrorCategory,
    LanguageCode, SeedInstruction, Topic, TopicCatalog, TriageStatus, Verdict, Violation,
};
