//! Rule engine for Zarma: tokenization, violation detection and
//! deterministic correction suggestions.
//!
//! The rule set (`rules/<lang>.json`) is the catalogue the checker prompt
//! cites; only part of it is mechanically checkable. Detected:
//!
//! | finding                                   | rule | category              |
//! |-------------------------------------------|------|-----------------------|
//! | future context, no `ga`/`si` before verb  | 9    | tense_inconsistency   |
//! | base noun as `na` object / final object   | 4    | suffix_misuse         |
//! | plural built by appending `ey`            | 5    | suffix_misuse         |
//! | `mana` not right after the subject        | 19   | tense_inconsistency   |
//! | `si` combined with `ga`, or after verb    | 20   | tense_inconsistency   |
//! | unknown word one edit from glossary term  | 0    | orthography           |
//! | French glossary word in the sentence      | 0    | fluency               |
//!
//! Calques and other fluency problems are left to the model layer.

mod engine;
mod lexicon;
mod rules;
mod tokenize;

use thiserror::Error;

use crate::assets;
use crate::data::{CorrectionOption, Violation};
use crate::glossary::Glossary;

pub use engine::{
    check, suggest, RULE_DEFINITE, RULE_FUTURE, RULE_LEXICAL, RULE_PAST_NEGATIVE, RULE_PLURAL,
    RULE_PRESENT_NEGATIVE,
};
pub use lexicon::{Lexicon, NounForms};
pub use rules::{GrammarRule, RuleExample, RuleKind, RulePattern, RuleSet, WordEntry, RULE_COUNT};
pub use tokenize::{tokenize, Token, TokenKind, EDGE_PUNCTUATION};

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("rule set: {0}")]
    Rules(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("glossary: {0}")]
    Glossary(#[from] crate::glossary::GlossaryError),
    #[error("no grammar resources shipped for language {0:?}")]
    UnknownLanguage(String),
}

/// Rules, lexicon and glossary for one language.
#[derive(Debug, Clone)]
pub struct Grammar {
    pub rules: RuleSet,
    pub lexicon: Lexicon,
    pub glossary: Glossary,
}

impl Grammar {
    pub fn new(rules: RuleSet, lexicon_tsv: &str, glossary: Glossary) -> Result<Self, GrammarError> {
        let lexicon = Lexicon::new(&rules, lexicon_tsv)?;
        Ok(Self {
            rules,
            lexicon,
            glossary,
        })
    }

    /// Resources embedded in the crate.
    pub fn builtin(lang: &str) -> Result<Self, GrammarError> {
        match lang {
            "dje" => Self::new(
                RuleSet::from_json(assets::RULES_DJE)?,
                assets::LEXICON_DJE,
                Glossary::from_tsv(assets::GLOSSARY_DJE)?,
            ),
            other => Err(GrammarError::UnknownLanguage(other.to_string())),
        }
    }

    pub fn check(&self, sentence: &str) -> Vec<Violation> {
        check(sentence, &self.lexicon, &self.glossary)
    }

    pub fn suggest(&self, sentence: &str, violations: &[Violation]) -> Vec<CorrectionOption> {
        suggest(sentence, violations, &self.lexicon, &self.glossary)
    }
}
