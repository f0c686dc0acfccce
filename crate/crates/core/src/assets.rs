//! Data files shipped with the crate, embedded at build time so the CLI and
//! tests work without a checkout of `data/`.

use crate::data::TopicCatalog;

pub const TOPICS_JSON: &str = include_str!("../data/topics.json");
pub const GUIDELINES_DJE: &str = include_str!("../data/guidelines/dje.txt");
pub const RULES_DJE: &str = include_str!("../data/rules/dje.json");
pub const LEXICON_DJE: &str = include_str!("../data/lexicon/dje.tsv");
pub const GLOSSARY_DJE: &str = include_str!("../data/glossary.tsv");
pub const SENTENCES_DJE: &str = include_str!("../data/sentences.txt");
pub const CHECKER_EXEMPLARS: &str = include_str!("../data/checker_exemplars.json");
pub const SCENARIOS_JSON: &str = include_str!("../data/scenarios.json");
pub const DIRECTIVE_VERBS: &str = include_str!("../data/directive_verbs.txt");

/// English name of a supported target language; the code itself otherwise.
pub fn language_name(code: &str) -> &str {
    match code {
        "dje" => "Zarma",
        "bam" => "Bambara",
        "ful" => "Fulfulde",
        other => other,
    }
}

/// The 20-topic catalog.
pub fn default_topics() -> TopicCatalog {
    TopicCatalog::from_json(TOPICS_JSON).expect("embedded topic catalog is valid")
}

/// Guideline lines for a language, one per non-empty line.
pub fn parse_guidelines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn default_guidelines(lang: &str) -> Option<Vec<String>> {
    match lang {
        "dje" => Some(parse_guidelines(GUIDELINES_DJE)),
        _ => None,
    }
}
