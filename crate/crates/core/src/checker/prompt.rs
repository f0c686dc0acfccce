use std::fmt::Write;

use crate::data::Violation;
use crate::glossary::GlossaryEntry;
use crate::grammar::{tokenize, RuleSet};
use crate::retrieval::RetrievalHit;

const ANALYZER_TEMPLATE: &str = "\
You are a {language} language expert. Analyze this potentially corrupted {language} sentence: \"{sentence}\"
Rely primarily on your expertise in {language} grammar and meaning.
Recognize proper nouns unless contradicted by the glossary.
Use the grammar check and glossary below as supplementary aids.

INPUT DATA:
Grammar check results: {grammar_check}
Glossary information: {glossary_info}

OUTPUT FORMAT:
Provide the analysis in this format:
Is the sentence correct? [Yes/No]
Reason for Incorrectness (if applicable): [Brief reason]
Corrections (if incorrect):
  Option 1: [Corrected sentence with explanation]
  Option 2: [Corrected sentence with explanation]
  Option 3: [Corrected sentence with explanation]
";

pub const NO_VIOLATIONS: &str = "no rule violations detected";
pub const NO_GLOSSARY_MATCHES: &str = "no glossary matches";

/// The analyzer prompt with its three slots filled.
pub fn render_checker_prompt(
    language: &str,
    sentence: &str,
    grammar_check: &str,
    glossary_info: &str,
) -> String {
    ANALYZER_TEMPLATE
        .replace("{language}", language)
        .replace("{grammar_check}", grammar_check)
        .replace("{glossary_info}", glossary_info)
        .replace("{sentence}", sentence)
}

/// Numbered rule citations, one per line, or [`NO_VIOLATIONS`].
pub fn render_grammar_check(sentence: &str, violations: &[Violation]) -> String {
    if violations.is_empty() {
        return NO_VIOLATIONS.to_string();
    }
    let tokens = tokenize(sentence);
    let mut out = format!("{} finding(s)", violations.len());
    for (i, v) in violations.iter().enumerate() {
        let span = tokens
            .get(v.span.start..v.span.end.min(tokens.len()))
            .map(|ts| ts.iter().map(|t| t.text).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        let rule = if v.rule_id == 0 {
            "Lexicon".to_string()
        } else {
            format!("Rule {}", v.rule_id)
        };
        let _ = write!(out, "\n  {}. {rule} ({}) at \"{span}\": {}", i + 1, v.category, v.message);
    }
    out
}

/// `token: French "x", <language> "y"` per matched token, or
/// [`NO_GLOSSARY_MATCHES`].
pub fn render_glossary_info(language: &str, matches: &[(String, Option<&GlossaryEntry>)]) -> String {
    let lines: Vec<String> = matches
        .iter()
        .filter_map(|(token, entry)| {
            entry.map(|e| format!("{token}: French \"{}\", {language} \"{}\"", e.term_fr, e.term_lrl))
        })
        .collect();
    if lines.is_empty() {
        return NO_GLOSSARY_MATCHES.to_string();
    }
    format!("{} match(es)\n  {}", lines.len(), lines.join("\n  "))
}

/// Worked example shown to the checker model.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exemplar {
    pub sentence: String,
    pub analysis: String,
}

pub fn parse_exemplars(json: &str) -> Result<Vec<Exemplar>, serde_json::Error> {
    serde_json::from_str(json)
}

/// Reference material sent as the system message: cited rules, similar
/// clean sentences and worked examples.
pub fn render_checker_context(
    rules: &RuleSet,
    violations: &[Violation],
    hits: &[RetrievalHit],
    exemplars: &[Exemplar],
) -> String {
    let mut out = String::from("Reference material for the analysis.\n");
    let mut ids: Vec<u8> = violations.iter().map(|v| v.rule_id).filter(|&id| id != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    if !ids.is_empty() {
        out.push_str("\nGrammar rules cited by the rule check:\n");
        for rule in ids.iter().filter_map(|&id| rules.get(id)) {
            let examples: Vec<String> = rule
                .examples
                .iter()
                .map(|e| match &e.wrong {
                    Some(w) => format!("{w} -> {}", e.right),
                    None => e.right.clone(),
                })
                .collect();
            let _ = writeln!(
                out,
                "Rule {} ({}): {} Examples: {}",
                rule.id,
                rule.title,
                rule.summary,
                examples.join("; ")
            );
        }
    }
    if !hits.is_empty() {
        out.push_str("\nClean sentences similar to the input:\n");
        for h in hits {
            let _ = writeln!(out, "{}. {}", h.rank, h.text);
        }
    }
    if !exemplars.is_empty() {
        out.push_str("\nWorked examples:\n");
        for e in exemplars {
            let _ = writeln!(out, "Sentence: \"{}\"\n{}\n", e.sentence, e.analysis);
        }
    }
    out.trim_end().to_string()
}
