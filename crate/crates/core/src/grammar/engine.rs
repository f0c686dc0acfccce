use crate::data::{CorrectionOption, ErrorCategory, TokenSpan, Violation, MAX_OPTIONS};
use crate::glossary::Glossary;
use crate::text::{levenshtein, match_case};

use super::lexicon::Lexicon;
use super::tokenize::{tokenize, Token};

pub const RULE_DEFINITE: u8 = 4;
pub const RULE_PLURAL: u8 = 5;
pub const RULE_FUTURE: u8 = 9;
pub const RULE_PAST_NEGATIVE: u8 = 19;
pub const RULE_PRESENT_NEGATIVE: u8 = 20;
/// Lexicon / glossary findings carry no grammar-rule number.
pub const RULE_LEXICAL: u8 = 0;

const FUTURE_MARKERS: [&str; 2] = ["ga", "si"];
const PAST_NEGATOR: &str = "mana";
const PRESENT_NEGATOR: &str = "si";
const FUTURE_AUX: &str = "ga";
const OBJECT_MARKER: &str = "na";
const MIN_ORTHOGRAPHY_CHARS: usize = 3;

/// Byte-range replacement in the checked sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Edit {
    start: usize,
    end: usize,
    text: String,
}

impl Edit {
    fn insert(at: usize, text: impl Into<String>) -> Self {
        Self {
            start: at,
            end: at,
            text: text.into(),
        }
    }

    fn replace(token: &Token<'_>, text: impl Into<String>) -> Self {
        Self {
            start: token.start,
            end: token.end,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Finding {
    violation: Violation,
    repair: Vec<Edit>,
}

struct Sentence<'a> {
    src: &'a str,
    tokens: Vec<Token<'a>>,
    lower: Vec<String>,
}

impl<'a> Sentence<'a> {
    fn new(src: &'a str) -> Self {
        let tokens = tokenize(src);
        let lower = tokens.iter().map(|t| t.text.to_lowercase()).collect();
        Self { src, tokens, lower }
    }

    fn words(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tokens.len()).filter(|&i| self.tokens[i].is_word())
    }

    fn next_word(&self, i: usize) -> Option<usize> {
        (i + 1..self.tokens.len()).find(|&j| self.tokens[j].is_word())
    }

    fn prev_word(&self, i: usize) -> Option<usize> {
        (0..i).rev().find(|&j| self.tokens[j].is_word())
    }

    /// Delete a word together with the whitespace that separates it from
    /// its neighbour.
    fn delete_word(&self, i: usize) -> Edit {
        let t = &self.tokens[i];
        let after = self.src[t.end..].len() - self.src[t.end..].trim_start().len();
        if after > 0 && t.end + after < self.src.len() {
            return Edit {
                start: t.start,
                end: t.end + after,
                text: String::new(),
            };
        }
        let before = self.src[..t.start].len() - self.src[..t.start].trim_end().len();
        Edit {
            start: t.start - before,
            end: t.end,
            text: String::new(),
        }
    }

    /// True when the word starts a sentence (first word, or after . ! ?).
    fn starts_sentence(&self, i: usize) -> bool {
        (0..i)
            .rev()
            .find(|&j| self.tokens[j].is_word() || matches!(self.tokens[j].text, "." | "!" | "?"))
            .is_none_or(|j| !self.tokens[j].is_word())
    }
}

fn violation(rule_id: u8, category: ErrorCategory, token: usize, message: String) -> Violation {
    Violation {
        rule_id,
        category,
        span: TokenSpan {
            start: token,
            end: token + 1,
        },
        message,
    }
}

fn analyze(sentence: &str, lex: &Lexicon, glossary: &Glossary) -> Vec<Finding> {
    let s = Sentence::new(sentence);
    let mut out = Vec::new();
    loanwords(&s, lex, glossary, &mut out);
    orthography(&s, lex, glossary, &mut out);
    definiteness(&s, lex, &mut out);
    let subject = s.words().find(|&i| lex.is_pronoun(&s.lower[i]));
    if let Some(subject) = subject {
        future_marker(&s, subject, lex, glossary, &mut out);
        negation(&s, subject, lex, &mut out);
    }
    out.sort_by_key(|f| (f.violation.span.start, f.violation.rule_id));
    out
}

/// French glossary terms used in place of the target-language word.
fn loanwords(s: &Sentence<'_>, lex: &Lexicon, glossary: &Glossary, out: &mut Vec<Finding>) {
    for i in s.words() {
        if lex.is_known(&s.lower[i]) {
            continue;
        }
        if let Some(entry) = glossary.by_french(&s.lower[i]) {
            let tok = &s.tokens[i];
            out.push(Finding {
                violation: violation(
                    RULE_LEXICAL,
                    ErrorCategory::Fluency,
                    i,
                    format!("French word \"{}\" used instead of \"{}\"", tok.text, entry.term_lrl),
                ),
                repair: vec![Edit::replace(tok, match_case(tok.text, &entry.term_lrl))],
            });
        }
    }
}

/// Unknown words one edit away from a glossary term.
fn orthography(s: &Sentence<'_>, lex: &Lexicon, glossary: &Glossary, out: &mut Vec<Finding>) {
    for i in s.words() {
        let word = &s.lower[i];
        let tok = &s.tokens[i];
        if word.chars().count() < MIN_ORTHOGRAPHY_CHARS
            || word.chars().any(|c| c.is_ascii_digit())
            || lex.is_known(word)
            || glossary.lookup(word).is_some()
        {
            continue;
        }
        let capitalised = tok.text.chars().next().is_some_and(char::is_uppercase);
        if capitalised && !s.starts_sentence(i) {
            continue;
        }
        let nearest = glossary
            .entries()
            .iter()
            .map(|e| e.term_lrl.as_str())
            .find(|t| t.chars().count() >= MIN_ORTHOGRAPHY_CHARS && levenshtein(word, &t.to_lowercase()) == 1);
        if let Some(term) = nearest {
            out.push(Finding {
                violation: violation(
                    RULE_LEXICAL,
                    ErrorCategory::Orthography,
                    i,
                    format!("\"{}\" looks like a misspelling of \"{term}\"", tok.text),
                ),
                repair: vec![Edit::replace(tok, match_case(tok.text, term))],
            });
        }
    }
}

/// Base-form nouns where a definite form is required, and plurals built by
/// appending instead of replacing the final vowel.
fn definiteness(s: &Sentence<'_>, lex: &Lexicon, out: &mut Vec<Finding>) {
    for i in s.words() {
        let word = &s.lower[i];
        let tok = &s.tokens[i];
        if let Some(noun) = lex.nouns().iter().find(|n| n.has_paradigm() && &n.base == word) {
            let prev = s.prev_word(i).map(|p| s.lower[p].as_str());
            let after_na = prev == Some(OBJECT_MARKER)
                && (i + 1..s.tokens.len()).any(|j| s.tokens[j].is_word() && lex.is_main_verb(&s.lower[j]));
            let final_object = s.next_word(i).is_none() && prev.is_some_and(|p| lex.is_main_verb(p));
            if after_na || final_object {
                let context = if after_na {
                    "object of the na construction (rule 17)"
                } else {
                    "sentence-final object"
                };
                let fix = &noun.definite[0];
                out.push(Finding {
                    violation: violation(
                        RULE_DEFINITE,
                        ErrorCategory::SuffixMisuse,
                        i,
                        format!("{context} needs the definite form: \"{}\" -> \"{fix}\"", tok.text),
                    ),
                    repair: vec![Edit::replace(tok, match_case(tok.text, fix))],
                });
            }
            continue;
        }
        if lex.is_known(word) {
            continue;
        }
        let Some(stem) = word.strip_suffix("ey") else {
            continue;
        };
        if let Some(noun) = lex
            .nouns()
            .iter()
            .find(|n| n.has_paradigm() && (n.base == stem || n.definite.iter().any(|d| d == stem)))
        {
            let fix = &noun.definite_plural[0];
            out.push(Finding {
                violation: violation(
                    RULE_PLURAL,
                    ErrorCategory::SuffixMisuse,
                    i,
                    format!(
                        "definite plural replaces the final vowel: \"{}\" -> \"{fix}\"",
                        tok.text
                    ),
                ),
                repair: vec![Edit::replace(tok, match_case(tok.text, fix))],
            });
        }
    }
}

/// First main verb after the subject, skipping auxiliaries and particles.
fn main_verb(s: &Sentence<'_>, subject: usize, lex: &Lexicon) -> Option<usize> {
    (subject + 1..s.tokens.len())
        .filter(|&j| s.tokens[j].is_word())
        .find(|&j| lex.is_main_verb(&s.lower[j]))
}

fn future_marker(
    s: &Sentence<'_>,
    subject: usize,
    lex: &Lexicon,
    glossary: &Glossary,
    out: &mut Vec<Finding>,
) {
    let future = s.words().any(|i| {
        let w = &s.lower[i];
        lex.future_adverbs.contains(w)
            || (!lex.is_known(w)
                && glossary
                    .by_french(w)
                    .is_some_and(|e| lex.future_adverbs.contains(&e.term_lrl.to_lowercase())))
    });
    if !future {
        return;
    }
    let Some(verb) = main_verb(s, subject, lex) else {
        return;
    };
    if (subject + 1..verb).any(|j| FUTURE_MARKERS.contains(&s.lower[j].as_str())) {
        return;
    }
    let tok = &s.tokens[verb];
    out.push(Finding {
        violation: violation(
            RULE_FUTURE,
            ErrorCategory::TenseInconsistency,
            verb,
            format!("future context but no \"{FUTURE_AUX}\" before the verb \"{}\"", tok.text),
        ),
        repair: vec![Edit::insert(tok.start, format!("{FUTURE_AUX} "))],
    });
}

fn negation(s: &Sentence<'_>, subject: usize, lex: &Lexicon, out: &mut Vec<Finding>) {
    let after_subject = s.next_word(subject);
    let verb = main_verb(s, subject, lex);

    if let Some(m) = s.words().find(|&i| s.lower[i] == PAST_NEGATOR) {
        if after_subject != Some(m) {
            if let Some(target) = after_subject {
                out.push(Finding {
                    violation: violation(
                        RULE_PAST_NEGATIVE,
                        ErrorCategory::TenseInconsistency,
                        m,
                        format!("\"{PAST_NEGATOR}\" must directly follow the subject"),
                    ),
                    repair: vec![
                        s.delete_word(m),
                        Edit::insert(s.tokens[target].start, format!("{PAST_NEGATOR} ")),
                    ],
                });
            }
        }
    }

    let Some(si) = (subject + 1..s.tokens.len()).find(|&i| s.tokens[i].is_word() && s.lower[i] == PRESENT_NEGATOR)
    else {
        return;
    };
    if let Some(ga) = (subject + 1..s.tokens.len()).find(|&i| s.tokens[i].is_word() && s.lower[i] == FUTURE_AUX) {
        out.push(Finding {
            violation: violation(
                RULE_PRESENT_NEGATIVE,
                ErrorCategory::TenseInconsistency,
                ga,
                format!("\"{PRESENT_NEGATOR}\" replaces \"{FUTURE_AUX}\"; they do not combine"),
            ),
            repair: vec![s.delete_word(ga)],
        });
    } else if let Some(v) = verb.filter(|&v| v < si) {
        out.push(Finding {
            violation: violation(
                RULE_PRESENT_NEGATIVE,
                ErrorCategory::TenseInconsistency,
                si,
                format!("\"{PRESENT_NEGATOR}\" must precede the verb \"{}\"", s.tokens[v].text),
            ),
            repair: vec![s.delete_word(si), Edit::insert(s.tokens[v].start, format!("{PRESENT_NEGATOR} "))],
        });
    }
}

fn apply(sentence: &str, edits: &[&Edit]) -> String {
    let mut edits: Vec<&Edit> = edits.to_vec();
    edits.sort_by_key(|e| (e.start, e.end));
    // Drop edits overlapping an earlier one.
    let mut kept: Vec<&Edit> = Vec::with_capacity(edits.len());
    for e in edits {
        if kept.last().is_none_or(|k| e.start >= k.end) {
            kept.push(e);
        }
    }
    let mut out = sentence.to_string();
    for e in kept.into_iter().rev() {
        out.replace_range(e.start..e.end, &e.text);
    }
    out
}

/// Rule violations found in `sentence`, ordered by position.
pub fn check(sentence: &str, lexicon: &Lexicon, glossary: &Glossary) -> Vec<Violation> {
    analyze(sentence, lexicon, glossary)
        .into_iter()
        .map(|f| f.violation)
        .collect()
}

/// Up to three corrected sentences: all `violations` repaired first, then
/// each violation repaired alone, in position order.
pub fn suggest(
    sentence: &str,
    violations: &[Violation],
    lexicon: &Lexicon,
    glossary: &Glossary,
) -> Vec<CorrectionOption> {
    let findings: Vec<Finding> = analyze(sentence, lexicon, glossary)
        .into_iter()
        .filter(|f| violations.contains(&f.violation))
        .collect();
    if findings.is_empty() {
        return Vec::new();
    }
    let mut candidates = Vec::with_capacity(findings.len() + 1);
    let all: Vec<&Edit> = findings.iter().flat_map(|f| &f.repair).collect();
    let explanation = if findings.len() == 1 {
        findings[0].violation.message.clone()
    } else {
        format!("fixes all {} findings", findings.len())
    };
    candidates.push(CorrectionOption::new(apply(sentence, &all), explanation));
    for f in &findings {
        let edits: Vec<&Edit> = f.repair.iter().collect();
        candidates.push(CorrectionOption::new(apply(sentence, &edits), f.violation.message.clone()));
    }
    let mut options: Vec<CorrectionOption> = Vec::new();
    for c in candidates {
        if c.text != sentence && !options.iter().any(|o| o.text == c.text) {
            options.push(c);
        }
    }
    options.truncate(MAX_OPTIONS);
    options
}
