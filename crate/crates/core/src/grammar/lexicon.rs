use std::collections::{BTreeSet, HashMap};

use super::rules::RuleSet;
use super::GrammarError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounForms {
    pub base: String,
    /// Accepted definite singular forms; the first is the preferred repair.
    pub definite: Vec<String>,
    pub definite_plural: Vec<String>,
    pub gloss: String,
}

impl NounForms {
    pub fn has_paradigm(&self) -> bool {
        !self.definite.is_empty()
    }
}

/// Word inventories used by the checker. Built from the rule set's word
/// lists plus a TSV of nouns, verbs and markers.
#[derive(Debug, Clone)]
pub struct Lexicon {
    pub pronouns: BTreeSet<String>,
    pub demonstratives: BTreeSet<String>,
    pub indefinites: BTreeSet<String>,
    pub gender_words: BTreeSet<String>,
    pub copulas: BTreeSet<String>,
    pub irregular_verbs: BTreeSet<String>,
    pub verbs: BTreeSet<String>,
    pub adjectives: BTreeSet<String>,
    pub future_adverbs: BTreeSet<String>,
    pub aspect_markers: BTreeSet<String>,
    pub negation_markers: BTreeSet<String>,
    pub function_words: BTreeSet<String>,
    nouns: Vec<NounForms>,
    noun_index: HashMap<String, usize>,
    known: BTreeSet<String>,
}

/// Particles that sit between subject and verb without being the verb:
/// `na` (pre-verbal object marker) and `no` (in `go no ga`, `ya … no`).
const PARTICLES: [&str; 2] = ["na", "no"];

impl Lexicon {
    pub fn new(rules: &RuleSet, tsv: &str) -> Result<Self, GrammarError> {
        let class = |name: &str| -> BTreeSet<String> {
            rules
                .word_class(name)
                .into_iter()
                .flat_map(|w| std::iter::once(&w.form).chain(&w.variants))
                .flat_map(|f| f.split_whitespace())
                .map(str::to_lowercase)
                .collect()
        };
        let mut lex = Self {
            pronouns: class("pronoun"),
            demonstratives: class("demonstrative"),
            indefinites: class("indefinite"),
            gender_words: class("gender"),
            copulas: class("copula"),
            irregular_verbs: class("irregular_verb"),
            verbs: BTreeSet::new(),
            adjectives: BTreeSet::new(),
            future_adverbs: BTreeSet::new(),
            aspect_markers: BTreeSet::new(),
            negation_markers: BTreeSet::new(),
            function_words: BTreeSet::new(),
            nouns: Vec::new(),
            noun_index: HashMap::new(),
            known: BTreeSet::new(),
        };
        lex.verbs.extend(lex.irregular_verbs.iter().cloned());

        for (idx, line) in tsv.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |msg: &str| GrammarError::Lexicon(format!("line {}: {msg}", idx + 1));
            if cols.len() != 5 {
                return Err(bad("expected 5 tab-separated columns"));
            }
            let form = cols[1].trim().to_lowercase();
            if form.is_empty() {
                return Err(bad("empty form"));
            }
            let alts = |s: &str| -> Vec<String> {
                s.split('|')
                    .map(|x| x.trim().to_lowercase())
                    .filter(|x| !x.is_empty())
                    .collect()
            };
            let set = match cols[0].trim() {
                "noun" => {
                    lex.nouns.push(NounForms {
                        base: form,
                        definite: alts(cols[2]),
                        definite_plural: alts(cols[3]),
                        gloss: cols[4].trim().to_string(),
                    });
                    continue;
                }
                "verb" => &mut lex.verbs,
                "adjective" => &mut lex.adjectives,
                "future_adverb" => &mut lex.future_adverbs,
                "aspect" => &mut lex.aspect_markers,
                "negation" => &mut lex.negation_markers,
                "function" => &mut lex.function_words,
                other => return Err(bad(&format!("unknown class {other:?}"))),
            };
            set.insert(form);
        }

        for (i, noun) in lex.nouns.iter().enumerate() {
            for f in noun.forms() {
                lex.noun_index.entry(f.to_string()).or_insert(i);
            }
        }
        lex.known = lex
            .all_sets()
            .into_iter()
            .flatten()
            .cloned()
            .chain(lex.noun_index.keys().cloned())
            .collect();
        lex.validate(rules)?;
        Ok(lex)
    }

    fn all_sets(&self) -> [&BTreeSet<String>; 12] {
        [
            &self.pronouns,
            &self.demonstratives,
            &self.indefinites,
            &self.gender_words,
            &self.copulas,
            &self.irregular_verbs,
            &self.verbs,
            &self.adjectives,
            &self.future_adverbs,
            &self.aspect_markers,
            &self.negation_markers,
            &self.function_words,
        ]
    }

    fn validate(&self, rules: &RuleSet) -> Result<(), GrammarError> {
        for marker in self.aspect_markers.iter().chain(&self.negation_markers) {
            if self.noun_index.contains_key(marker) {
                return Err(GrammarError::Lexicon(format!("marker {marker:?} is also a noun form")));
            }
        }
        for noun in self.nouns.iter().filter(|n| n.has_paradigm()) {
            let candidates = rules.definite_candidates(&noun.base);
            for d in &noun.definite {
                if !candidates.contains(d) {
                    return Err(GrammarError::Lexicon(format!(
                        "{}: definite form {d:?} does not follow the suffix patterns {candidates:?}",
                        noun.base
                    )));
                }
            }
            if noun.definite_plural.is_empty() {
                return Err(GrammarError::Lexicon(format!("{}: missing definite plural", noun.base)));
            }
            for p in &noun.definite_plural {
                if !noun.definite.iter().any(|d| rules.plural_of(d).as_deref() == Some(p)) {
                    return Err(GrammarError::Lexicon(format!(
                        "{}: plural {p:?} is not derived from a definite form",
                        noun.base
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn nouns(&self) -> &[NounForms] {
        &self.nouns
    }

    /// Noun owning `form` as base, definite or plural.
    pub fn noun(&self, form: &str) -> Option<&NounForms> {
        self.noun_index.get(form).map(|&i| &self.nouns[i])
    }

    pub fn is_known(&self, word: &str) -> bool {
        self.known.contains(word)
    }

    pub fn is_pronoun(&self, word: &str) -> bool {
        self.pronouns.contains(word)
    }

    /// Auxiliaries, negators, copulas and particles; never taken as the
    /// main verb.
    pub fn is_marker(&self, word: &str) -> bool {
        self.aspect_markers.contains(word)
            || self.negation_markers.contains(word)
            || self.copulas.contains(word)
            || PARTICLES.contains(&word)
    }

    /// A verb that can head the clause (markers excluded).
    pub fn is_main_verb(&self, word: &str) -> bool {
        self.verbs.contains(word) && !self.is_marker(word)
    }
}

impl NounForms {
    pub fn forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.base.as_str())
            .chain(self.definite.iter().map(String::as_str))
            .chain(self.definite_plural.iter().map(String::as_str))
    }
}
