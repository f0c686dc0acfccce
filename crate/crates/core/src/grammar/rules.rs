use serde::{Deserialize, Serialize};

use super::GrammarError;

pub const RULE_COUNT: u8 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Lexicon,
    Morphology,
    Syntax,
    Negation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordEntry {
    pub form: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<String>,
    pub gloss: String,
}

/// Machine-readable shape of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RulePattern {
    /// Closed word class.
    WordList { class: String, words: Vec<WordEntry> },
    /// Definite-article formation for nouns whose base ends in `ending`
    /// (`CONSONANT` matches any non-vowel): either replace the ending or
    /// append to the base.
    Suffix {
        ending: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        replace: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        append: Option<String>,
    },
    /// Definite plural: the final vowel run of the definite singular is
    /// replaced.
    Plural { replace_final_vowels_with: String },
    /// Constituent order; upper-case elements are slots, `a|b` alternatives.
    Sequence { elements: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleExample {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrong: Option<String>,
    pub right: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gloss: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrammarRule {
    pub id: u8,
    pub title: String,
    pub kind: RuleKind,
    pub summary: String,
    pub patterns: Vec<RulePattern>,
    #[serde(default)]
    pub examples: Vec<RuleExample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSet {
    pub language: String,
    pub rules: Vec<GrammarRule>,
}

pub(crate) const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u', 'ɛ', 'ɔ'];

pub(crate) fn is_vowel(c: char) -> bool {
    VOWELS.contains(&c)
}

impl RuleSet {
    pub fn from_json(text: &str) -> Result<Self, GrammarError> {
        let set: RuleSet =
            serde_json::from_str(text).map_err(|e| GrammarError::Rules(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    /// Ids must be exactly 1..=20, each once.
    pub fn validate(&self) -> Result<(), GrammarError> {
        let mut ids: Vec<u8> = self.rules.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if ids != (1..=RULE_COUNT).collect::<Vec<_>>() {
            return Err(GrammarError::Rules(format!(
                "rule ids must cover 1..={RULE_COUNT} exactly once, found {ids:?}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, id: u8) -> Option<&GrammarRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Words of every `word_list` pattern of the given class.
    pub fn word_class(&self, class: &str) -> Vec<&WordEntry> {
        self.rules
            .iter()
            .flat_map(|r| &r.patterns)
            .filter_map(|p| match p {
                RulePattern::WordList { class: c, words } if c == class => Some(words),
                _ => None,
            })
            .flatten()
            .collect()
    }

    /// Candidate definite forms of a base noun, from the first suffix
    /// pattern whose ending matches.
    pub fn definite_candidates(&self, base: &str) -> Vec<String> {
        let last = match base.chars().last() {
            Some(c) => c,
            None => return Vec::new(),
        };
        for pattern in self.rules.iter().flat_map(|r| &r.patterns) {
            let RulePattern::Suffix {
                ending,
                replace,
                append,
            } = pattern
            else {
                continue;
            };
            let matches = if ending == "CONSONANT" {
                !is_vowel(last)
            } else {
                base.ends_with(ending.as_str())
            };
            if !matches {
                continue;
            }
            let mut out = Vec::new();
            if let Some(r) = replace {
                let stem = if ending == "CONSONANT" {
                    base
                } else {
                    &base[..base.len() - ending.len()]
                };
                out.push(format!("{stem}{r}"));
            }
            if let Some(a) = append {
                out.push(format!("{base}{a}"));
            }
            return out;
        }
        Vec::new()
    }

    /// Definite plural of a definite singular form.
    pub fn plural_of(&self, definite: &str) -> Option<String> {
        let with = self.rules.iter().flat_map(|r| &r.patterns).find_map(|p| match p {
            RulePattern::Plural {
                replace_final_vowels_with,
            } => Some(replace_final_vowels_with),
            _ => None,
        })?;
        let stem = definite.trim_end_matches(is_vowel);
        if stem.len() == definite.len() {
            return None;
        }
        Some(format!("{stem}{with}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::RULES_DJE;

    #[test]
    fn shipped_rules_cover_one_to_twenty() {
        let set = RuleSet::from_json(RULES_DJE).unwrap();
        assert_eq!(set.rules.len(), 20);
        assert_eq!(set.get(9).unwrap().kind, RuleKind::Morphology);
        assert_eq!(set.get(19).unwrap().kind, RuleKind::Negation);
    }

    #[test]
    fn missing_rule_is_rejected() {
        let mut set = RuleSet::from_json(RULES_DJE).unwrap();
        set.rules.pop();
        assert!(set.validate().is_err());
    }

    #[test]
    fn suffix_patterns_reproduce_paradigm_examples() {
        let set = RuleSet::from_json(RULES_DJE).unwrap();
        for (base, definite) in [
            ("zanka", "zankaa"),
            ("wayboro", "waybora"),
            ("darbayko", "darbaykwa"),
            ("hansi", "hanso"),
            ("farkay", "farka"),
            ("farkay", "farkayo"),
            ("wande", "wando"),
        ] {
            assert!(
                set.definite_candidates(base).iter().any(|c| c == definite),
                "{base} -> {definite}"
            );
        }
        assert_eq!(set.definite_candidates("bar"), vec!["baro"]);
    }

    #[test]
    fn plural_replaces_final_vowel_run() {
        let set = RuleSet::from_json(RULES_DJE).unwrap();
        assert_eq!(set.plural_of("zankaa").as_deref(), Some("zankey"));
        assert_eq!(set.plural_of("hanso").as_deref(), Some("hansey"));
        assert_eq!(set.plural_of("farka").as_deref(), Some("farkey"));
        assert_eq!(set.plural_of("bar"), None);
    }
}
