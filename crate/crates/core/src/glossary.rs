//! Bilingual French / target-language glossary.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlossaryEntry {
    pub term_fr: String,
    pub term_lrl: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GlossaryError {
    #[error("glossary line {line}: expected `term_fr<TAB>term_lrl`")]
    Malformed { line: usize },
    #[error("glossary entry {index}: empty term")]
    EmptyTerm { index: usize },
    #[error("duplicate glossary term_fr {0:?}")]
    DuplicateTerm(String),
}

/// Glossary with case-folded lookup on either side. Entry order is kept;
/// lookups on the target-language side return the first entry listing the
/// term.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Glossary {
    entries: Vec<GlossaryEntry>,
    by_fr: HashMap<String, usize>,
    by_lrl: HashMap<String, usize>,
}

fn fold(term: &str) -> String {
    term.trim().to_lowercase()
}

impl Glossary {
    pub fn new(entries: Vec<GlossaryEntry>) -> Result<Self, GlossaryError> {
        let mut by_fr = HashMap::new();
        let mut by_lrl = HashMap::new();
        let mut pairs = BTreeSet::new();
        for (index, entry) in entries.iter().enumerate() {
            if entry.term_fr.trim().is_empty() || entry.term_lrl.trim().is_empty() {
                return Err(GlossaryError::EmptyTerm { index });
            }
            let fr = fold(&entry.term_fr);
            if by_fr.insert(fr.clone(), index).is_some() || !pairs.insert((fr, fold(&entry.term_lrl))) {
                return Err(GlossaryError::DuplicateTerm(entry.term_fr.clone()));
            }
            by_lrl.entry(fold(&entry.term_lrl)).or_insert(index);
        }
        Ok(Self {
            entries,
            by_fr,
            by_lrl,
        })
    }

    /// Parse `term_fr<TAB>term_lrl` lines; `#` starts a comment line.
    pub fn from_tsv(text: &str) -> Result<Self, GlossaryError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(fr), Some(lrl), None) => entries.push(GlossaryEntry {
                    term_fr: fr.trim().to_string(),
                    term_lrl: lrl.trim().to_string(),
                }),
                _ => return Err(GlossaryError::Malformed { line: idx + 1 }),
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[GlossaryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_french(&self, term: &str) -> Option<&GlossaryEntry> {
        self.by_fr.get(&fold(term)).map(|&i| &self.entries[i])
    }

    pub fn by_target(&self, term: &str) -> Option<&GlossaryEntry> {
        self.by_lrl.get(&fold(term)).map(|&i| &self.entries[i])
    }

    /// French side first, then the target-language side.
    pub fn lookup(&self, term: &str) -> Option<&GlossaryEntry> {
        self.by_french(term).or_else(|| self.by_target(term))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(fr: &str, lrl: &str) -> GlossaryEntry {
        GlossaryEntry {
            term_fr: fr.into(),
            term_lrl: lrl.into(),
        }
    }

    #[test]
    fn lookups_fold_case_on_both_sides() {
        let g = Glossary::new(vec![entry("demain", "suba"), entry("aller", "koy")]).unwrap();
        assert_eq!(g.lookup("Demain").unwrap().term_lrl, "suba");
        assert_eq!(g.lookup("KOY").unwrap().term_fr, "aller");
        assert!(g.lookup("zzz").is_none());
    }

    #[test]
    fn duplicate_french_term_is_rejected() {
        let err = Glossary::new(vec![entry("aller", "koy"), entry("aller", "koy")]).unwrap_err();
        assert_eq!(err, GlossaryError::DuplicateTerm("aller".into()));
        assert!(err.to_string().contains("aller"));
    }

    #[test]
    fn tsv_parsing() {
        let g = Glossary::from_tsv("# header\ndemain\tsuba\n\naller\tkoy\n").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(Glossary::from_tsv("demain suba\n"), Err(GlossaryError::Malformed { line: 1 }));
    }
}
