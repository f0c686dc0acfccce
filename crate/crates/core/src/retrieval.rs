//! Knowledge base for the checker: clean sentences with a similarity
//! index, the grammar rule set and the glossary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets;
use crate::glossary::{Glossary, GlossaryEntry, GlossaryError};
use crate::grammar::{tokenize, GrammarError, RuleSet};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("knowledge base needs at least one sentence")]
    NoSentences,
    #[error(transparent)]
    Glossary(#[from] GlossaryError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceEntry {
    pub text: String,
    /// Where the sentence came from, e.g. `sentences.txt:12`.
    pub source: String,
}

/// Sparse term-count vector.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermCounts {
    counts: BTreeMap<String, u64>,
    norm_sq: u64,
}

impl TermCounts {
    pub fn from_terms<I: IntoIterator<Item = String>>(terms: I) -> Self {
        let mut counts = BTreeMap::new();
        for t in terms {
            *counts.entry(t).or_insert(0u64) += 1;
        }
        let norm_sq = counts.values().map(|c| c * c).sum();
        Self { counts, norm_sq }
    }

    /// Cosine similarity of the count vectors. Exact integer dot product,
    /// so identical vectors score exactly 1.0 and the score is symmetric.
    pub fn cosine(&self, other: &Self) -> f64 {
        if self.norm_sq == 0 || other.norm_sq == 0 {
            return 0.0;
        }
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        let dot: u64 = small
            .counts
            .iter()
            .filter_map(|(t, a)| large.counts.get(t).map(|b| a * b))
            .sum();
        let score = dot as f64 / ((self.norm_sq as f64) * (other.norm_sq as f64)).sqrt();
        score.clamp(0.0, 1.0)
    }
}

/// Turns text into a sparse vector. The default is a bag of words.
pub trait Vectorizer: Send + Sync {
    fn vectorize(&self, text: &str) -> TermCounts;
}

/// Lowercased word tokens, edge punctuation dropped.
#[derive(Debug, Clone, Copy, Default)]
pub struct BagOfWords;

impl Vectorizer for BagOfWords {
    fn vectorize(&self, text: &str) -> TermCounts {
        TermCounts::from_terms(
            tokenize(text)
                .into_iter()
                .filter(|t| t.is_word())
                .map(|t| t.text.to_lowercase()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalHit {
    /// Position of the sentence in the knowledge base.
    pub index: usize,
    pub text: String,
    pub score: f64,
    pub rank: usize,
}

/// Immutable after construction; safe to share across threads.
#[derive(Clone)]
pub struct KnowledgeBase {
    sentences: Vec<SentenceEntry>,
    vectors: Vec<TermCounts>,
    rules: RuleSet,
    glossary: Glossary,
    vectorizer: Arc<dyn Vectorizer>,
}

impl std::fmt::Debug for KnowledgeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeBase")
            .field("sentences", &self.sentences.len())
            .field("rules", &self.rules.rules.len())
            .field("glossary", &self.glossary.len())
            .finish()
    }
}

/// Build a knowledge base with the bag-of-words vectorizer.
pub fn build_index(
    sentences: Vec<SentenceEntry>,
    rules: RuleSet,
    glossary: Vec<GlossaryEntry>,
) -> Result<KnowledgeBase, RetrievalError> {
    KnowledgeBase::with_vectorizer(sentences, rules, glossary, Arc::new(BagOfWords))
}

/// Top-`k` sentences by cosine similarity, ties by insertion order.
pub fn retrieve(kb: &KnowledgeBase, query: &str, k: usize) -> Vec<RetrievalHit> {
    kb.retrieve(query, k)
}

/// Glossary entry per token, matched case-insensitively on either side.
pub fn glossary_info<'a, S: AsRef<str>>(
    kb: &'a KnowledgeBase,
    tokens: &[S],
) -> Vec<(String, Option<&'a GlossaryEntry>)> {
    tokens
        .iter()
        .map(|t| (t.as_ref().to_string(), kb.glossary.lookup(t.as_ref())))
        .collect()
}

/// One sentence per non-empty line; `#` lines are comments.
pub fn parse_sentences(text: &str, source: &str) -> Vec<SentenceEntry> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| SentenceEntry {
            text: l.trim().to_string(),
            source: format!("{source}:{}", i + 1),
        })
        .collect()
}

fn read(path: &Path) -> Result<String, RetrievalError> {
    fs::read_to_string(path).map_err(|source| RetrievalError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl KnowledgeBase {
    pub fn with_vectorizer(
        sentences: Vec<SentenceEntry>,
        rules: RuleSet,
        glossary: Vec<GlossaryEntry>,
        vectorizer: Arc<dyn Vectorizer>,
    ) -> Result<Self, RetrievalError> {
        if sentences.is_empty() {
            return Err(RetrievalError::NoSentences);
        }
        let glossary = Glossary::new(glossary)?;
        let vectors = sentences.iter().map(|s| vectorizer.vectorize(&s.text)).collect();
        Ok(Self {
            sentences,
            vectors,
            rules,
            glossary,
            vectorizer,
        })
    }

    /// Resources embedded in the crate.
    pub fn builtin(lang: &str) -> Result<Self, RetrievalError> {
        if lang != "dje" {
            return Err(GrammarError::UnknownLanguage(lang.to_string()).into());
        }
        build_index(
            parse_sentences(assets::SENTENCES_DJE, "sentences.txt"),
            RuleSet::from_json(assets::RULES_DJE)?,
            Glossary::from_tsv(assets::GLOSSARY_DJE)?.entries().to_vec(),
        )
    }

    /// Load `sentences.txt`, `rules/<lang>.json` and `glossary.tsv` from a
    /// directory.
    pub fn load_dir(dir: &Path, lang: &str) -> Result<Self, RetrievalError> {
        let sentences = parse_sentences(&read(&dir.join("sentences.txt"))?, "sentences.txt");
        let rules = RuleSet::from_json(&read(&dir.join("rules").join(format!("{lang}.json")))?)?;
        let glossary = Glossary::from_tsv(&read(&dir.join("glossary.tsv"))?)?;
        build_index(sentences, rules, glossary.entries().to_vec())
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[SentenceEntry] {
        &self.sentences
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn glossary(&self) -> &Glossary {
        &self.glossary
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Vec<RetrievalHit> {
        let q = self.vectorizer.vectorize(query);
        let mut scored: Vec<(usize, f64)> =
            self.vectors.iter().map(|v| q.cosine(v)).enumerate().collect();
        // Stable sort keeps insertion order among equal scores.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(r, (index, score))| RetrievalHit {
                index,
                text: self.sentences[index].text.clone(),
                score,
                rank: r + 1,
            })
            .collect()
    }
}
