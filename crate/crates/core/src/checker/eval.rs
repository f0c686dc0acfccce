use serde::{Deserialize, Serialize};

use super::gleu::gleu;
use super::{CheckError, SentenceChecker};

/// A test sentence: erroneous with its gold correction, or clean.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub sentence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

impl EvalItem {
    pub fn erroneous(sentence: impl Into<String>, gold: impl Into<String>) -> Self {
        Self {
            sentence: sentence.into(),
            gold: Some(gold.into()),
        }
    }

    pub fn clean(sentence: impl Into<String>) -> Self {
        Self {
            sentence: sentence.into(),
            gold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerMetrics {
    pub error_sentences: usize,
    pub clean_sentences: usize,
    /// Mean over erroneous sentences of the best option's GLEU against gold.
    pub mean_gleu: f64,
    /// Share of erroneous sentences where some option equals gold exactly.
    pub exact_match_rate: f64,
    /// Share of clean sentences judged incorrect.
    pub false_positive_rate: f64,
    /// Human fluency rating; supplied externally, never computed.
    #[serde(default)]
    pub fluency: Option<f64>,
}

/// Score a checker on a labelled test set. Both partitions must be
/// non-empty. An erroneous sentence left without options is scored with the
/// sentence itself as the hypothesis.
pub fn evaluate_checker(
    items: &[EvalItem],
    checker: &dyn SentenceChecker,
) -> Result<CheckerMetrics, CheckError> {
    let errors = items.iter().filter(|i| i.gold.is_some()).count();
    let clean = items.len() - errors;
    if errors == 0 {
        return Err(CheckError::EmptyPartition("erroneous"));
    }
    if clean == 0 {
        return Err(CheckError::EmptyPartition("clean"));
    }
    let (mut gleu_sum, mut matches, mut false_positives) = (0.0, 0usize, 0usize);
    for (i, item) in items.iter().enumerate() {
        let analysis = checker.analyze(&item.sentence, &format!("eval/{i}"))?;
        match &item.gold {
            Some(gold) => {
                let mut best = if analysis.options.is_empty() {
                    gleu(&item.sentence, gold)?
                } else {
                    0.0
                };
                for o in &analysis.options {
                    best = best.max(gleu(&o.text, gold)?);
                }
                gleu_sum += best;
                if analysis.options.iter().any(|o| o.text == *gold) {
                    matches += 1;
                }
            }
            None => {
                if !analysis.is_correct {
                    false_positives += 1;
                }
            }
        }
    }
    Ok(CheckerMetrics {
        error_sentences: errors,
        clean_sentences: clean,
        mean_gleu: gleu_sum / errors as f64,
        exact_match_rate: matches as f64 / errors as f64,
        false_positive_rate: false_positives as f64 / clean as f64,
        fluency: None,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::data::{CheckerAnalysis, CorrectionOption};

    struct EchoGold(HashMap<String, String>);

    impl SentenceChecker for EchoGold {
        fn analyze(&self, sentence: &str, _tag: &str) -> Result<CheckerAnalysis, CheckError> {
            Ok(match self.0.get(sentence) {
                Some(g) => CheckerAnalysis::incorrect("gold", vec![CorrectionOption::new(g.clone(), "")]),
                None => CheckerAnalysis::correct(),
            })
        }
    }

    struct AlwaysYes;

    impl SentenceChecker for AlwaysYes {
        fn analyze(&self, _: &str, _: &str) -> Result<CheckerAnalysis, CheckError> {
            Ok(CheckerAnalysis::correct())
        }
    }

    fn test_set() -> Vec<EvalItem> {
        vec![
            EvalItem::erroneous("Demain, a koy Niamey", "Suba, a ga koy Niamey"),
            EvalItem::erroneous("Ay na hansi di.", "Ay na hanso di."),
            EvalItem::clean("Suba, a ga koy Niamey"),
            EvalItem::clean("Iri ga barna te."),
        ]
    }

    #[test]
    fn echo_gold_is_perfect() {
        let set = test_set();
        let gold = set
            .iter()
            .filter_map(|i| i.gold.clone().map(|g| (i.sentence.clone(), g)))
            .collect();
        let m = evaluate_checker(&set, &EchoGold(gold)).unwrap();
        assert_eq!((m.mean_gleu, m.exact_match_rate, m.false_positive_rate), (1.0, 1.0, 0.0));
        assert_eq!((m.error_sentences, m.clean_sentences), (2, 2));
        assert!(m.fluency.is_none());
    }

    #[test]
    fn always_yes_never_matches() {
        let m = evaluate_checker(&test_set(), &AlwaysYes).unwrap();
        assert_eq!(m.false_positive_rate, 0.0);
        assert_eq!(m.exact_match_rate, 0.0);
        assert!(m.mean_gleu < 1.0);
    }

    #[test]
    fn empty_partitions_are_errors() {
        let only_clean = vec![EvalItem::clean("a")];
        assert!(matches!(
            evaluate_checker(&only_clean, &AlwaysYes),
            Err(CheckError::EmptyPartition("erroneous"))
        ));
        let only_errors = vec![EvalItem::erroneous("a", "b")];
        assert!(matches!(
            evaluate_checker(&only_errors, &AlwaysYes),
            Err(CheckError::EmptyPartition("clean"))
        ));
    }
}
