use std::collections::HashMap;

use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("GLEU needs a non-empty reference")]
pub struct EmptyReference;

fn ngram_counts<'t>(tokens: &'t [&'t str], n: usize) -> HashMap<&'t [&'t str], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Sentence-level GLEU over whitespace tokens.
///
/// For each order n = 1..=4 with `m` clipped n-gram matches, `h` hypothesis
/// and `r` reference n-grams, the order score is `min(m/h, m/r)` =
/// `m / max(h, r)`; an order with no match scores `1 / (max(h, r) + 1)`.
/// The result is the geometric mean of the four order scores.
pub fn gleu(hypothesis: &str, reference: &str) -> Result<f64, EmptyReference> {
    let hyp: Vec<&str> = hypothesis.split_whitespace().collect();
    let reference: Vec<&str> = reference.split_whitespace().collect();
    if reference.is_empty() {
        return Err(EmptyReference);
    }
    let mut log_sum = 0.0;
    for n in 1..=MAX_ORDER {
        let h = ngram_counts(&hyp, n);
        let r = ngram_counts(&reference, n);
        let matches: usize = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
        let denom = (hyp.len() + 1).saturating_sub(n).max((reference.len() + 1).saturating_sub(n));
        let score = if matches == 0 {
            1.0 / (denom as f64 + 1.0)
        } else {
            matches as f64 / denom as f64
        };
        log_sum += score.ln();
    }
    Ok((log_sum / MAX_ORDER as f64).exp().clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_one() {
        assert_eq!(gleu("Suba, a ga koy Niamey", "Suba, a ga koy Niamey").unwrap(), 1.0);
        assert_eq!(gleu("a", "a").unwrap(), 1.0);
    }

    #[test]
    fn disjoint_is_smoothing_floor() {
        // 2 vs 3 tokens: orders contribute 1/4, 1/3, 1/2, 1/1.
        let expected = (0.25f64 * (1.0 / 3.0) * 0.5 * 1.0).powf(0.25);
        assert!((gleu("x y", "a b c").unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn empty_reference_is_an_error() {
        assert_eq!(gleu("a", "  "), Err(EmptyReference));
        assert!(gleu("", "a b").unwrap() > 0.0);
    }

    #[test]
    fn trailing_whitespace_is_ignored() {
        assert_eq!(gleu("a ga koy ", "Suba a ga koy").unwrap(), gleu("a ga koy", "Suba a ga koy\n").unwrap());
    }
}
