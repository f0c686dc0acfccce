use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::merge::ADJUDICATOR;
use super::AnnotationError;
use crate::data::{AnnotationRecord, ErrorCategory, Verdict};

/// Krippendorff's alpha with the nominal metric over an items × raters
/// matrix; `None` marks a missing rating. Items with fewer than two
/// ratings are not pairable and are ignored.
///
/// With `n_uc` the count of value `c` on item `u` (`m_u` ratings), the
/// observed disagreement sums `(m_u² − Σ_c n_uc²) / (m_u − 1)` over items,
/// and `α = 1 − (n − 1) · D_o / (n² − Σ_c n_c²)`. When every pairable rating
/// has the same value the expected disagreement is zero and α is 1.
pub fn krippendorff_alpha<T: Ord>(matrix: &[Vec<Option<T>>]) -> Result<f64, AnnotationError> {
    let mut totals: BTreeMap<&T, f64> = BTreeMap::new();
    let mut observed = 0.0;
    let mut n = 0.0;
    for item in matrix {
        let mut counts: BTreeMap<&T, f64> = BTreeMap::new();
        for v in item.iter().flatten() {
            *counts.entry(v).or_insert(0.0) += 1.0;
        }
        let m: f64 = counts.values().sum();
        if m < 2.0 {
            continue;
        }
        let same: f64 = counts.values().map(|c| c * c).sum();
        observed += (m * m - same) / (m - 1.0);
        n += m;
        for (v, c) in counts {
            *totals.entry(v).or_insert(0.0) += c;
        }
    }
    if n == 0.0 {
        return Err(AnnotationError::NoPairableValues);
    }
    let expected = n * n - totals.values().map(|c| c * c).sum::<f64>();
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// What is compared between annotators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementLabel {
    /// The Yes/No verdict.
    #[default]
    Verdict,
    /// The verdict, with "No" split by error category.
    VerdictAndCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub alpha: f64,
    /// Drafts rated by at least two annotators that entered the matrix.
    pub items: usize,
    pub annotators: usize,
    pub ratings: usize,
}

/// Alpha over the annotation records. Only drafts rated by two or more
/// annotators count; with `max_items`, the first that many of those in
/// draft-id order. The adjudicator is not a rater. A later record from the
/// same annotator replaces the earlier one.
pub fn agreement(
    records: &[AnnotationRecord],
    label: AgreementLabel,
    max_items: Option<usize>,
) -> Result<AgreementReport, AnnotationError> {
    let mut cells: BTreeMap<&str, BTreeMap<&str, (Verdict, Option<ErrorCategory>)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.annotator_id != ADJUDICATOR) {
        cells
            .entry(r.draft_id.as_str())
            .or_default()
            .insert(r.annotator_id.as_str(), (r.is_correct, r.error_category));
    }
    let items: Vec<_> = cells
        .into_values()
        .filter(|row| row.len() >= 2)
        .take(max_items.unwrap_or(usize::MAX))
        .collect();
    let annotators: Vec<&str> = items
        .iter()
        .flat_map(|row| row.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    type Cell = (Verdict, Option<ErrorCategory>);
    let matrix: Vec<Vec<Option<Cell>>> = items
        .iter()
        .map(|row| {
            annotators
                .iter()
                .map(|a| {
                    row.get(a).map(|&(v, c)| match (label, v) {
                        (AgreementLabel::VerdictAndCategory, Verdict::No) => (v, c),
                        _ => (v, None),
                    })
                })
                .collect()
        })
        .collect();
    Ok(AgreementReport {
        alpha: krippendorff_alpha(&matrix)?,
        items: items.len(),
        annotators: annotators.len(),
        ratings: items.iter().map(|row| row.len()).sum(),
    })
}
