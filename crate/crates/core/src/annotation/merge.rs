use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{AnnotationRecord, Draft, ErrorCategory, Verdict};
use crate::text::collapse_whitespace;

/// Annotator id whose record overrides the vote on a draft.
pub const ADJUDICATOR: &str = "adjudicator";

/// Outcome of the vote on one draft.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedDecision {
    pub draft_id: String,
    /// Voting annotators, adjudicator excluded.
    pub annotators: usize,
    /// `None` while the draft needs adjudication.
    pub verdict: Option<Verdict>,
    pub corrected_instruction: Option<String>,
    pub corrected_response: Option<String>,
    pub error_category: Option<ErrorCategory>,
    /// Categories named by all voting annotators.
    pub category_tally: BTreeMap<ErrorCategory, usize>,
    pub needs_adjudication: bool,
    pub adjudicated: bool,
}

impl MergedDecision {
    /// Final draft text, or `None` when no decision was reached.
    pub fn apply(&self, draft: &Draft) -> Option<Draft> {
        let verdict = self.verdict?;
        let mut out = draft.clone();
        if verdict == Verdict::No {
            if let Some(t) = &self.corrected_instruction {
                out.instr_lrl = t.clone();
            }
            if let Some(t) = &self.corrected_response {
                out.resp_lrl = t.clone();
            }
        }
        Some(out)
    }
}

fn norm(text: &Option<String>) -> Option<String> {
    text.as_deref()
        .map(collapse_whitespace)
        .filter(|t| !t.is_empty())
}

/// Most frequent value; ties go to the smallest.
fn mode<T: Ord + Clone>(values: impl IntoIterator<Item = T>) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0) += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == best).map(|(v, _)| v)
}

fn decide(draft_id: &str, voters: &[&AnnotationRecord], adjudicator: Option<&AnnotationRecord>) -> MergedDecision {
    let mut category_tally = BTreeMap::new();
    for r in voters {
        if let Some(c) = r.error_category {
            *category_tally.entry(c).or_insert(0) += 1;
        }
    }
    let mut decision = MergedDecision {
        draft_id: draft_id.to_string(),
        annotators: voters.len(),
        verdict: None,
        corrected_instruction: None,
        corrected_response: None,
        error_category: None,
        category_tally,
        needs_adjudication: true,
        adjudicated: false,
    };
    if let Some(a) = adjudicator {
        decision.verdict = Some(a.is_correct);
        if a.is_correct == Verdict::No {
            decision.corrected_instruction = norm(&a.corrected_instruction);
            decision.corrected_response = norm(&a.corrected_response);
            decision.error_category = a.error_category;
        }
        decision.needs_adjudication = false;
        decision.adjudicated = true;
        return decision;
    }
    // Vote key: Yes, or No together with the normalized corrected response.
    let key = |r: &AnnotationRecord| match r.is_correct {
        Verdict::Yes => None,
        Verdict::No => Some(norm(&r.corrected_response)),
    };
    let mut votes: BTreeMap<Option<Option<String>>, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in voters {
        votes.entry(key(r)).or_default().push(r);
    }
    let Some((winner, group)) = votes.into_iter().find(|(_, g)| 2 * g.len() > voters.len()) else {
        return decision;
    };
    decision.needs_adjudication = false;
    match winner {
        None => decision.verdict = Some(Verdict::Yes),
        Some(response) => {
            decision.verdict = Some(Verdict::No);
            decision.corrected_response = response;
            decision.corrected_instruction = mode(group.iter().map(|r| norm(&r.corrected_instruction))).flatten();
            decision.error_category = mode(group.iter().filter_map(|r| r.error_category));
        }
    }
    decision
}

/// Majority vote per draft. A later record from the same annotator replaces
/// the earlier one. A record from [`ADJUDICATOR`] settles the draft.
/// Output is sorted by draft id.
pub fn merge_annotations(records: &[AnnotationRecord]) -> Vec<MergedDecision> {
    let mut latest: BTreeMap<&str, HashMap<&str, &AnnotationRecord>> = BTreeMap::new();
    for r in records {
        latest
            .entry(r.draft_id.as_str())
            .or_default()
            .insert(r.annotator_id.as_str(), r);
    }
    latest
        .into_iter()
        .map(|(draft_id, by_annotator)| {
            let adjudicator = by_annotator.get(ADJUDICATOR).copied();
            let voters: Vec<&AnnotationRecord> = by_annotator
                .iter()
                .filter(|(id, _)| **id != ADJUDICATOR)
                .map(|(_, r)| *r)
                .collect();
            decide(draft_id, &voters, adjudicator)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn yes(draft: &str, who: &str) -> AnnotationRecord {
        AnnotationRecord {
            draft_id: draft.into(),
            annotator_id: who.into(),
            is_correct: Verdict::Yes,
            corrected_instruction: None,
            corrected_response: None,
            error_category: None,
            comments: None,
        }
    }

    fn no(draft: &str, who: &str, fix: &str, cat: ErrorCategory) -> AnnotationRecord {
        AnnotationRecord {
            is_correct: Verdict::No,
            corrected_response: Some(fix.into()),
            error_category: Some(cat),
            ..yes(draft, who)
        }
    }

    #[test]
    fn two_identical_corrections_beat_one_yes() {
        let recs = vec![
            no("d1", "a", "Suba, a ga koy Niamey", ErrorCategory::TenseInconsistency),
            yes("d1", "b"),
            no("d1", "c", "Suba,  a ga koy Niamey ", ErrorCategory::TenseInconsistency),
        ];
        let d = &merge_annotations(&recs)[0];
        assert!(!d.needs_adjudication);
        assert_eq!(d.verdict, Some(Verdict::No));
        assert_eq!(d.corrected_response.as_deref(), Some("Suba, a ga koy Niamey"));
        assert_eq!(d.error_category, Some(ErrorCategory::TenseInconsistency));
        assert_eq!(d.category_tally[&ErrorCategory::TenseInconsistency], 2);
    }

    #[test]
    fn split_vote_needs_adjudication_until_adjudicated() {
        let mut recs = vec![yes("d1", "a"), no("d1", "b", "x", ErrorCategory::Fluency)];
        let d = &merge_annotations(&recs)[0];
        assert!(d.needs_adjudication);
        assert!(d.verdict.is_none());
        recs.push(no("d1", ADJUDICATOR, "y", ErrorCategory::Orthography));
        let d = &merge_annotations(&recs)[0];
        assert!(d.adjudicated && !d.needs_adjudication);
        assert_eq!(d.corrected_response.as_deref(), Some("y"));
        assert_eq!(d.annotators, 2);
    }

    #[test]
    fn unanimous_yes_keeps_original() {
        let recs: Vec<_> = (0..5).map(|i| yes("d1", &format!("a{i}"))).collect();
        let d = &merge_annotations(&recs)[0];
        assert_eq!(d.verdict, Some(Verdict::Yes));
        let draft = Draft {
            id: "d1".into(),
            instr_fr: "q".into(),
            instr_lrl: "i".into(),
            resp_lrl: "r".into(),
            cot_lrl: "N/A".into(),
            topic_fr: "Sports".into(),
            lang: crate::data::LanguageCode::new("dje").unwrap(),
        };
        assert_eq!(d.apply(&draft).unwrap(), draft);
    }

    #[test]
    fn later_record_from_same_annotator_wins() {
        let recs = vec![yes("d1", "a"), no("d1", "a", "x", ErrorCategory::Fluency)];
        let d = &merge_annotations(&recs)[0];
        assert_eq!(d.annotators, 1);
        assert_eq!(d.verdict, Some(Verdict::No));
    }
}
