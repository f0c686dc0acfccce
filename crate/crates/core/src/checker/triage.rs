use serde::{Deserialize, Serialize};

use crate::data::{AppliedCorrection, CheckedDraft, CheckerAnalysis, Draft, FieldAnalyses, TriageStatus};

/// Routing of a single checked sentence.
pub fn field_status(analysis: &CheckerAnalysis) -> TriageStatus {
    match (analysis.is_correct, analysis.options.is_empty()) {
        (true, _) => TriageStatus::Accepted,
        (false, false) => TriageStatus::LowPriority,
        (false, true) => TriageStatus::TopPriority,
    }
}

/// Combine per-field verdicts: the draft takes the worst field status.
/// Low-priority drafts get Option 1 applied to every low-priority field.
/// Without any analysis (checker bypassed) the draft is accepted.
pub fn triage(draft: Draft, analyses: Option<FieldAnalyses>) -> CheckedDraft {
    let Some(fields) = analyses else {
        return CheckedDraft {
            draft,
            status: TriageStatus::Accepted,
            analysis: None,
            applied_correction: None,
        };
    };
    let status = [&fields.instr_lrl, &fields.resp_lrl, &fields.cot_lrl]
        .into_iter()
        .flatten()
        .map(field_status)
        .max()
        .unwrap_or(TriageStatus::Accepted);
    let applied_correction = (status == TriageStatus::LowPriority).then(|| {
        let fix = |a: &Option<CheckerAnalysis>| {
            a.as_ref()
                .filter(|a| field_status(a) == TriageStatus::LowPriority)
                .map(|a| a.options[0].text.clone())
        };
        AppliedCorrection {
            instr_lrl: fix(&fields.instr_lrl),
            resp_lrl: fix(&fields.resp_lrl),
            cot_lrl: fix(&fields.cot_lrl),
        }
    });
    CheckedDraft {
        draft,
        status,
        analysis: Some(fields),
        applied_correction,
    }
}

/// Counts per status with percentages of the batch, to two decimals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriageSummary {
    pub total: usize,
    pub accepted: usize,
    pub low_priority: usize,
    pub top_priority: usize,
    pub accepted_pct: f64,
    pub low_priority_pct: f64,
    pub top_priority_pct: f64,
}

/// `part / whole` as a percentage rounded half-up to two decimals; 0 when
/// `whole` is 0.
pub fn percent(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        return 0.0;
    }
    let hundredths = (part as u128 * 10_000 + whole as u128 / 2) / whole as u128;
    hundredths as f64 / 100.0
}

impl TriageSummary {
    pub fn from_statuses<I: IntoIterator<Item = TriageStatus>>(statuses: I) -> Self {
        let mut s = Self::default();
        for status in statuses {
            s.total += 1;
            match status {
                TriageStatus::Accepted => s.accepted += 1,
                TriageStatus::LowPriority => s.low_priority += 1,
                TriageStatus::TopPriority => s.top_priority += 1,
            }
        }
        s.accepted_pct = percent(s.accepted, s.total);
        s.low_priority_pct = percent(s.low_priority, s.total);
        s.top_priority_pct = percent(s.top_priority, s.total);
        s
    }

    pub fn from_checked(checked: &[CheckedDraft]) -> Self {
        Self::from_statuses(checked.iter().map(|c| c.status))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CorrectionOption, LanguageCode, NO_COT};

    fn draft() -> Draft {
        Draft {
            id: "d1".into(),
            instr_fr: "Calcule 7 + 5.".into(),
            instr_lrl: "7 nda 5 baani?".into(),
            resp_lrl: "7 nda 5 ga baani 12.".into(),
            cot_lrl: NO_COT.into(),
            topic_fr: "Mathématiques".into(),
            lang: LanguageCode::new("dje").unwrap(),
        }
    }

    fn three_options() -> CheckerAnalysis {
        CheckerAnalysis::incorrect(
            "r",
            vec![
                CorrectionOption::new("one", ""),
                CorrectionOption::new("two", ""),
                CorrectionOption::new("three", ""),
            ],
        )
    }

    #[test]
    fn both_fields_correct_is_accepted() {
        let c = triage(
            draft(),
            Some(FieldAnalyses {
                instr_lrl: Some(CheckerAnalysis::correct()),
                resp_lrl: Some(CheckerAnalysis::correct()),
                cot_lrl: None,
            }),
        );
        assert_eq!(c.status, TriageStatus::Accepted);
        assert!(c.applied_correction.is_none());
    }

    #[test]
    fn incorrect_response_with_options_is_low_priority() {
        let c = triage(
            draft(),
            Some(FieldAnalyses {
                instr_lrl: Some(CheckerAnalysis::correct()),
                resp_lrl: Some(three_options()),
                cot_lrl: None,
            }),
        );
        assert_eq!(c.status, TriageStatus::LowPriority);
        let fix = c.applied_correction.as_ref().unwrap();
        assert_eq!(fix.resp_lrl.as_deref(), Some("one"));
        assert!(fix.instr_lrl.is_none());
        assert_eq!(c.corrected_draft().resp_lrl, "one");
        assert!(c.validate().is_ok());
    }

    #[test]
    fn instruction_without_options_is_top_priority() {
        let c = triage(
            draft(),
            Some(FieldAnalyses {
                instr_lrl: Some(CheckerAnalysis::incorrect("unclear", vec![])),
                resp_lrl: Some(three_options()),
                cot_lrl: None,
            }),
        );
        assert_eq!(c.status, TriageStatus::TopPriority);
        assert!(c.applied_correction.is_none());
    }

    #[test]
    fn summary_percentages() {
        let statuses = std::iter::repeat_n(TriageStatus::Accepted, 858)
            .chain(std::iter::repeat_n(TriageStatus::LowPriority, 51))
            .chain(std::iter::repeat_n(TriageStatus::TopPriority, 91));
        let s = TriageSummary::from_statuses(statuses);
        assert_eq!((s.accepted_pct, s.low_priority_pct, s.top_priority_pct), (85.8, 5.1, 9.1));
        assert_eq!(percent(4563, 50_000), 9.13);
        assert_eq!(percent(2535, 50_000), 5.07);
        assert_eq!(percent(1, 0), 0.0);
    }
}
