use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::merge::MergedDecision;
use super::AnnotationError;
use crate::data::{AnnotationRecord, CheckedDraft, ErrorCategory, TriageStatus, Verdict};

/// Review sheet header, in order.
pub const REVIEW_COLUMNS: [&str; 9] = [
    "draft_id",
    "instruction_lrl",
    "response_lrl",
    "rag_status",
    "is_correct",
    "corrected_instruction",
    "corrected_response",
    "error_category",
    "comments",
];

pub const DEFAULT_BATCH_SIZE: usize = 200;

/// One review-sheet row; every cell is text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRow {
    pub draft_id: String,
    pub instruction_lrl: String,
    pub response_lrl: String,
    pub rag_status: String,
    pub is_correct: String,
    pub corrected_instruction: String,
    pub corrected_response: String,
    pub error_category: String,
    pub comments: String,
}

impl ReviewRow {
    fn blank(c: &CheckedDraft) -> Self {
        Self {
            draft_id: c.draft.id.clone(),
            instruction_lrl: c.draft.instr_lrl.clone(),
            response_lrl: c.draft.resp_lrl.clone(),
            rag_status: c.status.token().to_string(),
            ..Self::default()
        }
    }
}

/// Drafts to put in front of annotators: those with a status in `statuses`
/// (all flagged drafts when empty), top priority first, input order within
/// a status.
pub fn review_queue<'a>(checked: &'a [CheckedDraft], statuses: &[TriageStatus]) -> Vec<&'a CheckedDraft> {
    let wanted = |s: TriageStatus| {
        if statuses.is_empty() {
            s != TriageStatus::Accepted
        } else {
            statuses.contains(&s)
        }
    };
    let mut rows: Vec<&CheckedDraft> = checked.iter().filter(|c| wanted(c.status)).collect();
    rows.sort_by_key(|c| c.status.review_rank());
    rows
}

pub fn rows_to_csv(rows: &[ReviewRow]) -> Result<String, AnnotationError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(REVIEW_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| AnnotationError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 strings is UTF-8"))
}

/// Review sheets as CSV text, `batch_size` rows per sheet.
pub fn export_review_sheet(
    checked: &[CheckedDraft],
    statuses: &[TriageStatus],
    batch_size: usize,
) -> Result<Vec<String>, AnnotationError> {
    let rows: Vec<ReviewRow> = review_queue(checked, statuses)
        .into_iter()
        .map(ReviewRow::blank)
        .collect();
    rows.chunks(batch_size.max(1)).map(rows_to_csv).collect()
}

/// Write the sheets as `review_001.csv`, `review_002.csv`, ... in `dir`.
pub fn write_review_sheets(
    dir: &Path,
    checked: &[CheckedDraft],
    statuses: &[TriageStatus],
    batch_size: usize,
) -> Result<Vec<PathBuf>, AnnotationError> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (i, sheet) in export_review_sheet(checked, statuses, batch_size)?.iter().enumerate() {
        let path = dir.join(format!("review_{:03}.csv", i + 1));
        crate::jsonl::write_atomic(&path, sheet.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

/// Problem with one data row; `row` counts data rows from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub row: usize,
    pub draft_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub records: Vec<AnnotationRecord>,
    pub errors: Vec<RowError>,
}

fn optional(cell: &str) -> Option<String> {
    (!cell.trim().is_empty()).then(|| cell.to_string())
}

fn row_to_record(row: &ReviewRow, annotator_id: &str) -> Result<AnnotationRecord, String> {
    if row.is_correct.trim().is_empty() {
        return Err("is_correct is empty".into());
    }
    let is_correct: Verdict = row.is_correct.parse().map_err(|e| format!("is_correct: {e}"))?;
    let error_category = match row.error_category.trim() {
        "" => None,
        s => Some(s.parse::<ErrorCategory>().map_err(|e| format!("error_category: {e}"))?),
    };
    let record = AnnotationRecord {
        draft_id: row.draft_id.clone(),
        annotator_id: annotator_id.to_string(),
        is_correct,
        corrected_instruction: optional(&row.corrected_instruction),
        corrected_response: optional(&row.corrected_response),
        error_category,
        comments: optional(&row.comments),
    };
    record.validate().map_err(|e| e.to_string())?;
    Ok(record)
}

/// Read a filled review sheet. A header other than [`REVIEW_COLUMNS`] is a
/// hard error; bad rows are reported and skipped. `known_ids`, when given,
/// restricts acceptable draft ids.
pub fn import_annotations(
    csv_text: &str,
    annotator_id: &str,
    known_ids: Option<&HashSet<String>>,
) -> Result<ImportReport, AnnotationError> {
    if annotator_id.trim().is_empty() {
        return Err(AnnotationError::Annotator);
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != REVIEW_COLUMNS {
        return Err(AnnotationError::Header(header.join(",")));
    }
    let mut report = ImportReport::default();
    for (i, row) in reader.deserialize::<ReviewRow>().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(RowError {
                    row: row_no,
                    draft_id: String::new(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        if known_ids.is_some_and(|ids| !ids.contains(&row.draft_id)) {
            report.errors.push(RowError {
                row: row_no,
                draft_id: row.draft_id.clone(),
                message: format!("unknown draft_id {:?}", row.draft_id),
            });
            continue;
        }
        match row_to_record(&row, annotator_id) {
            Ok(r) => report.records.push(r),
            Err(message) => report.errors.push(RowError {
                row: row_no,
                draft_id: row.draft_id.clone(),
                message,
            }),
        }
    }
    Ok(report)
}

/// The review sheet filled with merged decisions; rows still awaiting
/// adjudication keep their annotation cells blank.
pub fn export_merged_sheet(
    checked: &[CheckedDraft],
    decisions: &[MergedDecision],
) -> Result<String, AnnotationError> {
    let by_id: HashMap<&str, &MergedDecision> =
        decisions.iter().map(|d| (d.draft_id.as_str(), d)).collect();
    let rows: Vec<ReviewRow> = review_queue(checked, &[])
        .into_iter()
        .map(|c| {
            let mut row = ReviewRow::blank(c);
            if let Some(d) = by_id.get(c.draft.id.as_str()).filter(|d| !d.needs_adjudication) {
                row.is_correct = d.verdict.map(|v| v.as_str().to_string()).unwrap_or_default();
                row.corrected_instruction = d.corrected_instruction.clone().unwrap_or_default();
                row.corrected_response = d.corrected_response.clone().unwrap_or_default();
                row.error_category = d.error_category.map(|c| c.label().to_string()).unwrap_or_default();
            }
            row
        })
        .collect();
    rows_to_csv(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AppliedCorrection, Draft, LanguageCode, NO_COT};

    fn checked(id: &str, status: TriageStatus) -> CheckedDraft {
        CheckedDraft {
            draft: Draft {
                id: id.into(),
                instr_fr: "Q ?".into(),
                instr_lrl: "Suba, a koy Niamey?".into(),
                resp_lrl: "A ga koy, \"Niamey\".".into(),
                cot_lrl: NO_COT.into(),
                topic_fr: "Sports".into(),
                lang: LanguageCode::new("dje").unwrap(),
            },
            status,
            analysis: None,
            applied_correction: (status == TriageStatus::LowPriority).then(|| AppliedCorrection {
                resp_lrl: Some("fix".into()),
                ..AppliedCorrection::default()
            }),
        }
    }

    fn mixed() -> Vec<CheckedDraft> {
        use TriageStatus::*;
        vec![
            checked("l1", LowPriority),
            checked("t1", TopPriority),
            checked("a1", Accepted),
            checked("t2", TopPriority),
            checked("l2", LowPriority),
            checked("t3", TopPriority),
        ]
    }

    #[test]
    fn header_and_ordering() {
        let sheets = export_review_sheet(&mixed(), &[], DEFAULT_BATCH_SIZE).unwrap();
        assert_eq!(sheets.len(), 1);
        let mut lines = sheets[0].lines();
        assert_eq!(lines.next().unwrap(), REVIEW_COLUMNS.join(","));
        let ids: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(ids, ["t1", "t2", "t3", "l1", "l2"]);
    }

    #[test]
    fn batches_of_two_hundred() {
        let many: Vec<CheckedDraft> = (0..450).map(|i| checked(&format!("d{i}"), TriageStatus::TopPriority)).collect();
        let sheets = export_review_sheet(&many, &[], 200).unwrap();
        let rows: Vec<usize> = sheets.iter().map(|s| s.lines().count() - 1).collect();
        assert_eq!(rows, [200, 200, 50]);
    }

    #[test]
    fn status_filter() {
        let sheets = export_review_sheet(&mixed(), &[TriageStatus::TopPriority], 200).unwrap();
        assert_eq!(sheets[0].lines().count(), 4);
        assert!(!sheets[0].contains("low_priority"));
    }

    #[test]
    fn unedited_sheet_does_not_import() {
        let sheet = &export_review_sheet(&mixed(), &[], 200).unwrap()[0];
        let report = import_annotations(sheet, "ann1", None).unwrap();
        assert!(report.records.is_empty());
        assert_eq!(report.errors.len(), 5);
        assert!(report.errors.iter().all(|e| e.message == "is_correct is empty"));
    }

    #[test]
    fn row_rules() {
        let csv = format!(
            "{}\r\nd1,x,y,top_priority,No,,\"Suba, a ga koy Niamey\",Tense Inconsistency,\r\nd2,x,y,top_priority,Yes,,,,\r\nd3,x,y,top_priority,No,,z,,\r\nzz,x,y,top_priority,Yes,,,,\r\n",
            REVIEW_COLUMNS.join(",")
        );
        let known: HashSet<String> = ["d1", "d2", "d3"].map(String::from).into();
        let report = import_annotations(&csv, "ann1", Some(&known)).unwrap();
        assert_eq!(report.records.len(), 2);
        assert_eq!(report.records[0].corrected_response.as_deref(), Some("Suba, a ga koy Niamey"));
        assert_eq!(report.records[0].error_category, Some(ErrorCategory::TenseInconsistency));
        assert_eq!(report.records[1].is_correct, Verdict::Yes);
        assert!(report.errors[0].message.contains("error_category"));
        assert!(report.errors[1].message.contains("unknown draft_id"));
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(matches!(
            import_annotations("draft_id,is_correct\r\nd1,Yes\r\n", "a", None),
            Err(AnnotationError::Header(_))
        ));
    }
}
