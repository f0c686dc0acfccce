//! Human review round-trip: review sheets out, annotations in, majority
//! vote per draft, and inter-annotator agreement.

mod alpha;
mod merge;
mod sheet;

use thiserror::Error;

pub use alpha::{agreement, krippendorff_alpha, AgreementLabel, AgreementReport};
pub use merge::{merge_annotations, MergedDecision, ADJUDICATOR};
pub use sheet::{
    export_merged_sheet, export_review_sheet, import_annotations, review_queue, rows_to_csv,
    write_review_sheets, ImportReport, ReviewRow, RowError, DEFAULT_BATCH_SIZE, REVIEW_COLUMNS,
};

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("review sheet header must be {expected}, found {0}", expected = REVIEW_COLUMNS.join(","))]
    Header(String),
    #[error("annotator id is empty")]
    Annotator,
    #[error("no pairable ratings: every item has fewer than two")]
    NoPairableValues,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
