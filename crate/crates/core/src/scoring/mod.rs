//! RTTM/UEM I/O, hypothesis assembly and DER scoring.

mod der;
mod hungarian;
mod hypothesis;
mod report;
mod rttm;

use thiserror::Error;

pub use der::{compute_der, vad_score, DerReport};
pub use hungarian::{mapping_weight, optimal_speaker_mapping};
pub use hypothesis::{assemble_hypothesis, speaker_name};
pub use report::{format_kv, format_table, score_files, FileScore, ScoreSummary};
pub use rttm::{
    parse_rttm, parse_uem, records_to_timeline, timeline_to_records, write_rttm, RttmRecord,
};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("{subsegments} subsegments but {labels} labels")]
    LengthMismatch { subsegments: usize, labels: usize },
    #[error("reference for {0} has no scored speech")]
    EmptyReference(String),
    #[error("hypothesis files missing from the reference: {}", .0.join(", "))]
    FileSetMismatch(Vec<String>),
}
