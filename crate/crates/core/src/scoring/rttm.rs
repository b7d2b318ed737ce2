//! RTTM and UEM text formats.
//!
//! RTTM speaker lines have ten whitespace-separated fields:
//!
//! ```text
//! SPEAKER <file> <chan> <tbeg> <tdur> <ortho> <stype> <name> <conf> <slat>
//! ```
//!
//! Nine-field lines (no `<slat>`) are accepted as well. Other record types
//! (`SPKR-INFO`, `LEXEME`, ...) are skipped. UEM lines are
//! `<file> <chan> <start> <end>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::ScoringError;
use crate::timeline::{Interval, Timeline};

#[derive(Debug, Clone, PartialEq)]
pub struct RttmRecord {
    pub file_id: String,
    pub channel: u32,
    pub onset_s: f64,
    pub duration_s: f64,
    pub speaker: String,
}

impl RttmRecord {
    pub fn new(file_id: &str, onset_s: f64, duration_s: f64, speaker: &str) -> Self {
        Self {
            file_id: file_id.to_string(),
            channel: 1,
            onset_s,
            duration_s,
            speaker: speaker.to_string(),
        }
    }

    pub fn end_s(&self) -> f64 {
        self.onset_s + self.duration_s
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> ScoringError {
    ScoringError::ParseError {
        line,
        reason: reason.into(),
    }
}

fn parse_seconds(token: &str, what: &str, line: usize) -> Result<f64, ScoringError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(line, format!("{what} {token:?} is not a finite number")))
}

fn is_comment(line: &str) -> bool {
    line.is_empty() || line.starts_with(';') || line.starts_with('#')
}

/// Parses RTTM text into records grouped by file id, in input order.
pub fn parse_rttm(text: &str) -> Result<BTreeMap<String, Vec<RttmRecord>>, ScoringError> {
    let mut out: BTreeMap<String, Vec<RttmRecord>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if is_comment(line) {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens[0] != "SPEAKER" {
            if tokens[0]
                .chars()
                .all(|c| c.is_ascii_uppercase() || c == '-')
            {
                continue;
            }
            return Err(parse_err(
                line_no,
                format!("unknown record type {:?}", tokens[0]),
            ));
        }
        if tokens.len() != 9 && tokens.len() != 10 {
            return Err(parse_err(
                line_no,
                format!("expected 10 fields, found {}", tokens.len()),
            ));
        }
        let channel = tokens[2].parse::<u32>().map_err(|_| {
            parse_err(
                line_no,
                format!("channel {:?} is not an integer", tokens[2]),
            )
        })?;
        let onset_s = parse_seconds(tokens[3], "onset", line_no)?;
        let duration_s = parse_seconds(tokens[4], "duration", line_no)?;
        if onset_s < 0.0 {
            return Err(parse_err(line_no, "negative onset"));
        }
        if duration_s <= 0.0 {
            return Err(parse_err(line_no, "duration must be positive"));
        }
        out.entry(tokens[1].to_string())
            .or_default()
            .push(RttmRecord {
                file_id: tokens[1].to_string(),
                channel,
                onset_s,
                duration_s,
                speaker: tokens[7].to_string(),
            });
    }
    Ok(out)
}

/// Ten-field lines with times at millisecond precision.
pub fn write_rttm(records: &[RttmRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "SPEAKER {} {} {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            r.file_id, r.channel, r.onset_s, r.duration_s, r.speaker
        );
    }
    out
}

pub fn records_to_timeline(file_id: &str, records: &[RttmRecord]) -> Timeline {
    Timeline::from_intervals(
        file_id,
        records
            .iter()
            .map(|r| Interval::labeled(r.onset_s, r.end_s(), r.speaker.clone()))
            .collect(),
    )
}

/// Labeled intervals as RTTM records; unlabeled intervals become "speech".
pub fn timeline_to_records(tl: &Timeline) -> Vec<RttmRecord> {
    tl.intervals
        .iter()
        .map(|iv| {
            RttmRecord::new(
                &tl.file_id,
                iv.start,
                iv.duration(),
                iv.label.as_deref().unwrap_or("speech"),
            )
        })
        .collect()
}

/// Parses UEM text into scoring regions per file.
pub fn parse_uem(text: &str) -> Result<BTreeMap<String, Timeline>, ScoringError> {
    let mut out: BTreeMap<String, Vec<Interval>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if is_comment(line) {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(parse_err(
                line_no,
                format!("expected 4 UEM fields, found {}", tokens.len()),
            ));
        }
        let start = parse_seconds(tokens[2], "start", line_no)?;
        let end = parse_seconds(tokens[3], "end", line_no)?;
        if start < 0.0 || end <= start {
            return Err(parse_err(
                line_no,
                format!("bad UEM region [{start}, {end})"),
            ));
        }
        out.entry(tokens[0].to_string())
            .or_default()
            .push(Interval::new(start, end));
    }
    Ok(out
        .into_iter()
        .map(|(file, ivs)| {
            let tl = Timeline::from_intervals(file.clone(), ivs).support();
            (file, tl)
        })
        .collect())
}
