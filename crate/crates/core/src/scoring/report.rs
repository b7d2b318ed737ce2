use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use super::{compute_der, records_to_timeline, DerReport, RttmRecord, ScoringError};
use crate::timeline::Timeline;

#[derive(Debug, Clone, PartialEq)]
pub struct FileScore {
    pub file_id: String,
    pub report: DerReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub files: Vec<FileScore>,
    /// Totals over summed seconds, not averaged percentages.
    pub overall: DerReport,
    pub warnings: Vec<String>,
}

/// Scores every reference file. Reference files without a hypothesis are
/// scored against an empty one (all missed speech) with a warning;
/// hypothesis files without a reference are an error.
pub fn score_files(
    reference: &BTreeMap<String, Vec<RttmRecord>>,
    hypothesis: &BTreeMap<String, Vec<RttmRecord>>,
    uem: Option<&BTreeMap<String, Timeline>>,
    collar_s: f64,
) -> Result<ScoreSummary, ScoringError> {
    let extra: Vec<String> = hypothesis
        .keys()
        .filter(|k| !reference.contains_key(*k))
        .cloned()
        .collect();
    if !extra.is_empty() {
        return Err(ScoringError::FileSetMismatch(extra));
    }

    let mut warnings = Vec::new();
    for file in reference.keys().filter(|k| !hypothesis.contains_key(*k)) {
        let msg = format!("{file}: no hypothesis, scored as 100% missed speech");
        warn!("{msg}");
        warnings.push(msg);
    }

    let files: Vec<FileScore> = reference
        .par_iter()
        .map(|(file, recs)| {
            let ref_tl = records_to_timeline(file, recs);
            let hyp_tl = hypothesis
                .get(file)
                .map(|h| records_to_timeline(file, h))
                .unwrap_or_else(|| Timeline::new(file.clone()));
            let file_uem = uem.and_then(|u| u.get(file));
            compute_der(&ref_tl, &hyp_tl, file_uem, collar_s).map(|report| FileScore {
                file_id: file.clone(),
                report,
            })
        })
        .collect::<Result<_, _>>()?;

    let (ms, fa, se, total) = files.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, f| {
        (
            acc.0 + f.report.ms_s,
            acc.1 + f.report.fa_s,
            acc.2 + f.report.se_s,
            acc.3 + f.report.total_ref_s,
        )
    });
    Ok(ScoreSummary {
        files,
        overall: DerReport::from_seconds(ms, fa, se, total),
        warnings,
    })
}

/// Aligned table: one row per file plus OVERALL, columns MS FA SE DER.
pub fn format_table(summary: &ScoreSummary) -> String {
    let name_width = summary
        .files
        .iter()
        .map(|f| f.file_id.len())
        .chain(["OVERALL".len(), "File".len()])
        .max()
        .unwrap_or(4);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<name_width$} {:>8} {:>8} {:>8} {:>8}",
        "File", "MS", "FA", "SE", "DER"
    );
    let row = |out: &mut String, name: &str, r: &DerReport| {
        let _ = writeln!(
            out,
            "{:<name_width$} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            name, r.ms_pct, r.fa_pct, r.se_pct, r.der_pct
        );
    };
    for f in &summary.files {
        row(&mut out, &f.file_id, &f.report);
    }
    row(&mut out, "OVERALL", &summary.overall);
    out
}

/// Machine-readable `key=value` lines, one per file plus OVERALL.
pub fn format_kv(summary: &ScoreSummary) -> String {
    let mut out = String::new();
    let line = |out: &mut String, name: &str, r: &DerReport| {
        let _ = writeln!(
            out,
            "file={name} ms={:.4} fa={:.4} se={:.4} der={:.4} ref_s={:.3}",
            r.ms_pct, r.fa_pct, r.se_pct, r.der_pct, r.total_ref_s
        );
    };
    for f in &summary.files {
        line(&mut out, &f.file_id, &f.report);
    }
    line(&mut out, "OVERALL", &summary.overall);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::parse_rttm;

    const REF: &str = "SPEAKER a 1 0.0 10.0 <NA> <NA> s1 <NA> <NA>\n\
                       SPEAKER b 1 0.0 30.0 <NA> <NA> s1 <NA> <NA>\n";

    #[test]
    fn identical_scores_zero() {
        let r = parse_rttm(REF).unwrap();
        let s = score_files(&r, &r, None, 0.0).unwrap();
        assert_eq!(s.overall.der_pct, 0.0);
        assert!(s.warnings.is_empty());
        let table = format_table(&s);
        assert!(table.lines().next().unwrap().contains("MS"));
        assert!(table.contains("OVERALL"));
        assert_eq!(table.lines().count(), 4);
    }

    #[test]
    fn missing_hypothesis_is_all_miss() {
        let r = parse_rttm(REF).unwrap();
        let h = parse_rttm("SPEAKER b 1 0.0 30.0 <NA> <NA> x <NA> <NA>\n").unwrap();
        let s = score_files(&r, &h, None, 0.0).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(s.files[0].report.ms_pct, 100.0);
        // overall is weighted by seconds: 10 s missed out of 40 s
        assert_eq!(s.overall.ms_pct, 25.0);
    }

    #[test]
    fn extra_hypothesis_file_is_mismatch() {
        let r = parse_rttm(REF).unwrap();
        let h = parse_rttm("SPEAKER zz 1 0.0 3.0 <NA> <NA> x <NA> <NA>\n").unwrap();
        assert_eq!(
            score_files(&r, &h, None, 0.0),
            Err(ScoringError::FileSetMismatch(vec!["zz".to_string()]))
        );
    }

    #[test]
    fn kv_lines() {
        let r = parse_rttm(REF).unwrap();
        let s = score_files(&r, &r, None, 0.0).unwrap();
        let kv = format_kv(&s);
        assert!(kv.starts_with("file=a ms=0.0000"));
        assert!(kv.trim_end().ends_with("ref_s=40.000"));
    }
}
