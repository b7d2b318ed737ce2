//! Diarization error rate over exact interval arithmetic.
//!
//! Times are rounded to integer milliseconds, so every sum below is exact.
//! Scored time is cut at every reference, hypothesis and UEM boundary; within
//! each piece with `r` reference and `h` hypothesis speakers, of which `m`
//! are matched by the optimal speaker mapping:
//!
//! - missed speech += dur * max(0, r - h)
//! - false alarm   += dur * max(0, h - r)
//! - speaker error += dur * (min(r, h) - m)
//!
//! Percentages are relative to total scored reference speaker time (overlap
//! counted once per speaker), so DER can exceed 100.

use super::hungarian::optimal_speaker_mapping;
use super::ScoringError;
use crate::timeline::Timeline;

type Span = (i64, i64);

pub(crate) fn to_ticks(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

fn ticks_to_s(t: i64) -> f64 {
    t as f64 / 1000.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerReport {
    pub ms_pct: f64,
    pub fa_pct: f64,
    pub se_pct: f64,
    pub der_pct: f64,
    pub total_ref_s: f64,
    pub ms_s: f64,
    pub fa_s: f64,
    pub se_s: f64,
    /// (hypothesis speaker, reference speaker) pairs of the optimal mapping.
    pub mapping: Vec<(String, String)>,
}

impl DerReport {
    /// Percentages from summed seconds; used for multi-file totals.
    pub fn from_seconds(ms_s: f64, fa_s: f64, se_s: f64, total_ref_s: f64) -> Self {
        let pct = |x: f64| {
            if total_ref_s > 0.0 {
                100.0 * x / total_ref_s
            } else {
                0.0
            }
        };
        Self {
            ms_pct: pct(ms_s),
            fa_pct: pct(fa_s),
            se_pct: pct(se_s),
            der_pct: pct(ms_s + fa_s + se_s),
            total_ref_s,
            ms_s,
            fa_s,
            se_s,
            mapping: Vec::new(),
        }
    }
}

/// Per-speaker disjoint spans in ticks, empty spans dropped.
fn speaker_spans(tl: &Timeline) -> Vec<(String, Vec<Span>)> {
    tl.by_label()
        .into_iter()
        .map(|(label, t)| {
            let mut spans: Vec<Span> = Vec::new();
            for iv in &t.intervals {
                let (s, e) = (to_ticks(iv.start), to_ticks(iv.end));
                if e <= s {
                    continue;
                }
                match spans.last_mut() {
                    Some(last) if s <= last.1 => last.1 = last.1.max(e),
                    _ => spans.push((s, e)),
                }
            }
            (label, spans)
        })
        .filter(|(_, spans)| !spans.is_empty())
        .collect()
}

fn union(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort_unstable();
    let mut out: Vec<Span> = Vec::new();
    for (s, e) in spans {
        if e <= s {
            continue;
        }
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn subtract(base: &[Span], cut: &[Span]) -> Vec<Span> {
    let mut out = Vec::new();
    for &(s, e) in base {
        let mut cursor = s;
        for &(cs, ce) in cut {
            if ce <= cursor || cs >= e {
                continue;
            }
            if cs > cursor {
                out.push((cursor, cs));
            }
            cursor = cursor.max(ce);
            if cursor >= e {
                break;
            }
        }
        if cursor < e {
            out.push((cursor, e));
        }
    }
    out
}

/// Whether tick interval `[s, e)` lies in `spans`, advancing `cursor`
/// monotonically. Callers query disjoint atoms in increasing order.
fn covers(spans: &[Span], cursor: &mut usize, s: i64, e: i64) -> bool {
    while *cursor < spans.len() && spans[*cursor].1 <= s {
        *cursor += 1;
    }
    *cursor < spans.len() && spans[*cursor].0 <= s && e <= spans[*cursor].1
}

struct Atom {
    dur: i64,
    refs: Vec<usize>,
    hyps: Vec<usize>,
}

pub fn compute_der(
    reference: &Timeline,
    hypothesis: &Timeline,
    uem: Option<&Timeline>,
    collar_s: f64,
) -> Result<DerReport, ScoringError> {
    let refs = speaker_spans(reference);
    let hyps = speaker_spans(hypothesis);

    let base: Vec<Span> = match uem {
        Some(u) => union(
            u.intervals
                .iter()
                .map(|iv| (to_ticks(iv.start), to_ticks(iv.end)))
                .collect(),
        ),
        None => {
            let end = refs
                .iter()
                .chain(&hyps)
                .filter_map(|(_, spans)| spans.last().map(|s| s.1))
                .max()
                .unwrap_or(0);
            let start = refs
                .iter()
                .chain(&hyps)
                .filter_map(|(_, spans)| spans.first().map(|s| s.0))
                .min()
                .unwrap_or(0)
                .min(0);
            if end > start {
                vec![(start, end)]
            } else {
                Vec::new()
            }
        }
    };
    let collar = to_ticks(collar_s.max(0.0));
    let scored = if collar > 0 {
        let zones = union(
            refs.iter()
                .flat_map(|(_, spans)| spans.iter())
                .flat_map(|&(s, e)| [(s - collar, s + collar), (e - collar, e + collar)])
                .collect(),
        );
        subtract(&base, &zones)
    } else {
        base
    };

    let mut cuts: Vec<i64> = scored.iter().flat_map(|&(s, e)| [s, e]).collect();
    for (_, spans) in refs.iter().chain(&hyps) {
        cuts.extend(spans.iter().flat_map(|&(s, e)| [s, e]));
    }
    cuts.sort_unstable();
    cuts.dedup();

    let mut scored_cursor = 0;
    let mut ref_cursors = vec![0usize; refs.len()];
    let mut hyp_cursors = vec![0usize; hyps.len()];
    let mut atoms: Vec<Atom> = Vec::new();
    let mut overlap = vec![vec![0i64; hyps.len()]; refs.len()];
    for w in cuts.windows(2) {
        let (s, e) = (w[0], w[1]);
        if !covers(&scored, &mut scored_cursor, s, e) {
            continue;
        }
        let active = |spk: &[(String, Vec<Span>)], cursors: &mut [usize]| -> Vec<usize> {
            spk.iter()
                .zip(cursors.iter_mut())
                .enumerate()
                .filter_map(|(i, ((_, spans), cur))| covers(spans, cur, s, e).then_some(i))
                .collect()
        };
        let r = active(&refs, &mut ref_cursors);
        let h = active(&hyps, &mut hyp_cursors);
        if r.is_empty() && h.is_empty() {
            continue;
        }
        for &i in &r {
            for &j in &h {
                overlap[i][j] += e - s;
            }
        }
        atoms.push(Atom {
            dur: e - s,
            refs: r,
            hyps: h,
        });
    }

    let weights: Vec<Vec<f64>> = overlap
        .iter()
        .map(|row| row.iter().map(|&x| x as f64).collect())
        .collect();
    let pairs = optimal_speaker_mapping(&weights);
    let mut hyp_to_ref = vec![None; hyps.len()];
    for &(r, h) in &pairs {
        hyp_to_ref[h] = Some(r);
    }

    let (mut total, mut ms, mut fa, mut se) = (0i64, 0i64, 0i64, 0i64);
    for atom in &atoms {
        let r = atom.refs.len() as i64;
        let h = atom.hyps.len() as i64;
        let matched = atom
            .hyps
            .iter()
            .filter(|&&j| hyp_to_ref[j].is_some_and(|ri| atom.refs.contains(&ri)))
            .count() as i64;
        total += atom.dur * r;
        ms += atom.dur * (r - h).max(0);
        fa += atom.dur * (h - r).max(0);
        se += atom.dur * (r.min(h) - matched);
    }
    if total == 0 {
        return Err(ScoringError::EmptyReference(reference.file_id.clone()));
    }

    let mut report = DerReport::from_seconds(
        ticks_to_s(ms),
        ticks_to_s(fa),
        ticks_to_s(se),
        ticks_to_s(total),
    );
    let denom = total as f64;
    report.ms_pct = 100.0 * ms as f64 / denom;
    report.fa_pct = 100.0 * fa as f64 / denom;
    report.se_pct = 100.0 * se as f64 / denom;
    report.der_pct = report.ms_pct + report.fa_pct + report.se_pct;
    report.mapping = pairs
        .iter()
        .map(|&(r, h)| (hyps[h].0.clone(), refs[r].0.clone()))
        .collect();
    Ok(report)
}

/// Speech-only scoring: all speakers collapsed into one label.
pub fn vad_score(
    reference: &Timeline,
    hypothesis: &Timeline,
    uem: Option<&Timeline>,
) -> Result<(f64, f64), ScoringError> {
    let report = compute_der(
        &reference.collapse("speech"),
        &hypothesis.collapse("speech"),
        uem,
        0.0,
    )?;
    Ok((report.ms_pct, report.fa_pct))
}
