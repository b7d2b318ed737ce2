use super::ScoringError;
use crate::clustering::ClusterAssignment;
use crate::segmentation::SubSegment;
use crate::timeline::{Interval, Timeline};

const MERGE_GAP_S: f64 = 1e-6;

pub fn speaker_name(label: usize) -> String {
    format!("spk{label}")
}

/// Turns labeled sliding windows into non-overlapping speaker turns.
///
/// Each window owns the stretch between the midpoints of its overlaps with
/// the previous and next window; consecutive stretches with the same label
/// are then joined.
pub fn assemble_hypothesis(
    file_id: &str,
    subsegments: &[SubSegment],
    assignment: &ClusterAssignment,
) -> Result<Timeline, ScoringError> {
    if subsegments.len() != assignment.labels.len() {
        return Err(ScoringError::LengthMismatch {
            subsegments: subsegments.len(),
            labels: assignment.labels.len(),
        });
    }
    let mut order: Vec<usize> = (0..subsegments.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&subsegments[a], &subsegments[b]);
        x.start_s
            .total_cmp(&y.start_s)
            .then(x.end_s.total_cmp(&y.end_s))
    });

    let mut owned: Vec<(f64, f64, usize)> = Vec::with_capacity(order.len());
    let mut prev_end = f64::NEG_INFINITY;
    for (pos, &i) in order.iter().enumerate() {
        let seg = &subsegments[i];
        let mut left = seg.start_s;
        if pos > 0 {
            let prev = &subsegments[order[pos - 1]];
            if prev.end_s > seg.start_s {
                left = 0.5 * (seg.start_s + prev.end_s);
            }
        }
        let mut right = seg.end_s;
        if let Some(&next_idx) = order.get(pos + 1) {
            let next = &subsegments[next_idx];
            if seg.end_s > next.start_s {
                right = 0.5 * (next.start_s + seg.end_s);
            }
        }
        let left = left.max(prev_end).max(seg.start_s);
        let right = right.min(seg.end_s);
        if right > left {
            owned.push((left, right, assignment.labels[i]));
            prev_end = right;
        }
    }

    let mut intervals: Vec<Interval> = Vec::new();
    let mut last_label: Option<usize> = None;
    for (s, e, label) in owned {
        if let (Some(last), Some(prev_label)) = (intervals.last_mut(), last_label) {
            if prev_label == label && s - last.end <= MERGE_GAP_S {
                last.end = last.end.max(e);
                continue;
            }
        }
        intervals.push(Interval::labeled(s, e, speaker_name(label)));
        last_label = Some(label);
    }
    Ok(Timeline {
        file_id: file_id.to_string(),
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn windows(bounds: &[(f64, f64)]) -> Vec<SubSegment> {
        bounds
            .iter()
            .map(|&(s, e)| SubSegment {
                start_s: s,
                end_s: e,
                region_index: 0,
            })
            .collect()
    }

    fn turns(tl: &Timeline) -> Vec<(f64, f64, String)> {
        tl.intervals
            .iter()
            .map(|iv| (iv.start, iv.end, iv.label.clone().unwrap()))
            .collect()
    }

    #[test]
    fn same_label_merges() {
        let segs = windows(&[(0.0, 2.0), (0.4, 2.4)]);
        let tl = assemble_hypothesis("f", &segs, &ClusterAssignment::from_raw(&[0, 0])).unwrap();
        assert_eq!(turns(&tl), vec![(0.0, 2.4, "spk0".to_string())]);
    }

    #[test]
    fn conflicting_overlap_splits_at_midpoint() {
        let segs = windows(&[(0.0, 2.0), (0.4, 2.4)]);
        let tl = assemble_hypothesis("f", &segs, &ClusterAssignment::from_raw(&[0, 1])).unwrap();
        let t = turns(&tl);
        assert_eq!(t.len(), 2);
        assert!((t[0].1 - 1.2).abs() < 1e-12 && t[0].2 == "spk0");
        assert!((t[1].0 - 1.2).abs() < 1e-12 && t[1].1 == 2.4 && t[1].2 == "spk1");
    }

    #[test]
    fn single_window() {
        let segs = windows(&[(3.0, 4.5)]);
        let tl = assemble_hypothesis("f", &segs, &ClusterAssignment::from_raw(&[0])).unwrap();
        assert_eq!(turns(&tl), vec![(3.0, 4.5, "spk0".to_string())]);
    }

    #[test]
    fn length_mismatch() {
        let segs = windows(&[(0.0, 1.0)]);
        assert!(matches!(
            assemble_hypothesis("f", &segs, &ClusterAssignment::from_raw(&[0, 1])),
            Err(ScoringError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn dense_windows_never_overlap() {
        let mut bounds = Vec::new();
        let mut s = 0.0;
        while s + 2.0 <= 10.0 {
            bounds.push((s, s + 2.0));
            s += 0.4;
        }
        bounds.push((8.5, 10.5));
        bounds.push((12.0, 12.6));
        let segs = windows(&bounds);
        let raw: Vec<usize> = (0..segs.len()).map(|i| (i / 3) % 2).collect();
        let tl = assemble_hypothesis("f", &segs, &ClusterAssignment::from_raw(&raw)).unwrap();
        for w in tl.intervals.windows(2) {
            assert!(w[0].end <= w[1].start + 1e-12);
        }
        assert_eq!(tl.intervals[0].start, 0.0);
        assert_eq!(tl.end_time(), 12.6);
        let covered: f64 = tl.total_duration();
        assert!((covered - (10.5 + 0.6)).abs() < 1e-9);
    }
}
