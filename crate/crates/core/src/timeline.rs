//! Labeled time intervals.
//!
//! A [`Timeline`] carries VAD speech regions (unlabeled), speaker turns
//! (labeled, possibly overlapping across labels) and UEM scoring regions.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
    pub label: Option<String>,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self {
            start,
            end,
            label: None,
        }
    }

    pub fn labeled(start: f64, end: f64, label: impl Into<String>) -> Self {
        Self {
            start,
            end,
            label: Some(label.into()),
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timeline {
    pub file_id: String,
    pub intervals: Vec<Interval>,
}

impl Timeline {
    pub fn new(file_id: impl Into<String>) -> Self {
        Self {
            file_id: file_id.into(),
            intervals: Vec::new(),
        }
    }

    pub fn from_intervals(file_id: impl Into<String>, mut intervals: Vec<Interval>) -> Self {
        sort_intervals(&mut intervals);
        Self {
            file_id: file_id.into(),
            intervals,
        }
    }

    /// Inserts an interval keeping the timeline sorted by start.
    pub fn push(&mut self, interval: Interval) {
        let pos = self
            .intervals
            .partition_point(|iv| (iv.start, iv.end) <= (interval.start, interval.end));
        self.intervals.insert(pos, interval);
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    /// Sum of interval durations. Overlapping intervals are counted multiply.
    pub fn total_duration(&self) -> f64 {
        self.intervals.iter().map(Interval::duration).sum()
    }

    pub fn end_time(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.end).fold(0.0, f64::max)
    }

    /// Union of all intervals regardless of label; touching intervals merge.
    pub fn support(&self) -> Timeline {
        let mut out: Vec<Interval> = Vec::new();
        let mut sorted = self.intervals.clone();
        sort_intervals(&mut sorted);
        for iv in sorted {
            match out.last_mut() {
                Some(last) if iv.start <= last.end => {
                    if iv.end > last.end {
                        last.end = iv.end;
                    }
                }
                _ => out.push(Interval::new(iv.start, iv.end)),
            }
        }
        Timeline {
            file_id: self.file_id.clone(),
            intervals: out,
        }
    }

    /// Distinct labels in sorted order. Unlabeled intervals are skipped.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .intervals
            .iter()
            .filter_map(|iv| iv.label.clone())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Per-label union of intervals, keyed by label (unlabeled intervals use "").
    pub fn by_label(&self) -> BTreeMap<String, Timeline> {
        let mut groups: BTreeMap<String, Timeline> = BTreeMap::new();
        for iv in &self.intervals {
            let key = iv.label.clone().unwrap_or_default();
            groups
                .entry(key)
                .or_insert_with(|| Timeline::new(self.file_id.clone()))
                .intervals
                .push(iv.clone());
        }
        for (label, tl) in groups.iter_mut() {
            let mut merged = tl.support();
            for iv in &mut merged.intervals {
                if !label.is_empty() {
                    iv.label = Some(label.clone());
                }
            }
            *tl = merged;
        }
        groups
    }

    /// Every interval relabeled with `label`, then unioned.
    pub fn collapse(&self, label: &str) -> Timeline {
        let mut tl = self.support();
        for iv in &mut tl.intervals {
            iv.label = Some(label.to_string());
        }
        tl
    }

    /// Checks the speech-timeline invariants: positive length, sorted,
    /// non-overlapping and non-touching.
    pub fn is_disjoint_sorted(&self) -> bool {
        self.intervals.iter().all(|iv| iv.start < iv.end)
            && self.intervals.windows(2).all(|w| w[0].end < w[1].start)
    }
}

fn sort_intervals(intervals: &mut [Interval]) {
    intervals.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then(a.end.total_cmp(&b.end))
            .then_with(|| a.label.cmp(&b.label))
    });
}
