//! Sliding-window subsegmentation of speech regions.

use thiserror::Error;

use crate::timeline::Timeline;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("bad window parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubSegment {
    pub start_s: f64,
    pub end_s: f64,
    /// Index of the parent speech interval in the VAD timeline.
    pub region_index: usize,
}

impl SubSegment {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowParams {
    pub window_s: f64,
    pub stride_s: f64,
    pub min_subsegment_s: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            window_s: 2.0,
            stride_s: 0.4,
            min_subsegment_s: 0.4,
        }
    }
}

impl WindowParams {
    pub fn validate(&self) -> Result<(), SegmentationError> {
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(SegmentationError::BadParams(format!(
                "window must be positive, got {}",
                self.window_s
            )));
        }
        if !(self.stride_s > 0.0 && self.stride_s <= self.window_s) {
            return Err(SegmentationError::BadParams(format!(
                "need 0 < stride <= window, got stride {} window {}",
                self.stride_s, self.window_s
            )));
        }
        if self.min_subsegment_s.is_nan() || self.min_subsegment_s < 0.0 {
            return Err(SegmentationError::BadParams(
                "min_subsegment must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

// Window positions are compared with a small slack so that e.g. 0.4 * 5 + 2.0
// still counts as fitting a region ending at 4.0.
const EPS: f64 = 1e-9;

/// Cuts every speech region into `window_s` windows every `stride_s`. A tail
/// window anchored at the region end covers any remainder, and regions
/// shorter than `min_subsegment_s` are dropped.
pub fn slide_windows(
    speech: &Timeline,
    params: &WindowParams,
) -> Result<Vec<SubSegment>, SegmentationError> {
    params.validate()?;
    let WindowParams {
        window_s,
        stride_s,
        min_subsegment_s,
    } = *params;

    let mut out = Vec::new();
    for (region_index, region) in speech.intervals.iter().enumerate() {
        let (a, b) = (region.start, region.end);
        if b - a + EPS < min_subsegment_s || b <= a {
            continue;
        }
        let mut last_end = a;
        let mut k = 0usize;
        loop {
            let start = a + k as f64 * stride_s;
            let end = start + window_s;
            if end > b + EPS {
                break;
            }
            let end = end.min(b);
            out.push(SubSegment {
                start_s: start,
                end_s: end,
                region_index,
            });
            last_end = end;
            k += 1;
        }
        if b - last_end > EPS {
            out.push(SubSegment {
                start_s: (b - window_s).max(a),
                end_s: b,
                region_index,
            });
        }
    }
    out.sort_by(|x, y| {
        x.start_s
            .total_cmp(&y.start_s)
            .then(x.end_s.total_cmp(&y.end_s))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeline::Interval;
    use proptest::prelude::*;

    fn region(a: f64, b: f64) -> Timeline {
        Timeline::from_intervals("f", vec![Interval::new(a, b)])
    }

    fn bounds(segs: &[SubSegment]) -> Vec<(f64, f64)> {
        segs.iter().map(|s| (s.start_s, s.end_s)).collect()
    }

    fn close(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
        a.len() == b.len()
            && a.iter()
                .zip(b)
                .all(|(x, y)| (x.0 - y.0).abs() < 1e-9 && (x.1 - y.1).abs() < 1e-9)
    }

    #[test]
    fn exact_fit_gives_one_window() {
        let segs = slide_windows(&region(0.0, 2.0), &WindowParams::default()).unwrap();
        assert_eq!(bounds(&segs), vec![(0.0, 2.0)]);
    }

    #[test]
    fn tail_is_anchored_to_region_end() {
        let segs = slide_windows(&region(0.0, 3.0), &WindowParams::default()).unwrap();
        assert!(close(
            &bounds(&segs),
            &[(0.0, 2.0), (0.4, 2.4), (0.8, 2.8), (1.0, 3.0)]
        ));
    }

    #[test]
    fn region_below_minimum_dropped() {
        let segs = slide_windows(&region(0.0, 0.3), &WindowParams::default()).unwrap();
        assert!(segs.is_empty());
    }

    #[test]
    fn short_region_becomes_single_short_window() {
        let segs = slide_windows(&region(5.0, 6.2), &WindowParams::default()).unwrap();
        assert_eq!(bounds(&segs), vec![(5.0, 6.2)]);
    }

    #[test]
    fn bad_params() {
        let bad = [
            WindowParams {
                window_s: 0.0,
                ..WindowParams::default()
            },
            WindowParams {
                stride_s: 0.0,
                ..WindowParams::default()
            },
            WindowParams {
                stride_s: 3.0,
                ..WindowParams::default()
            },
        ];
        for p in bad {
            assert!(slide_windows(&region(0.0, 5.0), &p).is_err());
        }
    }

    proptest! {
        #[test]
        fn windows_cover_and_respect_bounds(
            a in 0.0f64..100.0,
            len in 0.0f64..20.0,
            window in 0.5f64..3.0,
            stride_frac in 0.1f64..1.0,
        ) {
            let params = WindowParams {
                window_s: window,
                stride_s: window * stride_frac,
                min_subsegment_s: 0.4,
            };
            let b = a + len;
            let segs = slide_windows(&region(a, b), &params).unwrap();
            if len + EPS < 0.4 {
                prop_assert!(segs.is_empty());
                return Ok(());
            }
            prop_assert!(!segs.is_empty());
            for s in &segs {
                prop_assert!(s.duration() <= window + 1e-9);
                prop_assert!(s.duration() + 1e-9 >= params.min_subsegment_s.min(len));
                prop_assert!(s.start_s >= a - 1e-9 && s.end_s <= b + 1e-9);
            }
            // full coverage of the region
            prop_assert!((segs[0].start_s - a).abs() < 1e-9);
            prop_assert!((segs.last().unwrap().end_s - b).abs() < 1e-9);
            for w in segs.windows(2) {
                prop_assert!(w[1].start_s <= w[0].end_s + 1e-9);
            }
            if len >= window {
                let full = ((len - window) / params.stride_s + EPS).floor() as usize + 1;
                prop_assert!(segs.len() == full || segs.len() == full + 1);
                for w in segs[..full].windows(2) {
                    let overlap = w[0].end_s - w[1].start_s;
                    prop_assert!((overlap - (window - params.stride_s)).abs() < 1e-9);
                }
            }
        }
    }
}
