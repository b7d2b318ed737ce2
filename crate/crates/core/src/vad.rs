//! Voice activity detection.
//!
//! The built-in detector scores each `frame_ms` frame by its log-RMS energy,
//! min-max normalized over the file into [0, 1]. Frames at or above the
//! threshold are speech; each speech run is extended by `hangover_frames`,
//! runs closer than `merge_gap_s` are joined and runs shorter than
//! `min_speech_s` are dropped.
//!
//! Aggressiveness levels 0-3 are presets over (threshold, hangover):
//!
//! | level | threshold | hangover frames |
//! |-------|-----------|-----------------|
//! | 0     | 0.30      | 10              |
//! | 1     | 0.45      | 8               |
//! | 2     | 0.60      | 5               |
//! | 3     | 0.75      | 2               |
//!
//! An explicitly set threshold wins over the preset one.
//!
//! Labels from an external detector can be imported with [`load_external_vad`].

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::audio_io::AudioBuffer;
use crate::timeline::{Interval, Timeline};

pub const DEFAULT_THRESHOLD: f64 = 0.15;

const AGGRESSIVENESS_PRESETS: [(f64, usize); 4] = [(0.3, 10), (0.45, 8), (0.6, 5), (0.75, 2)];

#[derive(Debug, Error)]
pub enum VadError {
    #[error("buffer has {samples} samples, shorter than one {frame}-sample frame")]
    TooShort { samples: usize, frame: usize },
    #[error("aggressiveness level {0} is outside 0..=3")]
    BadLevel(u8),
    #[error("invalid VAD configuration: {0}")]
    BadConfig(String),
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, VadError>;

#[derive(Debug, Clone, PartialEq)]
pub struct VadConfig {
    /// Explicit speech-probability threshold; `None` falls back to the
    /// aggressiveness preset or [`DEFAULT_THRESHOLD`].
    pub threshold: Option<f64>,
    pub frame_ms: u32,
    pub aggressiveness: Option<u8>,
    pub hangover_frames: usize,
    pub min_speech_s: f64,
    pub merge_gap_s: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            frame_ms: 20,
            aggressiveness: None,
            hangover_frames: 8,
            min_speech_s: 0.2,
            merge_gap_s: 0.3,
        }
    }
}

impl VadConfig {
    pub fn effective_threshold(&self) -> f64 {
        match (self.threshold, self.aggressiveness) {
            (Some(t), _) => t,
            (None, Some(level)) if (level as usize) < AGGRESSIVENESS_PRESETS.len() => {
                AGGRESSIVENESS_PRESETS[level as usize].0
            }
            _ => DEFAULT_THRESHOLD,
        }
    }

    pub fn frame_s(&self) -> f64 {
        self.frame_ms as f64 / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(level) = self.aggressiveness {
            if level > 3 {
                return Err(VadError::BadLevel(level));
            }
        }
        let t = self.effective_threshold();
        if !(0.0..=1.0).contains(&t) {
            return Err(VadError::BadConfig(format!("threshold {t} outside [0, 1]")));
        }
        if ![10, 20, 30].contains(&self.frame_ms) {
            return Err(VadError::BadConfig(format!(
                "frame_ms must be 10, 20 or 30, got {}",
                self.frame_ms
            )));
        }
        if !(self.min_speech_s >= 0.0 && self.merge_gap_s >= 0.0) {
            return Err(VadError::BadConfig(
                "min_speech_s and merge_gap_s must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Resolves the aggressiveness preset into threshold and hangover.
pub fn apply_aggressiveness(cfg: &VadConfig) -> Result<VadConfig> {
    let level = cfg
        .aggressiveness
        .ok_or_else(|| VadError::BadConfig("aggressiveness is not set".into()))?;
    let &(threshold, hangover) = AGGRESSIVENESS_PRESETS
        .get(level as usize)
        .ok_or(VadError::BadLevel(level))?;
    Ok(VadConfig {
        threshold: Some(cfg.threshold.unwrap_or(threshold)),
        hangover_frames: hangover,
        ..cfg.clone()
    })
}

/// Per-frame speech probabilities in [0, 1].
pub fn energy_vad_frames(buf: &AudioBuffer, cfg: &VadConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let frame = (buf.sample_rate as u64 * cfg.frame_ms as u64 / 1000) as usize;
    if frame == 0 || buf.samples.len() < frame {
        return Err(VadError::TooShort {
            samples: buf.samples.len(),
            frame,
        });
    }
    let log_rms: Vec<f64> = buf
        .samples
        .chunks_exact(frame)
        .map(|chunk| {
            let ms = chunk.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / frame as f64;
            ms.sqrt().max(1e-10).ln()
        })
        .collect();
    let (lo, hi) = log_rms
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi <= lo {
        return Ok(vec![0.0; log_rms.len()]);
    }
    Ok(log_rms.iter().map(|&v| (v - lo) / (hi - lo)).collect())
}

/// Turns frame probabilities into speech regions.
pub fn frames_to_regions(probs: &[f64], cfg: &VadConfig, file_id: &str) -> Timeline {
    let threshold = cfg.effective_threshold();
    let n = probs.len();
    let frame_s = cfg.frame_s();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut t = 0;
    while t < n {
        if probs[t] >= threshold {
            let start = t;
            while t < n && probs[t] >= threshold {
                t += 1;
            }
            runs.push((start, (t + cfg.hangover_frames).min(n)));
        } else {
            t += 1;
        }
    }

    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
    for (start, end) in runs {
        match merged.last_mut() {
            Some(last) => {
                let gap_s = start as f64 * frame_s - last.1 as f64 * frame_s;
                if start <= last.1 || gap_s + 1e-9 < cfg.merge_gap_s {
                    last.1 = last.1.max(end);
                } else {
                    merged.push((start, end));
                }
            }
            None => merged.push((start, end)),
        }
    }

    let intervals = merged
        .into_iter()
        .map(|(s, e)| Interval::new(s as f64 * frame_s, e as f64 * frame_s))
        .filter(|iv| iv.duration() + 1e-9 >= cfg.min_speech_s)
        .collect();
    Timeline {
        file_id: file_id.to_string(),
        intervals,
    }
}

/// Energy VAD end to end, resolving aggressiveness presets first.
pub fn detect_speech(buf: &AudioBuffer, cfg: &VadConfig) -> Result<Timeline> {
    let cfg = match cfg.aggressiveness {
        Some(_) => apply_aggressiveness(cfg)?,
        None => cfg.clone(),
    };
    let probs = energy_vad_frames(buf, &cfg)?;
    Ok(frames_to_regions(&probs, &cfg, &buf.source_id))
}

pub fn load_external_vad(path: impl AsRef<Path>, file_id: &str) -> Result<Timeline> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| VadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_external_vad(&text, file_id)
}

/// Parses "start end" lines or RTTM SPEAKER lines into a merged speech
/// timeline. RTTM lines for other files are ignored.
pub fn parse_external_vad(text: &str, file_id: &str) -> Result<Timeline> {
    let mut intervals = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let err = |reason: String| VadError::ParseError {
            line: line_no,
            reason,
        };
        let (start, end) = if tokens[0] == "SPEAKER" {
            if tokens.len() < 5 {
                return Err(err(format!("RTTM line has {} fields", tokens.len())));
            }
            if tokens[1] != file_id {
                continue;
            }
            let onset = parse_time(tokens[3]).map_err(&err)?;
            let dur = parse_time(tokens[4]).map_err(&err)?;
            (onset, onset + dur)
        } else {
            if tokens.len() < 2 {
                return Err(err("expected \"start end\"".into()));
            }
            (
                parse_time(tokens[0]).map_err(&err)?,
                parse_time(tokens[1]).map_err(&err)?,
            )
        };
        if start < 0.0 || end <= start {
            return Err(err(format!("end {end} is not after start {start}")));
        }
        intervals.push(Interval::new(start, end));
    }
    Ok(Timeline::from_intervals(file_id, intervals).support())
}

fn parse_time(token: &str) -> std::result::Result<f64, String> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("bad time value {token:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn cfg0() -> VadConfig {
        VadConfig {
            threshold: Some(0.5),
            hangover_frames: 0,
            min_speech_s: 0.0,
            merge_gap_s: 0.0,
            ..VadConfig::default()
        }
    }

    #[test]
    fn silence_has_zero_probability() {
        let buf = AudioBuffer::new(vec![0.0; 16000], 16000, "s");
        let probs = energy_vad_frames(&buf, &VadConfig::default()).unwrap();
        assert_eq!(probs.len(), 50);
        assert!(probs.iter().all(|&p| p == 0.0));
        assert!(frames_to_regions(&probs, &VadConfig::default(), "s").is_empty());
    }

    #[test]
    fn constant_amplitude_is_flat() {
        let buf = AudioBuffer::new(vec![0.3; 16000], 16000, "c");
        let probs = energy_vad_frames(&buf, &VadConfig::default()).unwrap();
        assert!(probs.iter().all(|&p| p == probs[0]));
    }

    #[test]
    fn noise_burst_outscores_silence() {
        let mut rng = SplitMix64::new(5);
        let mut samples = vec![0.0f32; 32000];
        for s in &mut samples[8000..16000] {
            *s = rng.uniform(-1.0, 1.0) as f32;
        }
        let buf = AudioBuffer::new(samples, 16000, "b");
        let probs = energy_vad_frames(&buf, &VadConfig::default()).unwrap();
        let frame = 320;
        let burst_min = (8000 / frame..16000 / frame)
            .map(|i| probs[i])
            .fold(1.0, f64::min);
        let silence_max = (0..8000 / frame)
            .chain(16000 / frame..probs.len())
            .map(|i| probs[i])
            .fold(0.0, f64::max);
        assert!(burst_min > silence_max);
    }

    #[test]
    fn too_short_buffer() {
        let buf = AudioBuffer::new(vec![0.0; 100], 16000, "t");
        assert!(matches!(
            energy_vad_frames(&buf, &VadConfig::default()),
            Err(VadError::TooShort {
                samples: 100,
                frame: 320
            })
        ));
    }

    #[test]
    fn no_frame_above_threshold_is_empty() {
        let probs = vec![0.1; 100];
        assert!(frames_to_regions(&probs, &cfg0(), "f").is_empty());
    }

    #[test]
    fn single_run_maps_to_exact_bounds() {
        // 1.0 s of speech at 0.5 s with 20 ms frames: frames 25..75
        let mut probs = vec![0.0; 100];
        for p in &mut probs[25..75] {
            *p = 1.0;
        }
        let tl = frames_to_regions(&probs, &cfg0(), "f");
        assert_eq!(tl.len(), 1);
        assert!((tl.intervals[0].start - 0.5).abs() <= 0.02);
        assert!((tl.intervals[0].end - 1.5).abs() <= 0.02);
    }

    #[test]
    fn close_runs_merge() {
        // runs 0.0-0.5 s and 0.6-1.0 s, gap 0.1 s
        let mut probs = vec![0.0; 100];
        probs[0..25].fill(1.0);
        probs[30..50].fill(1.0);
        let cfg = VadConfig {
            merge_gap_s: 0.3,
            ..cfg0()
        };
        let tl = frames_to_regions(&probs, &cfg, "f");
        assert_eq!(tl.len(), 1);
        assert!((tl.intervals[0].start - 0.0).abs() < 1e-12);
        assert!((tl.intervals[0].end - 1.0).abs() < 1e-12);

        let apart = frames_to_regions(&probs, &cfg0(), "f");
        assert_eq!(apart.len(), 2);
    }

    #[test]
    fn short_runs_dropped_and_hangover_clipped() {
        let mut probs = vec![0.0; 50];
        probs[10] = 1.0;
        probs[48] = 1.0;
        probs[49] = 1.0;
        let cfg = VadConfig {
            hangover_frames: 5,
            min_speech_s: 0.1,
            ..cfg0()
        };
        let tl = frames_to_regions(&probs, &cfg, "f");
        // 10..16 is 0.12 s, 48..50 is clipped at the end to 0.04 s and dropped
        assert_eq!(tl.len(), 1);
        assert!((tl.intervals[0].start - 0.2).abs() < 1e-12);
        assert!((tl.intervals[0].end - 0.32).abs() < 1e-12);
        assert!(tl.end_time() <= 50.0 * 0.02);
    }

    #[test]
    fn aggressiveness_presets() {
        let level = |l: u8| VadConfig {
            aggressiveness: Some(l),
            ..VadConfig::default()
        };
        let c0 = apply_aggressiveness(&level(0)).unwrap();
        assert_eq!(c0.threshold, Some(0.3));
        assert_eq!(c0.hangover_frames, 10);
        let c3 = apply_aggressiveness(&level(3)).unwrap();
        assert_eq!(c3.threshold, Some(0.75));
        assert_eq!(c3.hangover_frames, 2);
        assert!(matches!(
            apply_aggressiveness(&level(4)),
            Err(VadError::BadLevel(4))
        ));

        let explicit = VadConfig {
            threshold: Some(0.2),
            ..level(2)
        };
        let c = apply_aggressiveness(&explicit).unwrap();
        assert_eq!(c.threshold, Some(0.2));
        assert_eq!(c.hangover_frames, 5);

        let thresholds: Vec<f64> = (0..4)
            .map(|l| {
                apply_aggressiveness(&level(l))
                    .unwrap()
                    .effective_threshold()
            })
            .collect();
        assert!(thresholds.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bad_frame_size_rejected() {
        let cfg = VadConfig {
            frame_ms: 25,
            ..VadConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(VadError::BadConfig(_))));
    }

    #[test]
    fn external_labels() {
        let tl = parse_external_vad("0.0 1.0\n2.0 3.0", "f").unwrap();
        assert_eq!(
            tl.intervals,
            vec![Interval::new(0.0, 1.0), Interval::new(2.0, 3.0)]
        );

        let tl = parse_external_vad("0.0 2.0\n1.0 3.0", "f").unwrap();
        assert_eq!(tl.intervals, vec![Interval::new(0.0, 3.0)]);

        match parse_external_vad("1.0 0.5", "f") {
            Err(VadError::ParseError { line: 1, .. }) => {}
            other => panic!("expected ParseError, got {other:?}"),
        }
        match parse_external_vad("0 1\n\nabc 2", "f") {
            Err(VadError::ParseError { line: 3, .. }) => {}
            other => panic!("expected ParseError, got {other:?}"),
        }

        let rttm = "SPEAKER f 1 0.5 1.0 <NA> <NA> a <NA> <NA>\nSPEAKER g 1 0.0 9.0 <NA> <NA> a <NA> <NA>\n";
        let tl = parse_external_vad(rttm, "f").unwrap();
        assert_eq!(tl.intervals, vec![Interval::new(0.5, 1.5)]);
    }

    #[test]
    fn threshold_monotone_on_random_probabilities() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..50 {
            let probs: Vec<f64> = (0..300).map(|_| rng.next_f64()).collect();
            let mut last = f64::INFINITY;
            for t in [0.0, 0.15, 0.25, 0.5, 0.75, 1.0] {
                let cfg = VadConfig {
                    threshold: Some(t),
                    ..VadConfig::default()
                };
                let tl = frames_to_regions(&probs, &cfg, "r");
                assert!(tl.is_disjoint_sorted());
                let total = tl.total_duration();
                assert!(total <= last + 1e-9);
                last = total;
            }
        }
    }
}
