//! Log-mel filterbank front end.
//!
//! Frames are Hann-windowed (periodic), zero-padded to `fft_size`, and turned
//! into a power spectrum `|X|^2`. Triangular filters with centers equally
//! spaced on the HTK mel scale `2595 * log10(1 + f / 700)` are applied and the
//! natural log is taken after flooring at `log_floor`. No pre-emphasis, no
//! mean or variance normalization.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio_io::AudioBuffer;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid mel configuration: {0}")]
    InvalidConfig(String),
    #[error("filter {index} has no positive weight; {n_mels} mel bands are too many for a {fft_size}-point FFT")]
    DegenerateFilter {
        index: usize,
        n_mels: usize,
        fft_size: usize,
    },
    #[error("buffer has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("bad feature dump: {0}")]
    BadDump(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub win_ms: f64,
    pub hop_ms: f64,
    /// Defaults to the next power of two at or above the window length.
    pub fft_size: Option<usize>,
    pub f_min: f64,
    /// Defaults to the Nyquist frequency.
    pub f_max: Option<f64>,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            win_ms: 25.0,
            hop_ms: 10.0,
            fft_size: None,
            f_min: 20.0,
            f_max: None,
            log_floor: 1e-10,
        }
    }
}

impl MelConfig {
    pub fn win_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 * self.win_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 * self.hop_ms / 1000.0).round() as usize
    }

    pub fn fft_len(&self, sample_rate: u32) -> usize {
        self.fft_size
            .unwrap_or_else(|| self.win_samples(sample_rate).max(1).next_power_of_two())
    }

    pub fn upper_freq(&self, sample_rate: u32) -> f64 {
        self.f_max.unwrap_or(sample_rate as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |msg: String| Err(FeatureError::InvalidConfig(msg));
        if sample_rate == 0 {
            return bad("sample rate must be positive".into());
        }
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1".into());
        }
        let win = self.win_samples(sample_rate);
        let hop = self.hop_samples(sample_rate);
        if hop == 0 || hop > win {
            return bad(format!(
                "need 0 < hop <= window, got hop {hop} window {win} samples"
            ));
        }
        if self.fft_len(sample_rate) < win {
            return bad(format!(
                "fft_size {} is shorter than the {win}-sample window",
                self.fft_len(sample_rate)
            ));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let f_max = self.upper_freq(sample_rate);
        if !(self.f_min >= 0.0 && self.f_min < f_max && f_max <= nyquist) {
            return bad(format!(
                "need 0 <= f_min < f_max <= {nyquist}, got {} and {f_max}",
                self.f_min
            ));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Filter center frequencies in Hz, strictly increasing.
pub fn mel_center_frequencies(cfg: &MelConfig, sample_rate: u32) -> Vec<f64> {
    mel_edges(cfg, sample_rate)[1..=cfg.n_mels].to_vec()
}

fn mel_edges(cfg: &MelConfig, sample_rate: u32) -> Vec<f64> {
    let lo = hz_to_mel(cfg.f_min);
    let hi = hz_to_mel(cfg.upper_freq(sample_rate));
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + step * i as f64))
        .collect()
}

/// Dense `n_mels x (fft_size/2 + 1)` filterbank.
pub fn mel_filterbank_matrix(cfg: &MelConfig, sample_rate: u32) -> Result<Vec<Vec<f64>>> {
    cfg.validate(sample_rate)?;
    let fft_size = cfg.fft_len(sample_rate);
    let n_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let edges = mel_edges(cfg, sample_rate);

    let mut matrix = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = k as f64 * bin_hz;
                let rise = (f - left) / (center - left);
                let fall = (right - f) / (right - center);
                rise.min(fall).max(0.0)
            })
            .collect();
        if !row.iter().any(|&w| w > 0.0) {
            return Err(FeatureError::DegenerateFilter {
                index: m,
                n_mels: cfg.n_mels,
                fft_size,
            });
        }
        matrix.push(row);
    }
    Ok(matrix)
}

/// T x n_mels log-energies, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Vec<f64>,
    pub n_mels: usize,
    /// Frame centers in seconds.
    pub frame_times: Vec<f64>,
    pub hop_s: f64,
}

impl FeatureMatrix {
    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_mels.max(1))
    }

    /// Index range of frames whose center lies in `[start_s, end_s)`.
    pub fn frame_range(&self, start_s: f64, end_s: f64) -> std::ops::Range<usize> {
        let lo = self.frame_times.partition_point(|&t| t < start_s);
        let hi = self.frame_times.partition_point(|&t| t < end_s);
        lo..hi.max(lo)
    }
}

/// Sparse view of one triangular filter: first bin and its weights.
struct SparseFilter {
    first_bin: usize,
    weights: Vec<f64>,
}

pub fn log_mel(buf: &AudioBuffer, cfg: &MelConfig) -> Result<FeatureMatrix> {
    let sr = buf.sample_rate;
    let dense = mel_filterbank_matrix(cfg, sr)?;
    let win = cfg.win_samples(sr);
    let hop = cfg.hop_samples(sr);
    let fft_size = cfg.fft_len(sr);
    let n = buf.samples.len();
    if n < win {
        return Err(FeatureError::TooShort {
            samples: n,
            window: win,
        });
    }
    let n_frames = (n - win) / hop + 1;

    let filters: Vec<SparseFilter> = dense
        .iter()
        .map(|row| {
            let first = row.iter().position(|&w| w > 0.0).unwrap_or(0);
            let last = row.iter().rposition(|&w| w > 0.0).unwrap_or(0);
            SparseFilter {
                first_bin: first,
                weights: row[first..=last].to_vec(),
            }
        })
        .collect();

    let window: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / win as f64).cos())
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut spectrum = vec![Complex::new(0.0, 0.0); fft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut power = vec![0.0f64; fft_size / 2 + 1];

    let mut data = Vec::with_capacity(n_frames * cfg.n_mels);
    let mut frame_times = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let offset = t * hop;
        for (i, slot) in spectrum.iter_mut().enumerate() {
            *slot = if i < win {
                Complex::new(buf.samples[offset + i] as f64 * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process_with_scratch(&mut spectrum, &mut scratch);
        for (p, c) in power.iter_mut().zip(&spectrum) {
            *p = c.norm_sqr();
        }
        for f in &filters {
            let energy: f64 = f
                .weights
                .iter()
                .zip(&power[f.first_bin..])
                .map(|(w, p)| w * p)
                .sum();
            data.push(energy.max(cfg.log_floor).ln());
        }
        frame_times.push((offset as f64 + win as f64 / 2.0) / sr as f64);
    }

    Ok(FeatureMatrix {
        data,
        n_mels: cfg.n_mels,
        frame_times,
        hop_s: hop as f64 / sr as f64,
    })
}

const DUMP_MAGIC: &[u8; 4] = b"MELF";

/// Writes the binary dump: "MELF", u32 T, u32 n_mels, u32 reserved, then
/// row-major little-endian f32.
pub fn write_feature_dump<W: Write>(mut w: W, feats: &FeatureMatrix) -> Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(feats.n_frames() as u32).to_le_bytes())?;
    w.write_all(&(feats.n_mels as u32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in &feats.data {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn save_feature_dump(path: impl AsRef<Path>, feats: &FeatureMatrix) -> Result<()> {
    let file = io::BufWriter::new(fs::File::create(path)?);
    write_feature_dump(file, feats)
}

/// Reads a dump back as (T, n_mels, row-major values).
pub fn read_feature_dump<R: Read>(mut r: R) -> Result<(usize, usize, Vec<f32>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| FeatureError::BadDump("short header".into()))?;
    if &header[0..4] != DUMP_MAGIC {
        return Err(FeatureError::BadDump("bad magic".into()));
    }
    let t = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let n_mels = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != t * n_mels * 4 {
        return Err(FeatureError::BadDump(format!(
            "expected {} payload bytes, found {}",
            t * n_mels * 4,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((t, n_mels, values))
}
