//! Synthetic conversations with known ground truth.
//!
//! Each speaker is Gaussian noise band-limited to its own slot on the mel
//! scale between 150 Hz and 7 kHz, so speakers never share spectral content.
//! Turns last 2-6 s and are separated by 0.3-1.0 s of background noise. Each
//! turn fades in and out linearly in log amplitude, from the background
//! level to full level over [`ONSET_RAMP_S`] and back over [`OFFSET_RAMP_S`].
//! The slow fade-out gives the energy detector a real trade-off between
//! missed tails and false alarms as its threshold moves.
//!
//! All boundaries are whole milliseconds and everything is driven by one
//! [`SplitMix64`] stream, so the same parameters give bit-identical output.

use std::fs;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio_io::{write_wav_pcm16, AudioBuffer, AudioError};
use crate::features::{hz_to_mel, mel_to_hz};
use crate::rng::SplitMix64;
use crate::scoring::{write_rttm, RttmRecord};

pub const MAX_SPEAKERS: usize = 8;
pub const ONSET_RAMP_S: f64 = 0.05;
pub const OFFSET_RAMP_S: f64 = 0.6;

const BAND_LO_HZ: f64 = 150.0;
const BAND_HI_HZ: f64 = 7000.0;
/// Fraction of each mel slot a speaker occupies; the rest is guard band.
const BAND_FILL: f64 = 0.7;
const SPEECH_RMS: f64 = 0.1;
const NOISE_RMS: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad synthesis parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n_speakers: usize,
    pub duration_s: f64,
    pub seed: u64,
    pub sample_rate: u32,
}

impl SynthParams {
    pub fn new(n_speakers: usize, duration_s: f64, seed: u64) -> Self {
        Self {
            n_speakers,
            duration_s,
            seed,
            sample_rate: 16000,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(1..=MAX_SPEAKERS).contains(&self.n_speakers) {
            return Err(SynthError::BadParams(format!(
                "speaker count {} outside 1..={MAX_SPEAKERS}",
                self.n_speakers
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 4.0) {
            return Err(SynthError::BadParams(format!(
                "duration {} s is too short, need at least 4 s",
                self.duration_s
            )));
        }
        if self.sample_rate < 16000 {
            return Err(SynthError::BadParams(format!(
                "sample rate {} Hz cannot hold the 7 kHz band edge",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Conversation {
    pub audio: AudioBuffer,
    pub reference: Vec<RttmRecord>,
}

/// Frequency band (Hz) for speaker `index` out of `n`.
pub fn speaker_band(index: usize, n: usize) -> (f64, f64) {
    let (m_lo, m_hi) = (hz_to_mel(BAND_LO_HZ), hz_to_mel(BAND_HI_HZ));
    let slot = (m_hi - m_lo) / n as f64;
    let center = m_lo + (index as f64 + 0.5) * slot;
    let half = 0.5 * BAND_FILL * slot;
    (mel_to_hz(center - half), mel_to_hz(center + half))
}

/// Unit-RMS Gaussian noise with all energy inside `[lo_hz, hi_hz]`.
pub fn band_noise(
    n_samples: usize,
    sample_rate: u32,
    lo_hz: f64,
    hi_hz: f64,
    seed: u64,
) -> Vec<f64> {
    if n_samples == 0 {
        return Vec::new();
    }
    let mut rng = SplitMix64::new(seed);
    let mut spec: Vec<Complex<f64>> = (0..n_samples)
        .map(|_| Complex::new(rng.next_gaussian(), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n_samples).process(&mut spec);
    let bin_hz = sample_rate as f64 / n_samples as f64;
    for (k, c) in spec.iter_mut().enumerate() {
        let f = k.min(n_samples - k) as f64 * bin_hz;
        if f < lo_hz || f > hi_hz {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n_samples).process(&mut spec);
    let mut out: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|x| x * x).sum::<f64>() / n_samples as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|x| *x /= rms);
    }
    out
}

fn uniform_ms(rng: &mut SplitMix64, lo_ms: u64, hi_ms: u64) -> u64 {
    lo_ms + rng.below((hi_ms - lo_ms + 1) as usize) as u64
}

/// Turn plan in milliseconds: `(speaker, onset_ms, end_ms)`.
fn plan_turns(rng: &mut SplitMix64, n_speakers: usize, total_ms: u64) -> Vec<(usize, u64, u64)> {
    // The first n turns visit every speaker once in shuffled order.
    let mut order: Vec<usize> = (0..n_speakers).collect();
    for i in (1..n_speakers).rev() {
        order.swap(i, rng.below(i + 1));
    }
    let mut turns = Vec::new();
    let mut t = uniform_ms(rng, 300, 1000);
    let mut last: Option<usize> = None;
    loop {
        let speaker = match order.get(turns.len()) {
            Some(&s) => s,
            None if n_speakers == 1 => 0,
            None => {
                let s = rng.below(n_speakers - 1);
                let prev = last.unwrap_or(usize::MAX);
                if s >= prev {
                    s + 1
                } else {
                    s
                }
            }
        };
        let len = uniform_ms(rng, 2000, 6000);
        let end = (t + len).min(total_ms.saturating_sub(300));
        if end < t + 2000 {
            break;
        }
        turns.push((speaker, t, end));
        last = Some(speaker);
        t = end + uniform_ms(rng, 300, 1000);
    }
    turns
}

/// Log-linear fade from the background level up to 1 and back.
fn envelope(pos_s: f64, len_s: f64) -> f64 {
    let floor_ln = (NOISE_RMS / SPEECH_RMS).ln();
    let rise = (pos_s / ONSET_RAMP_S).min(1.0);
    let fall = ((len_s - pos_s) / OFFSET_RAMP_S).min(1.0);
    (floor_ln * (1.0 - rise.min(fall).max(0.0))).exp()
}

pub fn synthesize(file_id: &str, params: &SynthParams) -> Result<Conversation, SynthError> {
    params.validate()?;
    let sr = params.sample_rate;
    let total_ms = (params.duration_s * 1000.0).round() as u64;
    let n_samples = (total_ms * sr as u64 / 1000) as usize;

    let mut rng = SplitMix64::new(params.seed);
    let turns = plan_turns(&mut rng, params.n_speakers, total_ms);
    let voices: Vec<Vec<f64>> = (0..params.n_speakers)
        .map(|i| {
            let (lo, hi) = speaker_band(i, params.n_speakers);
            band_noise(n_samples, sr, lo, hi, rng.next_u64())
        })
        .collect();

    let mut mix: Vec<f64> = (0..n_samples)
        .map(|_| NOISE_RMS * rng.next_gaussian())
        .collect();
    let mut reference = Vec::with_capacity(turns.len());
    for &(speaker, onset_ms, end_ms) in &turns {
        let gain = SPEECH_RMS * rng.uniform(0.85, 1.15);
        let s0 = (onset_ms * sr as u64 / 1000) as usize;
        let s1 = ((end_ms * sr as u64 / 1000) as usize).min(n_samples);
        let len_s = (s1 - s0) as f64 / sr as f64;
        for (i, m) in mix[s0..s1].iter_mut().enumerate() {
            *m += gain * envelope(i as f64 / sr as f64, len_s) * voices[speaker][s0 + i];
        }
        reference.push(RttmRecord::new(
            file_id,
            onset_ms as f64 / 1000.0,
            (end_ms - onset_ms) as f64 / 1000.0,
            &format!("S{}", speaker + 1),
        ));
    }

    let samples = mix.iter().map(|&x| x.clamp(-1.0, 1.0) as f32).collect();
    Ok(Conversation {
        audio: AudioBuffer::new(samples, sr, file_id),
        reference,
    })
}

/// Writes `<name>.wav` and `<name>.rttm` into `out_dir`.
pub fn write_conversation(
    conv: &Conversation,
    out_dir: impl AsRef<Path>,
    name: &str,
) -> Result<(PathBuf, PathBuf), SynthError> {
    let dir = out_dir.as_ref();
    let io_err = |path: &Path, source| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let wav = dir.join(format!("{name}.wav"));
    let rttm = dir.join(format!("{name}.rttm"));
    write_wav_pcm16(&wav, &conv.audio)?;
    fs::write(&rttm, write_rttm(&conv.reference)).map_err(|e| io_err(&rttm, e))?;
    Ok((wav, rttm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::encode_wav_pcm16;

    #[test]
    fn bands_are_disjoint_and_ordered() {
        for n in 1..=MAX_SPEAKERS {
            let bands: Vec<_> = (0..n).map(|i| speaker_band(i, n)).collect();
            assert!(bands[0].0 >= BAND_LO_HZ && bands[n - 1].1 <= BAND_HI_HZ + 1e-9);
            for w in bands.windows(2) {
                assert!(w[0].1 < w[1].0);
            }
        }
    }

    #[test]
    fn band_noise_has_no_energy_outside_band() {
        let sr = 16000;
        let x = band_noise(4096, sr, 1000.0, 2000.0, 3);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 1e-9);
        let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(4096).process(&mut spec);
        let (mut inside, mut outside) = (0.0, 0.0);
        for (k, c) in spec.iter().enumerate().take(2049) {
            let f = k as f64 * sr as f64 / 4096.0;
            if (1000.0..=2000.0).contains(&f) {
                inside += c.norm_sqr();
            } else {
                outside += c.norm_sqr();
            }
        }
        assert!(
            outside < 1e-18 * inside,
            "outside {outside} inside {inside}"
        );
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let p = SynthParams::new(2, 60.0, 7);
        let a = synthesize("x", &p).unwrap();
        let b = synthesize("x", &p).unwrap();
        assert_eq!(encode_wav_pcm16(&a.audio), encode_wav_pcm16(&b.audio));
        assert_eq!(write_rttm(&a.reference), write_rttm(&b.reference));
        let c = synthesize("x", &SynthParams::new(2, 60.0, 8)).unwrap();
        assert_ne!(write_rttm(&a.reference), write_rttm(&c.reference));
    }

    #[test]
    fn turns_follow_the_layout() {
        let conv = synthesize("x", &SynthParams::new(4, 120.0, 11)).unwrap();
        let r = &conv.reference;
        let mut speakers: Vec<&str> = r.iter().map(|t| t.speaker.as_str()).collect();
        speakers.sort();
        speakers.dedup();
        assert_eq!(speakers, ["S1", "S2", "S3", "S4"]);
        for t in r {
            assert!((2.0 - 1e-9..=6.0 + 1e-9).contains(&t.duration_s), "{t:?}");
        }
        for w in r.windows(2) {
            let gap = w[1].onset_s - w[0].end_s();
            assert!((0.3 - 1e-9..=1.0 + 1e-9).contains(&gap), "gap {gap}");
            assert_ne!(w[0].speaker, w[1].speaker);
        }
        assert!(r.last().unwrap().end_s() <= 120.0);
        assert_eq!(conv.audio.samples.len(), 120 * 16000);
    }

    #[test]
    fn bad_params() {
        for n in [0, 9] {
            assert!(matches!(
                synthesize("x", &SynthParams::new(n, 60.0, 1)),
                Err(SynthError::BadParams(_))
            ));
        }
        assert!(matches!(
            synthesize("x", &SynthParams::new(2, 1.0, 1)),
            Err(SynthError::BadParams(_))
        ));
    }

    #[test]
    fn envelope_shape() {
        assert!((envelope(0.0, 3.0) - NOISE_RMS / SPEECH_RMS).abs() < 1e-12);
        assert_eq!(envelope(1.0, 3.0), 1.0);
        assert!((envelope(3.0, 3.0) - NOISE_RMS / SPEECH_RMS).abs() < 1e-12);
        let mid = envelope(3.0 - OFFSET_RAMP_S / 2.0, 3.0);
        assert!((mid - (NOISE_RMS / SPEECH_RMS).sqrt()).abs() < 1e-12);
    }
}
