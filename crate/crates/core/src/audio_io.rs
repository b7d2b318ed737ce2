//! RIFF/WAVE reading and writing, downmixing, sample-rate validation.
//!
//! Supported encodings are 16-bit integer PCM and 32-bit IEEE float, either in
//! a plain `fmt ` chunk or wrapped in `WAVE_FORMAT_EXTENSIBLE`. Unknown chunks
//! are skipped. Integer samples are scaled by 1/32768, so -32768 maps to -1.0
//! exactly and +32767 maps to just below 1.0.

use std::fs;
use std::path::Path;

use thiserror::Error;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("not a RIFF/WAVE file")]
    NotWav,
    #[error("unsupported encoding: format tag {format_tag}, {bits_per_sample} bits per sample")]
    UnsupportedEncoding {
        format_tag: u16,
        bits_per_sample: u16,
    },
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("missing {0} chunk")]
    MissingChunk(&'static str),
    #[error("invalid fmt chunk: {0}")]
    InvalidFormat(String),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("downmix needs at least one non-empty channel")]
    EmptyInput,
    #[error("channel {index} has {len} samples, expected {expected}")]
    LengthMismatch {
        index: usize,
        len: usize,
        expected: usize,
    },
    #[error("sample rate mismatch: file is {actual} Hz, expected {expected} Hz (no resampling is performed)")]
    RateMismatch { actual: u32, expected: u32 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// Mono PCM samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Self {
        Self {
            samples,
            sample_rate,
            source_id: source_id.into(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Decoded WAV contents, one sample vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WavFile {
    pub channels: Vec<Vec<f32>>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl WavFile {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn into_mono(self) -> Result<AudioBuffer> {
        if self.channels.len() == 1 {
            let samples = self.channels.into_iter().next().unwrap_or_default();
            if samples.is_empty() {
                return Err(AudioError::EmptyInput);
            }
            return Ok(AudioBuffer::new(samples, self.sample_rate, self.source_id));
        }
        downmix_to_mono(&self.channels, self.sample_rate, &self.source_id)
    }
}

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
    format_tag: u16,
}

/// Reads a WAV file from disk. The source id is the file stem.
pub fn read_wav(path: impl AsRef<Path>) -> Result<WavFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_wav(&bytes, source_id)
}

pub fn parse_wav(bytes: &[u8], source_id: impl Into<String>) -> Result<WavFile> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWav);
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut pos = 12usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            return Err(AudioError::TruncatedFile(format!(
                "incomplete chunk header at byte {pos}"
            )));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_le(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let available = bytes.len() - body_start;

        match id {
            b"fmt " => {
                if size > available {
                    return Err(AudioError::TruncatedFile("fmt chunk".into()));
                }
                fmt = Some(parse_fmt(&bytes[body_start..body_start + size])?);
            }
            b"data" => {
                let fmt = fmt.ok_or(AudioError::MissingChunk("fmt "))?;
                if size > available {
                    return Err(AudioError::TruncatedFile(format!(
                        "data chunk declares {size} bytes, {available} present"
                    )));
                }
                let channels = decode_samples(&bytes[body_start..body_start + size], &fmt)?;
                return Ok(WavFile {
                    channels,
                    sample_rate: fmt.sample_rate,
                    source_id: source_id.into(),
                });
            }
            _ => {
                // unknown chunk; a truncated trailing chunk before data is still truncation
                if size > available {
                    return Err(AudioError::TruncatedFile(format!(
                        "chunk {:?} overruns file",
                        String::from_utf8_lossy(id)
                    )));
                }
            }
        }
        pos = body_start + size + (size & 1);
    }
    Err(AudioError::MissingChunk("data"))
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(AudioError::InvalidFormat(format!(
            "fmt chunk is {} bytes, need 16",
            body.len()
        )));
    }
    let mut format_tag = u16_le(&body[0..2]);
    let channels = u16_le(&body[2..4]);
    let sample_rate = u32_le(&body[4..8]);
    let bits_per_sample = u16_le(&body[14..16]);
    if format_tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the subformat GUID,
        // whose first two bytes carry the plain format tag
        if body.len() < 26 {
            return Err(AudioError::InvalidFormat(
                "short extensible fmt chunk".into(),
            ));
        }
        format_tag = u16_le(&body[24..26]);
    }
    if channels == 0 {
        return Err(AudioError::InvalidFormat("zero channels".into()));
    }
    if sample_rate == 0 {
        return Err(AudioError::InvalidFormat("zero sample rate".into()));
    }
    let supported = matches!(
        (format_tag, bits_per_sample),
        (FORMAT_PCM, 16) | (FORMAT_IEEE_FLOAT, 32)
    );
    if !supported {
        return Err(AudioError::UnsupportedEncoding {
            format_tag,
            bits_per_sample,
        });
    }
    Ok(FmtChunk {
        channels,
        sample_rate,
        bits_per_sample,
        format_tag,
    })
}

fn decode_samples(data: &[u8], fmt: &FmtChunk) -> Result<Vec<Vec<f32>>> {
    let n_channels = fmt.channels as usize;
    let bytes_per_sample = fmt.bits_per_sample as usize / 8;
    let frame_bytes = bytes_per_sample * n_channels;
    if !data.len().is_multiple_of(frame_bytes) {
        return Err(AudioError::TruncatedFile(format!(
            "data chunk length {} is not a multiple of the {frame_bytes}-byte frame",
            data.len()
        )));
    }
    let n_frames = data.len() / frame_bytes;
    let mut channels = vec![Vec::with_capacity(n_frames); n_channels];
    for (i, chunk) in data.chunks_exact(bytes_per_sample).enumerate() {
        let value = match fmt.format_tag {
            FORMAT_PCM => i16::from_le_bytes([chunk[0], chunk[1]]) as f32 / 32768.0,
            _ => {
                let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
                if !v.is_finite() {
                    return Err(AudioError::NonFiniteSample(i));
                }
                v.clamp(-1.0, 1.0)
            }
        };
        channels[i % n_channels].push(value);
    }
    Ok(channels)
}

/// Averages channels sample by sample.
pub fn downmix_to_mono(
    channels: &[Vec<f32>],
    sample_rate: u32,
    source_id: &str,
) -> Result<AudioBuffer> {
    let first = channels.first().ok_or(AudioError::EmptyInput)?;
    let expected = first.len();
    if expected == 0 {
        return Err(AudioError::EmptyInput);
    }
    for (index, ch) in channels.iter().enumerate() {
        if ch.len() != expected {
            return Err(AudioError::LengthMismatch {
                index,
                len: ch.len(),
                expected,
            });
        }
    }
    let scale = 1.0 / channels.len() as f64;
    let samples = (0..expected)
        .map(|i| {
            let sum: f64 = channels.iter().map(|ch| ch[i] as f64).sum();
            (sum * scale) as f32
        })
        .collect();
    Ok(AudioBuffer::new(samples, sample_rate, source_id))
}

pub fn validate_rate(buf: AudioBuffer, expected_rate: u32) -> Result<AudioBuffer> {
    if buf.sample_rate != expected_rate {
        return Err(AudioError::RateMismatch {
            actual: buf.sample_rate,
            expected: expected_rate,
        });
    }
    Ok(buf)
}

/// Encodes a mono buffer as a canonical 44-byte-header PCM16 WAV.
pub fn encode_wav_pcm16(buf: &AudioBuffer) -> Vec<u8> {
    encode_pcm16_channels(std::slice::from_ref(&buf.samples), buf.sample_rate)
}

/// Interleaves equal-length channels into a PCM16 WAV.
pub fn encode_pcm16_channels(channels: &[Vec<f32>], sample_rate: u32) -> Vec<u8> {
    let n_channels = channels.len().max(1) as u16;
    let n_frames = channels.first().map_or(0, Vec::len);
    let data_len = n_frames * n_channels as usize * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&n_channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * n_channels as u32 * 2).to_le_bytes());
    out.extend_from_slice(&(n_channels * 2).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for i in 0..n_frames {
        for ch in channels {
            out.extend_from_slice(&quantize_pcm16(ch[i]).to_le_bytes());
        }
    }
    out
}

pub fn write_wav_pcm16(path: impl AsRef<Path>, buf: &AudioBuffer) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav_pcm16(buf)).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn quantize_pcm16(x: f32) -> i16 {
    (x as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn u16_le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn u32_le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}
