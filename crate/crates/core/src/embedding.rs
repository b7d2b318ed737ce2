//! Speaker embeddings per subsegment.
//!
//! Two providers exist. The built-in one pools log-mel statistics (per-bin
//! mean and standard deviation over the subsegment's frames), projects the
//! pooled vector with a seeded Gaussian matrix and L2-normalizes it. Before
//! pooling, the provider subtracts the per-bin mean over all frames that fall
//! inside any subsegment of the file, so the statistic describes how a window
//! differs from the rest of the recording.
//!
//! The file store reads precomputed vectors from a text file:
//!
//! ```text
//! DIARKIT-EMB v1 dim=3
//! M043 0.000 2.000 0.1 0.2 0.3
//! M043 0.400 2.400 0.1 0.25 0.3
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::rng::SplitMix64;
use crate::segmentation::SubSegment;

pub const STORE_HEADER: &str = "DIARKIT-EMB v1";

/// Start-time tolerance, in seconds, when matching store entries.
pub const LOOKUP_TOLERANCE_S: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("subsegment [{start:.3}, {end:.3}) contains no feature frames")]
    EmptySubsegment { start: f64, end: f64 },
    #[error("embedding dimension must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("line {line}: dimension {found} differs from {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("no stored embedding for {file_id} starting at {start:.3} s")]
    MissingEntry { file_id: String, start: f64 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub subsegment: SubSegment,
}

pub fn unit_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm.is_nan() || norm <= 0.0 || norm.is_infinite() {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Per-bin mean followed by per-bin population standard deviation.
pub fn pooled_statistics<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    let mut sum_sq: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for row in rows {
        if sum.is_empty() {
            sum = vec![0.0; row.len()];
            sum_sq = vec![0.0; row.len()];
        }
        for (i, &x) in row.iter().enumerate() {
            sum[i] += x;
            sum_sq[i] += x * x;
        }
        n += 1;
    }
    if n == 0 {
        return Vec::new();
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let std = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (sq / n as f64 - m * m).max(0.0).sqrt());
    let mut out = mean.clone();
    out.extend(std);
    out
}

/// Seeded Gaussian projection. Row-major `dim x input_dim`, entries drawn in
/// order from [`SplitMix64::next_gaussian`].
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinEmbedder {
    pub dim: usize,
    pub seed: u64,
    input_dim: usize,
    projection: Vec<f64>,
}

impl BuiltinEmbedder {
    pub fn new(input_dim: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(EmbeddingError::BadDimension(dim));
        }
        let mut rng = SplitMix64::new(seed);
        let projection = (0..dim * input_dim).map(|_| rng.next_gaussian()).collect();
        Ok(Self {
            dim,
            seed,
            input_dim,
            projection,
        })
    }

    /// Builder for an `n_mels`-band front end (statistic length `2 * n_mels`).
    pub fn for_mels(n_mels: usize, dim: usize, seed: u64) -> Result<Self> {
        Self::new(2 * n_mels, dim, seed)
    }

    fn project(&self, stats: &[f64]) -> Vec<f64> {
        debug_assert_eq!(stats.len(), self.input_dim);
        self.projection
            .chunks_exact(self.input_dim)
            .map(|row| row.iter().zip(stats).map(|(w, s)| w * s).sum())
            .collect()
    }

    /// Embeds one subsegment from the rows of `features` inside it.
    pub fn embed(&self, features: &FeatureMatrix, subsegment: SubSegment) -> Result<Embedding> {
        let range = features.frame_range(subsegment.start_s, subsegment.end_s);
        if range.is_empty() {
            return Err(EmbeddingError::EmptySubsegment {
                start: subsegment.start_s,
                end: subsegment.end_s,
            });
        }
        let stats = pooled_statistics(range.map(|t| features.row(t)));
        let vector = unit_normalize(&self.project(&stats))?;
        Ok(Embedding { vector, subsegment })
    }

    /// Embeds all subsegments of a file after per-file mean removal.
    pub fn embed_file(
        &self,
        features: &FeatureMatrix,
        subsegments: &[SubSegment],
    ) -> Result<Vec<Embedding>> {
        let centered = center_on_speech(features, subsegments);
        subsegments
            .iter()
            .map(|&s| match self.embed(&centered, s) {
                // a window identical to the file mean carries no contrast; fall back to raw stats
                Err(EmbeddingError::ZeroVector) => self.embed(features, s),
                other => other,
            })
            .collect()
    }
}

/// Subtracts the per-bin mean over frames covered by any subsegment.
pub fn center_on_speech(features: &FeatureMatrix, subsegments: &[SubSegment]) -> FeatureMatrix {
    let n_mels = features.n_mels;
    let mut covered = vec![false; features.n_frames()];
    for s in subsegments {
        for t in features.frame_range(s.start_s, s.end_s) {
            covered[t] = true;
        }
    }
    let mut mean = vec![0.0; n_mels];
    let mut count = 0usize;
    for (t, _) in covered.iter().enumerate().filter(|(_, &c)| c) {
        for (m, x) in mean.iter_mut().zip(features.row(t)) {
            *m += x;
        }
        count += 1;
    }
    if count == 0 {
        return features.clone();
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let data = features
        .data
        .chunks_exact(n_mels)
        .flat_map(|row| row.iter().zip(&mean).map(|(x, m)| x - m))
        .collect();
    FeatureMatrix {
        data,
        ..features.clone()
    }
}

#[derive(Debug, Clone)]
struct StoreEntry {
    start: f64,
    end: f64,
    vector: Vec<f64>,
}

/// Precomputed embeddings keyed by file and subsegment start.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    pub dim: usize,
    entries: HashMap<String, Vec<StoreEntry>>,
}

impl EmbeddingStore {
    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, file_id: &str, start: f64, end: f64, vector: Vec<f64>) {
        if self.dim == 0 {
            self.dim = vector.len();
        }
        let list = self.entries.entry(file_id.to_string()).or_default();
        let pos = list.partition_point(|e| e.start <= start);
        list.insert(pos, StoreEntry { start, end, vector });
    }

    /// Entry with the nearest start within [`LOOKUP_TOLERANCE_S`].
    pub fn lookup(&self, file_id: &str, start: f64) -> Result<&[f64]> {
        let missing = || EmbeddingError::MissingEntry {
            file_id: file_id.to_string(),
            start,
        };
        let list = self.entries.get(file_id).ok_or_else(missing)?;
        let pos = list.partition_point(|e| e.start < start);
        let candidates = [pos.checked_sub(1), Some(pos)];
        candidates
            .into_iter()
            .flatten()
            .filter_map(|i| list.get(i))
            .filter(|e| (e.start - start).abs() <= LOOKUP_TOLERANCE_S)
            .min_by(|a, b| (a.start - start).abs().total_cmp(&(b.start - start).abs()))
            .map(|e| e.vector.as_slice())
            .ok_or_else(missing)
    }

    pub fn embed_file(&self, file_id: &str, subsegments: &[SubSegment]) -> Result<Vec<Embedding>> {
        subsegments
            .iter()
            .map(|&s| {
                Ok(Embedding {
                    vector: self.lookup(file_id, s.start_s)?.to_vec(),
                    subsegment: s,
                })
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(EmbeddingError::ParseError {
            line: 1,
            reason: "missing header".into(),
        })?;
        let dim = parse_header(header).ok_or_else(|| EmbeddingError::ParseError {
            line,
            reason: format!("expected \"{STORE_HEADER} dim=D\""),
        })?;
        if dim < 2 {
            return Err(EmbeddingError::BadDimension(dim));
        }

        let mut store = EmbeddingStore {
            dim,
            entries: HashMap::new(),
        };
        for (line, text) in lines {
            if text.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = text.split_whitespace().collect();
            if tokens.len() < 4 {
                return Err(EmbeddingError::ParseError {
                    line,
                    reason: "expected \"file_id start end v1 ... vD\"".into(),
                });
            }
            let num = |tok: &str| -> Result<f64> {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| EmbeddingError::ParseError {
                        line,
                        reason: format!("bad number {tok:?}"),
                    })
            };
            let start = num(tokens[1])?;
            let end = num(tokens[2])?;
            let values = tokens[3..]
                .iter()
                .map(|t| num(t))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != dim {
                return Err(EmbeddingError::DimensionMismatch {
                    line,
                    expected: dim,
                    found: values.len(),
                });
            }
            let vector = unit_normalize(&values).map_err(|_| EmbeddingError::ParseError {
                line,
                reason: "zero vector".into(),
            })?;
            store.insert(tokens[0], start, end, vector);
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serializes entries sorted by file id then start. Values use the
    /// shortest exact decimal form.
    pub fn to_text(&self) -> String {
        let mut out = format!("{STORE_HEADER} dim={}\n", self.dim);
        let mut files: Vec<&String> = self.entries.keys().collect();
        files.sort();
        for file in files {
            for e in &self.entries[file] {
                let _ = write!(out, "{file} {:.3} {:.3}", e.start, e.end);
                for v in &e.vector {
                    let _ = write!(out, " {v}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn parse_header(line: &str) -> Option<usize> {
    let rest = line.strip_prefix(STORE_HEADER)?.trim();
    rest.strip_prefix("dim=")?.parse().ok()
}
