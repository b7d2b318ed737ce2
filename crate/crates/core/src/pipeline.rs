//! End-to-end diarization: configuration, per-file driver, batch runs,
//! ablation sweeps and VAD evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::audio_io::{read_wav, validate_rate, AudioBuffer, AudioError};
use crate::clustering::{
    ahc_cluster, spectral_cluster, AhcParams, ClusterAssignment, ClusterError, Clusterer,
    KMeansParams, SpectralParams,
};
use crate::embedding::{BuiltinEmbedder, Embedding, EmbeddingError, EmbeddingStore};
use crate::features::{log_mel, save_feature_dump, FeatureError, FeatureMatrix, MelConfig};
use crate::scoring::{
    assemble_hypothesis, score_files, timeline_to_records, write_rttm, RttmRecord, ScoreSummary,
    ScoringError,
};
use crate::segmentation::{slide_windows, SegmentationError, SubSegment, WindowParams};
use crate::synth::SynthError;
use crate::timeline::Timeline;
use crate::vad::{detect_speech, load_external_vad, VadConfig, VadError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Vad(#[from] VadError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VadSource {
    Energy,
    /// Labels from `<vad_dir>/<file_id>.lab` or `<vad_dir>/<file_id>.rttm`.
    External,
}

impl VadSource {
    pub fn name(self) -> &'static str {
        match self {
            VadSource::Energy => "energy",
            VadSource::External => "external",
        }
    }
}

impl FromStr for VadSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "energy" => Ok(VadSource::Energy),
            "external" => Ok(VadSource::External),
            other => Err(format!(
                "unknown VAD source {other:?} (expected energy or external)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedderKind {
    Builtin,
    /// Precomputed vectors from an embedding store file.
    File,
}

impl EmbedderKind {
    pub fn name(self) -> &'static str {
        match self {
            EmbedderKind::Builtin => "builtin",
            EmbedderKind::File => "file",
        }
    }
}

impl FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "builtin" => Ok(EmbedderKind::Builtin),
            "file" => Ok(EmbedderKind::File),
            other => Err(format!(
                "unknown embedder {other:?} (expected builtin or file)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub vad_source: VadSource,
    pub vad: VadConfig,
    pub vad_dir: Option<PathBuf>,
    pub window: WindowParams,
    pub embedder: EmbedderKind,
    pub embedding_store: Option<PathBuf>,
    pub embed_dim: usize,
    pub clusterer: Clusterer,
    pub num_speakers: Option<usize>,
    pub max_speakers: usize,
    pub ahc_threshold: f64,
    pub seed: u64,
    pub sample_rate: u32,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vad_source: VadSource::Energy,
            vad: VadConfig {
                aggressiveness: Some(0),
                ..VadConfig::default()
            },
            vad_dir: None,
            window: WindowParams::default(),
            embedder: EmbedderKind::Builtin,
            embedding_store: None,
            embed_dim: 64,
            clusterer: Clusterer::Spectral,
            num_speakers: None,
            max_speakers: 8,
            ahc_threshold: 0.5,
            seed: 42,
            sample_rate: 16000,
            out_dir: None,
        }
    }
}

fn opt_to_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn opt_path(v: &Option<PathBuf>) -> String {
    v.as_ref()
        .map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

fn parse_value<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("{value:?}: {e}"))
}

fn parse_opt<T: FromStr>(value: &str) -> std::result::Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    if value == "none" {
        Ok(None)
    } else {
        parse_value(value).map(Some)
    }
}

impl PipelineConfig {
    /// All keys in a fixed order; unset optional values are written as `none`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("vad", self.vad_source.name().into());
        kv("vad_threshold", opt_to_string(&self.vad.threshold));
        kv(
            "vad_aggressiveness",
            opt_to_string(&self.vad.aggressiveness),
        );
        kv("vad_frame_ms", self.vad.frame_ms.to_string());
        kv("vad_hangover_frames", self.vad.hangover_frames.to_string());
        kv("vad_min_speech", self.vad.min_speech_s.to_string());
        kv("vad_merge_gap", self.vad.merge_gap_s.to_string());
        kv("vad_dir", opt_path(&self.vad_dir));
        kv("window", self.window.window_s.to_string());
        kv("stride", self.window.stride_s.to_string());
        kv("min_subsegment", self.window.min_subsegment_s.to_string());
        kv("embedder", self.embedder.name().into());
        kv("embedding_store", opt_path(&self.embedding_store));
        kv("embed_dim", self.embed_dim.to_string());
        kv("clusterer", self.clusterer.name().into());
        kv("num_speakers", opt_to_string(&self.num_speakers));
        kv("max_speakers", self.max_speakers.to_string());
        kv("ahc_threshold", self.ahc_threshold.to_string());
        kv("seed", self.seed.to_string());
        kv("sample_rate", self.sample_rate.to_string());
        kv("out_dir", opt_path(&self.out_dir));
        out
    }

    /// Applies `key=value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| PipelineError::Config {
                line: idx + 1,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(io_err(path))?)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "vad" => self.vad_source = parse_value(value)?,
            "vad_threshold" => self.vad.threshold = parse_opt(value)?,
            "vad_aggressiveness" => self.vad.aggressiveness = parse_opt(value)?,
            "vad_frame_ms" => self.vad.frame_ms = parse_value(value)?,
            "vad_hangover_frames" => self.vad.hangover_frames = parse_value(value)?,
            "vad_min_speech" => self.vad.min_speech_s = parse_value(value)?,
            "vad_merge_gap" => self.vad.merge_gap_s = parse_value(value)?,
            "vad_dir" => self.vad_dir = parse_opt(value)?,
            "window" => self.window.window_s = parse_value(value)?,
            "stride" => self.window.stride_s = parse_value(value)?,
            "min_subsegment" => self.window.min_subsegment_s = parse_value(value)?,
            "embedder" => self.embedder = parse_value(value)?,
            "embedding_store" => self.embedding_store = parse_opt(value)?,
            "embed_dim" => self.embed_dim = parse_value(value)?,
            "clusterer" => self.clusterer = parse_value(value)?,
            "num_speakers" => self.num_speakers = parse_opt(value)?,
            "max_speakers" => self.max_speakers = parse_value(value)?,
            "ahc_threshold" => self.ahc_threshold = parse_value(value)?,
            "seed" => self.seed = parse_value(value)?,
            "sample_rate" => self.sample_rate = parse_value(value)?,
            "out_dir" => self.out_dir = parse_opt(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.vad.validate()?;
        self.window.validate()?;
        if self.vad_source == VadSource::External && self.vad_dir.is_none() {
            return Err(PipelineError::BadParams(
                "external VAD needs vad_dir".into(),
            ));
        }
        if self.embedder == EmbedderKind::File && self.embedding_store.is_none() {
            return Err(PipelineError::BadParams(
                "file embedder needs embedding_store".into(),
            ));
        }
        if self.embed_dim < 2 {
            return Err(PipelineError::BadParams(format!(
                "embed_dim {} < 2",
                self.embed_dim
            )));
        }
        if self.max_speakers == 0 || self.num_speakers == Some(0) {
            return Err(PipelineError::BadParams(
                "speaker counts must be positive".into(),
            ));
        }
        Ok(())
    }

    fn spectral_params(&self) -> SpectralParams {
        SpectralParams {
            k_override: self.num_speakers,
            k_max: self.max_speakers,
            seed: self.seed,
            kmeans: KMeansParams::default(),
        }
    }

    fn ahc_params(&self) -> AhcParams {
        AhcParams {
            distance_threshold: self.ahc_threshold,
            k_max: self.max_speakers,
            k_override: self.num_speakers,
        }
    }
}

/// Everything one file goes through, kept for dumps and inspection.
#[derive(Debug, Clone)]
pub struct Diarization {
    pub speech: Timeline,
    pub subsegments: Vec<SubSegment>,
    pub features: Option<FeatureMatrix>,
    pub embeddings: Vec<Embedding>,
    pub assignment: ClusterAssignment,
    pub hypothesis: Timeline,
}

impl Diarization {
    pub fn records(&self) -> Vec<RttmRecord> {
        timeline_to_records(&self.hypothesis)
    }
}

/// Reads a WAV file as mono, downmixing multi-channel input.
pub fn load_mono(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut wav = read_wav(path)?;
    if let Some(stem) = path.file_stem() {
        wav.source_id = stem.to_string_lossy().into_owned();
    }
    if wav.channel_count() > 1 {
        info!(
            "{}: downmixing {} channels to mono",
            path.display(),
            wav.channel_count()
        );
    }
    Ok(wav.into_mono()?)
}

pub fn speech_regions(buf: &AudioBuffer, cfg: &PipelineConfig) -> Result<Timeline> {
    match cfg.vad_source {
        VadSource::Energy => Ok(detect_speech(buf, &cfg.vad)?),
        VadSource::External => {
            let dir = cfg
                .vad_dir
                .as_ref()
                .ok_or_else(|| PipelineError::BadParams("external VAD needs vad_dir".into()))?;
            let lab = dir.join(format!("{}.lab", buf.source_id));
            let path = if lab.exists() {
                lab
            } else {
                dir.join(format!("{}.rttm", buf.source_id))
            };
            Ok(load_external_vad(path, &buf.source_id)?)
        }
    }
}

pub fn cluster_embeddings(vectors: &[Vec<f64>], cfg: &PipelineConfig) -> Result<ClusterAssignment> {
    Ok(match cfg.clusterer {
        Clusterer::Spectral => spectral_cluster(vectors, &cfg.spectral_params())?,
        Clusterer::Ahc => ahc_cluster(vectors, &cfg.ahc_params())?,
    })
}

/// Runs one buffer through the whole pipeline. `store` is required when the
/// configuration selects the file embedder.
pub fn diarize_buffer(
    buf: &AudioBuffer,
    cfg: &PipelineConfig,
    store: Option<&EmbeddingStore>,
) -> Result<Diarization> {
    cfg.validate()?;
    let buf = validate_rate(buf.clone(), cfg.sample_rate)?;
    let file_id = buf.source_id.as_str();
    let speech = speech_regions(&buf, cfg)?;
    let subsegments = slide_windows(&speech, &cfg.window)?;
    if subsegments.is_empty() {
        warn!("{file_id}: no speech found, writing an empty hypothesis");
        return Ok(Diarization {
            speech,
            subsegments,
            features: None,
            embeddings: Vec::new(),
            assignment: ClusterAssignment {
                labels: Vec::new(),
                k: 0,
            },
            hypothesis: Timeline::new(file_id),
        });
    }

    let (features, embeddings) = match cfg.embedder {
        EmbedderKind::Builtin => {
            let mel = MelConfig::default();
            let features = log_mel(&buf, &mel)?;
            let embedder = BuiltinEmbedder::for_mels(mel.n_mels, cfg.embed_dim, cfg.seed)?;
            let embeddings = embedder.embed_file(&features, &subsegments)?;
            (Some(features), embeddings)
        }
        EmbedderKind::File => {
            let store = store.ok_or_else(|| {
                PipelineError::BadParams("file embedder selected but no store loaded".into())
            })?;
            (None, store.embed_file(file_id, &subsegments)?)
        }
    };

    let vectors: Vec<Vec<f64>> = embeddings.iter().map(|e| e.vector.clone()).collect();
    let assignment = cluster_embeddings(&vectors, cfg)?;
    let hypothesis = assemble_hypothesis(file_id, &subsegments, &assignment)?;
    Ok(Diarization {
        speech,
        subsegments,
        features,
        embeddings,
        assignment,
        hypothesis,
    })
}

pub fn load_store(cfg: &PipelineConfig) -> Result<Option<EmbeddingStore>> {
    match (cfg.embedder, &cfg.embedding_store) {
        (EmbedderKind::File, Some(path)) => Ok(Some(EmbeddingStore::load(path)?)),
        (EmbedderKind::File, None) => Err(PipelineError::BadParams(
            "file embedder needs embedding_store".into(),
        )),
        (EmbedderKind::Builtin, _) => Ok(None),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DumpOptions {
    pub embeddings: bool,
    pub features: bool,
}

/// Outcome for one input of a batch run.
#[derive(Debug)]
pub struct FileOutcome {
    pub input: PathBuf,
    pub file_id: String,
    pub result: Result<PathBuf>,
}

fn file_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn diarize_to_dir(
    input: &Path,
    cfg: &PipelineConfig,
    store: Option<&EmbeddingStore>,
    out_dir: &Path,
    dumps: DumpOptions,
) -> Result<PathBuf> {
    let buf = load_mono(input)?;
    let result = diarize_buffer(&buf, cfg, store)?;
    let file_id = &buf.source_id;

    let rttm_path = out_dir.join(format!("{file_id}.rttm"));
    fs::write(&rttm_path, write_rttm(&result.records())).map_err(io_err(&rttm_path))?;
    if dumps.embeddings {
        let mut dump = EmbeddingStore::default();
        for e in &result.embeddings {
            dump.insert(
                file_id,
                e.subsegment.start_s,
                e.subsegment.end_s,
                e.vector.clone(),
            );
        }
        dump.save(out_dir.join(format!("{file_id}.emb")))?;
    }
    if dumps.features {
        let features = match result.features {
            Some(f) => f,
            None => log_mel(&buf, &MelConfig::default())?,
        };
        save_feature_dump(out_dir.join(format!("{file_id}.melf")), &features)?;
    }
    info!(
        "{file_id}: {} subsegments, {} speakers -> {}",
        result.subsegments.len(),
        result.assignment.k,
        rttm_path.display()
    );
    Ok(rttm_path)
}

/// Diarizes every input into `<out_dir>/<file_id>.rttm`, up to `jobs` files
/// at a time. Per-file failures are reported in the outcome list, which is
/// sorted by file id.
pub fn run_diarize(
    inputs: &[PathBuf],
    cfg: &PipelineConfig,
    out_dir: &Path,
    jobs: usize,
    dumps: DumpOptions,
) -> Result<Vec<FileOutcome>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let store = load_store(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::BadParams(format!("thread pool: {e}")))?;
    let mut outcomes: Vec<FileOutcome> = pool.install(|| {
        inputs
            .par_iter()
            .map(|input| FileOutcome {
                input: input.clone(),
                file_id: file_id_of(input),
                result: diarize_to_dir(input, cfg, store.as_ref(), out_dir, dumps),
            })
            .collect()
    });
    outcomes.sort_by(|a, b| a.file_id.cmp(&b.file_id).then(a.input.cmp(&b.input)));
    Ok(outcomes)
}

/// Parameter swept by an ablation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    VadThreshold,
    Aggressiveness,
    FrameMs,
    /// Values are `window:stride` pairs in seconds.
    WindowStride,
    Clusterer,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::VadThreshold => "vad_threshold",
            AblationAxis::Aggressiveness => "aggressiveness",
            AblationAxis::FrameMs => "frame_ms",
            AblationAxis::WindowStride => "window_stride",
            AblationAxis::Clusterer => "clusterer",
        }
    }
}

impl FromStr for AblationAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "vad_threshold" => Ok(AblationAxis::VadThreshold),
            "aggressiveness" => Ok(AblationAxis::Aggressiveness),
            "frame_ms" => Ok(AblationAxis::FrameMs),
            "window_stride" => Ok(AblationAxis::WindowStride),
            "clusterer" => Ok(AblationAxis::Clusterer),
            other => Err(format!("unknown ablation axis {other:?}")),
        }
    }
}

/// The configuration for one ablation row.
///
/// A threshold value keeps the base aggressiveness preset's hangover; an
/// aggressiveness value clears any explicit threshold so the preset's own
/// threshold applies.
pub fn apply_axis_value(
    base: &PipelineConfig,
    axis: AblationAxis,
    value: &str,
) -> Result<PipelineConfig> {
    let bad = |reason: String| {
        PipelineError::BadParams(format!("{} value {value:?}: {reason}", axis.name()))
    };
    let mut cfg = base.clone();
    match axis {
        AblationAxis::VadThreshold => cfg.vad.threshold = Some(parse_value(value).map_err(bad)?),
        AblationAxis::Aggressiveness => {
            cfg.vad.aggressiveness = Some(parse_value(value).map_err(bad)?);
            cfg.vad.threshold = None;
        }
        AblationAxis::FrameMs => cfg.vad.frame_ms = parse_value(value).map_err(bad)?,
        AblationAxis::WindowStride => {
            let (w, s) = value
                .split_once(':')
                .ok_or_else(|| bad("expected window:stride".into()))?;
            cfg.window.window_s = parse_value(w).map_err(bad)?;
            cfg.window.stride_s = parse_value(s).map_err(bad)?;
        }
        AblationAxis::Clusterer => cfg.clusterer = parse_value(value).map_err(bad)?,
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub value: String,
    pub summary: ScoreSummary,
}

/// Diarizes every buffer with `cfg` and scores against `reference`.
pub fn diarize_and_score(
    inputs: &[AudioBuffer],
    reference: &BTreeMap<String, Vec<RttmRecord>>,
    cfg: &PipelineConfig,
    store: Option<&EmbeddingStore>,
    collar_s: f64,
) -> Result<ScoreSummary> {
    let hyps: Vec<(String, Vec<RttmRecord>)> = inputs
        .par_iter()
        .map(|buf| {
            Ok((
                buf.source_id.clone(),
                diarize_buffer(buf, cfg, store)?.records(),
            ))
        })
        .collect::<Result<_>>()?;
    let hyp_map: BTreeMap<String, Vec<RttmRecord>> = hyps.into_iter().collect();
    Ok(score_files(reference, &hyp_map, None, collar_s)?)
}

/// One scored row per value, in the given order.
pub fn run_ablation(
    inputs: &[AudioBuffer],
    reference: &BTreeMap<String, Vec<RttmRecord>>,
    base: &PipelineConfig,
    axis: AblationAxis,
    values: &[String],
    collar_s: f64,
) -> Result<Vec<AblationRow>> {
    if values.is_empty() {
        return Err(PipelineError::BadParams(format!(
            "no values given for {}",
            axis.name()
        )));
    }
    let store = load_store(base)?;
    values
        .iter()
        .map(|value| {
            let cfg = apply_axis_value(base, axis, value)?;
            let summary = diarize_and_score(inputs, reference, &cfg, store.as_ref(), collar_s)?;
            Ok(AblationRow {
                value: value.clone(),
                summary,
            })
        })
        .collect()
}

/// Rows are parameter values, columns the overall MS/FA/SE/DER.
pub fn format_ablation_table(axis: AblationAxis, rows: &[AblationRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.value.len())
        .chain([axis.name().len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} {:>8} {:>8} {:>8} {:>8}",
        axis.name(),
        "MS",
        "FA",
        "SE",
        "DER"
    );
    for row in rows {
        let r = &row.summary.overall;
        let _ = writeln!(
            out,
            "{:<width$} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            row.value, r.ms_pct, r.fa_pct, r.se_pct, r.der_pct
        );
    }
    out
}

/// Scores speech detection alone: all speaker labels collapse to one, so SE
/// is always 0 and DER = MS + FA.
pub fn evaluate_vad(
    inputs: &[AudioBuffer],
    reference: &BTreeMap<String, Vec<RttmRecord>>,
    cfg: &PipelineConfig,
    collar_s: f64,
) -> Result<ScoreSummary> {
    let collapse = |recs: &[RttmRecord]| -> Vec<RttmRecord> {
        recs.iter()
            .map(|r| RttmRecord {
                speaker: "speech".into(),
                ..r.clone()
            })
            .collect()
    };
    let ref_speech: BTreeMap<String, Vec<RttmRecord>> = reference
        .iter()
        .map(|(k, v)| (k.clone(), collapse(v)))
        .collect();
    let hyp: BTreeMap<String, Vec<RttmRecord>> = inputs
        .par_iter()
        .map(|buf| {
            let buf = validate_rate(buf.clone(), cfg.sample_rate)?;
            let speech = speech_regions(&buf, cfg)?;
            Ok((buf.source_id.clone(), timeline_to_records(&speech)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    Ok(score_files(&ref_speech, &hyp, None, collar_s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::parse_rttm;
    use crate::synth::{synthesize, SynthParams};

    #[test]
    fn default_config_round_trips() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_config_string();
        let back = PipelineConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_config_string(), text);
    }

    #[test]
    fn config_overrides_and_errors() {
        let cfg =
            PipelineConfig::parse("# tuned\nvad_threshold = 0.25\nclusterer=ahc\nnum_speakers=3\n")
                .unwrap();
        assert_eq!(cfg.vad.threshold, Some(0.25));
        assert_eq!(cfg.clusterer, Clusterer::Ahc);
        assert_eq!(cfg.num_speakers, Some(3));
        assert!(matches!(
            PipelineConfig::parse("bogus=1\n"),
            Err(PipelineError::Config { line: 1, .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("\nwindow\n"),
            Err(PipelineError::Config { line: 2, .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("vad_aggressiveness=7\n"),
            Err(PipelineError::Vad(VadError::BadLevel(7)))
        ));
        assert!(PipelineConfig::parse("vad=external\n").is_err());
    }

    #[test]
    fn silent_buffer_gives_empty_hypothesis() {
        let buf = AudioBuffer::new(vec![0.0; 16000 * 3], 16000, "quiet");
        let d = diarize_buffer(&buf, &PipelineConfig::default(), None).unwrap();
        assert!(d.hypothesis.is_empty());
        assert!(d.records().is_empty());
    }

    #[test]
    fn two_speaker_synth_finds_two_speakers() {
        let conv = synthesize("two", &SynthParams::new(2, 40.0, 3)).unwrap();
        let d = diarize_buffer(&conv.audio, &PipelineConfig::default(), None).unwrap();
        assert_eq!(d.hypothesis.labels().len(), 2);
    }

    #[test]
    fn axis_values() {
        let base = PipelineConfig::default();
        let c = apply_axis_value(&base, AblationAxis::WindowStride, "1.5:0.75").unwrap();
        assert_eq!((c.window.window_s, c.window.stride_s), (1.5, 0.75));
        let c = apply_axis_value(&base, AblationAxis::Aggressiveness, "3").unwrap();
        assert_eq!(c.vad.effective_threshold(), 0.75);
        assert!(apply_axis_value(&base, AblationAxis::WindowStride, "1.5").is_err());
        assert!(apply_axis_value(&base, AblationAxis::FrameMs, "25").is_err());
        let empty = run_ablation(
            &[],
            &BTreeMap::new(),
            &base,
            AblationAxis::FrameMs,
            &[],
            0.0,
        );
        assert!(matches!(empty, Err(PipelineError::BadParams(_))));
    }

    #[test]
    fn vad_eval_on_perfect_labels() {
        let ref_map = parse_rttm("SPEAKER f 1 1.0 2.0 <NA> <NA> a <NA> <NA>\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("f.lab"), "1.0 3.0\n").unwrap();
        let cfg = PipelineConfig {
            vad_source: VadSource::External,
            vad_dir: Some(dir.path().to_path_buf()),
            ..PipelineConfig::default()
        };
        let buf = AudioBuffer::new(vec![0.0; 16000 * 4], 16000, "f");
        let s = evaluate_vad(&[buf], &ref_map, &cfg, 0.0).unwrap();
        assert_eq!(s.overall.der_pct, 0.0);
    }
}
