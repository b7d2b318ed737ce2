use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{error, warn};

use diarkit::clustering::Clusterer;
use diarkit::pipeline::{
    self, format_ablation_table, load_mono, AblationAxis, DumpOptions, EmbedderKind,
    PipelineConfig, PipelineError, VadSource,
};
use diarkit::scoring::{format_kv, format_table, parse_rttm, parse_uem, score_files, RttmRecord};
use diarkit::synth::{synthesize, write_conversation, SynthParams};
use diarkit::AudioBuffer;

#[derive(Parser)]
#[command(
    name = "diarkit",
    version,
    about = "Speaker diarization and DER scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one RTTM per input WAV
    Diarize(DiarizeArgs),
    /// Score hypothesis RTTM against reference RTTM
    Score(ScoreArgs),
    /// Score speech detection alone against reference RTTM
    VadEval(VadEvalArgs),
    /// Re-run diarize and score for each value of one parameter
    Ablate(AblateArgs),
    /// Generate a synthetic conversation and its reference RTTM
    Synth(SynthArgs),
}

/// Pipeline options. Each flag overrides the config file, which overrides
/// the defaults.
#[derive(Args, Clone, Default)]
struct PipelineOpts {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Speech detector: energy or external
    #[arg(long)]
    vad: Option<VadSource>,
    #[arg(long)]
    vad_threshold: Option<f64>,
    #[arg(long)]
    vad_aggressiveness: Option<u8>,
    #[arg(long)]
    vad_frame_ms: Option<u32>,
    /// Directory of <file_id>.lab or <file_id>.rttm speech labels
    #[arg(long)]
    vad_dir: Option<PathBuf>,
    /// Window length in seconds
    #[arg(long)]
    window: Option<f64>,
    /// Window shift in seconds
    #[arg(long)]
    stride: Option<f64>,
    #[arg(long)]
    min_subsegment: Option<f64>,
    /// Embedder: builtin or file
    #[arg(long)]
    embedder: Option<EmbedderKind>,
    #[arg(long)]
    embedding_store: Option<PathBuf>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Clusterer: spectral or ahc
    #[arg(long)]
    clusterer: Option<Clusterer>,
    /// Fix the number of speakers instead of estimating it
    #[arg(long)]
    num_speakers: Option<usize>,
    #[arg(long)]
    max_speakers: Option<usize>,
}

impl PipelineOpts {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.vad {
            cfg.vad_source = v;
        }
        if let Some(v) = self.vad_threshold {
            cfg.vad.threshold = Some(v);
        }
        if let Some(v) = self.vad_aggressiveness {
            cfg.vad.aggressiveness = Some(v);
        }
        if let Some(v) = self.vad_frame_ms {
            cfg.vad.frame_ms = v;
        }
        if let Some(v) = &self.vad_dir {
            cfg.vad_dir = Some(v.clone());
        }
        if let Some(v) = self.window {
            cfg.window.window_s = v;
        }
        if let Some(v) = self.stride {
            cfg.window.stride_s = v;
        }
        if let Some(v) = self.min_subsegment {
            cfg.window.min_subsegment_s = v;
        }
        if let Some(v) = self.embedder {
            cfg.embedder = v;
        }
        if let Some(v) = &self.embedding_store {
            cfg.embedding_store = Some(v.clone());
        }
        if let Some(v) = self.embed_dim {
            cfg.embed_dim = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.clusterer {
            cfg.clusterer = v;
        }
        if let Some(v) = self.num_speakers {
            cfg.num_speakers = Some(v);
        }
        if let Some(v) = self.max_speakers {
            cfg.max_speakers = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct DiarizeArgs {
    #[command(flatten)]
    pipeline: PipelineOpts,
    /// Output directory (defaults to out_dir from the config, then ".")
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Files processed in parallel
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write <file_id>.emb with the subsegment embeddings
    #[arg(long)]
    dump_embeddings: bool,
    /// Also write <file_id>.melf with the log-mel features
    #[arg(long)]
    dump_features: bool,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long)]
    uem: Option<PathBuf>,
    /// Seconds excluded on each side of every reference boundary
    #[arg(long, default_value_t = 0.0)]
    collar: f64,
    /// key=value lines instead of a table
    #[arg(long)]
    kv: bool,
}

#[derive(Args)]
struct VadEvalArgs {
    #[command(flatten)]
    pipeline: PipelineOpts,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    collar: f64,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    pipeline: PipelineOpts,
    /// vad_threshold, aggressiveness, frame_ms, window_stride or clusterer
    #[arg(long)]
    axis: AblationAxis,
    /// Comma-separated values; window_stride takes window:stride pairs
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
    /// With --axis window_stride and window lengths in --values, the stride
    /// grid to cross them with
    #[arg(long, value_delimiter = ',')]
    strides: Vec<String>,
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    collar: f64,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    speakers: usize,
    /// Length in seconds
    #[arg(long)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Base name of the output files (default synth_<speakers>spk_<seed>)
    #[arg(long)]
    name: Option<String>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_rttm(path: &Path) -> Result<BTreeMap<String, Vec<RttmRecord>>> {
    parse_rttm(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_inputs(paths: &[PathBuf]) -> Result<Vec<AudioBuffer>> {
    paths
        .iter()
        .map(|p| load_mono(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn diarize(args: DiarizeArgs) -> Result<ExitCode> {
    let cfg = args.pipeline.resolve()?;
    let out_dir = args
        .out_dir
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let dumps = DumpOptions {
        embeddings: args.dump_embeddings,
        features: args.dump_features,
    };
    let outcomes = pipeline::run_diarize(&args.inputs, &cfg, &out_dir, args.jobs, dumps)?;
    let mut failed = 0;
    for o in &outcomes {
        match &o.result {
            Ok(path) => println!("{}\t{}", o.file_id, path.display()),
            Err(e) => {
                failed += 1;
                error!("{}: {e}", o.input.display());
            }
        }
    }
    if failed > 0 {
        error!("{failed} of {} files failed", outcomes.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn score(args: ScoreArgs) -> Result<ExitCode> {
    let reference = load_rttm(&args.reference)?;
    let hypothesis = load_rttm(&args.hyp)?;
    let uem = match &args.uem {
        Some(path) => Some(
            parse_uem(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?,
        ),
        None => None,
    };
    let summary = score_files(&reference, &hypothesis, uem.as_ref(), args.collar)?;
    print!(
        "{}",
        if args.kv {
            format_kv(&summary)
        } else {
            format_table(&summary)
        }
    );
    Ok(ExitCode::SUCCESS)
}

fn vad_eval(args: VadEvalArgs) -> Result<ExitCode> {
    let cfg = args.pipeline.resolve()?;
    let reference = load_rttm(&args.reference)?;
    let inputs = load_inputs(&args.inputs)?;
    let summary = pipeline::evaluate_vad(&inputs, &reference, &cfg, args.collar)?;
    print!("{}", format_table(&summary));
    Ok(ExitCode::SUCCESS)
}

fn ablate(args: AblateArgs) -> Result<ExitCode> {
    let base = args.pipeline.resolve()?;
    let values: Vec<String> = if args.strides.is_empty() {
        args.values.clone()
    } else {
        if args.axis != AblationAxis::WindowStride {
            bail!("--strides only applies to --axis window_stride");
        }
        args.values
            .iter()
            .flat_map(|w| args.strides.iter().map(move |s| format!("{w}:{s}")))
            .collect()
    };
    let values: Vec<String> = values
        .into_iter()
        .filter(|v| !v.trim().is_empty())
        .collect();
    if values.is_empty() {
        return Err(PipelineError::BadParams("no ablation values given".into()).into());
    }
    let reference = load_rttm(&args.reference)?;
    let inputs = load_inputs(&args.inputs)?;
    for buf in &inputs {
        if !reference.contains_key(&buf.source_id) {
            warn!(
                "{}: not in the reference, its output is not scored",
                buf.source_id
            );
        }
    }
    let inputs: Vec<AudioBuffer> = inputs
        .into_iter()
        .filter(|b| reference.contains_key(&b.source_id))
        .collect();
    let rows = pipeline::run_ablation(&inputs, &reference, &base, args.axis, &values, args.collar)?;
    print!("{}", format_ablation_table(args.axis, &rows));
    Ok(ExitCode::SUCCESS)
}

fn synth(args: SynthArgs) -> Result<ExitCode> {
    let name = args
        .name
        .unwrap_or_else(|| format!("synth_{}spk_{}", args.speakers, args.seed));
    let conv = synthesize(
        &name,
        &SynthParams::new(args.speakers, args.duration, args.seed),
    )?;
    let (wav, rttm) = write_conversation(&conv, &args.out_dir, &name)?;
    println!("{}\n{}", wav.display(), rttm.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Diarize(a) => diarize(a),
        Command::Score(a) => score(a),
        Command::VadEval(a) => vad_eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
