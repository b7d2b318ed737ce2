//! Speaker diarization toolkit.
//!
//! The pipeline runs `audio -> log-mel features -> VAD -> sliding-window
//! subsegments -> embeddings -> clustering -> RTTM`, and the [`scoring`]
//! module computes the diarization error rate (missed speech, false alarm and
//! speaker error) against reference RTTM files.
//!
//! Every stage is a plain function over owned or borrowed data, so files can
//! be processed in parallel and a fixed seed reproduces the same output.

pub mod audio_io;
pub mod clustering;
pub mod embedding;
pub mod features;
pub mod pipeline;
pub mod rng;
pub mod scoring;
pub mod segmentation;
pub mod synth;
pub mod timeline;
pub mod vad;

pub use audio_io::{AudioBuffer, AudioError, WavFile};
pub use clustering::{ClusterAssignment, ClusterError};
pub use embedding::{Embedding, EmbeddingError};
pub use features::{FeatureError, FeatureMatrix, MelConfig};
pub use pipeline::{PipelineConfig, PipelineError};
pub use scoring::{DerReport, RttmRecord, ScoringError};
pub use segmentation::SubSegment;
pub use timeline::{Interval, Timeline};
pub use vad::{VadConfig, VadError};
