//! End-to-end jobs built on the compression kernel: frame sampling, file
//! based compression, the synthetic retrieval evaluation and the throughput
//! benchmark.

mod bench;
mod job;
mod sampling;
mod synth_eval;

use thiserror::Error;

use crate::compression::{
    avg_pool_compress, compress, CompressError, CompressionConfig, Mode, PseudoFrames,
    QueryEmbedding, VideoFeatures,
};
use crate::tensor_io::IoError;

pub use bench::{run_throughput_bench, BenchParams, BenchReport, BenchSize, SizeStats};
pub use job::{run_compression_job, JobSpec, JobSummary};
pub use sampling::{sample_frame_indices, SamplingPlan};
pub use synth_eval::{run_synthetic_retrieval_eval, SynthEvalParams, SynthEvalReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("InsufficientFrames: cannot sample {requested} frames from {total}")]
    InsufficientFrames { total: usize, requested: usize },
    #[error("MissingQuery: mode {0} needs a query embedding")]
    MissingQuery(Mode),
    #[error("InvalidInput: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Runs whichever kernel `cfg.mode()` selects.
pub fn compress_features(
    v: &VideoFeatures,
    q: Option<&QueryEmbedding>,
    cfg: &CompressionConfig,
) -> Result<PseudoFrames> {
    match (cfg.mode(), q) {
        (Mode::AveragePool, _) => Ok(avg_pool_compress(v, cfg)?),
        (mode, None) => Err(PipelineError::MissingQuery(mode)),
        (_, Some(q)) => Ok(compress(v, q, cfg)?),
    }
}
