use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::{compress_features, PipelineError, Result};
use crate::compression::{CompressionConfig, QueryEmbedding, VideoFeatures};
use crate::tensor_io::{read_npy, read_sidecar, write_npy, write_sidecar, ArrayFile, Sidecar};

/// Inputs and outputs of one file-to-file compression.
#[derive(Debug, Clone)]
pub struct JobSpec {
    pub features_path: PathBuf,
    pub query_path: Option<PathBuf>,
    /// Frame structure of the features file; checked against the array shape.
    pub sidecar_path: Option<PathBuf>,
    pub tokens_per_frame: usize,
    pub config: CompressionConfig,
    pub out_path: PathBuf,
}

impl JobSpec {
    /// The sidecar written next to the output: `out.npy` -> `out.json`.
    pub fn out_sidecar_path(&self) -> PathBuf {
        self.out_path.with_extension("json")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JobSummary {
    pub features: String,
    pub query: Option<String>,
    pub out: String,
    pub out_sidecar: String,
    /// (frames, tokens_per_frame, dim)
    pub input_shape: [usize; 3],
    pub output_shape: [usize; 3],
    pub query_tokens: Option<usize>,
    pub mode: String,
    pub heads: usize,
    pub target_frames: usize,
    pub window_len: usize,
    pub wall_time_s: f64,
}

fn load_features(
    path: &Path,
    tokens_per_frame: usize,
    sidecar: Option<&Path>,
) -> Result<VideoFeatures> {
    let array = read_npy(path)?;
    let context = |msg: String| PipelineError::InvalidInput(format!("{}: {msg}", path.display()));
    if tokens_per_frame == 0 {
        return Err(context("tokens per frame must be positive".into()));
    }
    let (frames, dim) = match *array.shape() {
        [frames, t, dim] if t == tokens_per_frame => (frames, dim),
        [_, t, _] => {
            return Err(context(format!(
                "array has {t} tokens per frame, expected {tokens_per_frame}"
            )))
        }
        [rows, dim] if rows % tokens_per_frame == 0 => (rows / tokens_per_frame, dim),
        [rows, _] => {
            return Err(context(format!(
                "{rows} rows are not a whole number of {tokens_per_frame}-token frames"
            )))
        }
        ref other => {
            return Err(context(format!(
                "expected a 2-D or 3-D array, got shape {other:?}"
            )))
        }
    };
    if let Some(sidecar_path) = sidecar {
        let expected = read_sidecar(sidecar_path)?;
        let found = Sidecar {
            frames,
            tokens_per_frame,
            dim,
        };
        if expected != found {
            return Err(context(format!(
                "sidecar {expected:?} disagrees with array layout {found:?}"
            )));
        }
    }
    VideoFeatures::new(frames, tokens_per_frame, dim, array.into_f32())
        .map_err(|e| context(e.to_string()))
}

fn load_query(path: &Path) -> Result<QueryEmbedding> {
    let array = read_npy(path)?;
    let (len, dim) = match *array.shape() {
        [dim] => (1, dim),
        [len, dim] => (len, dim),
        ref other => {
            return Err(PipelineError::InvalidInput(format!(
                "{}: query must be 1-D or 2-D, got shape {other:?}",
                path.display()
            )))
        }
    };
    Ok(QueryEmbedding::new(len, dim, array.into_f32())?)
}

/// Loads the arrays, compresses, and writes the output NPY plus its sidecar.
pub fn run_compression_job(spec: &JobSpec) -> Result<JobSummary> {
    let cfg = &spec.config;
    if cfg.mode().requires_query() && spec.query_path.is_none() {
        return Err(PipelineError::MissingQuery(cfg.mode()));
    }
    let v = load_features(
        &spec.features_path,
        spec.tokens_per_frame,
        spec.sidecar_path.as_deref(),
    )?;
    let q = spec.query_path.as_deref().map(load_query).transpose()?;
    let window_len = cfg.validate_for(&v)?;

    let start = Instant::now();
    let out = compress_features(&v, q.as_ref(), cfg)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let sidecar = Sidecar {
        frames: out.frames(),
        tokens_per_frame: out.tokens_per_frame(),
        dim: out.dim(),
    };
    let rows = out.rows();
    let dim = out.dim();
    write_npy(
        &spec.out_path,
        &ArrayFile::from_f32(vec![rows, dim], out.into_data())?,
    )?;
    let out_sidecar = spec.out_sidecar_path();
    write_sidecar(&out_sidecar, &sidecar)?;

    Ok(JobSummary {
        features: spec.features_path.display().to_string(),
        query: spec.query_path.as_ref().map(|p| p.display().to_string()),
        out: spec.out_path.display().to_string(),
        out_sidecar: out_sidecar.display().to_string(),
        input_shape: [v.frames(), v.tokens_per_frame(), v.dim()],
        output_shape: [sidecar.frames, sidecar.tokens_per_frame, sidecar.dim],
        query_tokens: q.as_ref().map(QueryEmbedding::len),
        mode: cfg.mode().to_string(),
        heads: cfg.heads(),
        target_frames: cfg.target_frames(),
        window_len,
        wall_time_s,
    })
}
