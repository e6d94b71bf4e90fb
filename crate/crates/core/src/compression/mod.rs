//! Query-conditioned window pooling of dense frame features.
//!
//! Features for `M` sampled frames of `t` tokens each are stored as a
//! frame-major `(M·t) × d` matrix. The matrix is cut into consecutive windows
//! of `w = M / M'` rows; every window collapses to one output row through a
//! softmax over `q̄ · row / sqrt(d)`, where `q̄` is the token-mean of the query
//! embedding. The `M'·t` output rows have the shape of `M'` real frames
//! ("pseudo-frames").

mod kernel;
pub mod oracle;

use thiserror::Error;

pub use kernel::{
    attention_weights, avg_pool_compress, compress, compress_multihead, compress_window,
    derive_window_length, mean_pool_query, slice_windows, window_weights, Window,
};
pub use oracle::oracle_compress;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompressError {
    #[error(
        "EmptyQuery: query embedding has no rows; use average pooling for query-free compression"
    )]
    EmptyQuery,
    #[error("NonFiniteInput: {what} element {index} is {value}")]
    NonFiniteInput {
        what: &'static str,
        index: usize,
        value: f32,
    },
    #[error("IndivisibleFrames: {frames} frames cannot be split into {target} pseudo-frames")]
    IndivisibleFrames { frames: usize, target: usize },
    #[error("DimensionMismatch: {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("HeadsDontDivide: {heads} heads do not divide feature dimension {dim}")]
    HeadsDontDivide { heads: usize, dim: usize },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = CompressError> = std::result::Result<T, E>;

fn check_finite(what: &'static str, data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(CompressError::NonFiniteInput {
            what,
            index,
            value: data[index],
        }),
        None => Ok(()),
    }
}

fn check_positive(what: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(CompressError::InvalidConfig(format!(
            "{what} must be positive"
        )));
    }
    Ok(())
}

/// Dense sampled-frame features: `frames · tokens_per_frame` rows of `dim`
/// values, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    frames: usize,
    tokens_per_frame: usize,
    dim: usize,
    data: Vec<f32>,
}

impl VideoFeatures {
    pub fn new(frames: usize, tokens_per_frame: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        check_positive("frames", frames)?;
        check_positive("tokens_per_frame", tokens_per_frame)?;
        check_positive("dim", dim)?;
        let expected = frames * tokens_per_frame * dim;
        if data.len() != expected {
            return Err(CompressError::DimensionMismatch {
                what: "video feature element count",
                expected,
                found: data.len(),
            });
        }
        check_finite("video feature", &data)?;
        Ok(Self {
            frames,
            tokens_per_frame,
            dim,
            data,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.tokens_per_frame
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.frames * self.tokens_per_frame
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// Per-token query features, `len × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmbedding {
    len: usize,
    dim: usize,
    data: Vec<f32>,
}

impl QueryEmbedding {
    pub fn new(len: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if len == 0 {
            return Err(CompressError::EmptyQuery);
        }
        check_positive("query dim", dim)?;
        if data.len() != len * dim {
            return Err(CompressError::DimensionMismatch {
                what: "query element count",
                expected: len * dim,
                found: data.len(),
            });
        }
        check_finite("query", &data)?;
        Ok(Self { len, dim, data })
    }

    /// All-zero query of a single token. Under attention pooling it reduces to
    /// plain averaging.
    pub fn zeros(dim: usize) -> Self {
        Self {
            len: 1,
            dim,
            data: vec![0.0; dim],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }
}

/// Token-mean of a [`QueryEmbedding`].
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceQuery(Vec<f32>);

impl SentenceQuery {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        check_finite("sentence query", &data)?;
        Ok(Self(data))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Single-head query attention.
    QueryAttention,
    /// Query attention with the feature dimension split across heads.
    QueryAttentionMultiHead,
    /// Query-free ablation: unweighted window mean.
    AveragePool,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::QueryAttention => "query-attn",
            Mode::QueryAttentionMultiHead => "query-attn-mh",
            Mode::AveragePool => "avg-pool",
        }
    }

    pub fn requires_query(self) -> bool {
        self != Mode::AveragePool
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = CompressError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "query-attn" => Ok(Mode::QueryAttention),
            "query-attn-mh" => Ok(Mode::QueryAttentionMultiHead),
            "avg-pool" => Ok(Mode::AveragePool),
            other => Err(CompressError::InvalidConfig(format!(
                "unknown mode '{other}'"
            ))),
        }
    }
}

/// Target pseudo-frame count, head count and pooling mode.
///
/// The window length depends on the input frame count and is resolved with
/// [`CompressionConfig::window_len`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressionConfig {
    target_frames: usize,
    heads: usize,
    mode: Mode,
}

impl CompressionConfig {
    pub fn new(target_frames: usize, heads: usize, mode: Mode) -> Result<Self> {
        check_positive("target_frames", target_frames)?;
        check_positive("heads", heads)?;
        if heads != 1 && mode != Mode::QueryAttentionMultiHead {
            return Err(CompressError::InvalidConfig(format!(
                "{heads} heads requested but mode {mode} is single-head"
            )));
        }
        Ok(Self {
            target_frames,
            heads,
            mode,
        })
    }

    pub fn single_head(target_frames: usize) -> Result<Self> {
        Self::new(target_frames, 1, Mode::QueryAttention)
    }

    pub fn multi_head(target_frames: usize, heads: usize) -> Result<Self> {
        Self::new(target_frames, heads, Mode::QueryAttentionMultiHead)
    }

    pub fn average_pool(target_frames: usize) -> Result<Self> {
        Self::new(target_frames, 1, Mode::AveragePool)
    }

    pub fn target_frames(&self) -> usize {
        self.target_frames
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn window_len(&self, frames: usize) -> Result<usize> {
        derive_window_length(frames, self.target_frames)
    }

    /// Checks the config against a concrete input and returns the window length.
    pub fn validate_for(&self, v: &VideoFeatures) -> Result<usize> {
        let w = self.window_len(v.frames())?;
        if !v.dim().is_multiple_of(self.heads) {
            return Err(CompressError::HeadsDontDivide {
                heads: self.heads,
                dim: v.dim(),
            });
        }
        Ok(w)
    }
}

/// Softmax weights of one window, `heads × w`, row-major by head.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowWeights {
    pub window_index: usize,
    pub heads: usize,
    pub window_len: usize,
    pub per_head: Vec<f32>,
}

impl WindowWeights {
    pub fn head(&self, h: usize) -> &[f32] {
        &self.per_head[h * self.window_len..(h + 1) * self.window_len]
    }
}

/// Compressed output: `frames · tokens_per_frame` rows, same layout as
/// [`VideoFeatures`].
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoFrames {
    frames: usize,
    tokens_per_frame: usize,
    dim: usize,
    data: Vec<f32>,
}

impl PseudoFrames {
    pub(crate) fn from_parts(
        frames: usize,
        tokens_per_frame: usize,
        dim: usize,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), frames * tokens_per_frame * dim);
        Self {
            frames,
            tokens_per_frame,
            dim,
            data,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn tokens_per_frame(&self) -> usize {
        self.tokens_per_frame
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.frames * self.tokens_per_frame
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Largest element-wise absolute difference; `None` on shape mismatch.
    pub fn max_abs_diff(&self, other: &PseudoFrames) -> Option<f64> {
        if self.rows() != other.rows() || self.dim != other.dim {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (f64::from(*a) - f64::from(*b)).abs())
                .fold(0.0, f64::max),
        )
    }
}
