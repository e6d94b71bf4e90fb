//! Query-attention video compression.
//!
//! Densely sampled frame features are compressed into a handful of
//! "pseudo-frames" by softmax-weighted pooling over consecutive windows of
//! feature tokens, with weights driven by the mean text-query embedding.
//!
//! - [`compression`]: the numerical kernel, its ablations and a scalar oracle.
//! - [`tensor_io`]: NPY arrays, JSON reports and frame-layout sidecars.
//! - [`pipeline`]: file jobs, frame sampling, the synthetic retrieval
//!   evaluation and the throughput benchmark.
//! - [`cli`]: the `lvc` command-line tool.

pub mod cli;
pub mod compression;
pub mod pipeline;
pub mod tensor_io;

pub use compression::{
    avg_pool_compress, compress, compress_multihead, oracle_compress, CompressError,
    CompressionConfig, Mode, PseudoFrames, QueryEmbedding, SentenceQuery, VideoFeatures,
    WindowWeights,
};
