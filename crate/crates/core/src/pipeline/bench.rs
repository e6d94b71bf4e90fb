//! Kernel-only timing of [`compress`] over seeded random instances.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use super::{PipelineError, Result};
use crate::compression::{compress, CompressionConfig, QueryEmbedding, VideoFeatures};

const QUERY_TOKENS: usize = 8;

/// One benchmark shape, written `FRAMESxTOKENSxDIM` (e.g. `64x256x4096`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchSize {
    pub frames: usize,
    pub tokens_per_frame: usize,
    pub dim: usize,
}

impl BenchSize {
    pub fn rows(&self) -> usize {
        self.frames * self.tokens_per_frame
    }
}

impl fmt::Display for BenchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.frames, self.tokens_per_frame, self.dim)
    }
}

impl FromStr for BenchSize {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || PipelineError::InvalidInput(format!("size '{s}' is not FRAMESxTOKENSxDIM"));
        let parts: Vec<usize> = s
            .split('x')
            .map(|p| p.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match parts[..] {
            [frames, tokens_per_frame, dim] if frames > 0 && tokens_per_frame > 0 && dim > 0 => {
                Ok(Self {
                    frames,
                    tokens_per_frame,
                    dim,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for BenchSize {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchParams {
    pub sizes: Vec<BenchSize>,
    pub target_frames: usize,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeStats {
    pub size: BenchSize,
    pub rows: usize,
    pub median_s: f64,
    pub p95_s: f64,
    pub min_s: f64,
    pub rows_per_s: f64,
    /// FNV-1a over the generated feature and query bytes.
    pub instance_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub results: Vec<SizeStats>,
    pub repetitions: usize,
    pub target_frames: usize,
    pub seed: u64,
    pub threads: usize,
}

fn fnv1a(words: impl Iterator<Item = f32>, mut hash: u64) -> u64 {
    for x in words {
        for b in x.to_le_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    }
    hash
}

/// Seeded instance for one size; stream `index` keeps sizes independent.
pub(crate) fn bench_instance(
    size: BenchSize,
    seed: u64,
    index: usize,
) -> Result<(VideoFeatures, QueryEmbedding)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let data = (0..size.rows() * size.dim)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    let query = (0..QUERY_TOKENS * size.dim)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    Ok((
        VideoFeatures::new(size.frames, size.tokens_per_frame, size.dim, data)?,
        QueryEmbedding::new(QUERY_TOKENS, size.dim, query)?,
    ))
}

/// Median of a sorted slice (mean of the middle pair for even lengths).
fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Nearest-rank percentile of a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn run_throughput_bench(params: &BenchParams) -> Result<BenchReport> {
    if params.sizes.is_empty() {
        return Err(PipelineError::InvalidInput(
            "at least one size is required".into(),
        ));
    }
    if params.repetitions == 0 {
        return Err(PipelineError::InvalidInput(
            "repetitions must be at least 1".into(),
        ));
    }
    let cfg = CompressionConfig::single_head(params.target_frames)?;
    let mut results = Vec::with_capacity(params.sizes.len());
    for (index, &size) in params.sizes.iter().enumerate() {
        let (v, q) = bench_instance(size, params.seed, index)?;
        cfg.validate_for(&v)?;
        let checksum = fnv1a(
            q.data().iter().copied(),
            fnv1a(v.data().iter().copied(), 0xcbf2_9ce4_8422_2325),
        );

        // warm-up, untimed
        std::hint::black_box(compress(&v, &q, &cfg)?);
        let mut times = Vec::with_capacity(params.repetitions);
        for _ in 0..params.repetitions {
            let start = Instant::now();
            let out = compress(std::hint::black_box(&v), &q, &cfg)?;
            times.push(start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
            std::hint::black_box(out);
        }
        times.sort_by(f64::total_cmp);
        let median_s = median(&times);
        results.push(SizeStats {
            size,
            rows: size.rows(),
            median_s,
            p95_s: percentile(&times, 0.95),
            min_s: times[0],
            rows_per_s: size.rows() as f64 / median_s,
            instance_checksum: format!("{checksum:016x}"),
        });
    }
    Ok(BenchReport {
        results,
        repetitions: params.repetitions,
        target_frames: params.target_frames,
        seed: params.seed,
        threads: rayon::current_num_threads(),
    })
}
