//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 I/O
//! failure. Standard output only ever carries JSON.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::compression::{CompressionConfig, Mode};
use crate::pipeline::{
    run_compression_job, run_synthetic_retrieval_eval, run_throughput_bench, sample_frame_indices,
    BenchParams, BenchSize, JobSpec, PipelineError, SynthEvalParams,
};
use crate::tensor_io::{report_to_string, write_report, IoError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "LVC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "lvc",
    version,
    about = "Query-attention compression of dense video frame features into pseudo-frames",
    after_help = "Set LVC_THREADS to a positive integer to cap worker threads."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress a feature array into pseudo-frames.
    Compress(CompressArgs),
    /// Print center-uniform frame indices as a JSON array.
    SampleIndices(SampleArgs),
    /// Planted-signal retrieval evaluation: query attention vs average pooling.
    SynthEval(SynthEvalArgs),
    /// Time the compression kernel over random instances.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Single-head query attention
    QueryAttn,
    /// Multi-head query attention (see --heads)
    QueryAttnMh,
    /// Unweighted window mean; no query needed
    AvgPool,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::QueryAttn => Mode::QueryAttention,
            ModeArg::QueryAttnMh => Mode::QueryAttentionMultiHead,
            ModeArg::AvgPool => Mode::AveragePool,
        }
    }
}

#[derive(Debug, Args)]
struct CompressArgs {
    /// Features NPY: (frames*tokens, dim) or (frames, tokens, dim), float32/float64
    #[arg(long, value_name = "PATH")]
    features: PathBuf,
    /// Query embedding NPY: (len, dim) or (dim,). Required unless --mode avg-pool
    #[arg(long, value_name = "PATH")]
    query: Option<PathBuf>,
    /// Tokens per frame in the features array
    #[arg(long, value_name = "INT")]
    tokens_per_frame: usize,
    /// Number of pseudo-frames to produce; must divide the frame count
    #[arg(long, value_name = "INT")]
    pseudo_frames: usize,
    /// Attention heads (query-attn-mh only); must divide the feature dim
    #[arg(long, value_name = "INT", default_value_t = 1)]
    heads: usize,
    /// Pooling mode
    #[arg(long, value_enum, default_value = "query-attn")]
    mode: ModeArg,
    /// Output NPY path; the output sidecar goes next to it with a .json extension
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// JSON sidecar describing the features' frame layout, checked on load
    #[arg(long, value_name = "PATH")]
    sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Frames available in the source video
    #[arg(long, value_name = "INT")]
    total: usize,
    /// Frames to sample
    #[arg(long, value_name = "INT")]
    frames: usize,
}

#[derive(Debug, Args)]
struct SynthEvalArgs {
    /// Number of trials
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Frames per instance
    #[arg(long, default_value_t = 64)]
    frames: usize,
    /// Tokens per frame
    #[arg(long, default_value_t = 4)]
    tokens_per_frame: usize,
    /// Feature dimension
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Pseudo-frames (window length = frames / pseudo-frames)
    #[arg(long, default_value_t = 4)]
    pseudo_frames: usize,
    /// Gaussian noise added to the planted row before renormalizing
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report JSON to this path
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated sizes as FRAMESxTOKENSxDIM
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "64x64x1024,64x256x1024,64x64x4096"
    )]
    sizes: Vec<String>,
    /// Pseudo-frames per instance
    #[arg(long, default_value_t = 16)]
    pseudo_frames: usize,
    /// Timed repetitions per size (one extra warm-up run is not timed)
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// RNG seed for instance data
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report JSON to this path
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Pipeline(PipelineError),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Pipeline(e.into())
    }
}

fn exit_code(e: &PipelineError) -> i32 {
    match e {
        PipelineError::MissingQuery(_) => EXIT_USAGE,
        PipelineError::Io(io) if io.is_os_failure() => EXIT_IO,
        _ => EXIT_DATA,
    }
}

fn print_json<T: serde::Serialize + ?Sized>(value: &T) -> Result<(), Failure> {
    println!("{}", report_to_string(value)?);
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let n = raw
        .to_str()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Failure::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {raw:?}"
            ))
        })?;
    // A global pool may already exist when called twice in one process; the
    // first configuration wins.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn cmd_compress(a: CompressArgs) -> Result<(), Failure> {
    let config = CompressionConfig::new(a.pseudo_frames, a.heads, a.mode.into())
        .map_err(PipelineError::from)?;
    let summary = run_compression_job(&JobSpec {
        features_path: a.features,
        query_path: a.query,
        sidecar_path: a.sidecar,
        tokens_per_frame: a.tokens_per_frame,
        config,
        out_path: a.out,
    })?;
    print_json(&summary)
}

fn cmd_sample_indices(a: SampleArgs) -> Result<(), Failure> {
    let plan = sample_frame_indices(a.total, a.frames)?;
    print_json(&plan.indices)
}

fn cmd_synth_eval(a: SynthEvalArgs) -> Result<(), Failure> {
    let report = run_synthetic_retrieval_eval(&SynthEvalParams {
        trials: a.trials,
        frames: a.frames,
        tokens_per_frame: a.tokens_per_frame,
        dim: a.dim,
        target_frames: a.pseudo_frames,
        noise_sigma: a.noise_sigma,
        seed: a.seed,
    })?;
    if let Some(path) = &a.report {
        write_report(path, &report)?;
    }
    print_json(&report)
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let sizes = a
        .sizes
        .iter()
        .map(|s| s.parse::<BenchSize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let report = run_throughput_bench(&BenchParams {
        sizes,
        target_frames: a.pseudo_frames,
        repetitions: a.reps,
        seed: a.seed,
    })?;
    if let Some(path) = &a.report {
        write_report(path, &report)?;
    }
    print_json(&report)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Compress(a) => cmd_compress(a),
        Command::SampleIndices(a) => cmd_sample_indices(a),
        Command::SynthEval(a) => cmd_synth_eval(a),
        Command::Bench(a) => cmd_bench(a),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_code_classes() {
        use crate::compression::CompressError;
        assert_eq!(
            exit_code(&PipelineError::MissingQuery(Mode::QueryAttention)),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code(&PipelineError::Compress(CompressError::IndivisibleFrames {
                frames: 64,
                target: 7
            })),
            EXIT_DATA
        );
        assert_eq!(exit_code(&PipelineError::Io(IoError::BadMagic)), EXIT_DATA);
        let os = IoError::Io(std::io::Error::from(std::io::ErrorKind::NotFound));
        assert_eq!(exit_code(&PipelineError::Io(os)), EXIT_IO);
    }
}
