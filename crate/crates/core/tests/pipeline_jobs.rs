use lvc::compression::{CompressionConfig, Mode};
use lvc::pipeline::{run_compression_job, JobSpec, PipelineError};
use lvc::tensor_io::{read_npy, read_sidecar, write_npy, ArrayData, ArrayFile, Sidecar};

fn spec(dir: &std::path::Path, query: bool, mode: Mode, heads: usize) -> JobSpec {
    JobSpec {
        features_path: dir.join("f.npy"),
        query_path: query.then(|| dir.join("q.npy")),
        sidecar_path: None,
        tokens_per_frame: 4,
        config: CompressionConfig::new(16, heads, mode).unwrap(),
        out_path: dir.join("out.npy"),
    }
}

fn setup(dir: &std::path::Path, shape: Vec<usize>) {
    let n: usize = shape.iter().product();
    let feats: Vec<f64> = (0..n).map(|i| (i as f64 * 0.731).sin()).collect();
    write_npy(
        dir.join("f.npy"),
        &ArrayFile::new(shape, ArrayData::F64(feats)).unwrap(),
    )
    .unwrap();
    let q: Vec<f32> = (0..8).map(|i| (i as f32 * 1.3).cos()).collect();
    write_npy(dir.join("q.npy"), &ArrayFile::from_f32(vec![8], q).unwrap()).unwrap();
}

#[test]
fn job_writes_pseudo_frames_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), vec![256, 8]);
    let summary = run_compression_job(&spec(dir.path(), true, Mode::QueryAttention, 1)).unwrap();
    assert_eq!(summary.input_shape, [64, 4, 8]);
    assert_eq!(summary.output_shape, [16, 4, 8]);
    assert_eq!(summary.window_len, 4);
    assert_eq!(summary.query_tokens, Some(1));
    assert_eq!(
        read_npy(dir.path().join("out.npy")).unwrap().shape(),
        &[64, 8]
    );
    assert_eq!(
        read_sidecar(dir.path().join("out.json")).unwrap(),
        Sidecar {
            frames: 16,
            tokens_per_frame: 4,
            dim: 8
        }
    );
}

#[test]
fn three_axis_features_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), vec![64, 4, 8]);
    let summary =
        run_compression_job(&spec(dir.path(), true, Mode::QueryAttentionMultiHead, 2)).unwrap();
    assert_eq!(summary.heads, 2);

    let mut bad = spec(dir.path(), true, Mode::QueryAttention, 1);
    bad.tokens_per_frame = 2;
    assert!(matches!(
        run_compression_job(&bad),
        Err(PipelineError::InvalidInput(_))
    ));
}

#[test]
fn average_pool_needs_no_query() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), vec![256, 8]);
    let summary = run_compression_job(&spec(dir.path(), false, Mode::AveragePool, 1)).unwrap();
    assert_eq!(summary.mode, "avg-pool");
    assert_eq!(summary.query, None);
}

#[test]
fn attention_without_query_is_missing_query() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), vec![256, 8]);
    let err = run_compression_job(&spec(dir.path(), false, Mode::QueryAttention, 1)).unwrap_err();
    assert!(matches!(
        err,
        PipelineError::MissingQuery(Mode::QueryAttention)
    ));
}
