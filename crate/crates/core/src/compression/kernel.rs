use rayon::prelude::*;

use super::{
    check_finite, CompressError, CompressionConfig, Mode, PseudoFrames, QueryEmbedding, Result,
    SentenceQuery, VideoFeatures, WindowWeights,
};

/// Column means of the query embedding, accumulated in `f64`.
pub fn mean_pool_query(q: &QueryEmbedding) -> SentenceQuery {
    let dim = q.dim();
    let mut acc = vec![0.0f64; dim];
    for i in 0..q.len() {
        for (a, &x) in acc.iter_mut().zip(q.row(i)) {
            *a += f64::from(x);
        }
    }
    let inv = q.len() as f64;
    SentenceQuery(acc.into_iter().map(|a| (a / inv) as f32).collect())
}

/// `frames / target`, rejecting anything that does not divide exactly.
pub fn derive_window_length(frames: usize, target: usize) -> Result<usize> {
    if frames == 0 || target == 0 {
        return Err(CompressError::InvalidConfig(format!(
            "frame counts must be positive (frames={frames}, target={target})"
        )));
    }
    if target > frames || !frames.is_multiple_of(target) {
        return Err(CompressError::IndivisibleFrames { frames, target });
    }
    Ok(frames / target)
}

/// A borrowed run of `len` consecutive feature rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    index: usize,
    rows: &'a [f32],
    dim: usize,
}

impl<'a> Window<'a> {
    pub fn new(index: usize, rows: &'a [f32], dim: usize) -> Result<Self> {
        if dim == 0 || rows.is_empty() || !rows.len().is_multiple_of(dim) {
            return Err(CompressError::DimensionMismatch {
                what: "window element count (multiple of dim)",
                expected: dim,
                found: rows.len(),
            });
        }
        Ok(Self { index, rows, dim })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &'a [f32] {
        &self.rows[k * self.dim..(k + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &'a [f32] {
        self.rows
    }
}

/// Cuts the frame-major feature matrix into `rows / w` consecutive windows.
pub fn slice_windows(v: &VideoFeatures, w: usize) -> Result<Vec<Window<'_>>> {
    if w == 0 || !v.frames().is_multiple_of(w) {
        return Err(CompressError::IndivisibleFrames {
            frames: v.frames(),
            target: v.frames().checked_div(w).unwrap_or(0),
        });
    }
    let stride = w * v.dim();
    Ok(v.data()
        .chunks_exact(stride)
        .enumerate()
        .map(|(index, rows)| Window {
            index,
            rows,
            dim: v.dim(),
        })
        .collect())
}

/// Softmax over `q · row[cols] / sqrt(scale_dim)` for each window row, written
/// into `weights`. `logits` is scratch of the same length.
fn softmax_weights(
    q: &[f32],
    window: &[f32],
    dim: usize,
    cols: std::ops::Range<usize>,
    scale_dim: usize,
    logits: &mut [f64],
    weights: &mut [f32],
) {
    let scale = 1.0 / (scale_dim as f64).sqrt();
    let mut max = f64::NEG_INFINITY;
    for (k, logit) in logits.iter_mut().enumerate() {
        let row = &window[k * dim + cols.start..k * dim + cols.end];
        let dot: f64 = q
            .iter()
            .zip(row)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        *logit = dot * scale;
        max = max.max(*logit);
    }
    let mut total = 0.0f64;
    for logit in logits.iter_mut() {
        *logit = (*logit - max).exp();
        total += *logit;
    }
    for (wt, e) in weights.iter_mut().zip(logits.iter()) {
        *wt = (e / total) as f32;
    }
}

/// Attention weights of one window against a (head slice of the) sentence
/// query. `head_dim` is the dimension inside the square-root scaling.
pub fn window_weights(q_bar: &[f32], window: &Window<'_>, head_dim: usize) -> Result<Vec<f32>> {
    if q_bar.len() != window.dim() {
        return Err(CompressError::DimensionMismatch {
            what: "query dim vs window dim",
            expected: window.dim(),
            found: q_bar.len(),
        });
    }
    if head_dim == 0 {
        return Err(CompressError::InvalidConfig(
            "head_dim must be positive".into(),
        ));
    }
    check_finite("sentence query", q_bar)?;
    check_finite("window", window.as_slice())?;
    let w = window.len();
    let mut logits = vec![0.0; w];
    let mut weights = vec![0.0; w];
    softmax_weights(
        q_bar,
        window.as_slice(),
        window.dim(),
        0..window.dim(),
        head_dim,
        &mut logits,
        &mut weights,
    );
    Ok(weights)
}

/// Weighted sum of the window rows, ascending row order, `f64` accumulation.
pub fn compress_window(weights: &[f32], window: &Window<'_>) -> Result<Vec<f32>> {
    if weights.len() != window.len() {
        return Err(CompressError::DimensionMismatch {
            what: "weight count vs window length",
            expected: window.len(),
            found: weights.len(),
        });
    }
    let mut acc = vec![0.0f64; window.dim()];
    for (k, &wk) in weights.iter().enumerate() {
        let wk = f64::from(wk);
        for (a, &x) in acc.iter_mut().zip(window.row(k)) {
            *a += wk * f64::from(x);
        }
    }
    Ok(acc.into_iter().map(|a| a as f32).collect())
}

struct Scratch {
    logits: Vec<f64>,
    weights: Vec<f32>,
    acc: Vec<f64>,
}

impl Scratch {
    fn new(w: usize, dim: usize) -> Self {
        Self {
            logits: vec![0.0; w],
            weights: vec![0.0; w],
            acc: vec![0.0; dim],
        }
    }
}

fn pool_window(
    q_bar: &[f32],
    window: &[f32],
    dim: usize,
    heads: usize,
    s: &mut Scratch,
    out: &mut [f32],
) {
    let head_dim = dim / heads;
    s.acc.fill(0.0);
    for h in 0..heads {
        let cols = h * head_dim..(h + 1) * head_dim;
        softmax_weights(
            &q_bar[cols.clone()],
            window,
            dim,
            cols.clone(),
            head_dim,
            &mut s.logits,
            &mut s.weights,
        );
        for (k, &wk) in s.weights.iter().enumerate() {
            let wk = f64::from(wk);
            let row = &window[k * dim + cols.start..k * dim + cols.end];
            for (a, &x) in s.acc[cols.clone()].iter_mut().zip(row) {
                *a += wk * f64::from(x);
            }
        }
    }
    for (o, &a) in out.iter_mut().zip(&s.acc) {
        *o = a as f32;
    }
}

fn check_query(v: &VideoFeatures, q: &QueryEmbedding) -> Result<()> {
    if q.dim() != v.dim() {
        return Err(CompressError::DimensionMismatch {
            what: "query dim vs feature dim",
            expected: v.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

fn attention_pool(
    v: &VideoFeatures,
    q: &QueryEmbedding,
    target_frames: usize,
    heads: usize,
) -> Result<PseudoFrames> {
    check_query(v, q)?;
    let w = derive_window_length(v.frames(), target_frames)?;
    if !v.dim().is_multiple_of(heads) {
        return Err(CompressError::HeadsDontDivide {
            heads,
            dim: v.dim(),
        });
    }
    let q_bar = mean_pool_query(q);
    let dim = v.dim();
    let mut out = vec![0.0f32; v.rows() / w * dim];
    // Each window owns one output row; the reduction order inside a window
    // never depends on scheduling.
    out.par_chunks_mut(dim)
        .zip(v.data().par_chunks_exact(w * dim))
        .for_each_init(
            || Scratch::new(w, dim),
            |scratch, (row, window)| {
                pool_window(q_bar.as_slice(), window, dim, heads, scratch, row)
            },
        );
    Ok(PseudoFrames::from_parts(
        target_frames,
        v.tokens_per_frame(),
        dim,
        out,
    ))
}

/// Single-head query-attention compression. Multi-head configs are forwarded
/// to [`compress_multihead`].
pub fn compress(
    v: &VideoFeatures,
    q: &QueryEmbedding,
    cfg: &CompressionConfig,
) -> Result<PseudoFrames> {
    match cfg.mode() {
        Mode::QueryAttention => attention_pool(v, q, cfg.target_frames(), 1),
        Mode::QueryAttentionMultiHead => compress_multihead(v, q, cfg),
        Mode::AveragePool => Err(CompressError::InvalidConfig(
            "average pooling takes no query; call avg_pool_compress".into(),
        )),
    }
}

/// Query-attention compression with `cfg.heads()` contiguous dimension slices,
/// each with its own softmax scaled by `sqrt(dim / heads)`.
pub fn compress_multihead(
    v: &VideoFeatures,
    q: &QueryEmbedding,
    cfg: &CompressionConfig,
) -> Result<PseudoFrames> {
    attention_pool(v, q, cfg.target_frames(), cfg.heads())
}

/// Unweighted window mean. Ignores the config's mode and heads.
pub fn avg_pool_compress(v: &VideoFeatures, cfg: &CompressionConfig) -> Result<PseudoFrames> {
    let w = derive_window_length(v.frames(), cfg.target_frames())?;
    let dim = v.dim();
    let mut out = vec![0.0f32; v.rows() / w * dim];
    let inv = w as f64;
    out.par_chunks_mut(dim)
        .zip(v.data().par_chunks_exact(w * dim))
        .for_each_init(
            || vec![0.0f64; dim],
            |acc, (row, window)| {
                acc.fill(0.0);
                for r in window.chunks_exact(dim) {
                    for (a, &x) in acc.iter_mut().zip(r) {
                        *a += f64::from(x);
                    }
                }
                for (o, &a) in row.iter_mut().zip(acc.iter()) {
                    *o = (a / inv) as f32;
                }
            },
        );
    Ok(PseudoFrames::from_parts(
        cfg.target_frames(),
        v.tokens_per_frame(),
        dim,
        out,
    ))
}

/// Every window's softmax weights, one entry per window in output order.
pub fn attention_weights(
    v: &VideoFeatures,
    q: &QueryEmbedding,
    cfg: &CompressionConfig,
) -> Result<Vec<WindowWeights>> {
    check_query(v, q)?;
    let w = cfg.validate_for(v)?;
    let heads = cfg.heads();
    let head_dim = v.dim() / heads;
    let q_bar = mean_pool_query(q);
    let dim = v.dim();
    Ok(v.data()
        .par_chunks_exact(w * dim)
        .enumerate()
        .map(|(window_index, window)| {
            let mut logits = vec![0.0; w];
            let mut per_head = vec![0.0f32; heads * w];
            for (h, weights) in per_head.chunks_exact_mut(w).enumerate() {
                let cols = h * head_dim..(h + 1) * head_dim;
                softmax_weights(
                    &q_bar.as_slice()[cols.clone()],
                    window,
                    dim,
                    cols,
                    head_dim,
                    &mut logits,
                    weights,
                );
            }
            WindowWeights {
                window_index,
                heads,
                window_len: w,
                per_head,
            }
        })
        .collect())
}
