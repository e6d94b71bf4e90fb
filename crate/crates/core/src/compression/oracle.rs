//! Scalar reference path for parity testing.
//!
//! Plain index loops, `f64` from the first read to the final store, no shared
//! helpers with the optimized kernel. Slow on purpose.

#![allow(clippy::needless_range_loop)]

use super::{
    CompressError, CompressionConfig, Mode, PseudoFrames, QueryEmbedding, Result, VideoFeatures,
};

pub fn oracle_compress(
    v: &VideoFeatures,
    q: &QueryEmbedding,
    cfg: &CompressionConfig,
) -> Result<PseudoFrames> {
    let heads = match cfg.mode() {
        Mode::QueryAttention => 1,
        Mode::QueryAttentionMultiHead => cfg.heads(),
        Mode::AveragePool => {
            return Err(CompressError::InvalidConfig(
                "oracle covers the query-attention modes only".into(),
            ))
        }
    };
    let m = v.frames();
    let t = v.tokens_per_frame();
    let d = v.dim();
    if q.dim() != d {
        return Err(CompressError::DimensionMismatch {
            what: "query dim vs feature dim",
            expected: d,
            found: q.dim(),
        });
    }
    let m_out = cfg.target_frames();
    if m_out == 0 || m_out > m || !m.is_multiple_of(m_out) {
        return Err(CompressError::IndivisibleFrames {
            frames: m,
            target: m_out,
        });
    }
    if !d.is_multiple_of(heads) {
        return Err(CompressError::HeadsDontDivide { heads, dim: d });
    }
    let w = m / m_out;
    let n_windows = m_out * t;
    let hd = d / heads;
    let x = v.data();
    let qd = q.data();
    let l = q.len();

    let mut q_bar = vec![0.0f64; d];
    for j in 0..d {
        let mut s = 0.0f64;
        for i in 0..l {
            s += qd[i * d + j] as f64;
        }
        q_bar[j] = s / l as f64;
    }

    let mut out = vec![0.0f32; n_windows * d];
    for i in 0..n_windows {
        for h in 0..heads {
            let lo = h * hd;
            let mut logits = vec![0.0f64; w];
            for k in 0..w {
                let r = i * w + k;
                let mut s = 0.0f64;
                for j in lo..lo + hd {
                    s += q_bar[j] * x[r * d + j] as f64;
                }
                logits[k] = s / (hd as f64).sqrt();
            }
            // log-sum-exp form of the softmax
            let mut mx = logits[0];
            for k in 1..w {
                if logits[k] > mx {
                    mx = logits[k];
                }
            }
            let mut z = 0.0f64;
            for k in 0..w {
                z += (logits[k] - mx).exp();
            }
            let lse = mx + z.ln();
            for j in lo..lo + hd {
                let mut s = 0.0f64;
                for k in 0..w {
                    let r = i * w + k;
                    s += (logits[k] - lse).exp() * x[r * d + j] as f64;
                }
                out[i * d + j] = s as f32;
            }
        }
    }
    Ok(PseudoFrames::from_parts(m_out, t, d, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_instance_two_heads() {
        // d=2, H=2, w=2, one token per frame. Head h sees column h only,
        // scale sqrt(1) = 1.
        let v = VideoFeatures::new(2, 1, 2, vec![0.0, 1.0, 3f32.ln(), 0.0]).unwrap();
        let q = QueryEmbedding::new(1, 2, vec![1.0, 2.0]).unwrap();
        let out = oracle_compress(&v, &q, &CompressionConfig::multi_head(1, 2).unwrap()).unwrap();
        // head 0: logits [0, ln3] -> [1/4, 3/4]; value 3/4·ln3
        // head 1: logits [2, 0] -> [e²/(e²+1), 1/(e²+1)]; value e²/(e²+1)
        let e2 = 2f64.exp();
        let expected = [0.75 * 3f64.ln(), e2 / (e2 + 1.0)];
        for (a, b) in out.data().iter().zip(expected) {
            assert!((*a as f64 - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_average_pool() {
        let v = VideoFeatures::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let q = QueryEmbedding::zeros(1);
        assert!(oracle_compress(&v, &q, &CompressionConfig::average_pool(1).unwrap()).is_err());
    }
}
