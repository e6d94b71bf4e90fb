use lvc::compression::{
    attention_weights, avg_pool_compress, compress, compress_multihead, oracle_compress,
    slice_windows, window_weights, CompressionConfig, QueryEmbedding, VideoFeatures,
};
use proptest::prelude::*;

const TOL: f64 = 1e-6;

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

/// (frames, tokens, dim, target_frames, heads, features, query)
fn instance(
) -> impl Strategy<Value = (usize, usize, usize, usize, usize, Vec<f32>, usize, Vec<f32>)> {
    (
        1usize..=12,
        1usize..=4,
        prop::sample::select(vec![1usize, 2, 4, 6, 8]),
        1usize..=3,
    )
        .prop_flat_map(|(m, t, d, l)| {
            let targets = prop::sample::select(divisors(m));
            let heads = prop::sample::select(divisors(d));
            (
                Just(m),
                Just(t),
                Just(d),
                targets,
                heads,
                prop::collection::vec(-3.0f32..3.0, m * t * d),
                Just(l),
                prop::collection::vec(-3.0f32..3.0, l * d),
            )
        })
}

fn build(
    m: usize,
    t: usize,
    d: usize,
    v: Vec<f32>,
    l: usize,
    q: Vec<f32>,
) -> (VideoFeatures, QueryEmbedding) {
    (
        VideoFeatures::new(m, t, d, v).unwrap(),
        QueryEmbedding::new(l, d, q).unwrap(),
    )
}

proptest! {
    #[test]
    fn weights_are_simplex_points((m, t, d, mp, h, v, l, q) in instance()) {
        let (v, q) = build(m, t, d, v, l, q);
        let cfg = CompressionConfig::multi_head(mp, h).unwrap();
        for ww in attention_weights(&v, &q, &cfg).unwrap() {
            for head in 0..h {
                let row = ww.head(head);
                let s: f64 = row.iter().map(|&x| f64::from(x)).sum();
                prop_assert!((s - 1.0).abs() <= TOL);
                prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }
    }

    #[test]
    fn output_stays_in_window_envelope((m, t, d, mp, h, v, l, q) in instance()) {
        let (v, q) = build(m, t, d, v, l, q);
        let cfg = CompressionConfig::multi_head(mp, h).unwrap();
        let out = compress(&v, &q, &cfg).unwrap();
        let w = m / mp;
        for (i, win) in slice_windows(&v, w).unwrap().iter().enumerate() {
            for j in 0..d {
                let lo = (0..w).map(|k| win.row(k)[j]).fold(f32::INFINITY, f32::min);
                let hi = (0..w).map(|k| win.row(k)[j]).fold(f32::NEG_INFINITY, f32::max);
                let x = out.row(i)[j];
                prop_assert!(f64::from(x) >= f64::from(lo) - TOL && f64::from(x) <= f64::from(hi) + TOL);
            }
        }
    }

    #[test]
    fn permuting_rows_inside_a_window_is_invisible(
        (m, t, d, mp, h, v, l, q) in instance(),
        seed in any::<u64>(),
    ) {
        let (feats, query) = build(m, t, d, v.clone(), l, q);
        let cfg = CompressionConfig::multi_head(mp, h).unwrap();
        let w = m / mp;
        // reverse-rotate each window by a seed-dependent amount
        let mut shuffled = v.clone();
        for (win, chunk) in shuffled.chunks_exact_mut(w * d).enumerate() {
            let rot = ((seed as usize).wrapping_add(win)) % w;
            chunk.rotate_left(rot * d);
            let rows: Vec<Vec<f32>> = chunk.chunks(d).rev().map(<[f32]>::to_vec).collect();
            chunk.copy_from_slice(&rows.concat());
        }
        let permuted = VideoFeatures::new(m, t, d, shuffled).unwrap();
        let a = compress(&feats, &query, &cfg).unwrap();
        let b = compress(&permuted, &query, &cfg).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= TOL);
    }

    #[test]
    fn zero_query_is_average_pooling((m, t, d, mp, _h, v, _l, _q) in instance()) {
        let v = VideoFeatures::new(m, t, d, v).unwrap();
        let cfg = CompressionConfig::single_head(mp).unwrap();
        let a = compress(&v, &QueryEmbedding::zeros(d), &cfg).unwrap();
        let b = avg_pool_compress(&v, &cfg).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= TOL);
    }

    #[test]
    fn window_of_one_is_identity((m, t, d, _mp, h, v, l, q) in instance()) {
        let (v, q) = build(m, t, d, v, l, q);
        let out = compress(&v, &q, &CompressionConfig::multi_head(m, h).unwrap()).unwrap();
        prop_assert_eq!(out.data(), v.data());
    }

    #[test]
    fn one_head_matches_single_head((m, t, d, mp, _h, v, l, q) in instance()) {
        let (v, q) = build(m, t, d, v, l, q);
        let a = compress_multihead(&v, &q, &CompressionConfig::multi_head(mp, 1).unwrap()).unwrap();
        let b = compress(&v, &q, &CompressionConfig::single_head(mp).unwrap()).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= TOL);
    }

    #[test]
    fn matches_oracle((m, t, d, mp, h, v, l, q) in instance()) {
        let (v, q) = build(m, t, d, v, l, q);
        let cfg = CompressionConfig::multi_head(mp, h).unwrap();
        let a = compress(&v, &q, &cfg).unwrap();
        let b = oracle_compress(&v, &q, &cfg).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-5);
    }

    #[test]
    fn sharp_query_selects_the_best_row(
        rows in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 4), 2..8),
        q in prop::collection::vec(-1.0f32..1.0, 4),
    ) {
        let d = 4usize;
        let w = rows.len();
        let flat: Vec<f32> = rows.concat();
        let scale = 1.0 / (d as f64).sqrt();
        let logits: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&q).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum::<f64>() * scale)
            .collect();
        let mut order: Vec<usize> = (0..w).collect();
        order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]));
        prop_assume!(logits[order[0]] - logits[order[1]] >= 0.1);

        let sharp: Vec<f32> = q.iter().map(|x| x * 1e3).collect();
        let v = VideoFeatures::new(w, 1, d, flat).unwrap();
        let win = slice_windows(&v, w).unwrap()[0];
        let wts = window_weights(&sharp, &win, d).unwrap();
        let best = wts.iter().copied().fold(0.0f32, f32::max);
        prop_assert!(f64::from(best) >= 1.0 - 1e-6);
        prop_assert_eq!(wts.iter().position(|&x| x == best), Some(order[0]));

        let query = QueryEmbedding::new(1, d, sharp).unwrap();
        let out = compress(&v, &query, &CompressionConfig::single_head(1).unwrap()).unwrap();
        for (a, b) in out.row(0).iter().zip(&rows[order[0]]) {
            prop_assert!((a - b).abs() <= 1e-3);
        }
    }
}

/// Two heads, d = 2, w = 2, evaluated by hand per head.
#[test]
fn two_head_hand_instance() {
    let v = VideoFeatures::new(2, 1, 2, vec![1.0, -1.0, 2.0, 0.5]).unwrap();
    let q = QueryEmbedding::new(2, 2, vec![0.5, 1.0, 1.5, 3.0]).unwrap(); // mean [1, 2]
    let out = compress_multihead(&v, &q, &CompressionConfig::multi_head(1, 2).unwrap()).unwrap();

    // head 0: column 0 = [1, 2], q=1, scale 1 -> logits [1, 2]
    let (a, b) = (1f64.exp(), 2f64.exp());
    let h0 = (a * 1.0 + b * 2.0) / (a + b);
    // head 1: column 1 = [-1, 0.5], q=2 -> logits [-2, 1]
    let (a, b) = ((-2f64).exp(), 1f64.exp());
    let h1 = (-a + b * 0.5) / (a + b);

    assert!((f64::from(out.data()[0]) - h0).abs() <= 1e-6);
    assert!((f64::from(out.data()[1]) - h1).abs() <= 1e-6);

    let err = compress_multihead(
        &VideoFeatures::new(2, 1, 8, vec![0.0; 16]).unwrap(),
        &QueryEmbedding::zeros(8),
        &CompressionConfig::multi_head(1, 3).unwrap(),
    )
    .unwrap_err();
    assert!(err.to_string().starts_with("HeadsDontDivide"));
}

#[test]
fn average_pool_matches_plain_means() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let (m, t, d, mp) = (64, 4, 8, 16);
    let data: Vec<f32> = (0..m * t * d)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    let v = VideoFeatures::new(m, t, d, data.clone()).unwrap();
    let out = avg_pool_compress(&v, &CompressionConfig::average_pool(mp).unwrap()).unwrap();
    let w = m / mp;
    assert_eq!(out.rows(), mp * t);
    for i in 0..mp * t {
        for j in 0..d {
            let mut s = 0.0f64;
            for k in 0..w {
                s += f64::from(data[(i * w + k) * d + j]);
            }
            assert!((f64::from(out.row(i)[j]) - s / w as f64).abs() <= 1e-7);
        }
    }
}
