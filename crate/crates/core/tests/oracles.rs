//! Library results checked against independent, deliberately naive
//! re-implementations.

use std::collections::BTreeMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempocap_core::corpus::{ClipCorpus, ClipRecord};
use tempocap_core::retrieval::{
    pair_score, rank_items, score_matrix, uniform_windows, DocPart, PairScore, SegmentDoc,
};
use tempocap_core::sampler::{relative_boundaries, similarity_weights};
use tempocap_core::{EmbeddingVector, TimeInterval};

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| uniform(rng) * 2.0 - 1.0).collect();
    v[0] += 0.5;
    v
}

fn naive_cos(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    ab / (aa.sqrt() * bb.sqrt())
}

fn naive_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    if hi <= lo {
        return 0.0;
    }
    (hi - lo) / (a.1.max(b.1) - a.0.min(b.0))
}

#[test]
fn softmax_weights_match_direct_exponentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let n = 3 + trial % 9;
        let clips: Vec<ClipRecord> = (0..n)
            .map(|i| ClipRecord::new(format!("c{i}"), "x", 10.0, random_vec(&mut rng, 6)))
            .collect();
        let raw: Vec<Vec<f64>> = clips
            .iter()
            .map(|c| c.embedding.as_slice().to_vec())
            .collect();
        let corpus = ClipCorpus::new(clips, BTreeMap::new()).unwrap();
        let seed = trial % n;
        let temperature = [1.0, 0.5, 2.0][trial % 3];
        let got = similarity_weights(&corpus, seed, temperature).unwrap();
        let e: Vec<f64> = raw
            .iter()
            .map(|z| (naive_cos(&raw[seed], z) / temperature).exp())
            .collect();
        let total: f64 = e.iter().sum();
        for (g, x) in got.weights().iter().zip(&e) {
            assert!((g - x / total).abs() < 1e-12);
        }
    }
}

#[test]
fn softmax_hand_example() {
    let clips = vec![
        ClipRecord::new("s", "x", 10.0, vec![1.0, 0.0, 0.0]),
        ClipRecord::new("a", "x", 10.0, vec![0.0, 1.0, 0.0]),
        ClipRecord::new("b", "x", 10.0, vec![0.0, 0.0, 1.0]),
    ];
    let corpus = ClipCorpus::new(clips, BTreeMap::new()).unwrap();
    let w = similarity_weights(&corpus, 0, 1.0).unwrap();
    let e = std::f64::consts::E;
    let expected = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
    for (g, x) in w.weights().iter().zip(expected) {
        assert!((g - x).abs() < 1e-12);
    }
    assert!((w.weights()[0] - 0.5761).abs() < 1e-4);
    assert!((w.weights()[1] - 0.2119).abs() < 1e-4);
}

#[test]
fn boundaries_match_prefix_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = 1 + (rng.next_u64() % 7) as usize;
        let lengths: Vec<f64> = (0..n).map(|_| 6.0 + 4.0 * uniform(&mut rng)).collect();
        let total: f64 = lengths.iter().sum();
        let b = relative_boundaries(&lengths).unwrap();
        assert_eq!(b.len(), n + 1);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[n], 1.0);
        for k in 1..n {
            let prefix: f64 = lengths[..k].iter().sum();
            assert!((b[k] - prefix / total).abs() < 1e-12);
            assert!(b[k] > b[k - 1]);
        }
    }
}

type RawParts = Vec<((f64, f64), Vec<f64>)>;

fn random_doc(rng: &mut ChaCha8Rng, id: &str, dim: usize) -> (SegmentDoc, RawParts) {
    let parts = 1 + (rng.next_u64() % 4) as usize;
    let mut cuts: Vec<f64> = (0..parts - 1).map(|_| uniform(rng)).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let raw: Vec<((f64, f64), Vec<f64>)> = cuts
        .windows(2)
        .map(|w| ((w[0], w[1]), random_vec(rng, dim)))
        .collect();
    let doc = SegmentDoc::new(
        id,
        raw.iter()
            .map(|((s, e), v)| DocPart {
                interval: TimeInterval::new(*s, *e).unwrap(),
                vector: EmbeddingVector::new(v.clone()),
            })
            .collect(),
    )
    .unwrap();
    (doc, raw)
}

fn brute_pair(t: &[((f64, f64), Vec<f64>)], a: &[((f64, f64), Vec<f64>)]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (ti, tv) in t {
        for (ai, av) in a {
            let w = naive_iou(*ti, *ai);
            num += w * naive_cos(tv, av);
            den += w;
        }
    }
    (den > 0.0).then(|| num / den)
}

#[test]
fn score_matrix_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let texts: Vec<_> = (0..3)
            .map(|i| random_doc(&mut rng, &format!("t{i}"), 4))
            .collect();
        let audios: Vec<_> = (0..3)
            .map(|i| random_doc(&mut rng, &format!("a{i}"), 4))
            .collect();
        let t_docs: Vec<SegmentDoc> = texts.iter().map(|(d, _)| d.clone()).collect();
        let a_docs: Vec<SegmentDoc> = audios.iter().map(|(d, _)| d.clone()).collect();
        let m = score_matrix(&t_docs, &a_docs).unwrap();
        for (i, (td, traw)) in texts.iter().enumerate() {
            for (j, (ad, araw)) in audios.iter().enumerate() {
                let expected = brute_pair(traw, araw).expect("docs cover [0,1]");
                let got = m.get(i, j).value().unwrap();
                assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
                assert_eq!(pair_score(td, ad).unwrap(), m.get(i, j));
            }
        }
    }
}

#[test]
fn full_span_documents_rank_by_plain_cosine() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let t_raw: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 5)).collect();
        let a_raw: Vec<Vec<f64>> = (0..8).map(|_| random_vec(&mut rng, 5)).collect();
        let full = |id: String, v: &Vec<f64>| {
            SegmentDoc::full_span(id, EmbeddingVector::new(v.clone())).unwrap()
        };
        let texts: Vec<_> = t_raw
            .iter()
            .enumerate()
            .map(|(i, v)| full(format!("t{i}"), v))
            .collect();
        let audios: Vec<_> = a_raw
            .iter()
            .enumerate()
            .map(|(i, v)| full(format!("a{i}"), v))
            .collect();
        let m = score_matrix(&texts, &audios).unwrap();
        for (i, tv) in t_raw.iter().enumerate() {
            let mut expected: Vec<(f64, String)> = a_raw
                .iter()
                .enumerate()
                .map(|(j, av)| (naive_cos(tv, av), format!("a{j}")))
                .collect();
            expected.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
            let ranked = rank_items(&m, &format!("t{i}")).unwrap();
            let got: Vec<&str> = ranked.entries.iter().map(|e| e.item_id.as_str()).collect();
            let want: Vec<&str> = expected.iter().map(|(_, id)| id.as_str()).collect();
            assert_eq!(got, want);
            for (e, (c, _)) in ranked.entries.iter().zip(&expected) {
                assert!((e.score.value().unwrap() - c).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn disjoint_documents_rank_last() {
    let half = |id: &str, s: f64, e: f64, v: Vec<f64>| {
        SegmentDoc::new(
            id,
            vec![DocPart {
                interval: TimeInterval::new(s, e).unwrap(),
                vector: EmbeddingVector::new(v),
            }],
        )
        .unwrap()
    };
    let texts = vec![half("t", 0.0, 0.4, vec![1.0, 0.0])];
    let audios = vec![
        half("a_far", 0.6, 1.0, vec![1.0, 0.0]),
        half("b_near", 0.0, 0.5, vec![-1.0, 0.1]),
    ];
    let m = score_matrix(&texts, &audios).unwrap();
    assert_eq!(m.get(0, 0), PairScore::Irrelevant);
    let r = rank_items(&m, "t").unwrap();
    assert_eq!(r.rank_of("b_near"), Some(1));
    assert_eq!(r.rank_of("a_far"), Some(2));
}

#[test]
fn windows_tile_the_track() {
    for (d, w) in [
        (30.0, 10.0),
        (25.0, 10.0),
        (7.5, 10.0),
        (123.4, 10.0),
        (0.3, 0.1),
        (240.0, 7.0),
    ] {
        let win = uniform_windows(d, w).unwrap();
        assert_eq!(win[0].start(), 0.0);
        assert_eq!(win.last().unwrap().end(), 1.0);
        for pair in win.windows(2) {
            assert_eq!(pair[0].end(), pair[1].start());
        }
        let expected = (d / w - 1e-9_f64).ceil().max(1.0) as usize;
        assert_eq!(win.len(), expected, "{d} / {w}");
    }
}
