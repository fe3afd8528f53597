//! N-gram and alignment metrics over token sequences.

use std::collections::HashMap;

use super::stem::stem;
use super::{MetricError, TokenSequence};

/// Floor for a clipped n-gram count, keeping the log of the geometric mean
/// finite when some order has no matches.
pub const BLEU_EPSILON: f64 = 1e-9;

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_BETA: f64 = 3.0;
pub const METEOR_GAMMA: f64 = 0.5;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// `(clipped matches, total hypothesis n-grams)` for each order `1..=max_n`.
fn clipped_counts(
    hyp: &TokenSequence,
    refs: &[TokenSequence],
    max_n: usize,
) -> Vec<(usize, usize)> {
    (1..=max_n)
        .map(|n| {
            let hyp_counts = ngram_counts(hyp.tokens(), n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngram_counts(r.tokens(), n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            let clipped = hyp_counts
                .iter()
                .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
                .sum();
            (clipped, hyp.len().saturating_sub(n - 1))
        })
        .collect()
}

/// Reference length closest to `c`; ties go to the shorter reference.
fn closest_ref_len(c: usize, refs: &[TokenSequence]) -> usize {
    refs.iter()
        .map(|r| r.len())
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

fn combine(counts: &[(usize, usize)], c: usize, r: usize) -> f64 {
    if c == 0 {
        return 0.0;
    }
    let log_sum: f64 = counts
        .iter()
        .map(|&(m, t)| {
            let p = if t == 0 {
                BLEU_EPSILON
            } else {
                (m as f64).max(BLEU_EPSILON) / t as f64
            };
            p.ln()
        })
        .sum();
    let geo = (log_sum / counts.len() as f64).exp();
    let bp = (1.0 - r as f64 / c as f64).min(0.0).exp();
    (geo * bp).clamp(0.0, 1.0)
}

/// Sentence-level BLEU-`max_n`. An empty hypothesis scores 0.
pub fn bleu(hyp: &TokenSequence, refs: &[TokenSequence], max_n: usize) -> Result<f64, MetricError> {
    if max_n == 0 {
        return Err(MetricError::BadOrder);
    }
    if refs.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let counts = clipped_counts(hyp, refs, max_n);
    Ok(combine(
        &counts,
        hyp.len(),
        closest_ref_len(hyp.len(), refs),
    ))
}

/// Corpus-level BLEU: clipped counts, hypothesis lengths and closest
/// reference lengths are pooled over all items before combining.
pub fn corpus_bleu(
    items: &[(TokenSequence, Vec<TokenSequence>)],
    max_n: usize,
) -> Result<f64, MetricError> {
    if max_n == 0 {
        return Err(MetricError::BadOrder);
    }
    if items.is_empty() {
        return Err(MetricError::NoItems);
    }
    let mut pooled = vec![(0usize, 0usize); max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (hyp, refs) in items {
        if refs.is_empty() {
            return Err(MetricError::NoReferences);
        }
        for (acc, (m, t)) in pooled.iter_mut().zip(clipped_counts(hyp, refs, max_n)) {
            acc.0 += m;
            acc.1 += t;
        }
        c += hyp.len();
        r += closest_ref_len(hyp.len(), refs);
    }
    Ok(combine(&pooled, c, r))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1.
pub fn rouge_l(hyp: &TokenSequence, reference: &TokenSequence) -> f64 {
    let lcs = lcs_len(hyp.tokens(), reference.tokens());
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Aligns hypothesis tokens to reference tokens in two stages: exact
/// forms, then stems among the still-unmatched tokens. Each stage walks
/// the hypothesis left to right and takes the leftmost free reference
/// token that matches. Returns `(hyp index, ref index)` sorted by
/// hypothesis index.
fn align(hyp: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut hyp_used = vec![false; hyp.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    let hyp_stems: Vec<String> = hyp.iter().map(|t| stem(t)).collect();
    let ref_stems: Vec<String> = reference.iter().map(|t| stem(t)).collect();
    for (stage, targets) in [(hyp, reference), (&hyp_stems[..], &ref_stems[..])] {
        for (i, tok) in stage.iter().enumerate() {
            if hyp_used[i] {
                continue;
            }
            if let Some(j) = (0..targets.len()).find(|&j| !ref_used[j] && targets[j] == *tok) {
                hyp_used[i] = true;
                ref_used[j] = true;
                pairs.push((i, j));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Number of runs of matches that are adjacent in both sequences.
fn chunks(alignment: &[(usize, usize)]) -> usize {
    alignment
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
        + usize::from(!alignment.is_empty())
}

/// METEOR with exact and stem matching only.
pub fn meteor_lite(hyp: &TokenSequence, reference: &TokenSequence) -> f64 {
    let alignment = align(hyp.tokens(), reference.tokens());
    let m = alignment.len();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
    let frag = chunks(&alignment) as f64 / m as f64;
    let penalty = METEOR_GAMMA * frag.powf(METEOR_BETA);
    (f_mean * (1.0 - penalty)).clamp(0.0, 1.0)
}
