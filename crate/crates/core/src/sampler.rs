//! Synthetic full-song composition.
//!
//! A seed clip defines a softmax distribution over the corpus,
//! `P(j) ∝ exp(cos(z_seed, z_j) / temperature)`. A composition draws
//! `n ~ U{3,4,5}` distinct member clips from that distribution (sequential
//! draws, renormalized after each pick), gives each a length
//! `l ~ U(6 s, 10 s)`, and turns the lengths into relative boundaries.
//!
//! All randomness comes from [`ComposeRng`] (ChaCha8, seeded from a `u64`
//! via `SeedableRng::seed_from_u64`). Per composition the draw order is:
//! one integer for `n`, one float per member pick, one float per length.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ClipCorpus;
use crate::embedding::cosine_unchecked;

/// The generator behind every composition run.
pub type ComposeRng = rand_chacha::ChaCha8Rng;

pub fn compose_rng(seed: u64) -> ComposeRng {
    ComposeRng::seed_from_u64(seed)
}

pub const MIN_MEMBERS: usize = 3;
pub const MAX_MEMBERS: usize = 5;
pub const MIN_LENGTH_S: f64 = 6.0;
pub const MAX_LENGTH_S: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("seed index {index} out of range for corpus of {len} clips")]
    SeedOutOfRange { index: usize, len: usize },
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
    #[error("corpus has {0} clips; composition needs at least 3")]
    CorpusTooSmall(usize),
    #[error("lengths must be non-empty")]
    EmptyLengths,
    #[error("length {value} at position {index} is not positive and finite")]
    BadLength { index: usize, value: f64 },
    #[error("unknown clip id {0:?}")]
    UnknownClip(String),
    #[error("template entries are not contiguous over [0, 1]: {0}")]
    BadTemplate(String),
}

/// Unit-interval float from the top 53 bits of one `u64` draw, in `[0, 1)`.
#[inline]
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..n` by rejection (no modulo bias).
pub fn uniform_below(rng: &mut impl RngCore, n: u64) -> u64 {
    assert!(n > 0);
    let zone = u64::MAX - (u64::MAX % n + 1) % n;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return x % n;
        }
    }
}

/// Normalized importance weights aligned to corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Softmax of the seed's cosine similarities to every clip (itself
/// included), divided by `temperature`. A temperature of 1 is the plain
/// `exp(cos)` weighting.
pub fn similarity_weights(
    corpus: &ClipCorpus,
    seed_index: usize,
    temperature: f64,
) -> Result<ProbabilityVector, SamplerError> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(SamplerError::BadTemperature(temperature));
    }
    let clips = corpus.clips();
    let seed = clips.get(seed_index).ok_or(SamplerError::SeedOutOfRange {
        index: seed_index,
        len: clips.len(),
    })?;
    let logits: Vec<f64> = clips
        .iter()
        .map(|c| cosine_unchecked(&seed.embedding, &c.embedding) / temperature)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(ProbabilityVector(weights))
}

/// `[0, l1/L, (l1+l2)/L, …, 1]` for `L = Σ l`. The last entry is exactly 1.
pub fn relative_boundaries(lengths: &[f64]) -> Result<Vec<f64>, SamplerError> {
    if lengths.is_empty() {
        return Err(SamplerError::EmptyLengths);
    }
    if let Some((index, &value)) = lengths
        .iter()
        .enumerate()
        .find(|(_, l)| !(l.is_finite() && **l > 0.0))
    {
        return Err(SamplerError::BadLength { index, value });
    }
    let total: f64 = lengths.iter().sum();
    let mut out = Vec::with_capacity(lengths.len() + 1);
    out.push(0.0);
    let mut cumulative = 0.0;
    for l in &lengths[..lengths.len() - 1] {
        cumulative += l;
        out.push(cumulative / total);
    }
    out.push(1.0);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMember {
    pub id: String,
    pub length_s: f64,
}

/// One synthetic song: member clips in play order, their lengths, and the
/// relative boundaries between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionPlan {
    pub seed_id: String,
    pub members: Vec<PlanMember>,
    pub boundaries: Vec<f64>,
}

impl CompositionPlan {
    pub fn lengths(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.length_s).collect()
    }

    pub fn total_length_s(&self) -> f64 {
        self.members.iter().map(|m| m.length_s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub temperature: f64,
    /// Put the seed clip first and draw the remaining members around it.
    pub force_include_seed: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            force_include_seed: false,
        }
    }
}

/// Samples one composition around `corpus[seed_index]` with the default
/// configuration.
pub fn sample_composition(
    corpus: &ClipCorpus,
    seed_index: usize,
    rng: &mut impl RngCore,
) -> Result<CompositionPlan, SamplerError> {
    sample_composition_with(corpus, seed_index, &SamplerConfig::default(), rng)
}

pub fn sample_composition_with(
    corpus: &ClipCorpus,
    seed_index: usize,
    config: &SamplerConfig,
    rng: &mut impl RngCore,
) -> Result<CompositionPlan, SamplerError> {
    if corpus.len() < MIN_MEMBERS {
        return Err(SamplerError::CorpusTooSmall(corpus.len()));
    }
    let weights = similarity_weights(corpus, seed_index, config.temperature)?;
    Ok(draw_plan(corpus, seed_index, &weights, config, rng))
}

fn draw_plan(
    corpus: &ClipCorpus,
    seed_index: usize,
    weights: &ProbabilityVector,
    config: &SamplerConfig,
    rng: &mut impl RngCore,
) -> CompositionPlan {
    let span = (MAX_MEMBERS - MIN_MEMBERS + 1) as u64;
    let n = (MIN_MEMBERS + uniform_below(rng, span) as usize).min(corpus.len());

    let mut remaining = weights.0.clone();
    let mut picks = Vec::with_capacity(n);
    if config.force_include_seed {
        picks.push(seed_index);
        remaining[seed_index] = 0.0;
    }
    while picks.len() < n {
        let pick = draw_without_replacement(&mut remaining, rng);
        picks.push(pick);
    }

    let clips = corpus.clips();
    let members: Vec<PlanMember> = picks
        .into_iter()
        .map(|i| PlanMember {
            id: clips[i].id.clone(),
            length_s: MIN_LENGTH_S + (MAX_LENGTH_S - MIN_LENGTH_S) * unit_f64(rng),
        })
        .collect();
    let lengths: Vec<f64> = members.iter().map(|m| m.length_s).collect();
    let boundaries = relative_boundaries(&lengths).expect("sampled lengths are positive");
    CompositionPlan {
        seed_id: clips[seed_index].id.clone(),
        members,
        boundaries,
    }
}

/// Picks an index proportionally to `remaining` and zeroes it.
fn draw_without_replacement(remaining: &mut [f64], rng: &mut impl RngCore) -> usize {
    let total: f64 = remaining.iter().sum();
    let target = unit_f64(rng) * total;
    let mut cumulative = 0.0;
    let mut last_live = None;
    for (i, &w) in remaining.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        cumulative += w;
        last_live = Some(i);
        if target < cumulative {
            remaining[i] = 0.0;
            return i;
        }
    }
    // Rounding can leave `target` at or past the final cumulative sum.
    let i = last_live.expect("at least one clip left to draw");
    remaining[i] = 0.0;
    i
}

/// Generates `count` compositions, cycling seeds through the corpus in
/// order (seed `k % N` for the k-th plan) with one shared generator.
///
/// Importance weights are computed in parallel per block of seeds; draws
/// stay sequential, so the output depends only on the inputs and `rng`.
pub fn generate_compositions(
    corpus: &ClipCorpus,
    count: usize,
    config: &SamplerConfig,
    rng: &mut impl RngCore,
) -> Result<Vec<CompositionPlan>, SamplerError> {
    const BLOCK: usize = 256;
    if corpus.len() < MIN_MEMBERS {
        return Err(SamplerError::CorpusTooSmall(corpus.len()));
    }
    if !(config.temperature.is_finite() && config.temperature > 0.0) {
        return Err(SamplerError::BadTemperature(config.temperature));
    }
    let mut plans = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let end = (start + BLOCK).min(count);
        let weights: Vec<ProbabilityVector> = (start..end)
            .into_par_iter()
            .map(|k| similarity_weights(corpus, k % corpus.len(), config.temperature))
            .collect::<Result<_, _>>()?;
        for (k, w) in (start..end).zip(&weights) {
            plans.push(draw_plan(corpus, k % corpus.len(), w, config, rng));
        }
        start = end;
    }
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub start: f64,
    pub end: f64,
    pub caption: String,
}

/// Member captions laid out on the relative time axis: contiguous entries
/// covering exactly `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TemplateEntry>", into = "Vec<TemplateEntry>")]
pub struct TemplatedCaption {
    entries: Vec<TemplateEntry>,
}

impl TryFrom<Vec<TemplateEntry>> for TemplatedCaption {
    type Error = SamplerError;

    fn try_from(entries: Vec<TemplateEntry>) -> Result<Self, Self::Error> {
        Self::new(entries)
    }
}

impl From<TemplatedCaption> for Vec<TemplateEntry> {
    fn from(t: TemplatedCaption) -> Self {
        t.entries
    }
}

impl TemplatedCaption {
    pub fn new(entries: Vec<TemplateEntry>) -> Result<Self, SamplerError> {
        let bad = |msg: String| Err(SamplerError::BadTemplate(msg));
        let (Some(first), Some(last)) = (entries.first(), entries.last()) else {
            return bad("no entries".into());
        };
        if first.start != 0.0 {
            return bad(format!("first entry starts at {}", first.start));
        }
        if last.end != 1.0 {
            return bad(format!("last entry ends at {}", last.end));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.start.partial_cmp(&e.end) != Some(std::cmp::Ordering::Less) {
                return bad(format!("entry {i} has start {} >= end {}", e.start, e.end));
            }
            if e.caption.trim().is_empty() {
                return bad(format!("entry {i} has an empty caption"));
            }
        }
        for (i, pair) in entries.windows(2).enumerate() {
            if pair[0].end != pair[1].start {
                return bad(format!(
                    "entry {i} ends at {} but entry {} starts at {}",
                    pair[0].end,
                    i + 1,
                    pair[1].start
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TemplateEntry] {
        &self.entries
    }
}

/// Pairs each member's caption with its relative span.
pub fn render_template(
    plan: &CompositionPlan,
    corpus: &ClipCorpus,
) -> Result<TemplatedCaption, SamplerError> {
    if plan.boundaries.len() != plan.members.len() + 1 {
        return Err(SamplerError::BadTemplate(format!(
            "{} members but {} boundaries",
            plan.members.len(),
            plan.boundaries.len()
        )));
    }
    let entries = plan
        .members
        .iter()
        .zip(plan.boundaries.windows(2))
        .map(|(m, b)| {
            let clip = corpus
                .get(&m.id)
                .ok_or_else(|| SamplerError::UnknownClip(m.id.clone()))?;
            Ok(TemplateEntry {
                start: b[0],
                end: b[1],
                caption: clip.caption.clone(),
            })
        })
        .collect::<Result<Vec<_>, SamplerError>>()?;
    TemplatedCaption::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ClipRecord;
    use std::collections::BTreeMap;

    fn corpus(embeddings: Vec<Vec<f64>>) -> ClipCorpus {
        let clips = embeddings
            .into_iter()
            .enumerate()
            .map(|(i, e)| ClipRecord::new(format!("c{i}"), format!("caption {i}"), 10.0, e))
            .collect();
        ClipCorpus::new(clips, BTreeMap::new()).unwrap()
    }

    fn ten_clips() -> ClipCorpus {
        corpus(
            (0..10)
                .map(|i| {
                    let t = i as f64 * 0.4;
                    vec![t.cos(), t.sin(), 0.3]
                })
                .collect(),
        )
    }

    #[test]
    fn identical_embeddings_give_uniform_weights() {
        let c = corpus(vec![vec![0.3, 0.4]; 4]);
        let w = similarity_weights(&c, 2, 1.0).unwrap();
        assert_eq!(w.weights(), &[0.25; 4]);
    }

    #[test]
    fn softmax_of_known_cosines() {
        // cosines to seed: [1, 0, 0]
        let c = corpus(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]);
        let w = similarity_weights(&c, 0, 1.0).unwrap();
        let e = std::f64::consts::E;
        let expected = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
        for (a, b) in w.weights().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((w.weights()[0] - 0.5761).abs() < 1e-4);
        assert!((w.weights()[1] - 0.2119).abs() < 1e-4);
    }

    #[test]
    fn high_temperature_is_uniform() {
        let c = ten_clips();
        let w = similarity_weights(&c, 3, 1e6).unwrap();
        for x in w.weights() {
            assert!((x - 0.1).abs() < 1e-6);
        }
    }

    #[test]
    fn seed_weight_is_maximal_and_weights_normalized() {
        let c = ten_clips();
        for seed in 0..c.len() {
            let w = similarity_weights(&c, seed, 1.0).unwrap();
            let sum: f64 = w.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            let max = w.weights().iter().copied().fold(0.0, f64::max);
            assert_eq!(w.weights()[seed], max);
        }
    }

    #[test]
    fn weight_errors() {
        let c = ten_clips();
        assert!(matches!(
            similarity_weights(&c, 10, 1.0),
            Err(SamplerError::SeedOutOfRange { index: 10, len: 10 })
        ));
        assert!(matches!(
            similarity_weights(&c, 0, 0.0),
            Err(SamplerError::BadTemperature(_))
        ));
        assert!(matches!(
            similarity_weights(&c, 0, -1.0),
            Err(SamplerError::BadTemperature(_))
        ));
    }

    #[test]
    fn boundaries_examples() {
        assert_eq!(
            relative_boundaries(&[6.0, 8.0, 6.0]).unwrap(),
            vec![0.0, 0.3, 0.7, 1.0]
        );
        assert_eq!(relative_boundaries(&[10.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(
            relative_boundaries(&[7.0; 4]).unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(relative_boundaries(&[]), Err(SamplerError::EmptyLengths));
        assert!(matches!(
            relative_boundaries(&[6.0, 0.0]),
            Err(SamplerError::BadLength { index: 1, .. })
        ));
        assert!(matches!(
            relative_boundaries(&[6.0, f64::NAN]),
            Err(SamplerError::BadLength { index: 1, .. })
        ));
    }

    #[test]
    fn three_clip_corpus_clamps() {
        let c = corpus(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        for seed in 0..50 {
            let plan = sample_composition(&c, seed % 3, &mut compose_rng(seed as u64)).unwrap();
            assert_eq!(plan.members.len(), 3);
            let mut ids: Vec<_> = plan.members.iter().map(|m| m.id.clone()).collect();
            ids.sort();
            assert_eq!(ids, vec!["c0", "c1", "c2"]);
        }
    }

    #[test]
    fn two_clip_corpus_rejected() {
        let c = corpus(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(
            sample_composition(&c, 0, &mut compose_rng(1)),
            Err(SamplerError::CorpusTooSmall(2))
        );
    }

    #[test]
    fn plans_respect_ranges_and_are_deterministic() {
        let c = ten_clips();
        for seed in 0..200u64 {
            let plan =
                sample_composition(&c, (seed % 10) as usize, &mut compose_rng(seed)).unwrap();
            assert!((3..=5).contains(&plan.members.len()));
            assert_eq!(plan.boundaries.len(), plan.members.len() + 1);
            assert_eq!(plan.boundaries[0], 0.0);
            assert_eq!(*plan.boundaries.last().unwrap(), 1.0);
            assert!(plan.boundaries.windows(2).all(|w| w[0] < w[1]));
            for m in &plan.members {
                assert!((6.0..=10.0).contains(&m.length_s));
            }
            let mut ids: Vec<_> = plan.members.iter().map(|m| &m.id).collect();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), plan.members.len());
            let again =
                sample_composition(&c, (seed % 10) as usize, &mut compose_rng(seed)).unwrap();
            assert_eq!(plan, again);
            let t = render_template(&plan, &c).unwrap();
            assert_eq!(t.entries().len(), plan.members.len());
        }
    }

    #[test]
    fn force_include_seed_puts_seed_first() {
        let c = ten_clips();
        let cfg = SamplerConfig {
            force_include_seed: true,
            ..SamplerConfig::default()
        };
        for seed in 0..100u64 {
            let plan = sample_composition_with(&c, 4, &cfg, &mut compose_rng(seed)).unwrap();
            assert_eq!(plan.members[0].id, "c4");
            assert_eq!(plan.members.iter().filter(|m| m.id == "c4").count(), 1);
        }
    }

    #[test]
    fn batch_matches_sequential_sampling() {
        let c = ten_clips();
        let cfg = SamplerConfig::default();
        let batch = generate_compositions(&c, 600, &cfg, &mut compose_rng(9)).unwrap();
        let mut rng = compose_rng(9);
        for (k, plan) in batch.iter().enumerate() {
            let single = sample_composition_with(&c, k % 10, &cfg, &mut rng).unwrap();
            assert_eq!(plan, &single);
        }
    }

    #[test]
    fn template_examples() {
        let c = corpus(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let plan = CompositionPlan {
            seed_id: "c0".into(),
            members: vec![
                PlanMember {
                    id: "c0".into(),
                    length_s: 6.0,
                },
                PlanMember {
                    id: "c1".into(),
                    length_s: 8.0,
                },
                PlanMember {
                    id: "c2".into(),
                    length_s: 6.0,
                },
            ],
            boundaries: relative_boundaries(&[6.0, 8.0, 6.0]).unwrap(),
        };
        let t = render_template(&plan, &c).unwrap();
        let got: Vec<(f64, f64, &str)> = t
            .entries()
            .iter()
            .map(|e| (e.start, e.end, e.caption.as_str()))
            .collect();
        assert_eq!(
            got,
            vec![
                (0.0, 0.3, "caption 0"),
                (0.3, 0.7, "caption 1"),
                (0.7, 1.0, "caption 2")
            ]
        );

        let single = CompositionPlan {
            seed_id: "c1".into(),
            members: vec![PlanMember {
                id: "c1".into(),
                length_s: 9.0,
            }],
            boundaries: vec![0.0, 1.0],
        };
        let t = render_template(&single, &c).unwrap();
        assert_eq!(t.entries().len(), 1);
        assert_eq!((t.entries()[0].start, t.entries()[0].end), (0.0, 1.0));

        let missing = CompositionPlan {
            seed_id: "c0".into(),
            members: vec![PlanMember {
                id: "Z".into(),
                length_s: 9.0,
            }],
            boundaries: vec![0.0, 1.0],
        };
        let err = render_template(&missing, &c).unwrap_err();
        assert_eq!(err, SamplerError::UnknownClip("Z".into()));
        assert!(err.to_string().contains("\"Z\""));
    }

    #[test]
    fn template_rejects_gaps_and_disorder() {
        let e = |s: f64, t: f64| TemplateEntry {
            start: s,
            end: t,
            caption: "x".into(),
        };
        assert!(TemplatedCaption::new(vec![e(0.0, 0.5), e(0.5, 1.0)]).is_ok());
        assert!(TemplatedCaption::new(vec![e(0.0, 0.4), e(0.5, 1.0)]).is_err());
        assert!(TemplatedCaption::new(vec![e(0.5, 1.0), e(0.0, 0.5)]).is_err());
        assert!(TemplatedCaption::new(vec![]).is_err());
    }

    #[test]
    fn uniform_below_covers_range() {
        let mut rng = compose_rng(5);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            seen[uniform_below(&mut rng, 3) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
        for _ in 0..1000 {
            let u = unit_f64(&mut rng);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
