//! Caption, retrieval and generation metrics, plus caption-corpus
//! statistics.
//!
//! Every metric is reported under an explicit variant string so that
//! numbers produced under different conventions are never silently
//! compared.

mod ranking;
mod stats;
mod stem;
mod text;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, cosine_unchecked, EmbeddingError, EmbeddingVector};

pub use ranking::{median_rank, recall_at_k, truth_ranks, DEFAULT_RECALL_KS};
pub use stats::{corpus_stats, StatsReport};
pub use stem::stem;
pub use text::{
    bleu, corpus_bleu, lcs_len, meteor_lite, rouge_l, BLEU_EPSILON, METEOR_ALPHA, METEOR_BETA,
    METEOR_GAMMA,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("n-gram order must be at least 1")]
    BadOrder,
    #[error("no reference given")]
    NoReferences,
    #[error("{0} side has no tokens")]
    EmptySide(&'static str),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("token {0:?} is empty or not lowercase")]
    BadToken(String),
    #[error("K must be at least 1")]
    BadK,
    #[error("no ranked lists given")]
    NoQueries,
    #[error("no truth item for query {0:?}")]
    MissingTruth(String),
    #[error("truth item {item:?} for query {query:?} is not in its ranked list")]
    TruthNotRanked { query: String, item: String },
    #[error("no captions given")]
    EmptyCorpus,
    #[error("no items to evaluate")]
    NoItems,
    #[error("duplicate item id {0:?}")]
    DuplicateItem(String),
}

/// A tokenized sentence: lowercase, non-empty tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Result<Self, MetricError> {
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.to_lowercase() != **t)
        {
            return Err(MetricError::BadToken(bad.clone()));
        }
        Ok(Self(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<String>> for TokenSequence {
    type Error = MetricError;

    fn try_from(tokens: Vec<String>) -> Result<Self, MetricError> {
        Self::new(tokens)
    }
}

impl From<TokenSequence> for Vec<String> {
    fn from(t: TokenSequence) -> Self {
        t.0
    }
}

/// Lowercases, splits on whitespace and strips leading and trailing
/// non-alphanumeric characters from each token; tokens that end up empty
/// are dropped. Inner punctuation (`don't`, `hip-hop`) is kept.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence(
        text.split_whitespace()
            .map(|w| {
                w.trim_matches(|c: char| !c.is_alphanumeric())
                    .to_lowercase()
            })
            .filter(|t| !t.is_empty())
            .collect(),
    )
}

/// One named score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub variant: String,
    pub corpus_score: f64,
    /// Per-item scores sorted by item id.
    pub per_item: Vec<ItemScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub id: String,
    pub score: f64,
}

impl MetricReport {
    fn from_items(
        name: &str,
        variant: String,
        corpus_score: f64,
        per_item: Vec<ItemScore>,
    ) -> Self {
        Self {
            name: name.to_string(),
            variant,
            corpus_score,
            per_item,
            notes: Vec::new(),
        }
    }

    /// Arithmetic mean of the per-item scores in item-id order.
    fn mean_of(name: &str, variant: String, per_item: Vec<ItemScore>) -> Self {
        let mean = per_item.iter().map(|s| s.score).sum::<f64>() / per_item.len() as f64;
        Self::from_items(name, variant, mean, per_item)
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "metric: {}", self.name)?;
        writeln!(f, "variant: {}", self.variant)?;
        writeln!(f, "corpus: {}", self.corpus_score)?;
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        write!(f, "id\tscore")?;
        for item in &self.per_item {
            write!(f, "\n{}\t{}", item.id, item.score)?;
        }
        Ok(())
    }
}

/// A hypothesis caption with its references, already tokenized.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionPair {
    pub id: String,
    pub hyp: TokenSequence,
    pub refs: Vec<TokenSequence>,
}

fn check_pairs(pairs: &[CaptionPair]) -> Result<Vec<&CaptionPair>, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::NoItems);
    }
    let mut sorted: Vec<&CaptionPair> = pairs.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(MetricError::DuplicateItem(w[0].id.clone()));
    }
    if let Some(p) = sorted.iter().find(|p| p.refs.is_empty()) {
        let _ = p;
        return Err(MetricError::NoReferences);
    }
    Ok(sorted)
}

fn per_item<F>(sorted: &[&CaptionPair], score: F) -> Result<Vec<ItemScore>, MetricError>
where
    F: Fn(&CaptionPair) -> Result<f64, MetricError> + Sync,
{
    sorted
        .par_iter()
        .map(|p| {
            Ok(ItemScore {
                id: p.id.clone(),
                score: score(p)?,
            })
        })
        .collect()
}

/// Corpus BLEU-`max_n` plus sentence-level BLEU per item.
pub fn bleu_report(pairs: &[CaptionPair], max_n: usize) -> Result<MetricReport, MetricError> {
    let sorted = check_pairs(pairs)?;
    let items = per_item(&sorted, |p| bleu(&p.hyp, &p.refs, max_n))?;
    let corpus = corpus_bleu(
        &sorted
            .iter()
            .map(|p| (p.hyp.clone(), p.refs.clone()))
            .collect::<Vec<_>>(),
        max_n,
    )?;
    let mut report = MetricReport::from_items(
        "bleu",
        format!(
            "corpus BLEU-{max_n} (pooled clipped counts, closest-reference brevity penalty, \
             numerator floor {BLEU_EPSILON:e}); per-item scores are sentence-level BLEU-{max_n}"
        ),
        corpus,
        items,
    );
    let empty = sorted.iter().filter(|p| p.hyp.is_empty()).count();
    if empty > 0 {
        report
            .notes
            .push(format!("{empty} empty hypotheses scored 0"));
    }
    Ok(report)
}

/// Mean ROUGE-L F1; with several references the best one counts.
pub fn rouge_report(pairs: &[CaptionPair]) -> Result<MetricReport, MetricError> {
    let sorted = check_pairs(pairs)?;
    let items = per_item(&sorted, |p| {
        Ok(p.refs
            .iter()
            .map(|r| rouge_l(&p.hyp, r))
            .fold(0.0, f64::max))
    })?;
    Ok(MetricReport::mean_of(
        "rouge_l",
        "ROUGE-L F1 (beta 1), best reference per item, corpus = mean over items".into(),
        items,
    ))
}

/// Mean METEOR (exact + stem stages); with several references the best one
/// counts.
pub fn meteor_report(pairs: &[CaptionPair]) -> Result<MetricReport, MetricError> {
    let sorted = check_pairs(pairs)?;
    let items = per_item(&sorted, |p| {
        Ok(p.refs
            .iter()
            .map(|r| meteor_lite(&p.hyp, r))
            .fold(0.0, f64::max))
    })?;
    Ok(MetricReport::mean_of(
        "meteor",
        format!(
            "meteor_lite: exact then stem matching, no synonyms, alpha {METEOR_ALPHA}, \
             beta {METEOR_BETA}, gamma {METEOR_GAMMA}; best reference per item, corpus = mean"
        ),
        items,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn uniform_dim(side: &'static str, tokens: &[EmbeddingVector]) -> Result<usize, MetricError> {
    let first = tokens.first().ok_or(MetricError::EmptySide(side))?;
    for t in tokens {
        t.check()?;
        if t.dim() != first.dim() {
            return Err(EmbeddingError::DimMismatch {
                left: first.dim(),
                right: t.dim(),
            }
            .into());
        }
    }
    Ok(first.dim())
}

fn greedy_mean(from: &[EmbeddingVector], to: &[EmbeddingVector]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|a| {
            to.iter()
                .map(|b| cosine_unchecked(a, b))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    total / from.len() as f64
}

/// Greedy token matching without IDF weights: recall averages each
/// reference token's best cosine against the hypothesis, precision the
/// reverse. F1 is 0 unless both are positive.
pub fn bert_score(
    hyp_tokens: &[EmbeddingVector],
    ref_tokens: &[EmbeddingVector],
) -> Result<BertScore, MetricError> {
    let hd = uniform_dim("hypothesis", hyp_tokens)?;
    let rd = uniform_dim("reference", ref_tokens)?;
    if hd != rd {
        return Err(EmbeddingError::DimMismatch {
            left: hd,
            right: rd,
        }
        .into());
    }
    let precision = greedy_mean(hyp_tokens, ref_tokens);
    let recall = greedy_mean(ref_tokens, hyp_tokens);
    let f1 = if precision > 0.0 && recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(BertScore {
        precision,
        recall,
        f1,
    })
}

/// Token embeddings of one hypothesis/reference pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPair {
    pub id: String,
    pub hyp: Vec<EmbeddingVector>,
    pub reference: Vec<EmbeddingVector>,
}

/// Mean BERT-score F1 over items.
pub fn bert_score_report(pairs: &[EmbeddedPair]) -> Result<MetricReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::NoItems);
    }
    let mut sorted: Vec<&EmbeddedPair> = pairs.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(MetricError::DuplicateItem(w[0].id.clone()));
    }
    let items = sorted
        .par_iter()
        .map(|p| {
            Ok(ItemScore {
                id: p.id.clone(),
                score: bert_score(&p.hyp, &p.reference)?.f1,
            })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    Ok(MetricReport::mean_of(
        "bert_score",
        "greedy max-cosine token matching on supplied embeddings, no IDF, no baseline \
         rescaling; per-item F1, corpus = mean F1"
            .into(),
        items,
    ))
}

/// Cosine between an audio embedding and a text embedding.
pub fn clap_score(audio: &EmbeddingVector, text: &EmbeddingVector) -> Result<f64, MetricError> {
    Ok(cosine(audio, text)?)
}

/// An audio/text embedding pair for [`clap_score_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTextPair {
    pub id: String,
    pub audio: EmbeddingVector,
    pub text: EmbeddingVector,
}

/// Mean CLAP score over pairs.
pub fn clap_score_report(pairs: &[AudioTextPair]) -> Result<MetricReport, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::NoItems);
    }
    let mut sorted: Vec<&AudioTextPair> = pairs.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(MetricError::DuplicateItem(w[0].id.clone()));
    }
    let items = sorted
        .iter()
        .map(|p| {
            Ok(ItemScore {
                id: p.id.clone(),
                score: clap_score(&p.audio, &p.text)?,
            })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    Ok(MetricReport::mean_of(
        "clap_score",
        "cosine(audio, text) on supplied embeddings, corpus = mean over pairs".into(),
        items,
    ))
}
