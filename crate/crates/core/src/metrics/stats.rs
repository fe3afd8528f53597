use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{tokenize, MetricError};
use crate::captionfmt::SegmentedCaption;

/// Size statistics of a caption corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub caption_count: usize,
    /// Mean token count of the global caption.
    pub mean_tokens_global: f64,
    /// Mean token count of global caption, segment texts and change notes.
    pub mean_tokens_total: f64,
    /// Distinct tokens over all fields of all captions.
    pub vocabulary_size: usize,
    pub mean_segments: f64,
    pub mean_changes: f64,
}

/// Token, vocabulary, segment and change counts. Segment tags are labels,
/// not text, and are not counted as tokens.
pub fn corpus_stats(caps: &[SegmentedCaption]) -> Result<StatsReport, MetricError> {
    if caps.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut vocab: HashSet<String> = HashSet::new();
    let (mut global_tokens, mut total_tokens) = (0usize, 0usize);
    let (mut segments, mut changes) = (0usize, 0usize);
    for cap in caps {
        let fields = std::iter::once(cap.global())
            .chain(cap.segments().iter().map(|s| s.text.as_str()))
            .chain(cap.changes().iter().map(|c| c.text.as_str()));
        for (i, field) in fields.enumerate() {
            let toks = tokenize(field);
            if i == 0 {
                global_tokens += toks.len();
            }
            total_tokens += toks.len();
            vocab.extend(Vec::from(toks));
        }
        segments += cap.segments().len();
        changes += cap.changes().len();
    }
    let n = caps.len() as f64;
    Ok(StatsReport {
        caption_count: caps.len(),
        mean_tokens_global: global_tokens as f64 / n,
        mean_tokens_total: total_tokens as f64 / n,
        vocabulary_size: vocab.len(),
        mean_segments: segments as f64 / n,
        mean_changes: changes as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::captionfmt::parse_caption;

    #[test]
    fn single_caption() {
        let cap = parse_caption("a b\n[0.0%-100.0%] c").unwrap();
        let s = corpus_stats(std::slice::from_ref(&cap)).unwrap();
        assert_eq!(
            s,
            StatsReport {
                caption_count: 1,
                mean_tokens_global: 2.0,
                mean_tokens_total: 3.0,
                vocabulary_size: 3,
                mean_segments: 1.0,
                mean_changes: 0.0,
            }
        );
        let twice = corpus_stats(&[cap.clone(), cap]).unwrap();
        assert_eq!(twice.vocabulary_size, 3);
        assert_eq!(twice.mean_tokens_total, 3.0);
        assert_eq!(twice.caption_count, 2);
    }

    #[test]
    fn segments_and_changes() {
        let cap = parse_caption(
            "Song.\n[0.0%-25.0%] intro: a\n[25.0%-50.0%] b\n[50.0%-75.0%] c\n[75.0%-100.0%] d\n\
             -> 1: x\n-> 2: y\n-> 3: z",
        )
        .unwrap();
        let s = corpus_stats(&[cap]).unwrap();
        assert_eq!(s.mean_segments, 4.0);
        assert_eq!(s.mean_changes, 3.0);
        assert_eq!(s.mean_tokens_total, 8.0);
        assert!(s.vocabulary_size as f64 <= s.mean_tokens_total);
        assert_eq!(corpus_stats(&[]), Err(MetricError::EmptyCorpus));
    }
}
