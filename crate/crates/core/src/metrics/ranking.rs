use std::collections::BTreeMap;

use super::MetricError;
use crate::retrieval::RankedList;

/// Recall cut-offs reported when none are requested.
pub const DEFAULT_RECALL_KS: [usize; 3] = [1, 5, 10];

/// 1-based rank of each query's truth item, in input order.
pub fn truth_ranks(
    ranked: &[RankedList],
    truth: &BTreeMap<String, String>,
) -> Result<Vec<usize>, MetricError> {
    if ranked.is_empty() {
        return Err(MetricError::NoQueries);
    }
    ranked
        .iter()
        .map(|list| {
            let item = truth
                .get(&list.query_id)
                .ok_or_else(|| MetricError::MissingTruth(list.query_id.clone()))?;
            list.rank_of(item)
                .ok_or_else(|| MetricError::TruthNotRanked {
                    query: list.query_id.clone(),
                    item: item.clone(),
                })
        })
        .collect()
}

/// Fraction of queries whose truth item is ranked within the top `k`.
pub fn recall_at_k(
    ranked: &[RankedList],
    truth: &BTreeMap<String, String>,
    k: usize,
) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::BadK);
    }
    let ranks = truth_ranks(ranked, truth)?;
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

/// Median 1-based rank of the truth items.
pub fn median_rank(
    ranked: &[RankedList],
    truth: &BTreeMap<String, String>,
) -> Result<f64, MetricError> {
    let mut ranks = truth_ranks(ranked, truth)?;
    ranks.sort_unstable();
    let n = ranks.len();
    Ok(if n % 2 == 1 {
        ranks[n / 2] as f64
    } else {
        (ranks[n / 2 - 1] + ranks[n / 2]) as f64 / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{PairScore, RankedEntry};
    use proptest::prelude::*;

    /// A list of `n` items where the truth item `t` sits at `rank`.
    fn list(q: &str, rank: usize, n: usize) -> RankedList {
        RankedList {
            query_id: q.into(),
            entries: (1..=n)
                .map(|i| RankedEntry {
                    item_id: if i == rank {
                        "t".to_string()
                    } else {
                        format!("x{i}")
                    },
                    score: PairScore::Scored(1.0 / i as f64),
                })
                .collect(),
        }
    }

    fn setup(ranks: &[usize]) -> (Vec<RankedList>, BTreeMap<String, String>) {
        let lists = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| list(&format!("q{i}"), r, 12))
            .collect();
        let truth = (0..ranks.len())
            .map(|i| (format!("q{i}"), "t".to_string()))
            .collect();
        (lists, truth)
    }

    #[test]
    fn recall_examples() {
        let (l, t) = setup(&[1, 1, 1]);
        assert_eq!(recall_at_k(&l, &t, 1).unwrap(), 1.0);
        let (l, t) = setup(&[7; 10]);
        assert_eq!(recall_at_k(&l, &t, 5).unwrap(), 0.0);
        assert_eq!(recall_at_k(&l, &t, 10).unwrap(), 1.0);
        let (l, t) = setup(&[1, 3, 8]);
        assert_eq!(recall_at_k(&l, &t, 5).unwrap(), 2.0 / 3.0);
        assert_eq!(recall_at_k(&l, &t, 0), Err(MetricError::BadK));
    }

    #[test]
    fn median_examples() {
        let (l, t) = setup(&[1, 3, 5]);
        assert_eq!(median_rank(&l, &t).unwrap(), 3.0);
        let (l, t) = setup(&[4, 1]);
        assert_eq!(median_rank(&l, &t).unwrap(), 2.5);
        let (l, t) = setup(&[1, 1, 1, 1]);
        assert_eq!(median_rank(&l, &t).unwrap(), 1.0);
    }

    #[test]
    fn truth_errors() {
        let (l, mut t) = setup(&[1, 2]);
        t.remove("q1");
        assert_eq!(
            median_rank(&l, &t),
            Err(MetricError::MissingTruth("q1".into()))
        );
        t.insert("q1".into(), "nope".into());
        assert!(matches!(
            recall_at_k(&l, &t, 1),
            Err(MetricError::TruthNotRanked { .. })
        ));
        assert_eq!(recall_at_k(&[], &t, 1), Err(MetricError::NoQueries));
    }

    proptest! {
        #[test]
        fn recall_monotone_in_k(ranks in prop::collection::vec(1usize..=12, 1..30)) {
            let (l, t) = setup(&ranks);
            let mut prev = 0.0;
            for k in 1..=13 {
                let r = recall_at_k(&l, &t, k).unwrap();
                prop_assert!(r >= prev);
                prop_assert!((0.0..=1.0).contains(&r));
                prev = r;
            }
            prop_assert_eq!(prev, 1.0);
        }

        #[test]
        fn median_is_one_iff_all_top(ranks in prop::collection::vec(1usize..=3, 1..10)) {
            let (l, t) = setup(&ranks);
            let all_top = ranks.iter().all(|&r| r == 1);
            prop_assert_eq!(median_rank(&l, &t).unwrap() == 1.0, all_top || {
                let mut s = ranks.clone();
                s.sort_unstable();
                let n = s.len();
                if n % 2 == 1 { s[n / 2] == 1 } else { s[n / 2 - 1] + s[n / 2] == 2 }
            });
        }
    }
}
