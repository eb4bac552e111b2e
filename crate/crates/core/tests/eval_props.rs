use dlfm::data::RatingTriple;
use dlfm::eval::{mae, precision_recall_at_k, rmse};
use proptest::prelude::*;

fn test_set() -> impl Strategy<Value = (Vec<RatingTriple>, Vec<f64>)> {
    prop::collection::btree_set((1u32..8, 1u32..40), 1..80).prop_flat_map(|pairs| {
        let n = pairs.len();
        (
            prop::collection::vec(1u32..=5, n),
            prop::collection::vec(0.0f64..6.0, n),
        )
            .prop_map(move |(ratings, scores)| {
                let triples = pairs
                    .iter()
                    .zip(&ratings)
                    .map(|(&(u, i), &r)| RatingTriple::new(u, i, r as f64))
                    .collect();
                (triples, scores)
            })
    })
}

proptest! {
    #[test]
    fn ranking_metrics_ignore_monotone_score_transforms((test, scores) in test_set(), k in 1usize..25) {
        let squashed: Vec<f64> = scores.iter().map(|s| (s * 3.0 + 1.0).exp().ln_1p()).collect();
        prop_assert_eq!(
            precision_recall_at_k(&test, &scores, k, 4.0).unwrap(),
            precision_recall_at_k(&test, &squashed, k, 4.0).unwrap()
        );
    }

    #[test]
    fn ranking_metrics_are_fractions((test, scores) in test_set(), k in 1usize..25) {
        let (p, r) = precision_recall_at_k(&test, &scores, k, 4.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r));
        // recall can only grow with the cut-off
        let (_, r_more) = precision_recall_at_k(&test, &scores, k + 1, 4.0).unwrap();
        prop_assert!(r_more >= r);
    }

    #[test]
    fn oracle_scores_maximise_recall((test, _) in test_set(), k in 1usize..25) {
        let truth: Vec<f64> = test.iter().map(|t| t.rating).collect();
        let shuffled: Vec<f64> = truth.iter().rev().copied().collect();
        let (_, best) = precision_recall_at_k(&test, &truth, k, 4.0).unwrap();
        let (_, other) = precision_recall_at_k(&test, &shuffled, k, 4.0).unwrap();
        prop_assert!(best >= other);
    }

    #[test]
    fn error_metrics_ordered(pairs in prop::collection::vec((1.0f64..5.0, 1.0f64..5.0), 1..100)) {
        let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m = mae(&p, &a).unwrap();
        let r = rmse(&p, &a).unwrap();
        prop_assert!(m >= 0.0 && r >= m - 1e-12 && r <= 4.0);
    }
}
