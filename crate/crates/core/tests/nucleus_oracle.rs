//! Independent brute-force oracle for nucleus (top-p) truncation.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topaug::infill::SpanDist;

/// Reference implementation built from the definition alone: sort by
/// probability descending (ties by span ascending), take the shortest prefix
/// whose mass reaches p, renormalize.
fn oracle_top_p(weights: &[(Vec<String>, f64)], p: f64) -> Vec<(Vec<String>, f64)> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    let mut probs: Vec<(Vec<String>, f64)> = weights
        .iter()
        .map(|(s, w)| (s.clone(), w / total))
        .collect();
    probs.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.0.cmp(&b.0))
    });
    let mut cum = 0.0;
    let mut keep = 0;
    for (i, (_, q)) in probs.iter().enumerate() {
        cum += q;
        if cum >= p - 1e-12 {
            keep = i + 1;
            break;
        }
    }
    if keep == 0 {
        // Rounding left the full sum short of p: keep everything.
        keep = probs.len();
    }
    probs.truncate(keep);
    let mass: f64 = probs.iter().map(|(_, q)| q).sum();
    for (_, q) in &mut probs {
        *q /= mass;
    }
    probs
}

fn span(i: usize) -> Vec<String> {
    vec![format!("s{i:03}")]
}

fn assert_matches_oracle(weights: &[(Vec<String>, f64)], p: f64) {
    let dist = SpanDist::from_weights(weights.iter().cloned()).expect("positive weights");
    let truncated = dist.top_p_truncate(p).expect("non-degenerate");
    let expected = oracle_top_p(weights, p);
    assert_eq!(
        truncated.support_size(),
        expected.len(),
        "support size for p={p} over {weights:?}"
    );
    for ((gs, gp), (es, ep)) in truncated.entries().iter().zip(&expected) {
        assert_eq!(gs, es, "span order for p={p}");
        assert!((gp - ep).abs() < 1e-9, "prob {gp} vs oracle {ep} at p={p}");
    }
    // Renormalization invariant.
    let sum: f64 = truncated.entries().iter().map(|(_, q)| q).sum();
    assert!((sum - 1.0).abs() < 1e-9);
    // Minimality: the kept prefix reaches p but the next-shorter prefix
    // does not, so exactly the smallest qualifying nucleus was chosen.
    if truncated.support_size() > 1 && truncated.support_size() < weights.len() {
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        let mut probs: Vec<f64> = weights.iter().map(|(_, w)| w / total).collect();
        probs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let kept_mass: f64 = probs[..truncated.support_size()].iter().sum();
        let without_last: f64 = probs[..truncated.support_size() - 1].iter().sum();
        assert!(kept_mass >= p - 1e-12);
        assert!(without_last < p - 1e-12);
    }
}

#[test]
fn frozen_example_matches_hand_computation() {
    // p = 0.9 over {a: .5, b: .3, c: .15, d: .05} keeps a, b, c with
    // renormalized probabilities 10/19, 6/19, 3/19.
    let weights = vec![
        (vec!["a".to_string()], 0.5),
        (vec!["b".to_string()], 0.3),
        (vec!["c".to_string()], 0.15),
        (vec!["d".to_string()], 0.05),
    ];
    let expected = oracle_top_p(&weights, 0.9);
    assert_eq!(expected.len(), 3);
    assert!((expected[0].1 - 10.0 / 19.0).abs() < 1e-12);
    assert!((expected[1].1 - 6.0 / 19.0).abs() < 1e-12);
    assert!((expected[2].1 - 3.0 / 19.0).abs() < 1e-12);
    assert_matches_oracle(&weights, 0.9);
}

#[test]
fn boundary_p_keeps_exact_prefix() {
    // Cumulative mass hits p exactly at the second entry; the third must go.
    let weights = vec![
        (span(0), 0.6),
        (span(1), 0.3),
        (span(2), 0.1),
    ];
    assert_matches_oracle(&weights, 0.9);
    let dist = SpanDist::from_weights(weights.clone()).unwrap();
    assert_eq!(dist.top_p_truncate(0.9).unwrap().support_size(), 2);
    // Just above the boundary the third entry comes back.
    assert_eq!(dist.top_p_truncate(0.9 + 1e-9).unwrap().support_size(), 3);
}

#[test]
fn ties_resolve_by_span_order() {
    let weights = vec![
        (span(2), 0.25),
        (span(0), 0.25),
        (span(3), 0.25),
        (span(1), 0.25),
    ];
    let dist = SpanDist::from_weights(weights).unwrap();
    let kept = dist.top_p_truncate(0.5).unwrap();
    let spans: Vec<&Vec<String>> = kept.entries().iter().map(|(s, _)| s).collect();
    assert_eq!(spans, vec![&span(0), &span(1)]);
}

#[test]
fn random_distributions_match_oracle_across_p_grid() {
    let p_grid = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(0x6f72_6163);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=40);
        let weights: Vec<(Vec<String>, f64)> = (0..n)
            .map(|i| (span(i), rng.gen_range(1e-6..10.0)))
            .collect();
        for &p in &p_grid {
            assert_matches_oracle(&weights, p);
        }
    }
}

proptest! {
    #[test]
    fn arbitrary_weights_match_oracle(
        raw in proptest::collection::vec(1e-9f64..100.0, 1..30),
        p in 0.001f64..=1.0,
    ) {
        let weights: Vec<(Vec<String>, f64)> =
            raw.iter().enumerate().map(|(i, &w)| (span(i), w)).collect();
        assert_matches_oracle(&weights, p);
    }

    #[test]
    fn sampling_stays_inside_truncated_support(
        raw in proptest::collection::vec(0.01f64..10.0, 2..20),
        p in 0.1f64..1.0,
        seed in any::<u64>(),
    ) {
        let weights: Vec<(Vec<String>, f64)> =
            raw.iter().enumerate().map(|(i, &w)| (span(i), w)).collect();
        let dist = SpanDist::from_weights(weights).unwrap();
        let truncated = dist.top_p_truncate(p).unwrap();
        let allowed: Vec<&[String]> =
            truncated.entries().iter().map(|(s, _)| s.as_slice()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let drawn = truncated.sample(&mut rng);
            prop_assert!(allowed.contains(&drawn));
        }
    }
}
