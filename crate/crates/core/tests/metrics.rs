use deasel::metrics::{average_ranks, identification_metrics, pearson, score_metrics};
use proptest::prelude::*;

/// Rank by counting: `1 + #{smaller} + #{equal others}/2`.
fn rank_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let ties = v.iter().enumerate().filter(|(j, y)| *j != i && *y == x).count() as f64;
            1.0 + below + ties / 2.0
        })
        .collect()
}

/// Single-pass moment formula.
fn pearson_by_sums(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|y| y * y).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

#[test]
fn identical_vectors() {
    let v = [1.0, 1.2, 1.7, 1.05];
    let m = score_metrics(&v, &v).unwrap();
    assert_eq!(m.mse, 0.0);
    assert!((m.pearson.unwrap() - 1.0).abs() <= 1e-15);
    assert!((m.spearman.unwrap() - 1.0).abs() <= 1e-15);
}

#[test]
fn reversed_ranks_give_minus_one() {
    let t = [1.0, 1.1, 1.3, 1.6];
    let m = score_metrics(&t, &[4.0, 3.0, 2.0, 1.0]).unwrap();
    assert!((m.spearman.unwrap() + 1.0).abs() <= 1e-15);
}

#[test]
fn hand_computed_mse() {
    let m = score_metrics(&[1.0, 1.1, 1.3], &[1.0, 1.2, 1.3]).unwrap();
    assert!((m.mse - 0.01 / 3.0).abs() <= 1e-15);
}

#[test]
fn constant_vector_has_no_correlation() {
    let m = score_metrics(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((m.pearson, m.spearman), (None, None));
}

#[test]
fn identification_examples() {
    let same = identification_metrics(&[true, false, true], &[true, false, true]).unwrap();
    assert_eq!((same.pct_all, same.pct_efficient), (1.0, Some(1.0)));
    let m = identification_metrics(&[true, true, false, false], &[true, false, false, false]).unwrap();
    assert_eq!((m.pct_all, m.pct_efficient), (0.75, Some(0.5)));
    let none = identification_metrics(&[false, false], &[true, false]).unwrap();
    assert_eq!((none.pct_all, none.pct_efficient), (0.5, None));
}

#[test]
fn mismatched_lengths_are_rejected() {
    assert!(score_metrics(&[1.0, 2.0], &[1.0]).is_err());
    assert!(identification_metrics(&[true], &[]).is_err());
}

fn scores(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1.0f64..3.0, Just(1.0), Just(1.5)], len)
}

proptest! {
    #[test]
    fn ranks_match_counting(v in prop::collection::vec(prop_oneof![0.0f64..5.0, Just(1.0), Just(2.0)], 1..30)) {
        let fast = average_ranks(&v);
        let slow = rank_by_counting(&v);
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn pearson_matches_moment_sums((a, b) in (2usize..30).prop_flat_map(|n| (scores(n), scores(n)))) {
        if let Some(r) = pearson(&a, &b) {
            prop_assert!((r - pearson_by_sums(&a, &b)).abs() <= 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
            prop_assert_eq!(Some(r), pearson(&b, &a));
        }
    }

    #[test]
    fn spearman_ignores_monotone_transforms((a, b) in (2usize..30).prop_flat_map(|n| (scores(n), scores(n)))) {
        let m1 = score_metrics(&a, &b).unwrap();
        let warped: Vec<f64> = b.iter().map(|v| v.ln() * 3.0 + 7.0).collect();
        let m2 = score_metrics(&a, &warped).unwrap();
        prop_assert_eq!(m1.spearman.is_some(), m2.spearman.is_some());
        if let (Some(x), Some(y)) = (m1.spearman, m2.spearman) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn mse_is_zero_only_for_equal_vectors((a, b) in (2usize..30).prop_flat_map(|n| (scores(n), scores(n)))) {
        let m = score_metrics(&a, &b).unwrap();
        prop_assert!(m.mse >= 0.0);
        prop_assert_eq!(m.mse == 0.0, a == b);
    }

    #[test]
    fn identification_shares_are_fractions(masks in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40)) {
        let (t, m): (Vec<bool>, Vec<bool>) = masks.into_iter().unzip();
        let id = identification_metrics(&t, &m).unwrap();
        prop_assert!((0.0..=1.0).contains(&id.pct_all));
        prop_assert_eq!(id.pct_efficient.is_some(), t.iter().any(|v| *v));
        prop_assert_eq!(identification_metrics(&t, &t).unwrap().pct_all, 1.0);
    }
}
