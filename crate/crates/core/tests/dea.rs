use deasel::dea::{
    additive_scores, bcc_output_scores, ccr_output_scores, efficient_set, DataSet, Rts, EFFICIENCY_TOL,
};
use deasel::numlin::{solve_lp, LpProblem, ObjectiveSense, RowSense};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_panel(rng: &mut ChaCha8Rng, m: usize, s: usize, n: usize) -> DataSet {
    let x = DMatrix::from_fn(m, n, |_, _| rng.random_range(1.0..10.0));
    let y = DMatrix::from_fn(s, n, |_, _| rng.random_range(1.0..10.0));
    DataSet::unlabeled(x, y).unwrap()
}

/// Multiplier form of the output-oriented CCR score:
/// `min vᵀx_k  s.t.  uᵀy_k = 1,  uᵀy_j − vᵀx_j ≤ 0,  u, v ≥ 0`.
fn ccr_multiplier(data: &DataSet, k: usize) -> f64 {
    let (m, s, n) = (data.num_inputs(), data.num_outputs(), data.num_dmus());
    let mut a = DMatrix::zeros(n + 1, m + s);
    let mut b = DVector::zeros(n + 1);
    let mut rows = vec![RowSense::Le; n];
    for j in 0..n {
        for i in 0..m {
            a[(j, i)] = -data.x[(i, j)];
        }
        for r in 0..s {
            a[(j, m + r)] = data.y[(r, j)];
        }
    }
    for r in 0..s {
        a[(n, m + r)] = data.y[(r, k)];
    }
    b[n] = 1.0;
    rows.push(RowSense::Eq);
    let mut c = DVector::zeros(m + s);
    for i in 0..m {
        c[i] = data.x[(i, k)];
    }
    let sol = solve_lp(&LpProblem::new(ObjectiveSense::Minimize, c, a, b, rows).unwrap()).unwrap();
    assert!(sol.is_optimal());
    sol.objective
}

/// Multiplier form of the additive score:
/// `min vᵀx_k − uᵀy_k (+ w)  s.t.  vᵀx_j − uᵀy_j (+ w) ≥ 0,  v, u ≥ 1`, `w` free.
fn additive_multiplier(data: &DataSet, k: usize, rts: Rts) -> f64 {
    let (m, s, n) = (data.num_inputs(), data.num_outputs(), data.num_dmus());
    let vars = m + s + 1;
    let mut a = DMatrix::zeros(n, vars);
    for j in 0..n {
        for i in 0..m {
            a[(j, i)] = data.x[(i, j)];
        }
        for r in 0..s {
            a[(j, m + r)] = -data.y[(r, j)];
        }
        a[(j, m + s)] = 1.0;
    }
    let mut c = DVector::zeros(vars);
    for i in 0..m {
        c[i] = data.x[(i, k)];
    }
    for r in 0..s {
        c[m + r] = -data.y[(r, k)];
    }
    c[m + s] = 1.0;
    let mut lower = vec![1.0; vars];
    let mut upper = vec![f64::INFINITY; vars];
    match rts {
        Rts::Vrs => lower[m + s] = f64::NEG_INFINITY,
        Rts::Crs => {
            lower[m + s] = 0.0;
            upper[m + s] = 0.0;
        }
    }
    let lp = LpProblem::new(ObjectiveSense::Minimize, c, a, DVector::zeros(n), vec![RowSense::Ge; n])
        .unwrap()
        .with_bounds(lower, upper)
        .unwrap();
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal());
    sol.objective
}

#[test]
fn ccr_matches_multiplier_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let data = random_panel(&mut rng, 3, 1, 15);
        let scores = ccr_output_scores(&data, &[0, 1, 2]).unwrap();
        for k in 0..15 {
            assert!((scores.scores[k] - ccr_multiplier(&data, k)).abs() <= 1e-7, "unit {k}");
        }
    }
}

#[test]
fn additive_envelopment_equals_multiplier() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for rts in [Rts::Crs, Rts::Vrs] {
        for _ in 0..4 {
            let data = random_panel(&mut rng, 2, 2, 10);
            let z = additive_scores(&data, &[0, 1], rts).unwrap();
            for k in 0..10 {
                assert!((z.scores[k] - additive_multiplier(&data, k, rts)).abs() <= 1e-7, "{rts:?} unit {k}");
            }
        }
    }
}

#[test]
fn bcc_never_exceeds_ccr() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let data = random_panel(&mut rng, 2, 1, 12);
        let ccr = ccr_output_scores(&data, &[0, 1]).unwrap();
        let bcc = bcc_output_scores(&data, &[0, 1]).unwrap();
        for k in 0..12 {
            assert!(bcc.scores[k] <= ccr.scores[k] + 1e-9);
        }
    }
}

#[test]
fn ccr_efficient_units_have_no_additive_slack() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let data = random_panel(&mut rng, 2, 1, 15);
        let ccr = efficient_set(&ccr_output_scores(&data, &[0, 1]).unwrap(), EFFICIENCY_TOL);
        let add = efficient_set(&additive_scores(&data, &[0, 1], Rts::Crs).unwrap(), 1e-7);
        assert_eq!(ccr, add);
    }
}

fn panel_strategy() -> impl Strategy<Value = DataSet> {
    (1usize..4, 1usize..3, 2usize..10).prop_flat_map(|(m, s, n)| {
        (prop::collection::vec(0.5f64..20.0, m * n), prop::collection::vec(0.5f64..20.0, s * n)).prop_map(
            move |(x, y)| DataSet::unlabeled(DMatrix::from_vec(m, n, x), DMatrix::from_vec(s, n, y)).unwrap(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn radial_scores_are_at_least_one_with_an_efficient_unit(data in panel_strategy()) {
        let inputs = data.all_inputs();
        for scores in [ccr_output_scores(&data, &inputs).unwrap(), bcc_output_scores(&data, &inputs).unwrap()] {
            prop_assert!(scores.scores.iter().all(|t| *t >= 1.0 - 1e-9));
            prop_assert!(scores.scores.iter().any(|t| *t <= 1.0 + 1e-9));
        }
    }

    #[test]
    fn rescaling_an_input_leaves_scores_unchanged(data in panel_strategy(), c in 0.01f64..100.0) {
        let inputs = data.all_inputs();
        let mut scaled = data.clone();
        scaled.x.row_mut(0).scale_mut(c);
        for (a, b) in [
            (ccr_output_scores(&data, &inputs).unwrap(), ccr_output_scores(&scaled, &inputs).unwrap()),
            (bcc_output_scores(&data, &inputs).unwrap(), bcc_output_scores(&scaled, &inputs).unwrap()),
        ] {
            for (u, v) in a.scores.iter().zip(&b.scores) {
                prop_assert!((u - v).abs() <= 1e-7 * u.max(1.0));
            }
        }
    }

    #[test]
    fn adding_an_input_never_raises_a_score(data in panel_strategy()) {
        prop_assume!(data.num_inputs() >= 2);
        let all = data.all_inputs();
        let fewer = &all[..all.len() - 1];
        let big = ccr_output_scores(&data, &all).unwrap();
        let small = ccr_output_scores(&data, fewer).unwrap();
        for (b, s) in big.scores.iter().zip(&small.scores) {
            prop_assert!(*b <= s + 1e-9);
        }
    }

    #[test]
    fn unit_order_does_not_matter(data in panel_strategy(), rot in 0usize..10) {
        let n = data.num_dmus();
        let order: Vec<usize> = (0..n).map(|k| (k + rot) % n).collect();
        let permuted = data.select_dmus(&order).unwrap();
        let inputs = data.all_inputs();
        let a = bcc_output_scores(&data, &inputs).unwrap();
        let b = bcc_output_scores(&permuted, &inputs).unwrap();
        for (pos, &k) in order.iter().enumerate() {
            prop_assert!((a.scores[k] - b.scores[pos]).abs() <= 1e-9);
        }
    }

    #[test]
    fn additive_slack_is_non_negative(data in panel_strategy()) {
        let z = additive_scores(&data, &data.all_inputs(), Rts::Vrs).unwrap();
        prop_assert!(z.scores.iter().all(|v| *v >= -1e-9));
    }
}
