use deasel::numlin::{
    ols_regress, solve_lp, LpProblem, LpStatus, ObjectiveSense, RowSense,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best objective over all basic feasible points of `A x (≤|≥) b, x ≥ 0`,
/// found by solving every p-subset of the bounding hyperplanes.
fn vertex_enumeration(p: &LpProblem) -> Option<f64> {
    let (nv, nr) = (p.num_vars(), p.num_rows());
    let total = nr + nv;
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..nv).collect();
    loop {
        let mut m = DMatrix::zeros(nv, nv);
        let mut rhs = DVector::zeros(nv);
        for (r, &h) in subset.iter().enumerate() {
            if h < nr {
                m.row_mut(r).copy_from(&p.a.row(h));
                rhs[r] = p.b[h];
            } else {
                m[(r, h - nr)] = 1.0;
            }
        }
        if let Some(x) = m.lu().solve(&rhs) {
            let ax = &p.a * &x;
            let feasible = x.iter().all(|v| *v >= -1e-9)
                && (0..nr).all(|i| match p.rows[i] {
                    RowSense::Le => ax[i] <= p.b[i] + 1e-9,
                    RowSense::Ge => ax[i] >= p.b[i] - 1e-9,
                    RowSense::Eq => (ax[i] - p.b[i]).abs() <= 1e-9,
                });
            if feasible && x.iter().all(|v| v.is_finite()) {
                let obj = p.cost.dot(&x);
                best = Some(match (best, p.sense) {
                    (None, _) => obj,
                    (Some(b), ObjectiveSense::Maximize) => b.max(obj),
                    (Some(b), ObjectiveSense::Minimize) => b.min(obj),
                });
            }
        }
        // next combination
        let mut i = nv;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < total - nv + i {
                subset[i] += 1;
                for k in i + 1..nv {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn random_bounded_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let p = rng.random_range(1..=5);
    let q = rng.random_range(1..=6);
    let mut a = DMatrix::zeros(q, p);
    let mut b = DVector::zeros(q);
    let mut rows = Vec::with_capacity(q);
    for i in 0..q {
        // Row 0 is a positive ≤ row, which bounds the region.
        let ge = i > 0 && rng.random_bool(0.3);
        for j in 0..p {
            a[(i, j)] = if i == 0 {
                rng.random_range(0.5..3.0)
            } else {
                rng.random_range(-2.0..3.0)
            };
        }
        b[i] = if ge { rng.random_range(0.0..2.0) } else { rng.random_range(1.0..10.0) };
        rows.push(if ge { RowSense::Ge } else { RowSense::Le });
    }
    let sense = if rng.random_bool(0.5) { ObjectiveSense::Maximize } else { ObjectiveSense::Minimize };
    let c = DVector::from_fn(p, |_, _| rng.random_range(-3.0..3.0));
    LpProblem::new(sense, c, a, b, rows).unwrap()
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut optimal = 0;
    for _ in 0..50 {
        let p = random_bounded_lp(&mut rng);
        let s = solve_lp(&p).unwrap();
        match vertex_enumeration(&p) {
            Some(best) => {
                assert_eq!(s.status, LpStatus::Optimal);
                assert!((s.objective - best).abs() <= 1e-7, "{} vs {}", s.objective, best);
                optimal += 1;
            }
            None => assert_eq!(s.status, LpStatus::Infeasible),
        }
    }
    assert!(optimal >= 30);
}

#[test]
fn optimal_solutions_satisfy_feasibility_and_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let p = random_bounded_lp(&mut rng);
        let s = solve_lp(&p).unwrap();
        if s.status != LpStatus::Optimal {
            continue;
        }
        let x = DVector::from_column_slice(&s.x);
        let ax = &p.a * &x;
        let tol = 1e-9 * (1.0 + p.b.amax());
        for i in 0..p.num_rows() {
            let viol = match p.rows[i] {
                RowSense::Le => (ax[i] - p.b[i]).max(0.0),
                RowSense::Ge => (p.b[i] - ax[i]).max(0.0),
                RowSense::Eq => (ax[i] - p.b[i]).abs(),
            };
            assert!(viol <= tol);
        }
        assert!((s.objective - s.dual_objective).abs() <= 1e-7 * (1.0 + s.objective.abs()));
        // weak duality in minimisation form
        let (primal_min, dual_min) = match p.sense {
            ObjectiveSense::Minimize => (s.objective, s.dual_objective),
            ObjectiveSense::Maximize => (-s.objective, -s.dual_objective),
        };
        assert!(dual_min <= primal_min + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn row_permutation_does_not_change_the_objective(seed in any::<u64>(), shift in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_bounded_lp(&mut rng);
        let q = p.num_rows();
        let perm: Vec<usize> = (0..q).map(|i| (i + shift) % q).collect();
        let a = DMatrix::from_fn(q, p.num_vars(), |i, j| p.a[(perm[i], j)]);
        let b = DVector::from_fn(q, |i, _| p.b[perm[i]]);
        let rows = perm.iter().map(|&i| p.rows[i]).collect();
        let permuted = LpProblem::new(p.sense, p.cost.clone(), a, b, rows).unwrap();
        let (s1, s2) = (solve_lp(&p).unwrap(), solve_lp(&permuted).unwrap());
        prop_assert_eq!(s1.status, s2.status);
        if s1.status == LpStatus::Optimal {
            prop_assert!((s1.objective - s2.objective).abs() <= 1e-9);
        }
    }
}

const XS: [f64; 10] = [1.2, 2.5, 3.1, 4.8, 5.0, 6.7, 7.3, 8.9, 9.4, 10.6];
const YS: [f64; 10] = [3.1, 5.2, 6.8, 9.9, 10.1, 14.0, 15.2, 17.7, 19.5, 21.4];

#[test]
fn ols_matches_normal_equations_closed_form() {
    let n = XS.len() as f64;
    let xbar = XS.iter().sum::<f64>() / n;
    let ybar = YS.iter().sum::<f64>() / n;
    let sxy: f64 = XS.iter().zip(YS).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let sxx: f64 = XS.iter().map(|x| (x - xbar).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;

    let design = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { XS[i] });
    let fit = ols_regress(&design, &DVector::from_column_slice(&YS)).unwrap();
    assert!((fit.coefficients[0] - intercept).abs() <= 1e-10);
    assert!((fit.coefficients[1] - slope).abs() <= 1e-10);

    // slope standard error from the textbook formula
    let se = (fit.rss / (n - 2.0) / sxx).sqrt();
    assert!((fit.std_errors[1] - se).abs() <= 1e-10);
    assert!(fit.p_values[1] < 1e-10);
}

#[test]
fn ols_residuals_are_orthogonal_to_the_design() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let n = rng.random_range(8..40);
        let k = rng.random_range(2..5);
        let design = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.random_range(0.0..10.0) });
        let y = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let fit = ols_regress(&design, &y).unwrap();
        let e = DVector::from_column_slice(&fit.residuals);
        for j in 0..k {
            assert!(design.column(j).dot(&e).abs() <= 1e-8);
        }
    }
}
