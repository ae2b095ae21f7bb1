#![allow(dead_code)]

use deasel::dea::DataSet;
use deasel::group_lasso::{AdmmState, GlProblem};
use deasel::numlin::{solve_lp, LpProblem, ObjectiveSense, RowSense};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_panel(rng: &mut ChaCha8Rng, m: usize, s: usize, n: usize) -> DataSet {
    let x = DMatrix::from_fn(m, n, |_, _| rng.random_range(1.0..10.0));
    let y = DMatrix::from_fn(s, n, |_, _| rng.random_range(1.0..10.0));
    DataSet::unlabeled(x, y).unwrap()
}

/// The additive multiplier LP of every unit stacked into one problem in the
/// original variables: unit `k` owns `(v_k, u_k, w_k)` with `v, u ≥ 1`,
/// `w` free, rows `v_kᵀx_j − u_kᵀy_j + w_k ≥ 0` for every `j`, and the
/// objective `Σ_k v_kᵀx_k − u_kᵀy_k + w_k`.
pub fn stacked_additive_lp(data: &DataSet) -> f64 {
    let (m, s, n) = (data.num_inputs(), data.num_outputs(), data.num_dmus());
    let d = m + s + 1;
    let mut a = DMatrix::zeros(n * n, n * d);
    let mut c = DVector::zeros(n * d);
    let mut lower = vec![1.0; n * d];
    for k in 0..n {
        let base = k * d;
        for j in 0..n {
            for i in 0..m {
                a[(k * n + j, base + i)] = data.x[(i, j)];
            }
            for r in 0..s {
                a[(k * n + j, base + m + r)] = -data.y[(r, j)];
            }
            a[(k * n + j, base + m + s)] = 1.0;
        }
        for i in 0..m {
            c[base + i] = data.x[(i, k)];
        }
        for r in 0..s {
            c[base + m + r] = -data.y[(r, k)];
        }
        c[base + m + s] = 1.0;
        lower[base + m + s] = f64::NEG_INFINITY;
    }
    let lp = LpProblem::new(ObjectiveSense::Minimize, c, a, DVector::zeros(n * n), vec![RowSense::Ge; n * n])
        .unwrap()
        .with_bounds(lower, vec![f64::INFINITY; n * d])
        .unwrap();
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal());
    sol.objective
}

/// `L(z) = cᵀz − γ_sᵀr_s − γ_vᵀr_v − γ_eᵀr_e + (‖r_s‖² + ‖r_v‖² + ‖r_e‖²)/(2μ)`
/// with `r_s = A_s z + b − s`, `r_v = A_v z − v̄`, `r_e = A_e z − b_e`.
pub fn augmented_lagrangian(p: &GlProblem, st: &AdmmState, z: &DVector<f64>) -> f64 {
    let v = |x: &[f64]| DVector::from_column_slice(x);
    let rs = p.dense_a_s() * z + v(&p.b()) - v(&st.s);
    let rv = p.dense_a_v() * z - v(&st.vbar);
    let re = p.dense_a_e() * z - v(p.b_eq());
    v(p.cost()).dot(z) - v(&st.gamma_s).dot(&rs) - v(&st.gamma_v).dot(&rv) - v(&st.gamma_e).dot(&re)
        + (rs.norm_squared() + rv.norm_squared() + re.norm_squared()) / (2.0 * st.mu)
}

pub fn random_state(p: &GlProblem, rng: &mut ChaCha8Rng, mu: f64) -> AdmmState {
    let mut st = AdmmState::cold_start(p, mu);
    let mut fill = |v: &mut Vec<f64>, lo: f64| v.iter_mut().for_each(|t| *t = rng.random_range(lo..1.0));
    fill(&mut st.s, 0.0);
    fill(&mut st.vbar, -1.0);
    fill(&mut st.gamma_s, -1.0);
    fill(&mut st.gamma_v, -1.0);
    fill(&mut st.gamma_e, -1.0);
    st
}
