use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::problem::GlProblem;
use super::{Method, SelectionResult};
use crate::error::{Error, Result};
use crate::numlin::CholeskyFactor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmOptions {
    /// Penalty parameter, constant for the whole solve.
    pub mu: f64,
    pub max_iter: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
    /// Relative threshold on group norms for calling an input selected.
    pub eps_sel: f64,
    /// Anderson acceleration memory; `0` runs plain ADMM.
    #[serde(default)]
    pub anderson: usize,
}

impl AdmmOptions {
    /// Defaults scaled to the problem: tolerances `1e-6·√(rows)`.
    pub fn for_problem(problem: &GlProblem) -> Self {
        let tol = 1e-6 * (problem.total_rows() as f64).sqrt();
        AdmmOptions { mu: 1.0, max_iter: 5000, primal_tol: tol, dual_tol: tol, eps_sel: 1e-6, anderson: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.mu, self.primal_tol, self.dual_tol, self.eps_sel];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.max_iter == 0 {
            return Err(Error::InvalidInput(format!("ADMM options must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Cached Cholesky factors of the unit blocks of
/// `A_sᵀA_s + A_vᵀA_v + A_eᵀA_e`, valid for one value of `μ`.
#[derive(Debug, Clone)]
pub struct GramFactor {
    mu: f64,
    blocks: Vec<CholeskyFactor>,
}

impl GramFactor {
    pub fn new(problem: &GlProblem, mu: f64) -> Result<Self> {
        let blocks = if problem.gram_is_shared() {
            vec![CholeskyFactor::new(&problem.gram_block(0))?]
        } else {
            (0..problem.num_dmus()).map(|k| CholeskyFactor::new(&problem.gram_block(k))).collect::<Result<Vec<_>>>()?
        };
        Ok(GramFactor { mu, blocks })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn block(&self, k: usize) -> &CholeskyFactor {
        if self.blocks.len() == 1 {
            &self.blocks[0]
        } else {
            &self.blocks[k]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub primal: f64,
    pub dual: f64,
    pub objective: f64,
}

/// Iterates and multipliers of the ADMM solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub mu: f64,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub vbar: Vec<f64>,
    pub gamma_s: Vec<f64>,
    pub gamma_v: Vec<f64>,
    pub gamma_e: Vec<f64>,
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `cᵀz + λ Σ_i ‖v̄_i‖₂`.
    pub objective: f64,
    pub converged: bool,
    pub history: Vec<IterRecord>,
}

impl AdmmState {
    /// `z = 0`, `s = max(0, b)`, `v̄ = 0`, zero multipliers.
    pub fn cold_start(problem: &GlProblem, mu: f64) -> Self {
        AdmmState {
            mu,
            z: vec![0.0; problem.dim()],
            s: problem.b().into_iter().map(|v| v.max(0.0)).collect(),
            vbar: vec![0.0; problem.rows_v()],
            gamma_s: vec![0.0; problem.rows_s()],
            gamma_v: vec![0.0; problem.rows_v()],
            gamma_e: vec![0.0; problem.rows_e()],
            iteration: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            objective: 0.0,
            converged: false,
            history: Vec::new(),
        }
    }

    /// `cᵀz` plus the shift constant: the loss in the original variables.
    pub fn loss(&self, problem: &GlProblem) -> f64 {
        problem.linear_objective(&self.z) + problem.objective_offset()
    }
}

/// `T_κ(a) = a/‖a‖₂ · max(0, ‖a‖₂ − κ)`, zero when `‖a‖₂ ≤ κ`.
pub fn block_soft_threshold(a: &[f64], kappa: f64) -> Vec<f64> {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= kappa || norm == 0.0 {
        return vec![0.0; a.len()];
    }
    let scale = (norm - kappa) / norm;
    a.iter().map(|v| v * scale).collect()
}

fn norm2(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|t| t * t).sum::<f64>().sqrt()
}

/// Scratch buffers reused across iterations.
struct Workspace {
    r: Vec<f64>,
    asz: Vec<f64>,
    rhs: Vec<f64>,
    ds: Vec<f64>,
    dv: Vec<f64>,
    block: Vec<f64>,
}

impl Workspace {
    fn new(problem: &GlProblem) -> Self {
        Workspace {
            r: vec![0.0; problem.rows_s()],
            asz: vec![0.0; problem.rows_s()],
            rhs: vec![0.0; problem.dim()],
            ds: vec![0.0; problem.rows_s()],
            dv: vec![0.0; problem.rows_v()],
            block: vec![0.0; problem.block_dim()],
        }
    }
}

#[inline]
fn b_at(problem: &GlProblem, t: usize) -> f64 {
    let n = problem.num_dmus();
    if t < n * n {
        problem.b_env()[t % n]
    } else {
        0.0
    }
}

fn check_factor(state: &AdmmState, factor: &GramFactor) -> Result<()> {
    if factor.mu() != state.mu {
        return Err(Error::ContractViolation(format!(
            "Gram factor was built for mu = {}, state uses mu = {}",
            factor.mu(),
            state.mu
        )));
    }
    Ok(())
}

fn z_step_into(problem: &GlProblem, state: &AdmmState, factor: &GramFactor, ws: &mut Workspace, z: &mut [f64]) {
    let mu = state.mu;
    let (m, s, n) = (problem.num_inputs(), problem.num_outputs(), problem.num_dmus());
    // r = γ_s + (s − b)/μ, applied through A_sᵀ
    for (t, rt) in ws.r.iter_mut().enumerate() {
        *rt = state.gamma_s[t] + (state.s[t] - b_at(problem, t)) / mu;
    }
    problem.apply_s_t_into(&ws.r, &mut ws.rhs);
    for t in 0..problem.rows_v() {
        ws.rhs[t] += state.gamma_v[t] + state.vbar[t] / mu;
    }
    if problem.rows_e() > 0 {
        for k in 0..n {
            let coef = state.gamma_e[k] + problem.b_eq()[k] / mu;
            for q in 0..s {
                ws.rhs[problem.u_index(q, k)] += problem.yv(q, k) * coef;
            }
        }
    }
    for (v, c) in ws.rhs.iter_mut().zip(problem.cost()) {
        *v = mu * (*v - c);
    }
    for k in 0..n {
        problem.gather_block(&ws.rhs, k, &mut ws.block);
        factor.block(k).solve_in_place(&mut ws.block);
        problem.scatter_block(&ws.block, k, z);
    }
    debug_assert_eq!(z.len(), n * (m + s) + if problem.has_w() { n } else { 0 });
}

/// Solves `(1/μ) G z = A_sᵀγ_s + A_vᵀγ_v + A_eᵀγ_e − c + (1/μ)(A_sᵀ(s − b) + A_vᵀv̄ + A_eᵀb_e)`
/// with the cached block factors of `G`.
pub fn z_step(problem: &GlProblem, state: &AdmmState, factor: &GramFactor) -> Result<Vec<f64>> {
    check_factor(state, factor)?;
    let mut ws = Workspace::new(problem);
    let mut z = vec![0.0; problem.dim()];
    z_step_into(problem, state, factor, &mut ws, &mut z);
    Ok(z)
}

/// `s = max(0, A_s z + b − μγ_s)`.
pub fn s_step(problem: &GlProblem, state: &AdmmState) -> Vec<f64> {
    let asz = problem.apply_s(&state.z);
    asz.iter()
        .zip(&state.gamma_s)
        .enumerate()
        .map(|(t, (a, g))| (a + b_at(problem, t) - state.mu * g).max(0.0))
        .collect()
}

/// Writes `T_κ(z_i − μγ_i)` for every group `i` into `vbar`, with
/// `κ = μλω_i` and `ω_i` the group weight.
fn shrink_groups_into(problem: &GlProblem, z: &[f64], gamma_v: &[f64], mu: f64, vbar: &mut [f64]) {
    for i in 0..problem.num_inputs() {
        let kappa = mu * problem.lambda * problem.group_weight(i);
        let norm = problem.group(i).map(|t| (z[t] - mu * gamma_v[t]).powi(2)).sum::<f64>().sqrt();
        let scale = if norm <= kappa || norm == 0.0 { 0.0 } else { (norm - kappa) / norm };
        for t in problem.group(i) {
            vbar[t] = scale * (z[t] - mu * gamma_v[t]);
        }
    }
}

/// `v̄ = T_{μλω_i}(A_v z − μγ_v)` group by group, `ω_i` the group weight.
pub fn vbar_step(problem: &GlProblem, state: &AdmmState) -> Vec<f64> {
    let mut vbar = vec![0.0; problem.rows_v()];
    shrink_groups_into(problem, &state.z, &state.gamma_v, state.mu, &mut vbar);
    vbar
}

fn primal_norm(problem: &GlProblem, asz: &[f64], z: &[f64], s: &[f64], vbar: &[f64]) -> f64 {
    let ps = asz.iter().zip(s).enumerate().map(|(t, (a, sv))| a + b_at(problem, t) - sv);
    let pv = z[..problem.rows_v()].iter().zip(vbar).map(|(a, v)| a - v);
    let pe = equality_values(problem, z).zip(problem.b_eq()).map(|(a, be)| a - be);
    norm2(ps.chain(pv).chain(pe))
}

fn equality_values<'a>(problem: &'a GlProblem, z: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    (0..problem.rows_e())
        .map(move |k| (0..problem.num_outputs()).map(|r| problem.yv(r, k) * z[problem.u_index(r, k)]).sum::<f64>())
}

fn dual_norm(problem: &GlProblem, mu: f64, ds: &[f64], dv: &[f64], out: &mut [f64]) -> f64 {
    problem.apply_s_t_into(ds, out);
    for (gt, d) in out.iter_mut().zip(dv) {
        *gt += d;
    }
    norm2(out.iter().copied()) / mu
}

/// Primal residual `‖(A_s z + b − s, A_v z − v̄, A_e z − b_e)‖₂` and dual
/// residual `(1/μ)‖A_sᵀ(s − s_prev) + A_vᵀ(v̄ − v̄_prev)‖₂`.
pub fn residuals(problem: &GlProblem, prev: &AdmmState, state: &AdmmState) -> (f64, f64) {
    let asz = problem.apply_s(&state.z);
    let primal = primal_norm(problem, &asz, &state.z, &state.s, &state.vbar);
    let ds: Vec<f64> = state.s.iter().zip(&prev.s).map(|(a, b)| a - b).collect();
    let dv: Vec<f64> = state.vbar.iter().zip(&prev.vbar).map(|(a, b)| a - b).collect();
    let mut out = vec![0.0; problem.dim()];
    (primal, dual_norm(problem, state.mu, &ds, &dv, &mut out))
}

/// One full sweep: z, s, v̄, then the multipliers.
fn iterate(problem: &GlProblem, state: &mut AdmmState, factor: &GramFactor, ws: &mut Workspace) {
    let mu = state.mu;
    let mut z = std::mem::take(&mut state.z);
    z_step_into(problem, state, factor, ws, &mut z);
    state.z = z;

    problem.apply_s_into(&state.z, &mut ws.asz);
    for t in 0..problem.rows_s() {
        let h = ws.asz[t] + b_at(problem, t);
        let s_new = (h - mu * state.gamma_s[t]).max(0.0);
        ws.ds[t] = s_new - state.s[t];
        state.s[t] = s_new;
        state.gamma_s[t] -= (h - s_new) / mu;
    }
    ws.dv.copy_from_slice(&state.vbar);
    shrink_groups_into(problem, &state.z, &state.gamma_v, mu, &mut state.vbar);
    for t in 0..problem.rows_v() {
        ws.dv[t] = state.vbar[t] - ws.dv[t];
        state.gamma_v[t] -= (state.z[t] - state.vbar[t]) / mu;
    }
    for (k, ae) in equality_values(problem, &state.z).enumerate() {
        state.gamma_e[k] -= (ae - problem.b_eq()[k]) / mu;
    }

    let primal = primal_norm(problem, &ws.asz, &state.z, &state.s, &state.vbar);
    let dual = dual_norm(problem, mu, &ws.ds, &ws.dv, &mut ws.rhs);
    state.iteration += 1;
    state.primal_residual = primal;
    state.dual_residual = dual;
    state.objective = problem.linear_objective(&state.z) + problem.lambda * problem.penalty(&state.vbar);
    state.history.push(IterRecord { primal, dual, objective: state.objective });
}

fn converged(state: &AdmmState, opts: &AdmmOptions) -> bool {
    state.primal_residual <= opts.primal_tol && state.dual_residual <= opts.dual_tol
}

/// Fixed-point coordinates of a sweep: `ψ = (s − μγ_s, v̄ − μγ_v, −μγ_e)`.
/// A sweep maps the state encoded by `ψ` to the state encoded by `F(ψ)`.
fn psi_of(problem: &GlProblem, st: &AdmmState) -> Vec<f64> {
    let mu = st.mu;
    let mut psi = Vec::with_capacity(problem.rows_s() + problem.rows_v() + problem.rows_e());
    psi.extend(st.s.iter().zip(&st.gamma_s).map(|(s, g)| s - mu * g));
    psi.extend(st.vbar.iter().zip(&st.gamma_v).map(|(v, g)| v - mu * g));
    psi.extend(st.gamma_e.iter().map(|g| -mu * g));
    psi
}

/// Inverse of [`psi_of`]: `s = ψ₊`, `v̄ = T(ψ_v)`, multipliers from the rest.
fn set_psi(problem: &GlProblem, st: &mut AdmmState, psi: &[f64], scratch: &mut [f64]) {
    let mu = st.mu;
    let (ns, nv) = (problem.rows_s(), problem.rows_v());
    for t in 0..ns {
        st.s[t] = psi[t].max(0.0);
        st.gamma_s[t] = (st.s[t] - psi[t]) / mu;
    }
    let a = &psi[ns..ns + nv];
    scratch.fill(0.0);
    shrink_groups_into(problem, a, scratch, mu, &mut st.vbar);
    for t in 0..nv {
        st.gamma_v[t] = (st.vbar[t] - a[t]) / mu;
    }
    for (k, g) in st.gamma_e.iter_mut().enumerate() {
        *g = -psi[ns + nv + k] / mu;
    }
}

/// Type-II Anderson acceleration of the sweep map `F` on `ψ`. An
/// extrapolated point is kept only if its fixed-point residual `‖F(ψ) − ψ‖`
/// does not grow; otherwise the plain step is taken and the memory cleared.
/// Every state passed to the convergence test is the output of a genuine
/// sweep, so the stopping rule means the same as for plain ADMM.
fn anderson_loop(problem: &GlProblem, state: &mut AdmmState, factor: &GramFactor, ws: &mut Workspace, opts: &AdmmOptions) {
    let mem = opts.anderson;
    let mut scratch = vec![0.0; problem.rows_v()];
    let mut ds_hist: VecDeque<Vec<f64>> = VecDeque::with_capacity(mem);
    let mut dg_hist: VecDeque<Vec<f64>> = VecDeque::with_capacity(mem);
    let mut eval = |psi: &[f64], state: &mut AdmmState, ws: &mut Workspace| -> (Vec<f64>, Vec<f64>) {
        set_psi(problem, state, psi, &mut scratch);
        iterate(problem, state, factor, ws);
        let f = psi_of(problem, state);
        let g = f.iter().zip(psi).map(|(a, b)| a - b).collect();
        (f, g)
    };

    let mut psi = psi_of(problem, state);
    let (mut f, mut g) = eval(&psi, state, ws);
    while !converged(state, opts) && state.iteration < opts.max_iter {
        let mut cand = f.clone();
        let extrapolated = extrapolate(&ds_hist, &dg_hist, &g, &mut cand);
        let (mut f_c, mut g_c) = eval(&cand, state, ws);
        if converged(state, opts) {
            break;
        }
        if extrapolated && norm2(g_c.iter().copied()) > norm2(g.iter().copied()) {
            ds_hist.clear();
            dg_hist.clear();
            if state.iteration >= opts.max_iter {
                break;
            }
            cand.copy_from_slice(&f);
            (f_c, g_c) = eval(&cand, state, ws);
        }
        if ds_hist.len() == mem {
            ds_hist.pop_front();
            dg_hist.pop_front();
        }
        ds_hist.push_back(cand.iter().zip(&psi).map(|(a, b)| a - b).collect());
        dg_hist.push_back(g_c.iter().zip(&g).map(|(a, b)| a - b).collect());
        (psi, f, g) = (cand, f_c, g_c);
    }
    state.converged = converged(state, opts);
}

/// `cand ← cand − Σ_j θ_j (Δψ_j + Δg_j)` with `θ` the least-squares fit of
/// `g` by the `Δg_j`. Returns false when there is no usable history.
fn extrapolate(ds: &VecDeque<Vec<f64>>, dg: &VecDeque<Vec<f64>>, g: &[f64], cand: &mut [f64]) -> bool {
    let k = dg.len();
    if k == 0 {
        return false;
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut gram = DMatrix::<f64>::from_fn(k, k, |a, b| dot(&dg[a], &dg[b]));
    let rhs = DVector::<f64>::from_fn(k, |a, _| dot(&dg[a], g));
    let ridge = 1e-10 * gram.diagonal().max();
    for a in 0..k {
        gram[(a, a)] += ridge;
    }
    let Some(chol) = gram.cholesky() else {
        return false;
    };
    let theta = chol.solve(&rhs);
    for (j, th) in theta.iter().enumerate() {
        for (c, (s, y)) in cand.iter_mut().zip(ds[j].iter().zip(&dg[j])) {
            *c -= th * (s + y);
        }
    }
    true
}

/// Runs ADMM from a cold start until both residuals fall below tolerance or
/// the iteration cap is reached. A non-converged result is still returned,
/// flagged through `converged`.
pub fn admm_solve(problem: &GlProblem, opts: &AdmmOptions) -> Result<(AdmmState, SelectionResult)> {
    opts.validate()?;
    let factor = GramFactor::new(problem, opts.mu)?;
    let mut state = AdmmState::cold_start(problem, opts.mu);
    let mut ws = Workspace::new(problem);
    if opts.anderson > 0 {
        anderson_loop(problem, &mut state, &factor, &mut ws, opts);
    } else {
        while state.iteration < opts.max_iter {
            iterate(problem, &mut state, &factor, &mut ws);
            if converged(&state, opts) {
                state.converged = true;
                break;
            }
        }
    }
    if !state.converged {
        log::warn!(
            "ADMM stopped after {} iterations (primal {:.3e}, dual {:.3e})",
            state.iteration,
            state.primal_residual,
            state.dual_residual
        );
    }
    let selection = select_inputs(&state, problem, opts.eps_sel);
    Ok((state, selection))
}

/// Inputs whose group norm exceeds `eps_sel·(1 + max group norm)`.
pub fn select_inputs(state: &AdmmState, problem: &GlProblem, eps_sel: f64) -> SelectionResult {
    let norms = problem.group_norms(&state.vbar);
    SelectionResult {
        selected: select_by_norms(&norms, eps_sel),
        group_norms: norms,
        lambda: Some(problem.lambda),
        method: Method::Gl,
        converged: state.converged,
        iterations: state.iteration,
        notes: Vec::new(),
    }
}

pub(crate) fn select_by_norms(norms: &[f64], eps_sel: f64) -> Vec<usize> {
    let max = norms.iter().copied().fold(0.0, f64::max);
    let threshold = eps_sel * (1.0 + max);
    norms.iter().enumerate().filter(|(_, v)| **v > threshold).map(|(i, _)| i).collect()
}
