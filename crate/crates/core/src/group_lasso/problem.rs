use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector};
use serde::{Deserialize, Serialize};

use crate::dea::{DataSet, ModelKind};
use crate::error::{Error, Result};
use crate::numlin::{solve_lp, LpProblem, ObjectiveSense, RowSense};
use crate::par;

/// Loss model behind the group-Lasso problem.
///
/// `Additive` is the all-units additive multiplier LP (with the free `w`
/// variables); `Ccr` and `Bcc` are the radial multiplier models with the
/// normalisation rows `y_kᵀ u_k = 1`, `Bcc` adding `w`.
pub type GlModel = ModelKind;

/// The compact problem
///
/// ```text
/// min  cᵀz + λ Σ_i ‖v̄_i‖₂
/// s.t. A_s z + b = s,  s ≥ 0
///      A_v z     = v̄
///      A_e z     = b_e          (radial models only)
/// ```
///
/// with `z = (vec V, vec U, w)`: `v_{i,k}` at `k·m + i`, `u_{r,k}` at
/// `n·m + k·s + r`, `w_k` at `n(m+s) + k`. Rows of `A_s` are the `n²`
/// envelopment rows (unit `k`, constraint `j`) at `k·n + j`, then the `n·m`
/// rows `v ≥ 0`, then the `n·s` rows `u ≥ 0`. Group `i` is
/// `{v̄_{i,k} : k = 1..n}`.
///
/// Every unit only touches its own block `(v_k, u_k, w_k)` so all operators
/// are applied block by block and never materialised.
///
/// With [`Scaling::RowMeans`] the weights are stored in data units:
/// `v'_{i,k} = x̄_i·v_{i,k}` and `u'_{r,k} = ȳ_r·u_{r,k}`, where `x̄_i`, `ȳ_r`
/// are row means. This is an exact change of variables: `A_s`, `A_e` and `c`
/// are assembled from the mean-normalised panel, `b` keeps its original
/// values, and the penalty becomes `Σ_i ‖v̄'_i‖₂ / x̄_i`. It equalises the
/// column scales ADMM sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlProblem {
    pub model: GlModel,
    pub lambda: f64,
    pub shift: bool,
    pub scaling: Scaling,
    m: usize,
    s: usize,
    n: usize,
    has_w: bool,
    input_scale: Vec<f64>,
    output_scale: Vec<f64>,
    /// Inputs in scaled units, `m × n`.
    #[serde(with = "matrix_serde")]
    x: DMatrix<f64>,
    /// Outputs in scaled units, `s × n`.
    #[serde(with = "matrix_serde")]
    y: DMatrix<f64>,
    /// Envelopment offset for constraint `j`, identical for every unit.
    b_env: Vec<f64>,
    /// Right-hand side of the normalisation row of unit `k`.
    b_eq: Vec<f64>,
    cost: Vec<f64>,
    objective_offset: f64,
}

/// Variable scaling applied during assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    None,
    #[default]
    RowMeans,
}

/// Builds the group-Lasso problem for `data` with the default
/// [`Scaling::RowMeans`].
///
/// With `shift` the weights are measured from a lower bound of one
/// (`ṽ = v − 1`, `ũ = u − 1`) and the constant terms move into `b` and the
/// objective offset; without it the bounds are zero.
pub fn assemble_gl_problem(data: &DataSet, model: GlModel, lambda: f64, shift: bool) -> Result<GlProblem> {
    assemble_gl_problem_with(data, model, lambda, shift, Scaling::default())
}

pub fn assemble_gl_problem_with(
    data: &DataSet,
    model: GlModel,
    lambda: f64,
    shift: bool,
    scaling: Scaling,
) -> Result<GlProblem> {
    data.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    let (m, s, n) = (data.num_inputs(), data.num_outputs(), data.num_dmus());
    let has_w = model != ModelKind::Ccr;
    let radial = model.is_radial();
    let row_means = |mat: &DMatrix<f64>| -> Vec<f64> {
        match scaling {
            Scaling::None => vec![1.0; mat.nrows()],
            Scaling::RowMeans => (0..mat.nrows()).map(|i| mat.row(i).mean()).collect(),
        }
    };
    let input_scale = row_means(&data.x);
    let output_scale = row_means(&data.y);
    let x = DMatrix::from_fn(m, n, |i, k| data.x[(i, k)] / input_scale[i]);
    let y = DMatrix::from_fn(s, n, |r, k| data.y[(r, k)] / output_scale[r]);
    let col_sum = |mat: &DMatrix<f64>, k: usize| mat.column(k).sum();
    let sh = if shift { 1.0 } else { 0.0 };

    let b_env: Vec<f64> = (0..n).map(|j| sh * (col_sum(&data.x, j) - col_sum(&data.y, j))).collect();
    let b_eq: Vec<f64> = if radial {
        (0..n).map(|k| 1.0 - sh * col_sum(&data.y, k)).collect()
    } else {
        Vec::new()
    };
    if radial && shift {
        if let Some(k) = b_eq.iter().position(|v| *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "shifted radial problem is infeasible: outputs of unit {k} sum above 1, so u ≥ 1 cannot satisfy yᵀu = 1"
            )));
        }
    }

    let dim = n * (m + s) + if has_w { n } else { 0 };
    let mut cost = vec![0.0; dim];
    for k in 0..n {
        for i in 0..m {
            cost[k * m + i] = data.x[(i, k)] / input_scale[i];
        }
        if !radial {
            for r in 0..s {
                cost[n * m + k * s + r] = -data.y[(r, k)] / output_scale[r];
            }
        }
        if has_w {
            cost[n * (m + s) + k] = 1.0;
        }
    }
    let objective_offset: f64 = (0..n)
        .map(|k| {
            let xs = sh * col_sum(&data.x, k);
            if radial {
                xs
            } else {
                xs - sh * col_sum(&data.y, k)
            }
        })
        .sum();

    Ok(GlProblem {
        model,
        lambda,
        shift,
        scaling,
        m,
        s,
        n,
        has_w,
        input_scale,
        output_scale,
        x,
        y,
        b_env,
        b_eq,
        cost,
        objective_offset,
    })
}

impl GlProblem {
    pub fn num_inputs(&self) -> usize {
        self.m
    }
    pub fn num_outputs(&self) -> usize {
        self.s
    }
    pub fn num_dmus(&self) -> usize {
        self.n
    }
    pub fn has_w(&self) -> bool {
        self.has_w
    }
    /// Length of `z`.
    pub fn dim(&self) -> usize {
        self.n * (self.m + self.s) + if self.has_w { self.n } else { 0 }
    }
    /// Size of one unit's block `(v_k, u_k, w_k)`.
    pub fn block_dim(&self) -> usize {
        self.m + self.s + usize::from(self.has_w)
    }
    pub fn rows_s(&self) -> usize {
        self.n * self.n + self.n * self.m + self.n * self.s
    }
    pub fn rows_v(&self) -> usize {
        self.n * self.m
    }
    pub fn rows_e(&self) -> usize {
        self.b_eq.len()
    }
    pub fn total_rows(&self) -> usize {
        self.rows_s() + self.rows_v() + self.rows_e()
    }
    pub fn cost(&self) -> &[f64] {
        &self.cost
    }
    pub fn b_eq(&self) -> &[f64] {
        &self.b_eq
    }
    /// Constant dropped by the shift; `cᵀz + offset` is the loss in the
    /// original (unshifted) variables.
    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    #[inline]
    pub(crate) fn xv(&self, i: usize, k: usize) -> f64 {
        self.x[(i, k)]
    }
    #[inline]
    pub(crate) fn yv(&self, r: usize, k: usize) -> f64 {
        self.y[(r, k)]
    }
    #[inline]
    pub(crate) fn v_index(&self, i: usize, k: usize) -> usize {
        k * self.m + i
    }
    #[inline]
    pub(crate) fn u_index(&self, r: usize, k: usize) -> usize {
        self.n * self.m + k * self.s + r
    }
    #[inline]
    pub(crate) fn w_index(&self, k: usize) -> usize {
        self.n * (self.m + self.s) + k
    }

    /// Optimal loss at `λ = 0`. The unpenalised problem separates into one
    /// multiplier LP per unit, each solved exactly by simplex.
    pub fn unpenalized_loss(&self) -> Result<f64> {
        let (m, s, n) = (self.m, self.s, self.n);
        let d = self.block_dim();
        let blocks = par::map_range(n, |k| -> Result<f64> {
            let rows = n + usize::from(self.rows_e() > 0);
            let mut a = DMatrix::zeros(rows, d);
            let mut b = DVector::zeros(rows);
            let mut senses = vec![RowSense::Ge; n];
            for j in 0..n {
                a.view_mut((j, 0), (1, m)).copy_from(&self.x.column(j).transpose());
                a.view_mut((j, m), (1, s)).copy_from(&(-self.y.column(j).transpose()));
                if self.has_w {
                    a[(j, m + s)] = 1.0;
                }
                b[j] = -self.b_env[j];
            }
            if self.rows_e() > 0 {
                a.view_mut((n, m), (1, s)).copy_from(&self.y.column(k).transpose());
                b[n] = self.b_eq[k];
                senses.push(RowSense::Eq);
            }
            let mut block = vec![0.0; d];
            self.gather_block(&self.cost, k, &mut block);
            let mut lower = vec![0.0; d];
            if self.has_w {
                lower[m + s] = f64::NEG_INFINITY;
            }
            let lp = LpProblem::new(ObjectiveSense::Minimize, DVector::from_vec(block), a, b, senses)?
                .with_bounds(lower, vec![f64::INFINITY; d])?;
            let sol = solve_lp(&lp)?;
            if !sol.is_optimal() {
                return Err(Error::SolverFailure(format!("unpenalised LP of unit {k}: {:?}", sol.status)));
            }
            Ok(sol.objective)
        });
        Ok(blocks.into_iter().sum::<Result<f64>>()? + self.objective_offset)
    }

    /// The full offset vector `b` of the `A_s` rows.
    pub fn b(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.rows_s()];
        for k in 0..self.n {
            b[k * self.n..(k + 1) * self.n].copy_from_slice(&self.b_env);
        }
        b
    }

    pub(crate) fn b_env(&self) -> &[f64] {
        &self.b_env
    }

    /// Copies unit `k`'s block of `z` into `out`.
    pub(crate) fn gather_block(&self, z: &[f64], k: usize, out: &mut [f64]) {
        let (m, s) = (self.m, self.s);
        out[..m].copy_from_slice(&z[k * m..(k + 1) * m]);
        let u0 = self.u_index(0, k);
        out[m..m + s].copy_from_slice(&z[u0..u0 + s]);
        if self.has_w {
            out[m + s] = z[self.w_index(k)];
        }
    }

    pub(crate) fn scatter_block(&self, block: &[f64], k: usize, z: &mut [f64]) {
        let (m, s) = (self.m, self.s);
        z[k * m..(k + 1) * m].copy_from_slice(&block[..m]);
        let u0 = self.u_index(0, k);
        z[u0..u0 + s].copy_from_slice(&block[m..m + s]);
        if self.has_w {
            z[self.w_index(k)] = block[m + s];
        }
    }

    /// `out = A_s z`. The envelopment rows form the `n × n` column-major
    /// matrix `Xᵀ V − Yᵀ U + 1 wᵀ` (column `k` is unit `k`).
    pub(crate) fn apply_s_into(&self, z: &[f64], out: &mut [f64]) {
        let (m, s, n) = (self.m, self.s, self.n);
        let (env, bounds) = out.split_at_mut(n * n);
        let mut e = DMatrixViewMut::from_slice(env, n, n);
        let v = DMatrixView::from_slice(&z[..n * m], m, n);
        let u = DMatrixView::from_slice(&z[n * m..n * (m + s)], s, n);
        e.gemm_tr(1.0, &self.x, &v, 0.0);
        e.gemm_tr(-1.0, &self.y, &u, 1.0);
        if self.has_w {
            for (k, mut col) in e.column_iter_mut().enumerate() {
                col.add_scalar_mut(z[n * (m + s) + k]);
            }
        }
        bounds.copy_from_slice(&z[..n * (m + s)]);
    }

    /// `out = A_sᵀ r`.
    pub(crate) fn apply_s_t_into(&self, r: &[f64], out: &mut [f64]) {
        let (m, s, n) = (self.m, self.s, self.n);
        let rm = DMatrixView::from_slice(&r[..n * n], n, n);
        out[..n * (m + s)].copy_from_slice(&r[n * n..]);
        let (vu, w) = out.split_at_mut(n * (m + s));
        let (v, u) = vu.split_at_mut(n * m);
        DMatrixViewMut::from_slice(v, m, n).gemm(1.0, &self.x, &rm, 1.0);
        DMatrixViewMut::from_slice(u, s, n).gemm(-1.0, &self.y, &rm, 1.0);
        if self.has_w {
            for (wk, col) in w.iter_mut().zip(rm.column_iter()) {
                *wk = col.sum();
            }
        }
    }

    /// `A_s z`.
    pub fn apply_s(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows_s()];
        self.apply_s_into(z, &mut out);
        out
    }

    /// `A_sᵀ r`.
    pub fn apply_s_t(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_s_t_into(r, &mut out);
        out
    }

    /// `A_v z`: the (scaled) `v` coordinates.
    pub fn apply_v(&self, z: &[f64]) -> Vec<f64> {
        z[..self.rows_v()].to_vec()
    }

    /// `A_e z`: the normalisation values `y_kᵀ u_k`.
    pub fn apply_e(&self, z: &[f64]) -> Vec<f64> {
        if self.rows_e() == 0 {
            return Vec::new();
        }
        (0..self.n)
            .map(|k| (0..self.s).map(|r| self.yv(r, k) * z[self.u_index(r, k)]).sum::<f64>())
            .collect()
    }

    /// Indices of group `i` inside `v̄`.
    pub fn group(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).map(move |k| self.v_index(i, k))
    }

    /// Weight of group `i` of `v̄` in the penalty, mapping it back to
    /// original weight units.
    pub fn group_weight(&self, i: usize) -> f64 {
        1.0 / self.input_scale[i]
    }

    /// `Σ_i ‖v̄_i‖₂` in original weight units.
    pub fn penalty(&self, vbar: &[f64]) -> f64 {
        self.group_norms(vbar).iter().sum()
    }

    /// Per-input `‖v̄_i‖₂` in original weight units.
    pub fn group_norms(&self, vbar: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| self.group_weight(i) * self.group(i).map(|t| vbar[t] * vbar[t]).sum::<f64>().sqrt())
            .collect()
    }

    /// Multiplier weights `(V, U, w)` in original units, with the shift undone:
    /// `V` is `m × n`, `U` is `s × n`, `w` has length `n` (empty for CCR).
    pub fn original_weights(&self, z: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, Vec<f64>) {
        let sh = if self.shift { 1.0 } else { 0.0 };
        let v = DMatrix::from_fn(self.m, self.n, |i, k| z[self.v_index(i, k)] / self.input_scale[i] + sh);
        let u = DMatrix::from_fn(self.s, self.n, |r, k| z[self.u_index(r, k)] / self.output_scale[r] + sh);
        let w = if self.has_w { (0..self.n).map(|k| z[self.w_index(k)]).collect() } else { Vec::new() };
        (v, u, w)
    }

    /// `cᵀz`.
    pub fn linear_objective(&self, z: &[f64]) -> f64 {
        self.cost.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    /// Dense `A_s`, for inspection and testing.
    pub fn dense_a_s(&self) -> DMatrix<f64> {
        let (m, s, n) = (self.m, self.s, self.n);
        let mut a = DMatrix::zeros(self.rows_s(), self.dim());
        for k in 0..n {
            for j in 0..n {
                let row = k * n + j;
                for i in 0..m {
                    a[(row, self.v_index(i, k))] = self.xv(i, j);
                }
                for r in 0..s {
                    a[(row, self.u_index(r, k))] = -self.yv(r, j);
                }
                if self.has_w {
                    a[(row, self.w_index(k))] = 1.0;
                }
            }
        }
        for t in 0..n * m {
            a[(n * n + t, t)] = 1.0;
        }
        for t in 0..n * s {
            a[(n * n + n * m + t, n * m + t)] = 1.0;
        }
        a
    }

    pub fn dense_a_v(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows_v(), self.dim());
        for t in 0..self.rows_v() {
            a[(t, t)] = 1.0;
        }
        a
    }

    pub fn dense_a_e(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows_e(), self.dim());
        for k in 0..self.rows_e() {
            for r in 0..self.s {
                a[(k, self.u_index(r, k))] = self.yv(r, k);
            }
        }
        a
    }

    /// Gram block `A_sᵀA_s + A_vᵀA_v + A_eᵀA_e` restricted to unit `k`.
    pub(crate) fn gram_block(&self, k: usize) -> DMatrix<f64> {
        let (m, s) = (self.m, self.s);
        let mut g = self.envelopment_gram();
        if self.rows_e() > 0 {
            let yk = self.y.column(k);
            g.view_mut((m, m), (s, s)).ger(1.0, &yk, &yk, 1.0);
        }
        g
    }

    /// `Σ_j a_j a_jᵀ` with `a_j = (x_j, −y_j, 1)` plus the bound and selection
    /// rows; shared by all units.
    fn envelopment_gram(&self) -> DMatrix<f64> {
        let (m, s, n) = (self.m, self.s, self.n);
        let d = self.block_dim();
        let mut a = DMatrix::zeros(d, n);
        a.rows_mut(0, m).copy_from(&self.x);
        a.rows_mut(m, s).copy_from(&(-&self.y));
        if self.has_w {
            a.row_mut(m + s).fill(1.0);
        }
        let mut g = &a * a.transpose();
        for i in 0..m {
            g[(i, i)] += 2.0;
        }
        for r in 0..s {
            g[(m + r, m + r)] += 1.0;
        }
        g
    }

    /// Whether every unit shares the same Gram block.
    pub(crate) fn gram_is_shared(&self) -> bool {
        self.rows_e() == 0
    }
}

mod matrix_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Raw {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, ser: S) -> Result<S::Ok, S::Error> {
        Raw { rows: m.nrows(), cols: m.ncols(), data: m.as_slice().to_vec() }.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<DMatrix<f64>, D::Error> {
        let raw = Raw::deserialize(de)?;
        if raw.data.len() != raw.rows * raw.cols {
            return Err(serde::de::Error::custom("matrix data length does not match its shape"));
        }
        Ok(DMatrix::from_vec(raw.rows, raw.cols, raw.data))
    }
}
