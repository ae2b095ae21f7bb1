//! Output-oriented radial (CCR, BCC) and additive DEA scoring.
//!
//! Every decision making unit gets its own envelopment LP. Units are scored
//! independently, so a failed solve only marks that unit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{solve_lp, LpProblem, ObjectiveSense, RowSense};
use crate::par;

/// Default tolerance for classifying a unit as efficient.
pub const EFFICIENCY_TOL: f64 = 1e-6;

/// Returns-to-scale assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rts {
    Crs,
    Vrs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Ccr,
    Bcc,
    Additive,
}

impl ModelKind {
    /// The radial model matching a returns-to-scale assumption.
    pub fn radial(rts: Rts) -> Self {
        match rts {
            Rts::Crs => ModelKind::Ccr,
            Rts::Vrs => ModelKind::Bcc,
        }
    }

    pub fn is_radial(self) -> bool {
        !matches!(self, ModelKind::Additive)
    }
}

/// A panel of `n` units with `m` inputs (rows of `x`) and `s` outputs (rows of `y`).
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
}

impl DataSet {
    pub fn new(
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        input_labels: Vec<String>,
        output_labels: Vec<String>,
    ) -> Result<Self> {
        let data = DataSet { x, y, input_labels, output_labels };
        data.validate()?;
        Ok(data)
    }

    /// Builds a panel with labels `x1..xm` and `y1..ys`.
    pub fn unlabeled(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let inputs = (1..=x.nrows()).map(|i| format!("x{i}")).collect();
        let outputs = (1..=y.nrows()).map(|r| format!("y{r}")).collect();
        DataSet::new(x, y, inputs, outputs)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.x.shape();
        let (s, ny) = self.y.shape();
        if m == 0 || s == 0 || n == 0 {
            return Err(Error::InvalidInput("panel needs at least one input, output and unit".into()));
        }
        if ny != n {
            return Err(Error::Dimension(format!("{n} units in inputs but {ny} in outputs")));
        }
        if self.input_labels.len() != m || self.output_labels.len() != s {
            return Err(Error::Dimension("label counts do not match the panel".into()));
        }
        if let Some(v) = self.x.iter().chain(self.y.iter()).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidInput(format!("panel entries must be finite and positive, found {v}")));
        }
        Ok(())
    }

    pub fn num_inputs(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_outputs(&self) -> usize {
        self.y.nrows()
    }

    pub fn num_dmus(&self) -> usize {
        self.x.ncols()
    }

    pub fn all_inputs(&self) -> Vec<usize> {
        (0..self.num_inputs()).collect()
    }

    /// The sub-panel of the given units, in the given order.
    pub fn select_dmus(&self, units: &[usize]) -> Result<DataSet> {
        if let Some(&k) = units.iter().find(|&&k| k >= self.num_dmus()) {
            return Err(Error::InvalidInput(format!("unit {k} out of range")));
        }
        DataSet::new(
            self.x.select_columns(units),
            self.y.select_columns(units),
            self.input_labels.clone(),
            self.output_labels.clone(),
        )
    }

    /// The sub-panel of the given input rows.
    pub fn select_inputs(&self, inputs: &[usize]) -> Result<DataSet> {
        check_subset(self, inputs)?;
        DataSet::new(
            self.x.select_rows(inputs),
            self.y.clone(),
            inputs.iter().map(|&i| self.input_labels[i].clone()).collect(),
            self.output_labels.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DmuStatus {
    Optimal,
    Failed,
}

/// Per-unit scores: radial `θ_k ≥ 1` (output expansion factor) or additive
/// total slack `Z_k ≥ 0`. Failed units carry `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub model: ModelKind,
    pub rts: Rts,
    pub scores: Vec<f64>,
    pub status: Vec<DmuStatus>,
    pub inputs: Vec<usize>,
}

impl EfficiencyResult {
    pub fn failures(&self) -> usize {
        self.status.iter().filter(|s| **s == DmuStatus::Failed).count()
    }
}

fn check_subset(data: &DataSet, inputs: &[usize]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("input subset is empty".into()));
    }
    for (pos, &i) in inputs.iter().enumerate() {
        if i >= data.num_inputs() {
            return Err(Error::InvalidInput(format!("input index {i} out of range")));
        }
        if inputs[..pos].contains(&i) {
            return Err(Error::InvalidInput(format!("input index {i} repeated")));
        }
    }
    Ok(())
}

/// Envelopment LP for the output-oriented radial score of unit `k`:
/// `max θ  s.t.  Σ_j λ_j x_ij ≤ x_ik,  Σ_j λ_j y_rj ≥ θ y_rk,  λ ≥ 0`
/// plus `Σ λ_j = 1` under VRS. Variables are `(θ, λ_1..λ_n)`.
pub fn radial_lp(data: &DataSet, inputs: &[usize], k: usize, rts: Rts) -> Result<LpProblem> {
    let n = data.num_dmus();
    let s = data.num_outputs();
    let rows = inputs.len() + s + usize::from(rts == Rts::Vrs);
    let mut a = DMatrix::zeros(rows, n + 1);
    let mut b = DVector::zeros(rows);
    let mut senses = Vec::with_capacity(rows);
    for (row, &i) in inputs.iter().enumerate() {
        for j in 0..n {
            a[(row, j + 1)] = data.x[(i, j)];
        }
        b[row] = data.x[(i, k)];
        senses.push(RowSense::Le);
    }
    for r in 0..s {
        let row = inputs.len() + r;
        a[(row, 0)] = -data.y[(r, k)];
        for j in 0..n {
            a[(row, j + 1)] = data.y[(r, j)];
        }
        senses.push(RowSense::Ge);
    }
    if rts == Rts::Vrs {
        let row = rows - 1;
        for j in 0..n {
            a[(row, j + 1)] = 1.0;
        }
        b[row] = 1.0;
        senses.push(RowSense::Eq);
    }
    let mut c = DVector::zeros(n + 1);
    c[0] = 1.0;
    LpProblem::new(ObjectiveSense::Maximize, c, a, b, senses)
}

/// Envelopment LP for the additive score of unit `k`:
/// `max Σ s⁻ + Σ s⁺  s.t.  Σ_j λ_j x_ij + s⁻_i = x_ik,  Σ_j λ_j y_rj − s⁺_r = y_rk`
/// plus `Σ λ_j = 1` under VRS. Variables are `(λ, s⁻, s⁺)`.
pub fn additive_lp(data: &DataSet, inputs: &[usize], k: usize, rts: Rts) -> Result<LpProblem> {
    let n = data.num_dmus();
    let (m, s) = (inputs.len(), data.num_outputs());
    let rows = m + s + usize::from(rts == Rts::Vrs);
    let cols = n + m + s;
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    for (row, &i) in inputs.iter().enumerate() {
        for j in 0..n {
            a[(row, j)] = data.x[(i, j)];
        }
        a[(row, n + row)] = 1.0;
        b[row] = data.x[(i, k)];
    }
    for r in 0..s {
        let row = m + r;
        for j in 0..n {
            a[(row, j)] = data.y[(r, j)];
        }
        a[(row, n + m + r)] = -1.0;
        b[row] = data.y[(r, k)];
    }
    if rts == Rts::Vrs {
        for j in 0..n {
            a[(rows - 1, j)] = 1.0;
        }
        b[rows - 1] = 1.0;
    }
    let mut c = DVector::zeros(cols);
    c.rows_mut(n, m + s).fill(1.0);
    LpProblem::new(ObjectiveSense::Maximize, c, a, b, vec![RowSense::Eq; rows])
}

fn score_all<F>(data: &DataSet, inputs: &[usize], model: ModelKind, rts: Rts, build: F) -> Result<EfficiencyResult>
where
    F: Fn(usize) -> Result<LpProblem> + Sync + Send,
{
    data.validate()?;
    check_subset(data, inputs)?;
    let solved = par::map_range(data.num_dmus(), |k| {
        let lp = build(k)?;
        let sol = solve_lp(&lp)?;
        if sol.is_optimal() {
            Ok(match model {
                ModelKind::Additive => sol.objective,
                _ => sol.x[0],
            })
        } else {
            Err(Error::SolverFailure(format!("unit {k}: {:?}", sol.status)))
        }
    });
    let mut scores = Vec::with_capacity(solved.len());
    let mut status = Vec::with_capacity(solved.len());
    for (k, r) in solved.into_iter().enumerate() {
        match r {
            Ok(v) => {
                scores.push(v);
                status.push(DmuStatus::Optimal);
            }
            Err(e) => {
                log::warn!("{model:?} scoring failed for unit {k}: {e}");
                scores.push(f64::NAN);
                status.push(DmuStatus::Failed);
            }
        }
    }
    Ok(EfficiencyResult { model, rts, scores, status, inputs: inputs.to_vec() })
}

/// Output-oriented CCR scores `θ_k ≥ 1` on the chosen input rows.
pub fn ccr_output_scores(data: &DataSet, inputs: &[usize]) -> Result<EfficiencyResult> {
    score_all(data, inputs, ModelKind::Ccr, Rts::Crs, |k| radial_lp(data, inputs, k, Rts::Crs))
}

/// Output-oriented BCC scores (CCR plus the convexity row).
pub fn bcc_output_scores(data: &DataSet, inputs: &[usize]) -> Result<EfficiencyResult> {
    score_all(data, inputs, ModelKind::Bcc, Rts::Vrs, |k| radial_lp(data, inputs, k, Rts::Vrs))
}

/// CCR under CRS, BCC under VRS.
pub fn radial_output_scores(data: &DataSet, inputs: &[usize], rts: Rts) -> Result<EfficiencyResult> {
    match rts {
        Rts::Crs => ccr_output_scores(data, inputs),
        Rts::Vrs => bcc_output_scores(data, inputs),
    }
}

/// Additive-model total slacks `Z_k`.
pub fn additive_scores(data: &DataSet, inputs: &[usize], rts: Rts) -> Result<EfficiencyResult> {
    score_all(data, inputs, ModelKind::Additive, rts, |k| additive_lp(data, inputs, k, rts))
}

/// Scores with an explicit model kind. For the radial kinds `rts` is implied.
pub fn score(data: &DataSet, inputs: &[usize], model: ModelKind, rts: Rts) -> Result<EfficiencyResult> {
    match model {
        ModelKind::Ccr => ccr_output_scores(data, inputs),
        ModelKind::Bcc => bcc_output_scores(data, inputs),
        ModelKind::Additive => additive_scores(data, inputs, rts),
    }
}

/// Efficient-unit flags: `θ_k ≤ 1 + tol` for radial models, `Z_k ≤ tol` for
/// the additive model. Failed units are never flagged.
pub fn efficient_set(result: &EfficiencyResult, tol: f64) -> Vec<bool> {
    let threshold = if result.model.is_radial() { 1.0 + tol } else { tol };
    result.scores.iter().map(|&v| v <= threshold).collect()
}
