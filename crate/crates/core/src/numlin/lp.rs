use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// A dense linear program `opt cᵀx  s.t.  A x (≤|=|≥) b,  l ≤ x ≤ u`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub sense: ObjectiveSense,
    pub cost: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub rows: Vec<RowSense>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// Builds a problem with the default bounds `0 ≤ x < ∞`.
    pub fn new(
        sense: ObjectiveSense,
        cost: DVector<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
        rows: Vec<RowSense>,
    ) -> Result<Self> {
        let p = cost.len();
        let problem = LpProblem {
            sense,
            cost,
            a,
            b,
            rows,
            lower: vec![0.0; p],
            upper: vec![f64::INFINITY; p],
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        self.lower = lower;
        self.upper = upper;
        self.validate()?;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q) = (self.num_vars(), self.num_rows());
        if self.a.nrows() != q || self.a.ncols() != p {
            return Err(Error::Dimension(format!(
                "constraint matrix is {}x{}, expected {q}x{p}",
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.rows.len() != q {
            return Err(Error::Dimension(format!("{} row senses for {q} rows", self.rows.len())));
        }
        if self.lower.len() != p || self.upper.len() != p {
            return Err(Error::Dimension("bound vectors do not match variable count".into()));
        }
        for j in 0..p {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!("bad bounds [{l}, {u}] on variable {j}")));
            }
        }
        if self.cost.iter().chain(self.b.iter()).chain(self.a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite problem data".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`]. `y` holds row shadow prices in the problem's own
/// sense (∂objective/∂b); `x` and `y` are empty unless the status is optimal.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, pivots: usize) -> Self {
        LpSolution {
            status,
            x: Vec::new(),
            y: Vec::new(),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum At {
    Basic,
    Lower,
    Upper,
    Free,
}

/// Dense bounded-variable tableau. Columns are structurals, then one slack per
/// row, then artificials.
struct Tableau {
    /// Row-major `nrows × ncols` tableau `B⁻¹ [A | I | art]`.
    t: Vec<f64>,
    nrows: usize,
    ncols: usize,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<At>,
    basis: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(problem: &LpProblem) -> (Self, usize) {
        let (p, q) = (problem.num_vars(), problem.num_rows());
        let mut lower = problem.lower.clone();
        let mut upper = problem.upper.clone();
        let mut state = Vec::with_capacity(p + q);
        let mut x = Vec::with_capacity(p + q);
        for j in 0..p {
            let (l, u) = (lower[j], upper[j]);
            if l.is_finite() {
                state.push(At::Lower);
                x.push(l);
            } else if u.is_finite() {
                state.push(At::Upper);
                x.push(u);
            } else {
                state.push(At::Free);
                x.push(0.0);
            }
        }
        for sense in &problem.rows {
            let (l, u) = match sense {
                RowSense::Le => (0.0, f64::INFINITY),
                RowSense::Ge => (f64::NEG_INFINITY, 0.0),
                RowSense::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
        }
        let xs = DVector::from_column_slice(&x[..p]);
        let residual = &problem.b - &problem.a * xs;

        // Rows whose slack cannot absorb the residual get an artificial.
        let mut art_rows = Vec::new();
        for i in 0..q {
            let r = residual[i];
            if r >= lower[p + i] && r <= upper[p + i] {
                state.push(At::Basic);
                x.push(r);
            } else {
                state.push(if lower[p + i].is_finite() { At::Lower } else { At::Upper });
                x.push(0.0);
                art_rows.push(i);
            }
        }
        let na = art_rows.len();
        let ncols = p + q + na;
        let mut t = vec![0.0; q * ncols];
        for i in 0..q {
            for j in 0..p {
                t[i * ncols + j] = problem.a[(i, j)];
            }
            t[i * ncols + p + i] = 1.0;
        }
        let mut basis: Vec<usize> = (0..q).map(|i| p + i).collect();
        for (k, &i) in art_rows.iter().enumerate() {
            let col = p + q + k;
            let sign = residual[i].signum();
            t[i * ncols + col] = sign;
            // Divide the row by the artificial's coefficient so it is a unit column.
            if sign < 0.0 {
                t[i * ncols..(i + 1) * ncols].iter_mut().for_each(|v| *v = -*v);
            }
            basis[i] = col;
            lower.push(0.0);
            upper.push(f64::INFINITY);
            state.push(At::Basic);
            x.push(residual[i].abs());
        }
        let max_pivots = 50 * (p + q);
        (
            Tableau { t, nrows: q, ncols, x, lower, upper, state, basis, pivots: 0, max_pivots },
            na,
        )
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.ncols..(i + 1) * self.ncols]
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut r = cost.to_vec();
        for (i, &bv) in self.basis.iter().enumerate() {
            let cb = cost[bv];
            if cb != 0.0 {
                for (rj, tij) in r.iter_mut().zip(self.row(i)) {
                    *rj -= cb * tij;
                }
            }
        }
        r
    }

    fn entering(&self, r: &[f64]) -> Option<(usize, f64)> {
        // Bland: lowest eligible index.
        for (j, &rj) in r.iter().enumerate() {
            let dir = match self.state[j] {
                At::Basic => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                At::Lower if rj < -COST_TOL => 1.0,
                At::Upper if rj > COST_TOL => -1.0,
                At::Free if rj < -COST_TOL => 1.0,
                At::Free if rj > COST_TOL => -1.0,
                _ => continue,
            };
            return Some((j, dir));
        }
        None
    }

    fn run(&mut self, cost: &[f64]) -> Result<Phase> {
        loop {
            let r = self.reduced_costs(cost);
            let Some((j, dir)) = self.entering(&r) else {
                return Ok(Phase::Optimal);
            };
            if self.pivots >= self.max_pivots {
                return Err(Error::SolverFailure(format!(
                    "simplex stalled after {} pivots",
                    self.pivots
                )));
            }
            self.pivots += 1;

            let mut step = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, usize)> = None;
            for i in 0..self.nrows {
                let alpha = dir * self.at(i, j);
                let bv = self.basis[i];
                let limit = if alpha > PIVOT_TOL && self.lower[bv].is_finite() {
                    (self.x[bv] - self.lower[bv]) / alpha
                } else if alpha < -PIVOT_TOL && self.upper[bv].is_finite() {
                    (self.upper[bv] - self.x[bv]) / -alpha
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let take = if limit < step - 1e-12 {
                    true
                } else if limit <= step + 1e-12 {
                    // Bland tie-break on the leaving index; a tie with the
                    // entering variable's own bound keeps the bound flip.
                    matches!(leave, Some((_, cur)) if bv < cur)
                } else {
                    false
                };
                if take {
                    step = limit;
                    leave = Some((i, bv));
                }
            }
            if step.is_infinite() {
                return Ok(Phase::Unbounded);
            }

            self.x[j] += dir * step;
            for i in 0..self.nrows {
                let bv = self.basis[i];
                self.x[bv] -= dir * step * self.at(i, j);
            }

            match leave {
                None => {
                    self.state[j] = if dir > 0.0 { At::Upper } else { At::Lower };
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some((row, bv)) => {
                    let alpha = dir * self.at(row, j);
                    if alpha > 0.0 {
                        self.state[bv] = At::Lower;
                        self.x[bv] = self.lower[bv];
                    } else {
                        self.state[bv] = At::Upper;
                        self.x[bv] = self.upper[bv];
                    }
                    self.pivot(row, j);
                    self.state[j] = At::Basic;
                    self.basis[row] = j;
                }
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let nc = self.ncols;
        let piv = self.at(row, col);
        self.t[row * nc..(row + 1) * nc].iter_mut().for_each(|v| *v /= piv);
        let pivot_row = self.row(row).to_vec();
        for i in 0..self.nrows {
            if i == row {
                continue;
            }
            let f = self.at(i, col);
            if f != 0.0 {
                for (v, pr) in self.t[i * nc..(i + 1) * nc].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
            }
        }
    }
}

/// Solves a dense LP with a bounded-variable primal simplex (Bland's rule,
/// two phases).
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let (p, q) = (problem.num_vars(), problem.num_rows());
    let flip = match problem.sense {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => -1.0,
    };
    let (mut tab, na) = Tableau::build(problem);
    let ncols = p + q + na;

    if na > 0 {
        let mut phase1 = vec![0.0; ncols];
        phase1[p + q..].iter_mut().for_each(|c| *c = 1.0);
        tab.run(&phase1)?;
        let infeasibility: f64 = tab.x[p + q..].iter().sum();
        let b_scale = problem.b.amax();
        if infeasibility > 1e-9 * (1.0 + b_scale) {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, tab.pivots));
        }
        for k in p + q..ncols {
            tab.upper[k] = 0.0;
            if tab.state[k] != At::Basic {
                tab.state[k] = At::Lower;
                tab.x[k] = 0.0;
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    for j in 0..p {
        cost[j] = flip * problem.cost[j];
    }
    if let Phase::Unbounded = tab.run(&cost)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, tab.pivots));
    }

    let x: Vec<f64> = tab.x[..p].to_vec();
    // B⁻¹ sits in the slack columns of the tableau.
    let mut y = vec![0.0; q];
    for (k, &bv) in tab.basis.iter().enumerate() {
        let cb = cost[bv];
        if cb != 0.0 {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += cb * tab.at(k, p + i);
            }
        }
    }
    let y_vec = DVector::from_column_slice(&y);
    let reduced = &DVector::from_column_slice(&cost[..p]) - problem.a.transpose() * &y_vec;
    let mut dual = problem.b.dot(&y_vec);
    for j in 0..p {
        if tab.state[j] != At::Basic {
            dual += reduced[j] * x[j];
        }
    }
    let objective = problem.cost.dot(&DVector::from_column_slice(&x));
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        y: y.iter().map(|v| flip * v).collect(),
        objective,
        dual_objective: flip * dual,
        pivots: tab.pivots,
    })
}
