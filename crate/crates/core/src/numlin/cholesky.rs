use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-12;

/// Lower-triangular factor `L` with `L Lᵀ = G` for a symmetric positive
/// definite `G`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn new(g: &DMatrix<f64>) -> Result<Self> {
        let p = g.nrows();
        if g.ncols() != p {
            return Err(Error::Dimension(format!("matrix is {}x{}, not square", p, g.ncols())));
        }
        let scale = g.amax().max(f64::MIN_POSITIVE);
        for i in 0..p {
            for j in 0..i {
                if (g[(i, j)] - g[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let mut l = DMatrix::zeros(p, p);
        for j in 0..p {
            let mut d = g[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > PIVOT_FLOOR) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..p {
                let mut v = g[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Ok(CholeskyFactor { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Forward then backward substitution in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let p = self.dim();
        debug_assert_eq!(x.len(), p);
        for i in 0..p {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[(i, k)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
        for i in (0..p).rev() {
            let mut v = x[i];
            for k in i + 1..p {
                v -= self.l[(k, i)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if rhs.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "rhs has length {}, factor is {}x{}",
                rhs.len(),
                self.dim(),
                self.dim()
            )));
        }
        let mut x = rhs.clone();
        self.solve_in_place(x.as_mut_slice());
        Ok(x)
    }
}

/// Solves `G x = rhs`, reusing `cache` when given instead of refactoring.
pub fn factor_and_solve(
    g: &DMatrix<f64>,
    rhs: &DVector<f64>,
    cache: Option<CholeskyFactor>,
) -> Result<(DVector<f64>, CholeskyFactor)> {
    let factor = match cache {
        Some(f) if f.dim() == g.nrows() => f,
        Some(f) => {
            return Err(Error::Dimension(format!(
                "cached factor is {}x{}, matrix is {}x{}",
                f.dim(),
                f.dim(),
                g.nrows(),
                g.ncols()
            )))
        }
        None => CholeskyFactor::new(g)?,
    };
    let x = factor.solve(rhs)?;
    Ok((x, factor))
}
