use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Least-squares fit with classical inference.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    /// Two-sided p-values from Student's t with `n - k` degrees of freedom.
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub df: usize,
    /// Set when the residual sum of squares is numerically zero. Standard
    /// errors are then 0 and the t statistics are ±∞ (or 0 for a zero
    /// coefficient).
    pub degenerate: bool,
}

impl OlsFit {
    /// One-sided p-value for the alternative `β_j > 0`.
    pub fn p_value_positive(&self, j: usize) -> f64 {
        let t = self.t_stats[j];
        if self.degenerate {
            return if t > 0.0 { 0.0 } else { 1.0 };
        }
        let dist = StudentsT::new(0.0, 1.0, self.df as f64).expect("df > 0");
        dist.sf(t)
    }
}

/// Ordinary least squares via Householder QR.
pub fn ols_regress(design: &DMatrix<f64>, response: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = design.shape();
    if response.len() != n {
        return Err(Error::Dimension(format!("{} responses for {n} design rows", response.len())));
    }
    if n <= k {
        return Err(Error::DegreesOfFreedom { observations: n, parameters: k });
    }

    let mut r = design.clone();
    let mut qty = response.clone();
    let col_norms: Vec<f64> = (0..k).map(|j| design.column(j).norm()).collect();
    for j in 0..k {
        let norm = r.view((j, j), (n - j, 1)).norm();
        if norm <= 1e-10 * col_norms[j].max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient { column: j });
        }
        let alpha = if r[(j, j)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| r[(i, j)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 > 0.0 {
            for c in j..k {
                let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * r[(j + t, c)]).sum();
                let f = 2.0 * dot / vnorm2;
                for (t, vi) in v.iter().enumerate() {
                    r[(j + t, c)] -= f * vi;
                }
            }
            let dot: f64 = v.iter().enumerate().map(|(t, vi)| vi * qty[j + t]).sum();
            let f = 2.0 * dot / vnorm2;
            for (t, vi) in v.iter().enumerate() {
                qty[j + t] -= f * vi;
            }
        }
    }
    for j in 0..k {
        if r[(j, j)].abs() <= 1e-10 * col_norms[j] {
            return Err(Error::RankDeficient { column: j });
        }
    }

    // Back substitution for R β = Qᵀy.
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut v = qty[i];
        for c in i + 1..k {
            v -= r[(i, c)] * beta[c];
        }
        beta[i] = v / r[(i, i)];
    }
    let fitted = design * DVector::from_column_slice(&beta);
    let residuals: Vec<f64> = (response - fitted).iter().copied().collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let df = n - k;
    let tss_scale: f64 = response.iter().map(|y| y * y).sum::<f64>().max(f64::MIN_POSITIVE);
    let degenerate = rss <= 1e-24 * tss_scale;

    // (RᵀR)⁻¹ diagonal through R⁻¹.
    let mut rinv = DMatrix::<f64>::zeros(k, k);
    for c in 0..k {
        for i in (0..=c).rev() {
            let mut v = if i == c { 1.0 } else { 0.0 };
            for t in i + 1..=c {
                v -= r[(i, t)] * rinv[(t, c)];
            }
            rinv[(i, c)] = v / r[(i, i)];
        }
    }
    let sigma2 = rss / df as f64;
    let mut std_errors = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df > 0");
    for j in 0..k {
        let var: f64 = (j..k).map(|c| rinv[(j, c)] * rinv[(j, c)]).sum::<f64>() * sigma2;
        if degenerate {
            let scale = col_norms[j].max(f64::MIN_POSITIVE);
            let zero = beta[j].abs() * scale <= 1e-10 * tss_scale.sqrt();
            std_errors.push(0.0);
            if zero {
                t_stats.push(0.0);
                p_values.push(1.0);
            } else {
                t_stats.push(beta[j].signum() * f64::INFINITY);
                p_values.push(0.0);
            }
        } else {
            let se = var.sqrt();
            let t = beta[j] / se;
            std_errors.push(se);
            t_stats.push(t);
            p_values.push((2.0 * dist.sf(t.abs())).min(1.0));
        }
    }
    Ok(OlsFit { coefficients: beta, std_errors, t_stats, p_values, residuals, rss, df, degenerate })
}
