//! Agreement between true and estimated efficiency scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Score agreement. Correlations are `None` when either vector is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreMetrics {
    pub mse: f64,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Efficient-set agreement. `pct_efficient` is `None` when no unit is truly
/// efficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentificationMetrics {
    pub pct_all: f64,
    pub pct_efficient: Option<f64>,
}

pub fn score_metrics(truth: &[f64], model: &[f64]) -> Result<ScoreMetrics> {
    if truth.len() != model.len() {
        return Err(Error::Dimension(format!("score vectors have lengths {} and {}", truth.len(), model.len())));
    }
    if truth.len() < 2 {
        return Err(Error::InvalidInput("score metrics need at least two units".into()));
    }
    let mse = truth.iter().zip(model).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64;
    Ok(ScoreMetrics {
        mse,
        pearson: pearson(truth, model),
        spearman: pearson(&average_ranks(truth), &average_ranks(model)),
    })
}

/// Pearson correlation, `None` if either vector has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// One-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn identification_metrics(truth: &[bool], model: &[bool]) -> Result<IdentificationMetrics> {
    if truth.len() != model.len() {
        return Err(Error::Dimension(format!("masks have lengths {} and {}", truth.len(), model.len())));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("identification metrics need at least one unit".into()));
    }
    let agree = truth.iter().zip(model).filter(|(a, b)| a == b).count();
    let efficient = truth.iter().filter(|t| **t).count();
    let hit = truth.iter().zip(model).filter(|(a, b)| **a && **b).count();
    Ok(IdentificationMetrics {
        pct_all: agree as f64 / truth.len() as f64,
        pct_efficient: (efficient > 0).then(|| hit as f64 / efficient as f64),
    })
}
