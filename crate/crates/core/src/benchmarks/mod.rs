//! Benchmark selectors: ECM backward elimination with an exact binomial
//! test, and the regression-based (RB) forward test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::dea::{radial_output_scores, DataSet, EfficiencyResult, Rts};
use crate::error::{Error, Result};
use crate::group_lasso::{Method, SelectionResult};
use crate::numlin::ols_regress;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcmParams {
    /// Tolerated share of units whose score moves by more than `gamma_bar`.
    pub p0: f64,
    /// Score-ratio threshold, at least 1.
    pub gamma_bar: f64,
    /// Significance level.
    pub alpha: f64,
    pub rts: Rts,
}

impl Default for EcmParams {
    fn default() -> Self {
        EcmParams { p0: 0.15, gamma_bar: 1.10, alpha: 0.05, rts: Rts::Crs }
    }
}

impl EcmParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p0 > 0.0 && self.p0 < 1.0 && self.gamma_bar >= 1.0 && self.alpha > 0.0 && self.alpha < 1.0;
        if !ok {
            return Err(Error::InvalidInput(format!("invalid ECM parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbParams {
    /// One-sided confidence; a candidate enters when `p ≤ 1 − confidence`.
    pub confidence: f64,
    /// Input the first efficiency estimate is built on.
    pub seed_input: usize,
    pub rts: Rts,
}

impl Default for RbParams {
    fn default() -> Self {
        RbParams { confidence: 0.90, seed_input: 0, rts: Rts::Crs }
    }
}

impl RbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidInput(format!("RB confidence {} outside (0, 1)", self.confidence)));
        }
        Ok(())
    }
}

/// Outcome of the binomial test on one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcmTest {
    pub significant: bool,
    pub p_value: f64,
    /// Units with `γ_k > γ̄`.
    pub count: usize,
    /// Units with a usable `γ_k`.
    pub n_eff: usize,
}

fn ratios(with: &EfficiencyResult, without: &EfficiencyResult) -> Vec<Option<f64>> {
    with.scores
        .iter()
        .zip(&without.scores)
        .map(|(a, b)| {
            let g = b / a;
            g.is_finite().then_some(g)
        })
        .collect()
}

/// `γ_k = θ_k(current ∖ {candidate}) / θ_k(current)`; `None` where a solve failed.
pub fn ecm_gamma(data: &DataSet, current: &[usize], candidate: usize, rts: Rts) -> Result<Vec<Option<f64>>> {
    let reduced = without(current, candidate)?;
    let with = radial_output_scores(data, current, rts)?;
    let without = radial_output_scores(data, &reduced, rts)?;
    Ok(ratios(&with, &without))
}

fn without(current: &[usize], candidate: usize) -> Result<Vec<usize>> {
    if !current.contains(&candidate) {
        return Err(Error::InvalidInput(format!("input {candidate} is not in the current set")));
    }
    if current.len() < 2 {
        return Err(Error::InvalidInput("cannot drop the last input".into()));
    }
    Ok(current.iter().copied().filter(|&i| i != candidate).collect())
}

/// `P[Binomial(n, p) ≥ t]`.
pub fn binomial_upper_tail(n: u64, p: f64, t: u64) -> f64 {
    if t == 0 {
        return 1.0;
    }
    if t > n {
        return 0.0;
    }
    Binomial::new(p, n).expect("p in [0, 1]").sf(t - 1)
}

pub fn ecm_binomial_test(gamma: &[Option<f64>], params: &EcmParams) -> Result<EcmTest> {
    params.validate()?;
    let usable: Vec<f64> = gamma.iter().flatten().copied().collect();
    if usable.is_empty() {
        return Err(Error::Undecidable("every efficiency ratio is missing".into()));
    }
    let count = usable.iter().filter(|g| **g > params.gamma_bar).count();
    let p_value = binomial_upper_tail(usable.len() as u64, params.p0, count as u64);
    Ok(EcmTest { significant: p_value <= params.alpha, p_value, count, n_eff: usable.len() })
}

/// Backward elimination: drop the least influential non-significant input
/// until every remaining input is significant or one is left. Influence is
/// ranked by the exceedance count, then the mean ratio, then the index.
pub fn ecm_backward_select(data: &DataSet, candidates: &[usize], params: &EcmParams) -> Result<SelectionResult> {
    params.validate()?;
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate inputs".into()));
    }
    let mut current = candidates.to_vec();
    current.sort_unstable();
    let mut notes = Vec::new();
    let mut rounds = 0;
    while current.len() > 1 {
        rounds += 1;
        let base = radial_output_scores(data, &current, params.rts)?;
        if base.failures() > 0 {
            notes.push(format!("round {rounds}: {} failed solves with all inputs", base.failures()));
        }
        let trials = par::map_range(current.len(), |pos| -> Result<(EcmTest, f64)> {
            let reduced = without(&current, current[pos])?;
            let gamma = ratios(&base, &radial_output_scores(data, &reduced, params.rts)?);
            let test = ecm_binomial_test(&gamma, params)?;
            let mean = gamma.iter().flatten().sum::<f64>() / test.n_eff as f64;
            Ok((test, mean))
        });
        let mut weakest: Option<(usize, usize, f64)> = None;
        for (pos, trial) in trials.into_iter().enumerate() {
            let (test, mean) = trial?;
            if test.n_eff < data.num_dmus() {
                notes.push(format!("round {rounds}: input {} tested on {} units", current[pos], test.n_eff));
            }
            if test.significant {
                continue;
            }
            let better = match weakest {
                None => true,
                Some((_, count, m)) => (test.count, mean) < (count, m),
            };
            if better {
                weakest = Some((pos, test.count, mean));
            }
        }
        match weakest {
            Some((pos, _, _)) => {
                current.remove(pos);
            }
            None => break,
        }
    }
    Ok(SelectionResult {
        selected: current,
        group_norms: Vec::new(),
        lambda: None,
        method: Method::Ecm,
        converged: true,
        iterations: rounds,
        notes,
    })
}

/// Forward regression test. Starting from the seed input, efficiencies
/// `1/θ_k` are regressed on the untested candidates (levels plus an
/// intercept); every candidate with a positive coefficient and one-sided
/// p-value at most `1 − confidence` joins, and the round repeats on the
/// enlarged set until nothing joins.
pub fn rb_select(data: &DataSet, candidates: &[usize], params: &RbParams) -> Result<SelectionResult> {
    params.validate()?;
    let n = data.num_dmus();
    if params.seed_input >= data.num_inputs() {
        return Err(Error::InvalidInput(format!("seed input {} out of range", params.seed_input)));
    }
    let mut untested: Vec<usize> = candidates.iter().copied().filter(|&c| c != params.seed_input).collect();
    untested.sort_unstable();
    untested.dedup();
    if n <= untested.len() + 2 {
        return Err(Error::DegreesOfFreedom { observations: n, parameters: untested.len() + 2 });
    }
    let mut included = vec![params.seed_input];
    let mut notes = Vec::new();
    let mut rounds = 0;
    while !untested.is_empty() {
        rounds += 1;
        let theta = radial_output_scores(data, &included, params.rts)?;
        let units: Vec<usize> = (0..n).filter(|&k| theta.scores[k].is_finite()).collect();
        let response = DVector::from_iterator(units.len(), units.iter().map(|&k| 1.0 / theta.scores[k]));
        let mut columns = untested.clone();
        let fit = loop {
            if columns.is_empty() || units.len() <= columns.len() + 1 {
                break None;
            }
            let design = DMatrix::from_fn(units.len(), columns.len() + 1, |row, col| {
                if col == 0 {
                    1.0
                } else {
                    data.x[(columns[col - 1], units[row])]
                }
            });
            match ols_regress(&design, &response) {
                Ok(fit) => break Some(fit),
                Err(Error::RankDeficient { column }) if column >= 1 => {
                    let dropped = columns.remove(column - 1);
                    log::warn!("RB: input {dropped} is collinear with the design and is skipped this round");
                    notes.push(format!("round {rounds}: input {dropped} skipped (rank deficient)"));
                }
                Err(e) => return Err(e),
            }
        };
        let Some(fit) = fit else { break };
        let added: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(j, _)| fit.coefficients[j + 1] > 0.0 && fit.p_value_positive(j + 1) <= 1.0 - params.confidence)
            .map(|(_, &c)| c)
            .collect();
        if added.is_empty() {
            break;
        }
        untested.retain(|c| !added.contains(c));
        included.extend(added);
    }
    included.sort_unstable();
    Ok(SelectionResult {
        selected: included,
        group_norms: Vec::new(),
        lambda: None,
        method: Method::Rb,
        converged: true,
        iterations: rounds,
        notes,
    })
}
