//! Simulated Cobb-Douglas panels with half-normal inefficiency.
//!
//! Log-inputs are uniform on `[a, b]`, optionally correlated pairwise on the
//! log scale, and the single output is `y_k = Π_i x_{i,k}^{α_i} · ε_k` with
//! `ε_k = e^{−u_k}`, `u_k = |σ Z_k|`. Irrelevant inputs follow the relevant
//! ones and never enter the output.
//!
//! Every panel is drawn from `ChaCha8Rng::seed_from_u64(seed)` in a fixed
//! order: the `m × n` log-input matrix row by row, then one fresh row of `n`
//! uniforms per correlation pair, then `n` Box-Muller normals (two uniforms
//! each, cosine branch only). [`trial_seed`] derives independent per-trial
//! seeds from a master seed, so any trial can be regenerated on its own.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dea::{DataSet, Rts};
use crate::error::{Error, Result};

/// `x_i = ρ x_j + w √(1 − ρ²)` applied to log-inputs, indices zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Correlation {
    pub i: usize,
    pub j: usize,
    pub rho: f64,
}

/// One simulation design. The first `alpha.len()` inputs are relevant, the
/// next `irrelevant` are noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: u32,
    pub rts: Rts,
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub correlations: Vec<Correlation>,
    pub n: usize,
    pub irrelevant: usize,
    /// Interval of the uniform log-inputs.
    pub log_interval: (f64, f64),
    pub target_mean_efficiency: f64,
    /// Fixed `σ` overriding the calibration (`0` gives a noise-free frontier).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// Default log-input interval, inputs in `[5, 15]`.
pub const DEFAULT_LOG_INTERVAL: (f64, f64) = (1.6094379124341003, 2.70805020110221);
pub const DEFAULT_N: usize = 100;
pub const DEFAULT_TARGET_EFFICIENCY: f64 = 0.85;

impl Scenario {
    pub fn num_relevant(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.alpha.len() + self.irrelevant
    }

    pub fn true_inputs(&self) -> Vec<usize> {
        (0..self.num_relevant()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidInput(format!("scenario {}: {msg}", self.id)));
        if self.alpha.is_empty() || self.alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return fail("elasticities must be positive".into());
        }
        let total: f64 = self.alpha.iter().sum();
        match self.rts {
            Rts::Crs if (total - 1.0).abs() > 1e-9 => return fail(format!("CRS elasticities sum to {total}, not 1")),
            Rts::Vrs if total >= 1.0 => return fail(format!("VRS elasticities sum to {total}, not below 1")),
            _ => {}
        }
        for c in &self.correlations {
            if !(-1.0..=1.0).contains(&c.rho) {
                return fail(format!("correlation {} outside [-1, 1]", c.rho));
            }
            if c.i == c.j || c.i >= self.num_inputs() || c.j >= self.num_inputs() {
                return fail(format!("correlation pair ({}, {}) is invalid", c.i, c.j));
            }
        }
        if self.n < 2 {
            return fail("need at least two units".into());
        }
        let (a, b) = self.log_interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return fail(format!("log interval [{a}, {b}] is empty"));
        }
        if !(self.target_mean_efficiency > 0.0 && self.target_mean_efficiency < 1.0) {
            return fail("target mean efficiency must lie in (0, 1)".into());
        }
        if let Some(s) = self.sigma {
            if !(s.is_finite() && s >= 0.0) {
                return fail(format!("sigma {s} must be non-negative"));
            }
        }
        Ok(())
    }

    /// One of the twelve standard designs.
    pub fn standard(id: u32, rts: Rts) -> Result<Scenario> {
        let crs = rts == Rts::Crs;
        let pick = |c: &[f64], v: &[f64]| if crs { c.to_vec() } else { v.to_vec() };
        let base = pick(&[1.0 / 3.0; 3], &[0.25; 3]);
        let varied_a = pick(&[1.0 / 3.0, 4.0 / 9.0, 2.0 / 9.0], &[0.25, 1.0 / 3.0, 1.0 / 6.0]);
        let varied_b = pick(&[1.0 / 3.0, 2.0 / 9.0, 4.0 / 9.0], &[0.25, 1.0 / 6.0, 1.0 / 3.0]);
        let corr = |pairs: &[(usize, usize, f64)]| -> Vec<Correlation> {
            pairs.iter().map(|&(i, j, rho)| Correlation { i, j, rho }).collect()
        };
        let mild = corr(&[(1, 0, 0.8), (2, 0, 0.2)]);
        let (alpha, correlations, n, irrelevant) = match id {
            1 => (base, vec![], DEFAULT_N, 1),
            2 => (base, mild, DEFAULT_N, 1),
            3 => (base, corr(&[(1, 0, 0.8), (2, 0, 0.8)]), DEFAULT_N, 1),
            4 => (varied_a, vec![], DEFAULT_N, 1),
            5 => (varied_a, mild, DEFAULT_N, 1),
            6 => (varied_b, mild, DEFAULT_N, 1),
            7 => (base, corr(&[(3, 0, 0.8)]), DEFAULT_N, 1),
            8 => (base, vec![], 25, 1),
            9 => (base, vec![], 300, 1),
            10 => (pick(&[0.25; 4], &[0.2; 4]), vec![], DEFAULT_N, 0),
            11 => (pick(&[0.5; 2], &[1.0 / 3.0; 2]), vec![], DEFAULT_N, 2),
            12 => (base, vec![], DEFAULT_N, 3),
            _ => return Err(Error::InvalidInput(format!("no standard scenario {id}; ids are 1..=12"))),
        };
        Ok(Scenario {
            id,
            rts,
            alpha,
            correlations,
            n,
            irrelevant,
            log_interval: DEFAULT_LOG_INTERVAL,
            target_mean_efficiency: DEFAULT_TARGET_EFFICIENCY,
            sigma: None,
        })
    }
}

/// What the generator knows and DEA does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthInfo {
    pub true_inputs: Vec<usize>,
    /// `ε_k ∈ (0, 1]`.
    pub efficiency: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

/// `ρ x_j + w √(1 − ρ²)` elementwise.
pub fn correlate(x_j: &[f64], rho: f64, w: &[f64]) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!("correlation {rho} outside [-1, 1]")));
    }
    if x_j.len() != w.len() {
        return Err(Error::Dimension(format!("vectors of length {} and {}", x_j.len(), w.len())));
    }
    let c = (1.0 - rho * rho).sqrt();
    Ok(x_j.iter().zip(w).map(|(x, w)| rho * x + c * w).collect())
}

/// `E[e^{−u}]` for `u = |N(0, σ²)|`, i.e. `2 e^{σ²/2} (1 − Φ(σ))`.
pub fn mean_efficiency(sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let phi = Normal::standard();
    2.0 * (0.5 * sigma * sigma + phi.sf(sigma).ln()).exp()
}

/// The `σ` whose half-normal inefficiency has mean efficiency `target`.
pub fn calibrate_sigma(target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidInput(format!("target mean efficiency {target} outside (0, 1)")));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while mean_efficiency(hi) > target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidInput(format!("target {target} is not reachable")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_efficiency(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Seed of trial `trial` of the run `(master, scenario, rts)`: the first
/// output word of ChaCha8 keyed by `master` on a stream unique to the triple.
pub fn trial_seed(master: u64, scenario: u32, rts: Rts, trial: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    let rts_bit = match rts {
        Rts::Crs => 0,
        Rts::Vrs => 1,
    };
    rng.set_stream((u64::from(scenario) << 33) | (rts_bit << 32) | u64::from(trial));
    rng.next_u64()
}

fn uniform_row(rng: &mut ChaCha8Rng, n: usize, (a, b): (f64, f64)) -> Vec<f64> {
    (0..n).map(|_| a + (b - a) * rng.random::<f64>()).collect()
}

/// Standard normal by Box-Muller, cosine branch.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

pub fn generate_scenario(scenario: &Scenario, seed: u64) -> Result<(DataSet, TruthInfo)> {
    scenario.validate()?;
    let sigma = match scenario.sigma {
        Some(s) => s,
        None => calibrate_sigma(scenario.target_mean_efficiency)?,
    };
    let (m, n) = (scenario.num_inputs(), scenario.n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logx: Vec<Vec<f64>> = (0..m).map(|_| uniform_row(&mut rng, n, scenario.log_interval)).collect();
    for c in &scenario.correlations {
        let w = uniform_row(&mut rng, n, scenario.log_interval);
        logx[c.i] = correlate(&logx[c.j], c.rho, &w)?;
    }
    let u: Vec<f64> = (0..n).map(|_| (sigma * standard_normal(&mut rng)).abs()).collect();
    let logy: Vec<f64> = (0..n)
        .map(|k| scenario.alpha.iter().enumerate().map(|(i, a)| a * logx[i][k]).sum::<f64>() - u[k])
        .collect();

    let x = DMatrix::from_fn(m, n, |i, k| logx[i][k].exp());
    let y = DMatrix::from_fn(1, n, |_, k| logy[k].exp());
    let inputs = (1..=m).map(|i| format!("x{i}")).collect();
    let data = DataSet::new(x, y, inputs, vec!["y".into()])?;
    let truth = TruthInfo {
        true_inputs: scenario.true_inputs(),
        efficiency: u.iter().map(|u| (-u).exp()).collect(),
        sigma,
        seed,
    };
    Ok((data, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_dimensions() {
        for id in 1..=12 {
            for rts in [Rts::Crs, Rts::Vrs] {
                Scenario::standard(id, rts).unwrap().validate().unwrap();
            }
        }
        let s = Scenario::standard(12, Rts::Crs).unwrap();
        assert_eq!((s.num_inputs(), s.num_relevant()), (6, 3));
        assert!(Scenario::standard(13, Rts::Crs).is_err());
    }

    #[test]
    fn zero_sigma_is_fully_efficient() {
        assert_eq!(mean_efficiency(0.0), 1.0);
        assert!(calibrate_sigma(1.0 - 1e-9).unwrap() < 1e-6);
    }
}
