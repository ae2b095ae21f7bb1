//! Monte Carlo comparison of the GL, ECM and RB selectors.

mod io;
mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarks::{ecm_backward_select, rb_select, EcmParams, RbParams};
use crate::datagen::{generate_scenario, trial_seed, Scenario};
use crate::dea::{efficient_set, radial_output_scores, DataSet, ModelKind, Rts, EFFICIENCY_TOL};
use crate::error::{Error, Result};
use crate::group_lasso::{admm_solve, assemble_gl_problem, AdmmOptions, Method, SelectionResult};
use crate::metrics::{identification_metrics, score_metrics, IdentificationMetrics, ScoreMetrics};
use crate::par;

pub use io::{read_panel, write_panel};
pub use report::{emit_report, load_report, Aggregate, TABLE_FILES};

/// A standard design by id, or a full inline definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Standard(StandardScenario),
    Inline(Scenario),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardScenario {
    pub id: u32,
    pub rts: Rts,
}

impl ScenarioSpec {
    pub fn resolve(&self) -> Result<Scenario> {
        match self {
            ScenarioSpec::Standard(s) => Scenario::standard(s.id, s.rts),
            ScenarioSpec::Inline(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

/// Loss model of the GL selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlLoss {
    /// CCR under CRS, BCC under VRS.
    #[default]
    Radial,
    Additive,
}

/// GL solver settings; tolerances are `1e-6·√rows` per problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlSettings {
    pub loss: GlLoss,
    pub shift: bool,
    pub mu: f64,
    pub max_iter: usize,
    pub anderson: usize,
    pub eps_sel: f64,
    /// Elbow tolerance `τ` of the λ tuning rule.
    pub tau: f64,
}

impl Default for GlSettings {
    fn default() -> Self {
        GlSettings { loss: GlLoss::Radial, shift: false, mu: 1.0, max_iter: 5000, anderson: 10, eps_sel: 1e-6, tau: 0.05 }
    }
}

impl GlSettings {
    pub fn model(&self, rts: Rts) -> ModelKind {
        match self.loss {
            GlLoss::Radial => ModelKind::radial(rts),
            GlLoss::Additive => ModelKind::Additive,
        }
    }

    fn options(&self, problem: &crate::group_lasso::GlProblem) -> AdmmOptions {
        AdmmOptions { mu: self.mu, max_iter: self.max_iter, eps_sel: self.eps_sel, anderson: self.anderson, ..AdmmOptions::for_problem(problem) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EcmSettings {
    pub p0: f64,
    pub gamma_bar: f64,
    pub alpha: f64,
    /// Run ECM on at most this many trials per scenario.
    pub max_trials: Option<usize>,
}

impl Default for EcmSettings {
    fn default() -> Self {
        let p = EcmParams::default();
        EcmSettings { p0: p.p0, gamma_bar: p.gamma_bar, alpha: p.alpha, max_trials: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbSettings {
    pub confidence: f64,
    pub seed_input: usize,
}

impl Default for RbSettings {
    fn default() -> Self {
        let p = RbParams::default();
        RbSettings { confidence: p.confidence, seed_input: p.seed_input }
    }
}

/// Default λ grid: zero plus 20 log-spaced points on `[1e-3, 1e2]`.
pub fn default_lambda_grid() -> Vec<f64> {
    std::iter::once(0.0).chain((0..20).map(|i| 10f64.powf(-3.0 + 5.0 * i as f64 / 19.0))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenarios: Vec<ScenarioSpec>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_training_fraction")]
    pub training_fraction: f64,
    #[serde(default = "default_efficiency_tol")]
    pub efficiency_tol: f64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub gl: GlSettings,
    #[serde(default)]
    pub ecm: EcmSettings,
    #[serde(default)]
    pub rb: RbSettings,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_training_fraction() -> f64 {
    0.10
}

fn default_efficiency_tol() -> f64 {
    EFFICIENCY_TOL
}

/// Smallest training panel the tuner accepts.
pub const MIN_TRAINING_UNITS: usize = 5;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidInput(format!("config: {m}")));
        if self.trials == 0 {
            return fail("trials must be at least 1");
        }
        if self.lambda_grid.is_empty() {
            return fail("lambda grid is empty");
        }
        if self.lambda_grid.windows(2).any(|w| w[1] <= w[0]) || self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return fail("lambda grid must be non-negative and strictly increasing");
        }
        if !(self.training_fraction > 0.0 && self.training_fraction < 1.0) {
            return fail("training fraction must lie in (0, 1)");
        }
        if !(self.efficiency_tol > 0.0) {
            return fail("efficiency tolerance must be positive");
        }
        if self.methods.is_empty() {
            return fail("no methods");
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return fail("methods repeat");
        }
        for s in &self.scenarios {
            s.resolve()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn ecm_params(&self, rts: Rts) -> EcmParams {
        EcmParams { p0: self.ecm.p0, gamma_bar: self.ecm.gamma_bar, alpha: self.ecm.alpha, rts }
    }

    fn rb_params(&self, rts: Rts) -> RbParams {
        RbParams { confidence: self.rb.confidence, seed_input: self.rb.seed_input, rts }
    }
}

/// Loss at one grid point; `loss` is `None` when the solve did not converge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub lambda: f64,
    pub loss: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub lambda: f64,
    pub reference_loss: f64,
    pub grid: Vec<GridPoint>,
}

impl TuneResult {
    pub fn nonconverged(&self) -> usize {
        self.grid.iter().filter(|p| p.loss.is_none()).count()
    }
}

/// Elbow rule: the largest grid λ whose loss `cᵀz(λ)` stays within
/// `(1 + τ)` of the unpenalised loss `f(0)`. `f(0)` is the exact LP optimum;
/// every positive grid point is an ADMM solve and is skipped if it does not
/// converge.
pub fn tune_lambda(train: &DataSet, rts: Rts, grid: &[f64], settings: &GlSettings) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("lambda grid is empty".into()));
    }
    if train.num_dmus() < MIN_TRAINING_UNITS {
        return Err(Error::InvalidInput(format!(
            "training panel has {} units, at least {MIN_TRAINING_UNITS} are needed",
            train.num_dmus()
        )));
    }
    let model = settings.model(rts);
    let reference = assemble_gl_problem(train, model, 0.0, settings.shift)?.unpenalized_loss()?;
    let solved = par::map_range(grid.len(), |g| -> Result<GridPoint> {
        let lambda = grid[g];
        if lambda == 0.0 {
            return Ok(GridPoint { lambda, loss: Some(reference), iterations: 0 });
        }
        let problem = assemble_gl_problem(train, model, lambda, settings.shift)?;
        let (state, _) = admm_solve(&problem, &settings.options(&problem))?;
        let loss = state.converged.then(|| state.loss(&problem));
        if loss.is_none() {
            log::warn!("tuning: lambda {lambda} did not converge and is skipped");
        }
        Ok(GridPoint { lambda, loss, iterations: state.iteration })
    });
    let points = solved.into_iter().collect::<Result<Vec<_>>>()?;
    let bound = (1.0 + settings.tau) * reference;
    let lambda = points
        .iter()
        .rev()
        .find(|p| p.loss.is_some_and(|l| l <= bound))
        .map(|p| p.lambda)
        .ok_or_else(|| Error::Tuning("no grid point converged within the elbow bound".into()))?;
    Ok(TuneResult { lambda, reference_loss: reference, grid: points })
}

/// Units used for tuning: the first `max(⌈f·n⌉, 5)` in generation order.
pub fn training_units(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).max(MIN_TRAINING_UNITS).min(n)
}

/// Carries a λ tuned on `n_train` units to a panel of `n` units. The loss
/// grows like `n` and each group norm like `√n`, so λ scales by `√(n/n_train)`.
pub fn transfer_lambda(lambda: f64, n_train: usize, n: usize) -> f64 {
    lambda * (n as f64 / n_train as f64).sqrt()
}

/// Tunes λ on the training slice and solves the full panel at the
/// transferred λ*.
pub fn gl_select(
    data: &DataSet,
    rts: Rts,
    grid: &[f64],
    training_fraction: f64,
    settings: &GlSettings,
) -> Result<(SelectionResult, TuneResult)> {
    let train: Vec<usize> = (0..training_units(data.num_dmus(), training_fraction)).collect();
    let tuned = tune_lambda(&data.select_dmus(&train)?, rts, grid, settings)?;
    let lambda = transfer_lambda(tuned.lambda, train.len(), data.num_dmus());
    let problem = assemble_gl_problem(data, settings.model(rts), lambda, settings.shift)?;
    let (_, mut selection) = admm_solve(&problem, &settings.options(&problem))?;
    selection.notes.push(format!("lambda {} tuned on {} units", tuned.lambda, train.len()));
    Ok((selection, tuned))
}

/// One method on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub scenario: u32,
    pub rts: Rts,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub selected: Option<Vec<usize>>,
    pub exact_selection: bool,
    pub lambda: Option<f64>,
    /// Whether the final GL solve hit the iteration cap.
    pub nonconverged: bool,
    /// Tuning grid points skipped for hitting the iteration cap.
    pub tuning_skipped: usize,
    pub model_scores: Option<Vec<Option<f64>>>,
    pub score_metrics: Option<ScoreMetrics>,
    pub identification: Option<IdentificationMetrics>,
    pub error: Option<String>,
}

/// The true-model scores of one generated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub scenario: u32,
    pub rts: Rts,
    pub trial: usize,
    pub seed: u64,
    pub true_inputs: Vec<usize>,
    pub true_scores: Vec<Option<f64>>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub master_seed: u64,
    pub version: String,
}

/// Everything but wall-clock time, which lives in [`Timings`] so that the
/// report is a pure function of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub truths: Vec<TrialTruth>,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<Aggregate>,
}

/// Selection wall-clock seconds per trial row, aligned with `rows`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: Vec<TimingRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub scenario: u32,
    pub rts: Rts,
    pub method: Method,
    pub trial: usize,
    pub seconds: f64,
}

fn to_options(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|s| s.is_finite().then_some(*s)).collect()
}

fn run_method(
    config: &ExperimentConfig,
    data: &DataSet,
    rts: Rts,
    method: Method,
) -> (Result<(SelectionResult, usize)>, f64) {
    let candidates = data.all_inputs();
    let start = Instant::now();
    let result = match method {
        Method::Gl => gl_select(data, rts, &config.lambda_grid, config.training_fraction, &config.gl)
            .map(|(sel, tune)| (sel, tune.nonconverged())),
        Method::Ecm => ecm_backward_select(data, &candidates, &config.ecm_params(rts)).map(|s| (s, 0)),
        Method::Rb => rb_select(data, &candidates, &config.rb_params(rts)).map(|s| (s, 0)),
    };
    (result, start.elapsed().as_secs_f64())
}

struct TrialOutput {
    truth: TrialTruth,
    rows: Vec<(TrialRow, f64)>,
}

fn run_trial(config: &ExperimentConfig, scenario: &Scenario, trial: usize) -> Result<TrialOutput> {
    let seed = trial_seed(config.master_seed, scenario.id, scenario.rts, trial as u32);
    let (data, info) = generate_scenario(scenario, seed)?;
    let rts = scenario.rts;
    let truth_scores = radial_output_scores(&data, &info.true_inputs, rts)?;
    let true_mask = efficient_set(&truth_scores, config.efficiency_tol);
    let truth = TrialTruth {
        scenario: scenario.id,
        rts,
        trial,
        seed,
        true_inputs: info.true_inputs.clone(),
        true_scores: to_options(&truth_scores.scores),
        sigma: info.sigma,
    };

    let mut rows = Vec::new();
    for &method in &config.methods {
        if method == Method::Ecm && config.ecm.max_trials.is_some_and(|cap| trial >= cap) {
            continue;
        }
        let (outcome, seconds) = run_method(config, &data, rts, method);
        let mut row = TrialRow {
            scenario: scenario.id,
            rts,
            method,
            trial,
            seed,
            selected: None,
            exact_selection: false,
            lambda: None,
            nonconverged: false,
            tuning_skipped: 0,
            model_scores: None,
            score_metrics: None,
            identification: None,
            error: None,
        };
        match outcome {
            Ok((sel, skipped)) => {
                row.exact_selection = sel.selected == info.true_inputs;
                row.lambda = sel.lambda;
                row.nonconverged = !sel.converged;
                row.tuning_skipped = skipped;
                if !sel.selected.is_empty() {
                    let model = radial_output_scores(&data, &sel.selected, rts)?;
                    let both: Vec<(f64, f64)> = truth_scores
                        .scores
                        .iter()
                        .zip(&model.scores)
                        .filter(|(a, b)| a.is_finite() && b.is_finite())
                        .map(|(a, b)| (*a, *b))
                        .collect();
                    let (t, m): (Vec<f64>, Vec<f64>) = both.into_iter().unzip();
                    row.score_metrics = score_metrics(&t, &m).ok();
                    row.identification =
                        identification_metrics(&true_mask, &efficient_set(&model, config.efficiency_tol)).ok();
                    row.model_scores = Some(to_options(&model.scores));
                }
                row.selected = Some(sel.selected);
            }
            Err(e) => {
                log::warn!("scenario {} trial {trial}: {} failed: {e}", scenario.id, method.label());
                row.error = Some(e.to_string());
            }
        }
        rows.push((row, seconds));
    }
    Ok(TrialOutput { truth, rows })
}

/// Runs every scenario × trial × method. Trials run in parallel and are
/// merged in trial order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentReport, Timings)> {
    config.validate()?;
    let mut truths = Vec::new();
    let mut rows = Vec::new();
    let mut timings = Timings::default();
    for spec in &config.scenarios {
        let scenario = spec.resolve()?;
        let outputs = par::map_range(config.trials, |t| run_trial(config, &scenario, t));
        for out in outputs {
            let out = out?;
            truths.push(out.truth);
            for (row, seconds) in out.rows {
                timings.seconds.push(TimingRow {
                    scenario: row.scenario,
                    rts: row.rts,
                    method: row.method,
                    trial: row.trial,
                    seconds,
                });
                rows.push(row);
            }
        }
    }
    let aggregates = report::aggregate(&rows);
    let report = ExperimentReport {
        provenance: Provenance {
            config_hash: config.hash(),
            master_seed: config.master_seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        config: config.clone(),
        truths,
        rows,
        aggregates,
    };
    Ok((report, timings))
}
