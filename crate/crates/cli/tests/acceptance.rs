use std::process::ExitCode;
use std::time::{Duration, Instant};

use deasel::benchmarks::{ecm_backward_select, EcmParams};
use deasel::datagen::{calibrate_sigma, correlate, generate_scenario, trial_seed, Correlation, Scenario};
use deasel::dea::{ccr_output_scores, ModelKind, Rts};
use deasel::group_lasso::{admm_solve, assemble_gl_problem, block_soft_threshold, s_step, z_step, AdmmOptions, GramFactor, Method};
use deasel::harness::{
    default_lambda_grid, gl_select, run_experiment, Aggregate, ExperimentConfig, ExperimentReport, GlSettings,
};
use deasel::metrics::pearson;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[path = "../../core/tests/common/mod.rs"]
mod common;
use common::{augmented_lagrangian, random_panel, random_state, stacked_additive_lp};

const MASTER_SEED: u64 = 2024;
const TRIALS: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn admm_matches_lp() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut unconverged = 0;
    for _ in 0..20 {
        let (m, n) = (rng.random_range(1..=4), rng.random_range(3..=20));
        let data = random_panel(&mut rng, m, 1, n);
        let oracle = stacked_additive_lp(&data);
        let problem = assemble_gl_problem(&data, ModelKind::Additive, 0.0, true).unwrap();
        let opts = AdmmOptions { mu: 100.0, max_iter: 1_000_000, ..AdmmOptions::for_problem(&problem) };
        let (state, _) = admm_solve(&problem, &opts).unwrap();
        unconverged += usize::from(!state.converged);
        worst = worst.max((state.loss(&problem) - oracle).abs() / oracle.abs().max(1.0));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-4 && unconverged == 0 && elapsed <= Duration::from_secs(60),
        format!("worst relative error {worst:.2e}, {unconverged} unconverged, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn proximal_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_norm = 0.0f64;
    for _ in 0..1000 {
        let len = rng.random_range(1..=10);
        let a: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..10.0)).collect();
        let kappa = rng.random_range(0.0..15.0);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst_norm = worst_norm.max((norm(&block_soft_threshold(&a, kappa)) - (norm(&a) - kappa).max(0.0)).abs());
    }

    let data = random_panel(&mut rng, 2, 2, 5);
    let mut idempotent = true;
    let mut worst_grad = 0.0f64;
    for (model, shift) in [(ModelKind::Additive, true), (ModelKind::Ccr, false), (ModelKind::Bcc, false)] {
        let p = assemble_gl_problem(&data, model, 0.3, shift).unwrap();
        let mu = 0.7;
        let mut st = random_state(&p, &mut rng, mu);
        st.z.iter_mut().for_each(|v| *v = rng.random_range(-2.0..2.0));
        let factor = GramFactor::new(&p, mu).unwrap();
        let z = DVector::from_vec(z_step(&p, &st, &factor).unwrap());
        let h = 1e-4;
        for t in 0..p.dim() {
            let (mut plus, mut minus) = (z.clone(), z.clone());
            plus[t] += h;
            minus[t] -= h;
            let g = (augmented_lagrangian(&p, &st, &plus) - augmented_lagrangian(&p, &st, &minus)) / (2.0 * h);
            worst_grad = worst_grad.max(g.abs());
        }

        let s1 = s_step(&p, &st);
        let shifted = p.dense_a_s() * DVector::from_column_slice(&st.z) + DVector::from_vec(p.b());
        st.gamma_s = shifted.iter().zip(&s1).map(|(a, b)| (a - b) / mu).collect();
        let s2 = s_step(&p, &st);
        idempotent &= s1.iter().all(|v| *v >= 0.0) && s1.iter().zip(&s2).all(|(a, b)| (a - b).abs() <= 1e-12);
    }
    outcome(
        worst_norm <= 1e-12 && idempotent && worst_grad <= 1e-7,
        format!("norm identity {worst_norm:.1e}, projection idempotent {idempotent}, stationarity {worst_grad:.1e}"),
    )
}

fn frontier_membership() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..10 {
        let s = Scenario {
            id: 0,
            rts: Rts::Crs,
            alpha: vec![0.3, 0.3, 0.4],
            correlations: vec![Correlation { i: 1, j: 0, rho: 0.4 }],
            n: 50,
            irrelevant: 0,
            log_interval: (0.0, 2.0),
            target_mean_efficiency: 0.85,
            sigma: Some(0.0),
        };
        let (data, _) = generate_scenario(&s, seed).unwrap();
        let theta = ccr_output_scores(&data, &[0, 1, 2]).unwrap();
        worst = theta.scores.iter().copied().fold(worst, f64::max);
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1.0 + 1e-6 && elapsed <= Duration::from_secs(60),
        format!("max theta {worst:.9}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn calibration() -> Outcome {
    let sigma = calibrate_sigma(0.85).unwrap();
    let mut design = Scenario::standard(1, Rts::Crs).unwrap();
    design.n = 1_000_000;
    design.target_mean_efficiency = 0.85;
    let (_, truth) = generate_scenario(&design, 4).unwrap();
    let mean = truth.efficiency.iter().sum::<f64>() / design.n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 10_000;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let r = pearson(&correlate(&x, 0.8, &w).unwrap(), &x).unwrap();
    outcome(
        truth.sigma == sigma && (0.845..=0.855).contains(&mean) && (0.77..=0.83).contains(&r),
        format!("sigma {sigma:.4}, sample mean {mean:.4}, correlation {r:.4}"),
    )
}

fn desk_config() -> ExperimentConfig {
    serde_json::from_str(&format!(
        r#"{{"scenarios":[{{"id":1,"rts":"CRS"}},{{"id":3,"rts":"CRS"}},{{"id":7,"rts":"CRS"}}],
            "trials":{TRIALS},"master_seed":{MASTER_SEED}}}"#
    ))
    .unwrap()
}

fn aggregate(report: &ExperimentReport, scenario: u32, method: Method) -> &Aggregate {
    report.aggregates.iter().find(|a| a.scenario == scenario && a.method == method).unwrap()
}

fn experiment_one(report: &ExperimentReport, wall: f64) -> Outcome {
    let gl = aggregate(report, 1, Method::Gl);
    let (mse, r) = (gl.mse.unwrap_or(f64::INFINITY), gl.pearson.unwrap_or(0.0));
    outcome(
        mse <= 0.005 && r >= 0.98 && gl.exact_selection_rate >= 0.90 && wall <= 600.0,
        format!(
            "GL mean MSE {mse:.5}, Pearson {r:.4}, exact selection {:.0}%, {wall:.0}s",
            100.0 * gl.exact_selection_rate
        ),
    )
}

fn experiment_three(report: &ExperimentReport) -> Outcome {
    let [gl, ecm, rb] = [Method::Gl, Method::Ecm, Method::Rb].map(|m| aggregate(report, 3, m));
    let mse = |a: &Aggregate| a.mse.unwrap_or(f64::INFINITY);
    let eff = |a: &Aggregate| a.pct_efficient.unwrap_or(0.0);
    outcome(
        mse(gl) < mse(ecm) && mse(gl) < mse(rb) && eff(gl) >= eff(ecm) && eff(gl) >= eff(rb),
        format!(
            "MSE GL {:.5} ECM {:.5} RB {:.5}; pct_efficient GL {:.2} ECM {:.2} RB {:.2}",
            mse(gl),
            mse(ecm),
            mse(rb),
            eff(gl),
            eff(ecm),
            eff(rb)
        ),
    )
}

fn experiment_seven(report: &ExperimentReport) -> Outcome {
    let eff = |m| aggregate(report, 7, m).pct_efficient.unwrap_or(0.0);
    let (gl, rb) = (eff(Method::Gl), eff(Method::Rb));
    outcome(gl >= 0.90 && rb <= 0.60, format!("pct_efficient GL {gl:.2}, RB {rb:.2}"))
}

fn cost_ordering() -> Outcome {
    let s = Scenario::standard(1, Rts::Crs).unwrap();
    let (data, _) = generate_scenario(&s, trial_seed(MASTER_SEED, 1, Rts::Crs, 0)).unwrap();
    let candidates = data.all_inputs();
    let start = Instant::now();
    gl_select(&data, Rts::Crs, &default_lambda_grid(), 0.10, &GlSettings::default()).unwrap();
    let gl = start.elapsed().as_secs_f64();
    let start = Instant::now();
    ecm_backward_select(&data, &candidates, &EcmParams::default()).unwrap();
    let ecm = start.elapsed().as_secs_f64();
    outcome(gl < ecm, format!("GL {gl:.3}s, ECM {ecm:.3}s"))
}

fn determinism(first: &ExperimentReport) -> Outcome {
    let (second, _) = run_experiment(&desk_config()).unwrap();
    let (a, b) = (serde_json::to_vec(first).unwrap(), serde_json::to_vec(&second).unwrap());
    outcome(a == b, format!("{} bytes, identical {}", a.len(), a == b))
}

fn convergence(report: &ExperimentReport) -> Outcome {
    let gl: Vec<_> = report.rows.iter().filter(|r| r.method == Method::Gl).collect();
    let nonconverged = gl.iter().filter(|r| r.nonconverged).count();
    let failed = gl.iter().filter(|r| r.error.is_some()).count();
    let skipped: usize = gl.iter().map(|r| r.tuning_skipped).sum();
    outcome(
        nonconverged == 0 && failed == 0,
        format!("{nonconverged} of {} final solves non-converged, {failed} failed, {skipped} tuning points skipped", gl.len()),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report_line = |id: u32, o: Outcome| {
        println!("criterion {id}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    };
    report_line(1, admm_matches_lp());
    report_line(2, proximal_suite());
    report_line(3, frontier_membership());
    report_line(4, calibration());
    let start = Instant::now();
    let (report, _) = run_experiment(&desk_config()).unwrap();
    let wall = start.elapsed().as_secs_f64();
    report_line(5, experiment_one(&report, wall));
    report_line(6, experiment_three(&report));
    report_line(7, experiment_seven(&report));
    report_line(8, cost_ordering());
    report_line(9, determinism(&report));
    report_line(10, convergence(&report));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
