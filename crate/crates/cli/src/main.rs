use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use deasel::benchmarks::{ecm_backward_select, rb_select, EcmParams, RbParams};
use deasel::datagen::{generate_scenario, trial_seed, Scenario};
use deasel::dea::{score, DataSet, ModelKind, Rts};
use deasel::group_lasso::{admm_solve, assemble_gl_problem, AdmmOptions};
use deasel::harness::{
    default_lambda_grid, emit_report, gl_select, load_report, read_panel, run_experiment, write_panel,
    ExperimentConfig, GlLoss, GlSettings,
};
use deasel::{Error, Result};

#[derive(Parser)]
#[command(name = "deasel", version, about = "Joint input selection for DEA")]
struct Cli {
    /// Log progress and warnings at info level.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one panel of a simulation scenario as CSV.
    Generate {
        #[arg(long)]
        scenario: u32,
        #[arg(long, value_enum, default_value_t = RtsArg::Crs)]
        rts: RtsArg,
        /// Master seed; the panel seed is derived from it and the trial index.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: u32,
        /// Override the number of units.
        #[arg(long)]
        n: Option<usize>,
        /// Panel CSV path; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Also write the true inputs and efficiencies as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Efficiency scores for a CSV panel.
    Score {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelArg::Ccr)]
        model: ModelArg,
        #[arg(long, value_enum, default_value_t = RtsArg::Crs)]
        rts: RtsArg,
        /// Comma-separated input indices; all inputs when omitted.
        #[arg(long, value_delimiter = ',')]
        inputs: Option<Vec<usize>>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run one selection method on a CSV panel.
    Select {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = RtsArg::Crs)]
        rts: RtsArg,
        /// Candidate input indices; all inputs when omitted.
        #[arg(long, value_delimiter = ',')]
        inputs: Option<Vec<usize>>,
        /// GL: fixed λ; tuned on the training slice when omitted.
        #[arg(long)]
        lambda: Option<f64>,
        /// GL: tuning grid, comma-separated and increasing.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.10)]
        training_fraction: f64,
        #[arg(long, value_enum, default_value_t = LossArg::Radial)]
        loss: LossArg,
        #[arg(long)]
        shift: bool,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        /// Anderson memory; 0 runs plain ADMM.
        #[arg(long, default_value_t = 10)]
        anderson: usize,
        #[arg(long, default_value_t = 0.15)]
        p0: f64,
        #[arg(long, default_value_t = 1.10)]
        gamma_bar: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.90)]
        confidence: f64,
        #[arg(long, default_value_t = 0)]
        seed_input: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a full experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Report directory; overrides `output_dir` in the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Re-emit the tables of a stored report.
    Report {
        /// Directory holding report.json.
        #[arg(long)]
        input: PathBuf,
        /// Target directory; defaults to the input directory.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RtsArg {
    Crs,
    Vrs,
}

impl From<RtsArg> for Rts {
    fn from(r: RtsArg) -> Self {
        match r {
            RtsArg::Crs => Rts::Crs,
            RtsArg::Vrs => Rts::Vrs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Ccr,
    Bcc,
    Additive,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ccr => ModelKind::Ccr,
            ModelArg::Bcc => ModelKind::Bcc,
            ModelArg::Additive => ModelKind::Additive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gl,
    Ecm,
    Rb,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Radial,
    Additive,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn load_panel(path: &Path) -> Result<DataSet> {
    read_panel(open(path)?)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn candidates(data: &DataSet, inputs: Option<Vec<usize>>) -> Vec<usize> {
    inputs.unwrap_or_else(|| data.all_inputs())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { scenario, rts, seed, trial, n, output, truth } => {
            let mut design = Scenario::standard(scenario, rts.into())?;
            if let Some(n) = n {
                design.n = n;
                design.validate()?;
            }
            let (data, info) = generate_scenario(&design, trial_seed(seed, design.id, design.rts, trial))?;
            let mut out = sink(output.as_deref())?;
            write_panel(&data, &mut out)?;
            out.flush()?;
            if let Some(path) = truth {
                write_json(&info, Some(&path))?;
            }
        }
        Command::Score { data, model, rts, inputs, output } => {
            let data = load_panel(&data)?;
            let inputs = candidates(&data, inputs);
            let result = score(&data, &inputs, model.into(), rts.into())?;
            write_json(&result, output.as_deref())?;
        }
        Command::Select {
            data,
            method,
            rts,
            inputs,
            lambda,
            grid,
            training_fraction,
            loss,
            shift,
            mu,
            max_iter,
            anderson,
            p0,
            gamma_bar,
            alpha,
            confidence,
            seed_input,
            output,
        } => {
            let full = load_panel(&data)?;
            let inputs = candidates(&full, inputs);
            let rts: Rts = rts.into();
            let selection = match method {
                MethodArg::Gl => {
                    let loss = match loss {
                        LossArg::Radial => GlLoss::Radial,
                        LossArg::Additive => GlLoss::Additive,
                    };
                    let settings = GlSettings { loss, shift, mu, max_iter, anderson, ..GlSettings::default() };
                    let data = full.select_inputs(&inputs)?;
                    let mut sel = match lambda {
                        Some(lambda) => {
                            let problem = assemble_gl_problem(&data, settings.model(rts), lambda, shift)?;
                            let opts =
                                AdmmOptions { mu, max_iter, anderson, ..AdmmOptions::for_problem(&problem) };
                            admm_solve(&problem, &opts)?.1
                        }
                        None => {
                            let grid = grid.unwrap_or_else(default_lambda_grid);
                            gl_select(&data, rts, &grid, training_fraction, &settings)?.0
                        }
                    };
                    sel.selected = sel.selected.iter().map(|&i| inputs[i]).collect();
                    sel
                }
                MethodArg::Ecm => {
                    ecm_backward_select(&full, &inputs, &EcmParams { p0, gamma_bar, alpha, rts })?
                }
                MethodArg::Rb => rb_select(&full, &inputs, &RbParams { confidence, seed_input, rts })?,
            };
            write_json(&selection, output.as_deref())?;
        }
        Command::Experiment { config, output } => {
            let mut config: ExperimentConfig = serde_json::from_reader(open(&config)?)?;
            if let Some(dir) = output {
                config.output_dir = Some(dir.to_string_lossy().into_owned());
            }
            let dir = config
                .output_dir
                .clone()
                .ok_or_else(|| Error::InvalidInput("no output directory in config or on the command line".into()))?;
            let (report, timings) = run_experiment(&config)?;
            emit_report(&report, &timings, Path::new(&dir))?;
            log::info!("report written to {dir}");
        }
        Command::Report { input, output } => {
            let (report, timings) = load_report(&input)?;
            emit_report(&report, &timings, output.as_deref().unwrap_or(&input))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
