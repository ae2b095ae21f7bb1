//! Aggregation and the on-disk report: `report.json`, `timings.json`,
//! `table3.csv` … `table6.csv` and the long-format `metrics_long.csv`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentReport, Timings, TrialRow};
use crate::dea::Rts;
use crate::error::Result;
use crate::group_lasso::Method;

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const LONG_FILE: &str = "metrics_long.csv";
pub const TABLE_FILES: [&str; 4] = ["table3.csv", "table4.csv", "table5.csv", "table6.csv"];

/// Trial means for one (scenario, rts, method). Each mean runs over the
/// trials where the metric is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: u32,
    pub rts: Rts,
    pub method: Method,
    pub trials: usize,
    pub mse: Option<f64>,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub pct_all: Option<f64>,
    pub pct_efficient: Option<f64>,
    pub exact_selection_rate: f64,
    /// Final GL solves that hit the iteration cap.
    pub nonconverged: usize,
    pub tuning_skipped: usize,
    pub failures: usize,
}

pub(crate) fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values.flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn keys(rows: &[TrialRow]) -> Vec<(u32, Rts, Method)> {
    let mut seen = Vec::new();
    for r in rows {
        let key = (r.scenario, r.rts, r.method);
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    seen
}

pub(crate) fn aggregate(rows: &[TrialRow]) -> Vec<Aggregate> {
    keys(rows)
        .into_iter()
        .map(|(scenario, rts, method)| {
            let group: Vec<&TrialRow> =
                rows.iter().filter(|r| (r.scenario, r.rts, r.method) == (scenario, rts, method)).collect();
            let sm = |f: fn(&crate::metrics::ScoreMetrics) -> Option<f64>| {
                mean(group.iter().map(|r| r.score_metrics.as_ref().and_then(f)))
            };
            Aggregate {
                scenario,
                rts,
                method,
                trials: group.len(),
                mse: sm(|m| Some(m.mse)),
                pearson: sm(|m| m.pearson),
                spearman: sm(|m| m.spearman),
                pct_all: mean(group.iter().map(|r| r.identification.map(|m| m.pct_all))),
                pct_efficient: mean(group.iter().map(|r| r.identification.and_then(|m| m.pct_efficient))),
                exact_selection_rate: group.iter().filter(|r| r.exact_selection).count() as f64 / group.len() as f64,
                nonconverged: group.iter().filter(|r| r.nonconverged).count(),
                tuning_skipped: group.iter().map(|r| r.tuning_skipped).sum(),
                failures: group.iter().filter(|r| r.error.is_some()).count(),
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn rts_label(rts: Rts) -> &'static str {
    match rts {
        Rts::Crs => "crs",
        Rts::Vrs => "vrs",
    }
}

fn to_csv(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn scenario_ids(aggs: &[Aggregate], rts: Option<Rts>) -> Vec<u32> {
    let ids: BTreeSet<u32> = aggs.iter().filter(|a| rts.is_none_or(|r| a.rts == r)).map(|a| a.scenario).collect();
    ids.into_iter().collect()
}

fn find(aggs: &[Aggregate], id: u32, rts: Rts, method: Method) -> Option<&Aggregate> {
    aggs.iter().find(|a| (a.scenario, a.rts, a.method) == (id, rts, method))
}

/// Score metrics for one returns-to-scale setting: MSE, Pearson and
/// Spearman, each for GL, ECM, RB.
fn performance_table(aggs: &[Aggregate], rts: Rts) -> Result<Vec<u8>> {
    let metrics: [(&str, fn(&Aggregate) -> Option<f64>); 3] =
        [("mse", |a| a.mse), ("pearson", |a| a.pearson), ("spearman", |a| a.spearman)];
    let mut header = vec!["experiment".to_string()];
    for (name, _) in &metrics {
        for m in Method::ALL {
            header.push(format!("{name}_{}", m.label().to_lowercase()));
        }
    }
    let rows = scenario_ids(aggs, Some(rts))
        .into_iter()
        .map(|id| {
            let mut row = vec![id.to_string()];
            for (_, f) in &metrics {
                for m in Method::ALL {
                    row.push(cell(find(aggs, id, rts, m).and_then(f)));
                }
            }
            row
        })
        .collect();
    to_csv(header, rows)
}

/// Identification shares under both settings.
fn identification_table(aggs: &[Aggregate]) -> Result<Vec<u8>> {
    let metrics: [(&str, fn(&Aggregate) -> Option<f64>); 2] =
        [("all", |a| a.pct_all), ("efficient", |a| a.pct_efficient)];
    let mut header = vec!["experiment".to_string()];
    for rts in [Rts::Crs, Rts::Vrs] {
        for (name, _) in &metrics {
            for m in Method::ALL {
                header.push(format!("{}_{name}_{}", rts_label(rts), m.label().to_lowercase()));
            }
        }
    }
    let rows = scenario_ids(aggs, None)
        .into_iter()
        .map(|id| {
            let mut row = vec![id.to_string()];
            for rts in [Rts::Crs, Rts::Vrs] {
                for (_, f) in &metrics {
                    for m in Method::ALL {
                        row.push(cell(find(aggs, id, rts, m).and_then(f)));
                    }
                }
            }
            row
        })
        .collect();
    to_csv(header, rows)
}

/// Mean selection seconds.
fn time_table(report: &ExperimentReport, timings: &Timings) -> Result<Vec<u8>> {
    let mut header = vec!["experiment".to_string()];
    for rts in [Rts::Crs, Rts::Vrs] {
        for m in Method::ALL {
            header.push(format!("{}_{}", rts_label(rts), m.label().to_lowercase()));
        }
    }
    let rows = scenario_ids(&report.aggregates, None)
        .into_iter()
        .map(|id| {
            let mut row = vec![id.to_string()];
            for rts in [Rts::Crs, Rts::Vrs] {
                for m in Method::ALL {
                    let secs = timings
                        .seconds
                        .iter()
                        .filter(|t| (t.scenario, t.rts, t.method) == (id, rts, m))
                        .map(|t| Some(t.seconds));
                    row.push(cell(mean(secs)));
                }
            }
            row
        })
        .collect();
    to_csv(header, rows)
}

fn long_table(aggs: &[Aggregate]) -> Result<Vec<u8>> {
    let header = ["scenario", "rts", "method", "metric", "value"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for a in aggs {
        let values = [
            ("mse", a.mse),
            ("pearson", a.pearson),
            ("spearman", a.spearman),
            ("pct_all", a.pct_all),
            ("pct_efficient", a.pct_efficient),
            ("exact_selection_rate", Some(a.exact_selection_rate)),
        ];
        for (name, v) in values {
            rows.push(vec![
                a.scenario.to_string(),
                rts_label(a.rts).to_string(),
                a.method.label().to_string(),
                name.to_string(),
                cell(v),
            ]);
        }
    }
    to_csv(header, rows)
}

/// Writes all report files into `dir`. Every file is rendered before the
/// first one is written.
pub fn emit_report(report: &ExperimentReport, timings: &Timings, dir: &Path) -> Result<()> {
    let mut files: Vec<(&str, Vec<u8>)> = vec![
        (REPORT_FILE, serde_json::to_vec_pretty(report)?),
        (TIMINGS_FILE, serde_json::to_vec_pretty(timings)?),
        (TABLE_FILES[0], performance_table(&report.aggregates, Rts::Crs)?),
        (TABLE_FILES[1], performance_table(&report.aggregates, Rts::Vrs)?),
        (TABLE_FILES[2], identification_table(&report.aggregates)?),
        (TABLE_FILES[3], time_table(report, timings)?),
        (LONG_FILE, long_table(&report.aggregates)?),
    ];
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in files.drain(..) {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

/// Reads `report.json` and, when present, `timings.json` from `dir`.
pub fn load_report(dir: &Path) -> Result<(ExperimentReport, Timings)> {
    let report = serde_json::from_slice(&std::fs::read(dir.join(REPORT_FILE))?)?;
    let timings = match std::fs::read(dir.join(TIMINGS_FILE)) {
        Ok(bytes) => serde_json::from_slice(&bytes)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Timings::default(),
        Err(e) => return Err(e.into()),
    };
    Ok((report, timings))
}
