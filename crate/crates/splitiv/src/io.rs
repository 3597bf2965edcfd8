//! CSV and JSON readers and writers. Numbers are written with Rust's
//! shortest round-trip formatting, which is locale independent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use splitiv_core::dynamics::Trajectory;
use splitiv_core::estimator::{Estimate, Excitation};
use splitiv_core::polyfilter::FilterWeights;
use splitiv_core::splitfilters::SplitFilterBank;
use splitiv_core::DMatrix;

use crate::error::{HarnessError, Result};
use crate::experiment::TrialResult;
use crate::report::{KdeRow, Summary};

fn num(v: f64) -> String {
    format!("{v}")
}

/// One line per trial and estimator; failed trials keep their row with the
/// error and empty numeric fields.
pub fn write_trials_csv<W: Write>(out: W, results: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (rows, cols) = results
        .iter()
        .find_map(|r| r.estimates().map(|e| e.iv.theta.shape()))
        .unwrap_or((0, 0));
    let mut header: Vec<String> = [
        "trial",
        "estimator",
        "status",
        "error",
        "sigma_min",
        "clipped",
        "condition",
        "excited",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..rows {
        for j in 0..cols {
            header.push(format!("theta_{i}_{j}"));
        }
    }
    w.write_record(&header)?;
    for r in results {
        match &r.outcome {
            Ok(e) => {
                for est in [&e.iv, &e.ls] {
                    let mut record = vec![
                        r.trial_index.to_string(),
                        est.method.as_str().to_string(),
                        "ok".to_string(),
                        String::new(),
                        num(est.sigma_min_zx),
                        est.clipped_directions.to_string(),
                        num(est.condition),
                        e.excitation.satisfied.to_string(),
                    ];
                    record.extend(row_major(&est.theta).into_iter().map(num));
                    w.write_record(&record)?;
                }
            }
            Err(f) => {
                for method in ["iv", "ls"] {
                    let mut record = vec![
                        r.trial_index.to_string(),
                        method.to_string(),
                        "failed".to_string(),
                        f.kind.clone(),
                    ];
                    record.resize(header.len(), String::new());
                    w.write_record(&record)?;
                }
            }
        }
    }
    w.flush().map_err(|e| HarnessError::io("trials.csv", e))?;
    Ok(())
}

pub fn write_kde_csv<W: Write>(out: W, rows: &[KdeRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "entry_row",
        "entry_col",
        "estimator",
        "grid_value",
        "density",
        "mean",
        "reference",
    ])?;
    for r in rows {
        w.write_record([
            r.entry_row.to_string(),
            r.entry_col.to_string(),
            r.estimator.as_str().to_string(),
            num(r.grid_value),
            num(r.density),
            num(r.mean),
            num(r.reference),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io("kde.csv", e))?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| HarnessError::io("json output", e))?;
    Ok(())
}

/// `t, x1, x2, x3`, followed by `z1, z2, z3` when measurements are given.
pub fn write_trajectory_csv<W: Write>(
    out: W,
    traj: &Trajectory,
    measurements: Option<&DMatrix<f64>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t", "x1", "x2", "x3"];
    if measurements.is_some() {
        header.extend(["z1", "z2", "z3"]);
    }
    w.write_record(&header)?;
    for (i, t) in traj.times.iter().enumerate() {
        let mut record = vec![num(*t)];
        record.extend(traj.states.row(i).iter().map(|v| num(*v)));
        if let Some(m) = measurements {
            record.extend(m.row(i).iter().map(|v| num(*v)));
        }
        w.write_record(&record)?;
    }
    w.flush()
        .map_err(|e| HarnessError::io("trajectory csv", e))?;
    Ok(())
}

/// Stencils of every filter in the bank: `filter, k, weight_d0, ..., weight_dm`.
pub fn write_filters_csv<W: Write>(out: W, bank: &SplitFilterBank) -> Result<()> {
    let filters: [(&str, &FilterWeights); 3] = [
        ("hat_h", &bank.hat_h),
        ("hat_g", &bank.hat_g),
        ("tilde_g", &bank.tilde_g),
    ];
    let max_rows = filters
        .iter()
        .map(|(_, f)| f.coefficients().nrows())
        .max()
        .unwrap_or(1);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["filter".to_string(), "k".to_string()];
    header.extend((0..max_rows).map(|d| format!("weight_d{d}")));
    w.write_record(&header)?;
    for (name, f) in filters {
        let c = f.coefficients();
        for k in 0..f.window() {
            let mut record = vec![name.to_string(), (k + 1).to_string()];
            record.extend((0..max_rows).map(|d| {
                if d < c.nrows() {
                    num(c[(d, k)])
                } else {
                    String::new()
                }
            }));
            w.write_record(&record)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io("filters csv", e))?;
    Ok(())
}

/// Reads an `n x 3` measurement matrix from a CSV with a header. Columns
/// `z1..z3` are used when present, otherwise `x1..x3`.
pub fn read_measurements_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let find = |names: [&str; 3]| -> Option<Vec<usize>> {
        names
            .iter()
            .map(|n| header.iter().position(|h| h.trim() == *n))
            .collect()
    };
    let columns = find(["z1", "z2", "z3"])
        .or_else(|| find(["x1", "x2", "x3"]))
        .ok_or_else(|| {
            HarnessError::Config(format!("{}: need columns z1..z3 or x1..x3", path.display()))
        })?;
    let mut values = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        for &c in &columns {
            let field = record.get(c).unwrap_or("");
            let v: f64 = field.trim().parse().map_err(|_| {
                HarnessError::Config(format!(
                    "{}: row {}: `{field}` is not a number",
                    path.display(),
                    line + 1
                ))
            })?;
            values.push(v);
        }
    }
    let n = values.len() / 3;
    Ok(DMatrix::from_row_slice(n, 3, &values))
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateJson {
    pub method: &'static str,
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub theta: Vec<f64>,
    pub sigma_min_zx: f64,
    pub clipped_directions: usize,
    pub condition: f64,
}

impl From<&Estimate> for EstimateJson {
    fn from(e: &Estimate) -> Self {
        EstimateJson {
            method: e.method.as_str(),
            rows: e.theta.nrows(),
            cols: e.theta.ncols(),
            theta: row_major(&e.theta),
            sigma_min_zx: e.sigma_min_zx,
            clipped_directions: e.clipped_directions,
            condition: e.condition,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub n_regression: usize,
    pub effective_p: usize,
    pub iv: EstimateJson,
    pub ls: EstimateJson,
    pub excitation: Excitation,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

/// Paths written by [`write_benchmark`].
#[derive(Debug, Clone)]
pub struct BenchmarkFiles {
    pub trials: PathBuf,
    pub summary: PathBuf,
    pub kde: Option<PathBuf>,
}

pub fn write_benchmark(
    dir: &Path,
    results: &[TrialResult],
    summary: &Summary,
    kde: Option<&[KdeRow]>,
) -> Result<BenchmarkFiles> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let trials = dir.join("trials.csv");
    write_trials_csv(create(&trials)?, results)?;
    let summary_path = dir.join("summary.json");
    let mut out = create(&summary_path)?;
    write_json(&mut out, summary)?;
    out.flush()
        .map_err(|e| HarnessError::io(&summary_path, e))?;
    let kde = match kde {
        Some(rows) => {
            let path = dir.join("kde.csv");
            write_kde_csv(create(&path)?, rows)?;
            Some(path)
        }
        None => None,
    };
    Ok(BenchmarkFiles {
        trials,
        summary: summary_path,
        kde,
    })
}
