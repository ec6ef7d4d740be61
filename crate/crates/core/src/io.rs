//! CSV matrices and vectors, dataset loading, and experiment configuration.
//!
//! Matrices carry a header `j1,...,jp`; vectors a single header `value`.
//! Numbers are written with 17 significant digits so reading them back is
//! exact.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assumptions::ConeBudget;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, Objective, PrelimMethod, PrelimSpec, RegressionDataset};
use crate::harness::{GridParams, PerfObjective, PerfRecord};
use crate::linalg::Matrix;
use crate::solvers::SolverConfig;
use crate::synth::SynthConfig;

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_cell(cell: &str, path: &Path, row: usize, col: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| {
        Error::Data(format!("{}: row {row}, column {col}: '{cell}' is not a number", path.display()))
    })?;
    if !v.is_finite() {
        return Err(Error::Data(format!("{}: row {row}, column {col}: non-finite value '{cell}'", path.display())));
    }
    Ok(v)
}

/// Reads a numeric table with a header row. Row numbers in errors count data
/// rows from 1.
fn read_table(path: &Path) -> Result<(usize, Vec<f64>, usize)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let width = rdr.headers()?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        if rec.len() != width {
            return Err(Error::Data(format!(
                "{}: row {} has {} columns, header has {width}",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        for (j, cell) in rec.iter().enumerate() {
            data.push(parse_cell(cell, path, i + 1, j + 1)?);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    Ok((rows, data, width))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let (rows, data, cols) = read_table(path)?;
    Matrix::new(rows, cols, data)
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let (_, data, cols) = read_table(path)?;
    if cols != 1 {
        return Err(Error::Data(format!("{}: expected one column, found {cols}", path.display())));
    }
    Ok(data)
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((1..=m.cols()).map(|j| format!("j{j}")))?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| format_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["value"])?;
    for x in v {
        w.write_record([format_f64(*x)])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads `X`, `Y` and optionally `Z`. With `stack`, the `Z` file holds only
/// the unlabeled rows and is appended below `X`; otherwise its first `n` rows
/// must equal `X`.
pub fn load_dataset(x: &Path, y: &Path, z: Option<&Path>, sigma: f64, stack: bool) -> Result<RegressionDataset> {
    let xm = read_matrix_csv(x)?;
    let yv = read_vector_csv(y)?;
    let zm = match z {
        None => None,
        Some(zp) => {
            let zm = read_matrix_csv(zp)?;
            if zm.cols() != xm.cols() {
                return Err(Error::Data(format!(
                    "{} has {} columns but {} has {}",
                    zp.display(),
                    zm.cols(),
                    x.display(),
                    xm.cols()
                )));
            }
            Some(if stack { xm.vstack(&zm)? } else { zm })
        }
    };
    RegressionDataset::new(xm, yv, zm, sigma)
}

/// Writes `x.csv`, `y.csv`, `z.csv` and, if given, `beta_star.csv`.
pub fn save_dataset(dir: &Path, ds: &RegressionDataset, beta_star: Option<&[f64]>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("x.csv"), ds.x())?;
    write_vector_csv(&dir.join("y.csv"), ds.y())?;
    write_matrix_csv(&dir.join("z.csv"), ds.z())?;
    if let Some(b) = beta_star {
        write_vector_csv(&dir.join("beta_star.csv"), b)?;
    }
    Ok(())
}

fn default_reps() -> usize {
    100
}
fn default_objectives() -> Vec<PerfObjective> {
    PerfObjective::ALL.to_vec()
}
fn default_eta() -> f64 {
    0.1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    /// One row per replication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_json: Option<PathBuf>,
    /// LASSO error curve of the first replication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_csv: Option<PathBuf>,
}

fn default_theory_objective() -> Objective {
    Objective::Denoising
}
fn default_estimator() -> EstimatorKind {
    EstimatorKind::Dantzig
}
fn default_prelim() -> PrelimSpec {
    PrelimSpec { method: PrelimMethod::IdentityResponse, label_preserving: false }
}
fn default_kappa_reps() -> usize {
    1000
}
fn default_check_reps() -> usize {
    500
}
fn default_true() -> bool {
    true
}

/// Settings for the `bounds` and `check` commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig {
    #[serde(default = "default_theory_objective")]
    pub objective: Objective,
    /// `dantzig` checks the Dantzig bound, `lasso` the LASSO bound.
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    #[serde(default = "default_prelim")]
    pub prelim: PrelimSpec,
    #[serde(default = "default_kappa_reps")]
    pub kappa_reps: usize,
    #[serde(default = "default_check_reps")]
    pub check_reps: usize,
    /// Replaces the computed prediction bound.
    #[serde(default)]
    pub bound_override: Option<f64>,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub cone_budget: ConeBudget,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default = "default_objectives")]
    pub objectives: Vec<PerfObjective>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub theory: TheoryConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be >= 1".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if self.objectives.is_empty() {
            return Err(Error::InvalidParameter("objectives must not be empty".into()));
        }
        Ok(())
    }
}

/// One row per replication; objectives in the order given.
pub fn write_records_csv(path: &Path, records: &[PerfRecord], objectives: &[PerfObjective]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["replication".to_string(), "seed".to_string()];
    for o in objectives {
        for field in ["perf", "lasso_err", "lasso_lambda", "tl_err", "tl_lambda1", "tl_lambda2"] {
            header.push(format!("{field}_{}", o.name().to_lowercase()));
        }
    }
    header.push("failed_cells".into());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.replication.to_string(), r.seed.to_string()];
        for &o in objectives {
            match r.get(o) {
                Some(p) => {
                    for v in [p.perf, p.lasso_error, p.lasso_lambda, p.tl_error, p.tl_lambda1, p.tl_lambda2] {
                        row.push(format_f64(v));
                    }
                }
                None => row.extend(std::iter::repeat(String::new()).take(6)),
            }
        }
        row.push(r.failed_cells.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}
