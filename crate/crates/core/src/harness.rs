//! Replication experiments: oracle-tuned error ratios of the transductive
//! LASSO against the LASSO on synthetic problems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    build_target, label_preserving_adjust, preliminary_from_lasso_fit, transductive_lasso_path, Objective,
    RegressionDataset, TargetSpec,
};
use crate::linalg::{norm2_sq, norm_inf, quantile_sorted, Matrix};
use crate::solvers::{FitResult, LassoSolver, SolverConfig};
use crate::synth::{generate, SynthConfig};

/// Strictly decreasing penalty levels ending in 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    /// `k` log-spaced values from `lambda_max` down to `eps * lambda_max`,
    /// then 0. A zero `lambda_max` gives the grid `{0}`.
    pub fn from_lambda_max(lambda_max: f64, k: usize, eps: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("grid needs K >= 2, got {k}")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
        }
        if !lambda_max.is_finite() || lambda_max < 0.0 {
            return Err(Error::NonFinite(format!("lambda_max = {lambda_max}")));
        }
        if lambda_max == 0.0 {
            return Ok(Self { values: vec![0.0] });
        }
        let ratio = eps.ln() / (k - 1) as f64;
        let mut values: Vec<f64> = (0..k).map(|i| lambda_max * (ratio * i as f64).exp()).collect();
        values[0] = lambda_max;
        values.push(0.0);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `k1` entries spread evenly over the positive part, plus the final 0.
    pub fn coarse(&self, k1: usize) -> Self {
        let positive = self.values.len() - 1;
        if k1 == 0 || positive <= k1 {
            return self.clone();
        }
        let mut values: Vec<f64> = if k1 == 1 {
            vec![self.values[0]]
        } else {
            (0..k1).map(|i| self.values[i * (positive - 1) / (k1 - 1)]).collect()
        };
        values.dedup();
        values.push(0.0);
        Self { values }
    }
}

/// `lambda_max = ||design' response||_inf` is the smallest penalty with a zero
/// LASSO solution. The correlations are summed exactly as the coordinate
/// descent sums them, so the fit at `lambda_max` is exactly zero.
pub fn build_lambda_grid(design: &Matrix, response: &[f64], k: usize, eps: f64) -> Result<LambdaGrid> {
    if design.rows() != response.len() {
        return Err(Error::Dimension(format!("design has {} rows, response {}", design.rows(), response.len())));
    }
    LambdaGrid::from_lambda_max(norm_inf(&LassoSolver::new(design).correlations(response)), k, eps)
}

fn default_k() -> usize {
    100
}
fn default_eps() -> f64 {
    1e-3
}
fn default_k1() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    #[serde(default = "default_k", alias = "K")]
    pub k: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Use only `coarse_k1` values of the preliminary penalty.
    #[serde(default)]
    pub coarse_lambda1: bool,
    #[serde(default = "default_k1")]
    pub coarse_k1: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { k: default_k(), eps: default_eps(), coarse_lambda1: false, coarse_k1: default_k1() }
    }
}

/// Which error the oracle tuning minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerfObjective {
    /// `||Z(b - beta*)||^2`.
    Z,
    /// `||X(b - beta*)||^2`.
    X,
    /// `||b - beta*||^2`.
    I,
}

impl PerfObjective {
    pub const ALL: [PerfObjective; 3] = [PerfObjective::Z, PerfObjective::X, PerfObjective::I];

    pub fn name(self) -> &'static str {
        match self {
            PerfObjective::Z => "Z",
            PerfObjective::X => "X",
            PerfObjective::I => "I",
        }
    }

    fn error(self, ds: &RegressionDataset, beta: &[f64], beta_star: &[f64]) -> f64 {
        let d: Vec<f64> = beta.iter().zip(beta_star).map(|(a, b)| a - b).collect();
        match self {
            PerfObjective::Z => norm2_sq(&ds.z().matvec(&d).expect("shapes")),
            PerfObjective::X => norm2_sq(&ds.x().matvec(&d).expect("shapes")),
            PerfObjective::I => norm2_sq(&d),
        }
    }
}

/// Best errors and tuning parameters for one objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePerf {
    pub perf: f64,
    pub lasso_error: f64,
    pub lasso_lambda: f64,
    pub tl_error: f64,
    pub tl_lambda1: f64,
    pub tl_lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfRecord {
    pub replication: usize,
    pub seed: u64,
    pub z: Option<ObjectivePerf>,
    pub x: Option<ObjectivePerf>,
    pub i: Option<ObjectivePerf>,
    /// Fits that hit the iteration limit; their grid cells were skipped.
    pub failed_cells: usize,
}

impl PerfRecord {
    pub fn get(&self, obj: PerfObjective) -> Option<&ObjectivePerf> {
        match obj {
            PerfObjective::Z => self.z.as_ref(),
            PerfObjective::X => self.x.as_ref(),
            PerfObjective::I => self.i.as_ref(),
        }
    }

    fn slot(&mut self, obj: PerfObjective) -> &mut Option<ObjectivePerf> {
        match obj {
            PerfObjective::Z => &mut self.z,
            PerfObjective::X => &mut self.x,
            PerfObjective::I => &mut self.i,
        }
    }
}

/// Solver settings used by the harness: looser than the library default,
/// since thousands of fits per replication only need oracle-level accuracy.
pub fn harness_solver_config() -> SolverConfig {
    SolverConfig { cd_tol: 1e-8, kkt_tol: 1e-6, max_iter: 20_000, ..SolverConfig::default() }
}

/// PERF ratio with the 0/0 convention.
pub fn perf_ratio(tl_error: f64, lasso_error: f64) -> f64 {
    if lasso_error <= 1e-12 {
        1.0
    } else {
        tl_error / lasso_error
    }
}

/// Oracle comparison on one generated dataset.
///
/// The LASSO is fit along its grid on `(X, Y)`. For every preliminary
/// penalty `lambda1` the transductive LASSO with target `Z` and the
/// label-preserving LASSO preliminary is fit along a `lambda2` grid rebuilt
/// from its own data; each fit is scored under every requested loss. At
/// `lambda2 = 0` it returns the LASSO itself, so no ratio exceeds 1.
pub fn run_replication(
    cfg: &SynthConfig,
    grid: &GridParams,
    objectives: &[PerfObjective],
    solver: &SolverConfig,
) -> Result<PerfRecord> {
    let (ds, beta_star) = generate(cfg)?;
    compare_on_dataset(&ds, &beta_star, grid, objectives, solver).map(|mut rec| {
        rec.seed = cfg.seed;
        rec
    })
}

/// The comparison of [`run_replication`] on given data.
pub fn compare_on_dataset(
    ds: &RegressionDataset,
    beta_star: &[f64],
    grid: &GridParams,
    objectives: &[PerfObjective],
    solver: &SolverConfig,
) -> Result<PerfRecord> {
    let mut record = PerfRecord { replication: 0, seed: 0, z: None, x: None, i: None, failed_cells: 0 };
    let lasso_grid = build_lambda_grid(ds.x(), ds.y(), grid.k, grid.eps)?;
    let lasso = LassoSolver::new(ds.x());
    let path = lasso.path(ds.y(), lasso_grid.values(), solver)?;
    record.failed_cells += path.iter().filter(|f| !f.converged()).count();

    // (objective) -> (error, lambda, lambda1, lambda2)
    let mut lasso_best = Vec::with_capacity(objectives.len());
    for &obj in objectives {
        let errors: Vec<Option<f64>> = path
            .iter()
            .map(|f| f.converged().then(|| obj.error(ds, &f.beta, beta_star)))
            .collect();
        let (idx, err) = argmin(&errors).ok_or_else(|| Error::Data("no LASSO fit converged on the grid".into()))?;
        lasso_best.push((err, path[idx].lambda));
    }
    // lambda2 = 0 returns the LASSO at lambda1, for every lambda1.
    let mut best: Vec<(f64, f64, f64)> = lasso_best.iter().map(|&(e, l)| (e, l, 0.0)).collect();

    let lambda1_grid = if grid.coarse_lambda1 { lasso_grid.coarse(grid.coarse_k1) } else { lasso_grid.clone() };
    let spec = build_target(ds, Objective::Transductive)?;
    let tl_solver = LassoSolver::new(&spec.a);
    for l1 in lambda1_grid.values() {
        let fit = path.iter().find(|f| f.lambda == *l1).expect("coarse grid is a subset");
        if !fit.converged() {
            continue;
        }
        let (fits, positive) = tl_cell(ds, &spec, &tl_solver, fit, grid, solver)?;
        record.failed_cells += fits.iter().filter(|f| !f.converged()).count();
        for (k, &obj) in objectives.iter().enumerate() {
            let errors: Vec<Option<f64>> =
                fits.iter().map(|f| f.converged().then(|| obj.error(ds, &f.beta, beta_star))).collect();
            if let Some((i, err)) = argmin(&errors) {
                if err < best[k].0 {
                    best[k] = (err, fit.lambda, positive[i]);
                }
            }
        }
    }
    for (k, &obj) in objectives.iter().enumerate() {
        let (lasso_error, lasso_lambda) = lasso_best[k];
        let (tl_error, tl_lambda1, tl_lambda2) = best[k];
        *record.slot(obj) = Some(ObjectivePerf {
            perf: perf_ratio(tl_error, lasso_error),
            lasso_error,
            lasso_lambda,
            tl_error,
            tl_lambda1,
            tl_lambda2,
        });
    }
    Ok(record)
}

/// Transductive fits for one preliminary, over the positive part of the
/// `lambda2` grid.
fn tl_cell(
    ds: &RegressionDataset,
    spec: &TargetSpec,
    tl_solver: &LassoSolver,
    fit: &FitResult,
    grid: &GridParams,
    solver: &SolverConfig,
) -> Result<(Vec<FitResult>, Vec<f64>)> {
    let prelim = label_preserving_adjust(ds, &preliminary_from_lasso_fit(spec, fit)?)?;
    let l2_max = norm_inf(&tl_solver.correlations(&prelim.value));
    let l2_grid = LambdaGrid::from_lambda_max(l2_max, grid.k, grid.eps)?;
    // The final 0 is the LASSO itself; it is already counted.
    let positive = l2_grid.values()[..l2_grid.len() - 1].to_vec();
    if positive.is_empty() {
        return Ok((Vec::new(), positive));
    }
    let fits = transductive_lasso_path(tl_solver, spec, &prelim, &positive, solver)?;
    Ok((fits, positive))
}

fn argmin(values: &[Option<f64>]) -> Option<(usize, f64)> {
    values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None, |best, (i, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
}

/// Replications `0..reps`, replication `r` generated from seed `synth.seed + r`.
/// Records come back in replication order whatever the thread count.
pub fn run_experiment(
    synth: &SynthConfig,
    reps: usize,
    grid: &GridParams,
    objectives: &[PerfObjective],
    solver: &SolverConfig,
) -> Result<Vec<PerfRecord>> {
    if reps == 0 {
        return Err(Error::InvalidParameter("at least one replication is needed".into()));
    }
    synth.validate()?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let cfg = synth.with_seed(synth.seed.wrapping_add(r as u64));
            let mut rec = run_replication(&cfg, grid, objectives, solver)?;
            rec.replication = r;
            Ok(rec)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub q03: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("no values to summarize".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        // Sum in sorted order so the mean does not depend on input order.
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        Ok(Self { mean, median: quantile_sorted(&sorted, 0.5), q03: quantile_sorted(&sorted, 0.3) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfSummary {
    pub replications: usize,
    pub z: Option<Stats>,
    pub x: Option<Stats>,
    pub i: Option<Stats>,
    pub failed_cells: usize,
}

impl PerfSummary {
    pub fn get(&self, obj: PerfObjective) -> Option<&Stats> {
        match obj {
            PerfObjective::Z => self.z.as_ref(),
            PerfObjective::X => self.x.as_ref(),
            PerfObjective::I => self.i.as_ref(),
        }
    }
}

pub fn aggregate(records: &[PerfRecord]) -> Result<PerfSummary> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("cannot aggregate zero records".into()));
    }
    let stats = |obj: PerfObjective| -> Result<Option<Stats>> {
        let vals: Vec<f64> = records.iter().filter_map(|r| r.get(obj).map(|p| p.perf)).collect();
        if vals.is_empty() {
            Ok(None)
        } else {
            Stats::of(&vals).map(Some)
        }
    };
    Ok(PerfSummary {
        replications: records.len(),
        z: stats(PerfObjective::Z)?,
        x: stats(PerfObjective::X)?,
        i: stats(PerfObjective::I)?,
        failed_cells: records.iter().map(|r| r.failed_cells).sum(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub lambda: f64,
    /// `(1/n)||X(b - beta*)||^2`.
    pub denoise_err: f64,
    /// `(1/m)||Z(b - beta*)||^2`.
    pub transduct_err: f64,
    pub support_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub rows: Vec<CurveRow>,
    pub argmin_denoise: f64,
    pub argmin_transduct: f64,
    /// Smallest grid penalty whose LASSO support equals that of `beta*`.
    pub min_support_lambda: Option<f64>,
}

/// LASSO errors along `grid`.
pub fn emit_error_curve(
    ds: &RegressionDataset,
    beta_star: &[f64],
    grid: &LambdaGrid,
    solver: &SolverConfig,
) -> Result<ErrorCurve> {
    if beta_star.len() != ds.p() {
        return Err(Error::Dimension(format!("beta* has length {}, p = {}", beta_star.len(), ds.p())));
    }
    let lasso = LassoSolver::new(ds.x());
    let fits = lasso.path(ds.y(), grid.values(), solver)?;
    let n = ds.n() as f64;
    let m = ds.m() as f64;
    let rows: Vec<CurveRow> = fits
        .iter()
        .map(|f| CurveRow {
            lambda: f.lambda,
            denoise_err: PerfObjective::X.error(ds, &f.beta, beta_star) / n,
            transduct_err: PerfObjective::Z.error(ds, &f.beta, beta_star) / m,
            support_correct: f.beta.iter().zip(beta_star).all(|(b, s)| (*b != 0.0) == (*s != 0.0)),
        })
        .collect();
    let pick = |key: fn(&CurveRow) -> f64| {
        rows.iter().fold(&rows[0], |best, r| if key(r) < key(best) { r } else { best }).lambda
    };
    Ok(ErrorCurve {
        argmin_denoise: pick(|r| r.denoise_err),
        argmin_transduct: pick(|r| r.transduct_err),
        min_support_lambda: rows.iter().filter(|r| r.support_correct).map(|r| r.lambda).fold(None, |a, l| {
            Some(a.map_or(l, |a: f64| a.min(l)))
        }),
        rows,
    })
}
