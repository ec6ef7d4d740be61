//! Command-line front end. Exit codes: 0 ok, 1 check failed, 2 usage,
//! 3 data or runtime error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::assumptions::{
    bound_transductive_mse, bound_dantzig, bound_lasso, cone_constant, conf_kappa_mc, k_bias_constant, kappa_least_squares,
    validate_bound, AssumptionReport, BoundReport, BoundValidation, ConeSpec, KappaForm,
};
use crate::error::{Error, Result};
use crate::estimators::{
    build_target, EstimatorKind, Objective, PrelimMethod, PrelimSpec, RegressionDataset,
    TargetSpec,
};
use crate::harness::{
    aggregate, build_lambda_grid, emit_error_curve, harness_solver_config, run_experiment, PerfSummary,
};
use crate::io::{format_f64, load_dataset, save_dataset, write_json, write_records_csv, write_vector_csv, ExperimentConfig};
use crate::solvers::SolverConfig;
use crate::synth::{generate, normalize_columns, SynthConfig};

#[derive(Parser, Debug)]
#[command(name = "translasso", version, about = "Transductive LASSO and Dantzig Selector toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic problem and write it as CSV.
    Synth(SynthArgs),
    /// Fit an estimator on CSV data.
    Fit(FitArgs),
    /// Run a replication experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Print assumption constants and theoretical bounds as JSON.
    Bounds(TheoryArgs),
    /// Monte-Carlo check of a bound; exits 1 when the violation rate is too high.
    Check(TheoryArgs),
}

#[derive(clap::Args, Debug)]
struct SynthArgs {
    /// Experiment config whose `synth` section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    beta_value: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Rescale columns so that X_j'X_j / n = 1.
    #[arg(long)]
    normalize: bool,
    /// Output directory for x.csv, y.csv, z.csv and beta_star.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    Transductive,
    TransductiveProjected,
    Denoising,
    Estimation,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Transductive => Objective::Transductive,
            ObjectiveArg::TransductiveProjected => Objective::TransductiveProjected,
            ObjectiveArg::Denoising => Objective::Denoising,
            ObjectiveArg::Estimation => Objective::Estimation,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimatorArg {
    Lasso,
    Dantzig,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrelimArg {
    Lasso,
    PseudoLs,
    Ridge,
    Identity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SigmaEstimate {
    /// Residual scale of ordinary least squares. Not part of the model,
    /// which takes sigma as known.
    NaiveOls,
}

#[derive(clap::Args, Debug)]
struct FitArgs {
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    z: Option<PathBuf>,
    /// The Z file holds only unlabeled rows; stack X on top of it.
    #[arg(long)]
    stack: bool,
    /// Known noise standard deviation.
    #[arg(long, required_unless_present = "estimate_sigma")]
    sigma: Option<f64>,
    #[arg(long, value_enum, conflicts_with = "sigma")]
    estimate_sigma: Option<SigmaEstimate>,
    #[arg(long, value_enum, default_value = "transductive")]
    objective: ObjectiveArg,
    #[arg(long, value_enum, default_value = "lasso")]
    estimator: EstimatorArg,
    #[arg(long, value_enum, default_value = "lasso")]
    prelim: PrelimArg,
    /// Penalty of the LASSO preliminary.
    #[arg(long, default_value_t = 0.0)]
    lambda1: f64,
    /// Ridge parameter of the ridge preliminary.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Replace the labeled block of a transductive preliminary by Y.
    #[arg(long)]
    label_preserving: bool,
    /// Penalty (LASSO) or constraint level (Dantzig) of the final fit.
    #[arg(long)]
    lambda: f64,
    /// Write the coefficients here as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Use the coarse preliminary-penalty grid.
    #[arg(long)]
    coarse: bool,
}

#[derive(clap::Args, Debug)]
struct TheoryArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo replications for the check.
    #[arg(long)]
    reps: Option<usize>,
    /// Force the prediction bound to this value.
    #[arg(long)]
    bound_override: Option<f64>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Check(a) => cmd_check(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidParameter(_) => 2,
                _ => 3,
            }
        }
    }
}

fn cmd_synth(a: SynthArgs) -> Result<i32> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::load(path)?.synth,
        None => SynthConfig {
            p: a.p.ok_or_else(|| Error::InvalidParameter("--p is required without --config".into()))?,
            s: a.s.unwrap_or(0),
            n: a.n.ok_or_else(|| Error::InvalidParameter("--n is required without --config".into()))?,
            m: a.m.or(a.n).unwrap_or(0),
            rho: 0.0,
            sigma2: 1.0,
            beta_value: 5.0,
            seed: 0,
        },
    };
    if let Some(v) = a.p {
        cfg.p = v;
    }
    if let Some(v) = a.s {
        cfg.s = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.m {
        cfg.m = v;
    }
    if let Some(v) = a.rho {
        cfg.rho = v;
    }
    if let Some(v) = a.sigma2 {
        cfg.sigma2 = v;
    }
    if let Some(v) = a.beta_value {
        cfg.beta_value = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let (mut ds, beta) = generate(&cfg)?;
    if a.normalize {
        ds = normalize_columns(&ds)?.0;
    }
    save_dataset(&a.out, &ds, Some(&beta))?;
    println!("{}", serde_json::to_string(&cfg)?);
    Ok(0)
}

#[derive(Serialize)]
struct FitOutput {
    beta: Vec<f64>,
    lambda: f64,
    status: crate::solvers::FitStatus,
    iterations: usize,
    kkt_residual: f64,
    objective: f64,
    sigma: f64,
    sigma_source: &'static str,
}

fn cmd_fit(a: FitArgs) -> Result<i32> {
    let sigma_guess = a.sigma.unwrap_or(1.0);
    let mut ds = load_dataset(&a.x, &a.y, a.z.as_deref(), sigma_guess, a.stack)?;
    let sigma_source = match a.estimate_sigma {
        Some(SigmaEstimate::NaiveOls) => {
            let s = naive_ols_sigma(&ds)?;
            ds = ds.with_sigma(s);
            "naive-ols estimate (outside the known-variance model)"
        }
        None => "given",
    };
    let spec = build_target(&ds, a.objective.into())?;
    let method = match a.prelim {
        PrelimArg::Lasso => PrelimMethod::Lasso { lambda1: a.lambda1 },
        PrelimArg::PseudoLs => PrelimMethod::PseudoLs { tol: crate::linalg::DEFAULT_PINV_TOL },
        PrelimArg::Ridge => PrelimMethod::Ridge { gamma: a.gamma },
        PrelimArg::Identity => PrelimMethod::IdentityResponse,
    };
    let cfg = SolverConfig::default();
    let prelim = PrelimSpec { method, label_preserving: a.label_preserving }.compute(&ds, &spec, &cfg)?;
    let estimator = match a.estimator {
        EstimatorArg::Lasso => EstimatorKind::Lasso,
        EstimatorArg::Dantzig => EstimatorKind::Dantzig,
    };
    let fit = estimator.fit(&ds, &spec, &prelim, a.lambda, &cfg)?;
    if let Some(out) = &a.out {
        write_vector_csv(out, &fit.beta)?;
    }
    let out = FitOutput {
        beta: fit.beta.clone(),
        lambda: fit.lambda,
        status: fit.status,
        iterations: fit.iterations,
        kkt_residual: fit.kkt_residual,
        objective: fit.objective,
        sigma: ds.sigma(),
        sigma_source,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

/// `sqrt(RSS / (n - p))` of ordinary least squares on `(X, Y)`.
fn naive_ols_sigma(ds: &RegressionDataset) -> Result<f64> {
    if ds.n() <= ds.p() {
        return Err(Error::InvalidParameter(format!(
            "naive-ols needs n > p (n = {}, p = {})",
            ds.n(),
            ds.p()
        )));
    }
    let beta = crate::linalg::cholesky_solve(&crate::linalg::gram(ds.x()), &ds.x().tr_matvec(ds.y())?)?;
    let fitted = ds.x().matvec(&beta)?;
    let rss = crate::linalg::norm2_sq(&crate::linalg::sub(ds.y(), &fitted));
    Ok((rss / (ds.n() - ds.p()) as f64).sqrt())
}

/// Runs the configured experiment and writes the configured outputs.
pub fn experiment(cfg: &ExperimentConfig) -> Result<(Vec<crate::harness::PerfRecord>, PerfSummary)> {
    let solver = cfg.solver.clone().unwrap_or_else(harness_solver_config);
    let records = run_experiment(&cfg.synth, cfg.replications, &cfg.grid, &cfg.objectives, &solver)?;
    let summary = aggregate(&records)?;
    if let Some(path) = &cfg.output.records_csv {
        write_records_csv(path, &records, &cfg.objectives)?;
    }
    if let Some(path) = &cfg.output.summary_json {
        write_json(path, &serde_json::json!({ "config": cfg, "summary": summary }))?;
    }
    if let Some(path) = &cfg.output.curve_csv {
        let (ds, beta) = generate(&cfg.synth)?;
        let grid = build_lambda_grid(ds.x(), ds.y(), cfg.grid.k, cfg.grid.eps)?;
        let curve = emit_error_curve(&ds, &beta, &grid, &solver)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["lambda", "denoise_err", "transduct_err", "support_correct"])?;
        for r in &curve.rows {
            w.write_record([
                format_f64(r.lambda),
                format_f64(r.denoise_err),
                format_f64(r.transduct_err),
                u8::from(r.support_correct).to_string(),
            ])?;
        }
        let support = curve.min_support_lambda.map(format_f64).unwrap_or_default();
        w.write_record(["argmin", &format_f64(curve.argmin_denoise), &format_f64(curve.argmin_transduct), &support])?;
        w.flush()?;
    }
    Ok((records, summary))
}

/// A row in the layout of the published tables.
pub fn table_row(cfg: &ExperimentConfig, summary: &PerfSummary) -> String {
    let s = &cfg.synth;
    let mut row = format!("p={} s={} (n,m)=({},{}) rho={} sigma2={}", s.p, s.s, s.n, s.m, s.rho, s.sigma2);
    for &o in &cfg.objectives {
        if let Some(st) = summary.get(o) {
            row.push_str(&format!(
                " | PERF({}) Mean {:.2} Med {:.2} Q3 {:.2}",
                o.name(),
                st.mean,
                st.median,
                st.q03
            ));
        }
    }
    row
}

fn cmd_experiment(a: ExperimentArgs) -> Result<i32> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.synth.seed = seed;
    }
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if a.records.is_some() {
        cfg.output.records_csv = a.records;
    }
    if a.summary.is_some() {
        cfg.output.summary_json = a.summary;
    }
    if a.curve.is_some() {
        cfg.output.curve_csv = a.curve;
    }
    if a.coarse {
        cfg.grid.coarse_lambda1 = true;
    }
    cfg.validate()?;
    let (_, summary) = experiment(&cfg)?;
    if summary.failed_cells > 0 {
        eprintln!("warning: {} fits hit the iteration limit and were skipped", summary.failed_cells);
    }
    println!("{}", table_row(&cfg, &summary));
    Ok(0)
}

/// Problem, target and cone constants shared by `bounds` and `check`.
pub struct TheorySetup {
    pub ds: RegressionDataset,
    pub beta_star: Vec<f64>,
    pub spec: TargetSpec,
    pub report: AssumptionReport,
    pub dantzig: BoundReport,
    pub lasso: BoundReport,
    pub transductive_mse: f64,
    pub c3: f64,
}

const KAPPA_SEED_OFFSET: u64 = 1 << 32;
const CHECK_SEED_OFFSET: u64 = 2 << 32;
const NOISE_SEED_OFFSET: u64 = 3 << 32;

pub fn theory_setup(cfg: &ExperimentConfig) -> Result<TheorySetup> {
    let th = &cfg.theory;
    let (mut ds, beta_star) = generate(&cfg.synth)?;
    if th.normalize {
        ds = normalize_columns(&ds)?.0;
        // Keep Y = X beta* + noise under the rescaled design.
        let mut rng = crate::linalg::GaussianRng::seed_from_u64(cfg.synth.seed.wrapping_add(NOISE_SEED_OFFSET));
        let y = crate::synth::response(ds.x(), &beta_star, ds.sigma(), &mut rng)?;
        ds = ds.with_response(y)?;
    }
    let spec = build_target(&ds, th.objective)?;
    let solver = cfg.solver.clone().unwrap_or_default();
    let mut notes = Vec::new();

    let s = beta_star.iter().filter(|b| **b != 0.0).count();
    let p = ds.p();
    let n = ds.n();
    let eta = cfg.eta;
    let (c1, c3, method) = if s == 0 {
        notes.push("beta* = 0: the cone is trivial, c is reported as 1".into());
        (1.0, 1.0, crate::assumptions::ConeMethod::FaceEnumeration)
    } else {
        let c1 = cone_constant(&spec.a, n, &ConeSpec::from_beta(&beta_star, 1.0)?, &th.cone_budget)?;
        let c3 = cone_constant(&spec.a, n, &ConeSpec::from_beta(&beta_star, 3.0)?, &th.cone_budget)?;
        (c1.value, c3.value, c1.method)
    };
    let kappa_mc = conf_kappa_mc(
        &ds,
        &spec,
        &beta_star,
        &th.prelim,
        eta,
        th.kappa_reps,
        cfg.synth.seed.wrapping_add(KAPPA_SEED_OFFSET),
        &solver,
    )?;
    let (kappa_scaled, kappa_unscaled) = match (
        kappa_least_squares(&ds, &spec, KappaForm::Scaled),
        kappa_least_squares(&ds, &spec, KappaForm::Unscaled),
    ) {
        (Ok(a), Ok(b)) => (Some(a), Some(b)),
        (Err(e), _) | (_, Err(e)) => {
            notes.push(format!("least-squares kappa unavailable: {e}"));
            (None, None)
        }
    };
    let k_const = match k_bias_constant(&ds, &spec, &beta_star) {
        Ok(k) => Some(k),
        Err(e) => {
            notes.push(format!("k unavailable: {e}"));
            None
        }
    };
    if !kappa_mc.is_finite() {
        return Err(Error::Assumption("Monte-Carlo kappa is infinite".into()));
    }
    let sigma = ds.sigma();
    let (dantzig, lasso, transductive_mse) = if c1 > 0.0 && c3 > 0.0 {
        (
            bound_dantzig(c1, kappa_mc, sigma, s, p, eta, n)?,
            bound_lasso(c3, kappa_mc, sigma, s, p, eta, n)?,
            bound_transductive_mse(c1, kappa_mc, sigma, s, p, eta, n)?,
        )
    } else {
        return Err(Error::Assumption(format!("cone constant vanishes (c(A,1) = {c1}, c(A,3) = {c3})")));
    };
    let report = AssumptionReport {
        c_estimate: c1,
        c_method: method,
        tau: 1.0,
        kappa: kappa_mc,
        kappa_source: "monte_carlo".into(),
        kappa_scaled,
        kappa_unscaled,
        kappa_mc: Some(kappa_mc),
        k_const,
        eta,
        notes,
    };
    Ok(TheorySetup { ds, beta_star, spec, report, dantzig, lasso, transductive_mse, c3 })
}

#[derive(Serialize)]
struct BoundsOutput<'a> {
    assumptions: &'a AssumptionReport,
    c_tau3: f64,
    dantzig: &'a BoundReport,
    lasso: &'a BoundReport,
    transductive_mse_bound: f64,
}

fn apply_theory_flags(cfg: &mut ExperimentConfig, a: &TheoryArgs) {
    if let Some(seed) = a.seed {
        cfg.synth.seed = seed;
    }
    if let Some(r) = a.reps {
        cfg.theory.check_reps = r;
    }
    if a.bound_override.is_some() {
        cfg.theory.bound_override = a.bound_override;
    }
}

fn emit(value: &impl Serialize, out: &Option<PathBuf>) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    if let Some(path) = out {
        write_json(path, value)?;
    }
    Ok(())
}

fn cmd_bounds(a: TheoryArgs) -> Result<i32> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    apply_theory_flags(&mut cfg, &a);
    let t = theory_setup(&cfg)?;
    let out = BoundsOutput {
        assumptions: &t.report,
        c_tau3: t.c3,
        dantzig: &t.dantzig,
        lasso: &t.lasso,
        transductive_mse_bound: t.transductive_mse,
    };
    emit(&out, &a.out)?;
    Ok(0)
}

/// Runs the Monte-Carlo bound check configured in `cfg.theory`.
pub fn check(cfg: &ExperimentConfig) -> Result<(BoundReport, BoundValidation)> {
    let t = theory_setup(cfg)?;
    let mut bound = match cfg.theory.estimator {
        EstimatorKind::Dantzig => t.dantzig,
        EstimatorKind::Lasso => t.lasso,
    };
    if let Some(b) = cfg.theory.bound_override {
        bound.pred_bound = b;
    }
    let solver = cfg.solver.clone().unwrap_or_default();
    let v = validate_bound(
        &t.ds,
        &t.spec,
        &t.beta_star,
        &cfg.theory.prelim,
        &bound,
        cfg.theory.check_reps,
        cfg.eta,
        cfg.synth.seed.wrapping_add(CHECK_SEED_OFFSET),
        &solver,
    )?;
    Ok((bound, v))
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    bound: &'a BoundReport,
    validation: &'a BoundValidation,
    passed: bool,
}

fn cmd_check(a: TheoryArgs) -> Result<i32> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    apply_theory_flags(&mut cfg, &a);
    let (bound, v) = check(&cfg)?;
    let passed = v.passed();
    emit(&CheckOutput { bound: &bound, validation: &v, passed }, &a.out)?;
    Ok(if passed { 0 } else { 1 })
}
