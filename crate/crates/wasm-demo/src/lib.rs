//! Browser bindings for the demo page. Every export takes a JSON string and
//! returns a JSON string; errors come back as a thrown string.

use serde::Deserialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use translasso::assumptions::{bound_transductive_mse, bound_dantzig, bound_lasso, cone_constant, ConeBudget, ConeSpec};
use translasso::estimators::{build_target, Objective};
use translasso::harness::{
    aggregate, build_lambda_grid, emit_error_curve, harness_solver_config, run_experiment, GridParams, PerfObjective,
};
use translasso::synth::{generate, normalize_columns, SynthConfig};

/// Keeps a browser tab responsive.
const MAX_REPLICATIONS: usize = 200;
const MAX_P_FOR_DEMO: usize = 200;

fn parse<'a, T: Deserialize<'a>>(input: &'a str) -> Result<T, String> {
    serde_json::from_str(input).map_err(|e| format!("bad input: {e}"))
}

fn check_size(cfg: &SynthConfig) -> Result<(), String> {
    cfg.validate().map_err(|e| e.to_string())?;
    if cfg.p > MAX_P_FOR_DEMO {
        return Err(format!("p = {} is too large for the demo (max {MAX_P_FOR_DEMO})", cfg.p));
    }
    Ok(())
}

fn default_k() -> usize {
    60
}
fn default_eps() -> f64 {
    1e-3
}

#[derive(Deserialize)]
struct CurveInput {
    synth: SynthConfig,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default = "default_eps")]
    eps: f64,
}

/// LASSO denoising and transduction errors along a penalty grid for one
/// synthetic dataset.
pub fn error_curve_json(input: &str) -> Result<String, String> {
    let inp: CurveInput = parse(input)?;
    check_size(&inp.synth)?;
    let (ds, beta) = generate(&inp.synth).map_err(|e| e.to_string())?;
    let grid = build_lambda_grid(ds.x(), ds.y(), inp.k, inp.eps).map_err(|e| e.to_string())?;
    let curve = emit_error_curve(&ds, &beta, &grid, &harness_solver_config()).map_err(|e| e.to_string())?;
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

fn default_reps() -> usize {
    20
}
fn default_grid() -> GridParams {
    GridParams { k: 30, ..GridParams::default() }
}

#[derive(Deserialize)]
struct PerfInput {
    synth: SynthConfig,
    #[serde(default = "default_reps")]
    replications: usize,
    #[serde(default = "default_grid")]
    grid: GridParams,
}

/// PERF(Z), PERF(X), PERF(I) for each replication plus their summary.
pub fn perf_distribution_json(input: &str) -> Result<String, String> {
    let inp: PerfInput = parse(input)?;
    check_size(&inp.synth)?;
    if inp.replications == 0 || inp.replications > MAX_REPLICATIONS {
        return Err(format!("replications must lie in 1..={MAX_REPLICATIONS}"));
    }
    let records = run_experiment(&inp.synth, inp.replications, &inp.grid, &PerfObjective::ALL, &harness_solver_config())
        .map_err(|e| e.to_string())?;
    let summary = aggregate(&records).map_err(|e| e.to_string())?;
    let perf = |obj| records.iter().map(|r| r.get(obj).map(|v| v.perf)).collect::<Vec<_>>();
    let out = json!({
        "z": perf(PerfObjective::Z),
        "x": perf(PerfObjective::X),
        "i": perf(PerfObjective::I),
        "summary": summary,
    });
    Ok(out.to_string())
}

#[derive(Deserialize)]
struct BoundsInput {
    /// When present, `c1` and `c3` are computed exactly for `A = X` on this
    /// design (normalized columns) and `kappa` defaults to 1.
    synth: Option<SynthConfig>,
    c1: Option<f64>,
    c3: Option<f64>,
    kappa: Option<f64>,
    sigma: Option<f64>,
    s: Option<usize>,
    p: Option<usize>,
    n: Option<usize>,
    eta: f64,
}

/// Prediction and l1 bounds from the constants, or from a generated design.
pub fn bounds_json(input: &str) -> Result<String, String> {
    let inp: BoundsInput = parse(input)?;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("missing {name}"));
    let (c1, c3, kappa, sigma, s, p, n) = match &inp.synth {
        Some(cfg) => {
            check_size(cfg)?;
            if cfg.p > 8 {
                return Err("exact cone constants need p <= 8".into());
            }
            let (raw, beta) = generate(cfg).map_err(|e| e.to_string())?;
            let ds = normalize_columns(&raw).map_err(|e| e.to_string())?.0;
            let spec = build_target(&ds, Objective::Denoising).map_err(|e| e.to_string())?;
            let budget = ConeBudget::default();
            let c = |tau| {
                let cone = ConeSpec::from_beta(&beta, tau).map_err(|e| e.to_string())?;
                cone_constant(&spec.a, ds.n(), &cone, &budget).map(|c| c.value).map_err(|e| e.to_string())
            };
            (c(1.0)?, c(3.0)?, inp.kappa.unwrap_or(1.0), ds.sigma(), cfg.s, cfg.p, cfg.n)
        }
        None => (
            need(inp.c1, "c1")?,
            need(inp.c3, "c3")?,
            need(inp.kappa, "kappa")?,
            need(inp.sigma, "sigma")?,
            inp.s.ok_or("missing s")?,
            inp.p.ok_or("missing p")?,
            inp.n.ok_or("missing n")?,
        ),
    };
    let err = |e: translasso::Error| e.to_string();
    let out = json!({
        "c1": c1,
        "c3": c3,
        "kappa": kappa,
        "dantzig": bound_dantzig(c1, kappa, sigma, s, p, inp.eta, n).map_err(err)?,
        "lasso": bound_lasso(c3, kappa, sigma, s, p, inp.eta, n).map_err(err)?,
        "transductive_mse_bound": bound_transductive_mse(c1, kappa, sigma, s, p, inp.eta, n).map_err(err)?,
    });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn error_curve(input: &str) -> Result<String, JsValue> {
    error_curve_json(input).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn perf_distribution(input: &str) -> Result<String, JsValue> {
    perf_distribution_json(input).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn bounds(input: &str) -> Result<String, JsValue> {
    bounds_json(input).map_err(|e| JsValue::from_str(&e))
}
