//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (outside the test harness capture) before asserting.
//!
//! The two large high-dimensional experiments are `#[ignore]`d as slow; run
//! them with `cargo test --release -p translasso --test acceptance -- --ignored`.

use std::io::Write;

use translasso::assumptions::{conf_kappa_mc, kappa_least_squares, ConeMethod, KappaForm};
use translasso::cli;
use translasso::estimators::{
    build_target, preliminary_identity, transductive_dantzig, transductive_lasso, Objective, PrelimMethod,
    PrelimSpec, RegressionDataset,
};
use translasso::harness::{aggregate, harness_solver_config, run_experiment, GridParams, PerfObjective};
use translasso::io::{ExperimentConfig, OutputPaths};
use translasso::linalg::{GaussianRng, Matrix};
use translasso::solvers::{dantzig_fit, lasso_fit, DantzigProblem, LassoProblem, SolverConfig};
use translasso::synth::{generate, normalize_columns, SynthConfig};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id} [{name}]: {verdict} ({detail})");
}

fn synth(p: usize, s: usize, n: usize, m: usize, rho: f64, seed: u64) -> SynthConfig {
    SynthConfig { p, s, n, m, rho, sigma2: 1.0, beta_value: 5.0, seed }
}

fn median_perf_z(cfg: &SynthConfig, reps: usize, grid: &GridParams) -> f64 {
    let records = run_experiment(cfg, reps, grid, &[PerfObjective::Z], &harness_solver_config()).unwrap();
    aggregate(&records).unwrap().z.unwrap().median
}

#[test]
fn criterion_1_low_dimensional_table_row() {
    let cfg = synth(8, 1, 10, 30, 0.1, 1);
    let grid = GridParams::default();
    assert_eq!(grid.k, 100);
    let records = run_experiment(&cfg, 100, &grid, &PerfObjective::ALL, &harness_solver_config()).unwrap();
    let z = aggregate(&records).unwrap().z.unwrap();
    let pass = (z.median - 0.77).abs() <= 0.15 && (z.mean - 0.64).abs() <= 0.15;
    report(
        1,
        "p=8 s=1 (10,30) rho=0.1",
        pass,
        &format!("PERF(Z) mean {:.3} (target 0.64), median {:.3} (target 0.77), tolerance 0.15", z.mean, z.median),
    );
    assert!(pass);
}

#[test]
#[ignore = "slow: 100 replications at p = 1000"]
fn criterion_2_high_correlation_table_row() {
    let cfg = synth(1000, 50, 100, 200, 0.9, 1);
    let grid = GridParams { coarse_lambda1: true, ..GridParams::default() };
    let median = median_perf_z(&cfg, 100, &grid);
    let pass = (median - 0.45).abs() <= 0.15;
    report(
        2,
        "p=1000 s=50 (100,200) rho=0.9",
        pass,
        &format!("PERF(Z) median {median:.3} (target 0.45, tolerance 0.15)"),
    );
    assert!(pass);
}

#[test]
#[ignore = "slow: 2 x 50 replications at p = 1000"]
fn criterion_3_correlation_helps() {
    let grid = GridParams::default();
    let high = median_perf_z(&synth(1000, 50, 20, 60, 0.9, 1), 50, &grid);
    let low = median_perf_z(&synth(1000, 50, 20, 60, 0.1, 1), 50, &grid);
    let pass = high < low;
    report(
        3,
        "p=1000 s=50 (20,60), rho 0.9 vs 0.1",
        pass,
        &format!("median PERF(Z) {high:.3} at rho=0.9, {low:.3} at rho=0.1; needs the first below the second"),
    );
    assert!(pass);
}

fn random_instance(rng: &mut GaussianRng, n: usize, p: usize) -> (Matrix, Vec<f64>) {
    let x = Matrix::new(n, p, rng.normal_vec(n * p, 1.0)).unwrap();
    let coef = rng.normal_vec(p, 1.0);
    let mut y = x.matvec(&coef).unwrap();
    for v in &mut y {
        *v += 0.5 * rng.standard_normal();
    }
    (x, y)
}

struct Quadratic {
    g: Vec<Vec<f64>>,
    c: Vec<f64>,
    yy: f64,
}

impl Quadratic {
    fn new(x: &Matrix, y: &[f64]) -> Self {
        let p = x.cols();
        let col = |j: usize| (0..x.rows()).map(move |i| x.get(i, j));
        let g = (0..p).map(|a| (0..p).map(|b| col(a).zip(col(b)).map(|(u, v)| u * v).sum()).collect()).collect();
        let c = (0..p).map(|a| col(a).zip(y).map(|(u, v)| u * v).sum()).collect();
        Self { g, c, yy: y.iter().map(|v| v * v).sum() }
    }

    /// `||y - X b||^2 + 2 lambda ||b||_1` from the normal-equation pieces.
    fn objective(&self, b: &[f64], lambda: f64) -> f64 {
        let p = b.len();
        let mut q = self.yy;
        for a in 0..p {
            q -= 2.0 * self.c[a] * b[a];
            for k in 0..p {
                q += b[a] * self.g[a][k] * b[k];
            }
        }
        q + 2.0 * lambda * b.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Minimum over a 1e-3 grid on every coordinate but the last, which is
/// minimized exactly. The box radius bounds any minimizer through
/// `2 lambda ||b||_1 <= ||y||^2`.
fn lasso_grid_oracle(q: &Quadratic, lambda: f64) -> f64 {
    let p = q.c.len();
    let radius = q.yy / (2.0 * lambda);
    let steps = (radius / 1e-3).ceil() as i64;
    let last = p - 1;
    let mut best = f64::INFINITY;
    let mut b = vec![0.0; p];
    let mut eval = |b: &mut Vec<f64>| {
        let mut lin = q.c[last];
        for a in 0..last {
            lin -= q.g[last][a] * b[a];
        }
        let t = if lin > lambda {
            lin - lambda
        } else if lin < -lambda {
            lin + lambda
        } else {
            0.0
        };
        b[last] = if q.g[last][last] > 0.0 { t / q.g[last][last] } else { 0.0 };
        best = best.min(q.objective(b, lambda));
    };
    match last {
        0 => eval(&mut b),
        1 => {
            for i in -steps..=steps {
                b[0] = i as f64 * 1e-3;
                eval(&mut b);
            }
        }
        _ => {
            for i in -steps..=steps {
                for j in -steps..=steps {
                    b[0] = i as f64 * 1e-3;
                    b[1] = j as f64 * 1e-3;
                    eval(&mut b);
                }
            }
        }
    }
    best
}

fn solve_small(a: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(rhs).map(|(r, v)| r.iter().copied().chain([*v]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..=n {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// `min ||b||_1` over `|c - G b| <= lambda` by enumerating the vertices of
/// the arrangement formed by the constraint planes and the coordinate planes.
fn dantzig_vertex_oracle(q: &Quadratic, lambda: f64) -> f64 {
    let p = q.c.len();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for a in 0..p {
        planes.push((q.g[a].clone(), q.c[a] - lambda));
        planes.push((q.g[a].clone(), q.c[a] + lambda));
        let mut e = vec![0.0; p];
        e[a] = 1.0;
        planes.push((e, 0.0));
    }
    let mut best = f64::INFINITY;
    let k = planes.len();
    let mut idx: Vec<usize> = (0..p).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(b) = solve_small(&a, &rhs) {
            let feasible = (0..p).all(|r| {
                let gb: f64 = (0..p).map(|s| q.g[r][s] * b[s]).sum();
                (q.c[r] - gb).abs() <= lambda * (1.0 + 1e-9) + 1e-9
            });
            if feasible {
                best = best.min(b.iter().map(|v| v.abs()).sum());
            }
        }
        // Next p-subset of 0..k in lexicographic order.
        let mut i = p;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - p + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..p {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[test]
fn criterion_4_solvers_match_brute_force() {
    let mut rng = GaussianRng::seed_from_u64(404);
    let cfg = SolverConfig::default();
    let (mut worst_lasso, mut worst_dantzig) = (0.0f64, 0.0f64);
    for inst in 0..200 {
        let p = 1 + inst % 3;
        let n = p + 2 + rng.index(5);
        let (x, y) = random_instance(&mut rng, n, p);
        let q = Quadratic::new(&x, &y);
        let lmax = q.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // Keep the oracle box small: radius ||y||^2 / (2 lambda) <= 1.5.
        let lambda = (q.yy / 3.0).max(lmax * (0.05 + 0.9 * rng.uniform()));

        let fit = lasso_fit(&LassoProblem::new(&x, &y, lambda).unwrap(), &cfg).unwrap();
        assert!(fit.converged());
        let gap = (q.objective(&fit.beta, lambda) - lasso_grid_oracle(&q, lambda)).abs();
        worst_lasso = worst_lasso.max(gap);

        let ds = dantzig_fit(&DantzigProblem::new(&x, &y, lambda).unwrap(), &cfg).unwrap();
        assert!(ds.converged());
        let l1: f64 = ds.beta.iter().map(|v| v.abs()).sum();
        worst_dantzig = worst_dantzig.max((l1 - dantzig_vertex_oracle(&q, lambda)).abs());
    }
    let pass = worst_lasso <= 1e-4 && worst_dantzig <= 1e-6;
    report(
        4,
        "solver oracles, 200 instances with p <= 3",
        pass,
        &format!("worst LASSO objective gap {worst_lasso:.2e} (<= 1e-4), worst Dantzig l1 gap {worst_dantzig:.2e} (<= 1e-6)"),
    );
    assert!(pass);
}

#[test]
fn criterion_5_kkt_conditions() {
    let mut rng = GaussianRng::seed_from_u64(505);
    let cfg = SolverConfig::default();
    let mut worst = 0.0f64;
    let mut unconverged = 0;
    for _ in 0..500 {
        let p = 1 + rng.index(50);
        let n = 2 + rng.index(60);
        let (x, y) = random_instance(&mut rng, n, p);
        let corr = x.tr_matvec(&y).unwrap();
        let lmax = corr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lambda = lmax * rng.uniform().powi(2);
        let fit = lasso_fit(&LassoProblem::new(&x, &y, lambda).unwrap(), &cfg).unwrap();
        if !fit.converged() {
            unconverged += 1;
            continue;
        }
        let fitted = x.matvec(&fit.beta).unwrap();
        let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let grad = x.tr_matvec(&r).unwrap();
        for (g, b) in grad.iter().zip(&fit.beta) {
            let dist = if *b != 0.0 { (g - lambda * b.signum()).abs() } else { (g.abs() - lambda).max(0.0) };
            worst = worst.max(dist);
        }
    }
    let pass = unconverged == 0 && worst <= 1e-7;
    report(
        5,
        "KKT conditions on 500 fits with p <= 50",
        pass,
        &format!("worst residual {worst:.2e} (<= 1e-7), {unconverged} fits not converged"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_reduction_identity() {
    let cfg = SolverConfig::default();
    let mut worst_lasso = 0.0f64;
    let mut worst_dantzig = 0.0f64;
    for seed in 0..3 {
        let (ds, _) = generate(&synth(12, 3, 25, 40, 0.5, 600 + seed)).unwrap();
        let spec = build_target(&ds, Objective::Denoising).unwrap();
        let prelim = preliminary_identity(&ds, &spec).unwrap();
        let lmax = ds.x().tr_matvec(ds.y()).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..20 {
            let lambda = lmax * 10f64.powf(-2.5 * k as f64 / 19.0);
            let tl = transductive_lasso(&ds, &spec, &prelim, lambda, &cfg).unwrap();
            let l = lasso_fit(&LassoProblem::new(ds.x(), ds.y(), lambda).unwrap(), &cfg).unwrap();
            let td = transductive_dantzig(&ds, &spec, &prelim, lambda, &cfg).unwrap();
            let d = dantzig_fit(&DantzigProblem::new(ds.x(), ds.y(), lambda).unwrap(), &cfg).unwrap();
            for j in 0..ds.p() {
                worst_lasso = worst_lasso.max((tl.beta[j] - l.beta[j]).abs());
                worst_dantzig = worst_dantzig.max((td.beta[j] - d.beta[j]).abs());
            }
        }
    }
    let pass = worst_lasso <= 1e-10 && worst_dantzig <= 1e-10;
    report(
        6,
        "A = X with the response as preliminary",
        pass,
        &format!("max coordinate difference LASSO {worst_lasso:.2e}, Dantzig {worst_dantzig:.2e} (<= 1e-10)"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_dantzig_bound_holds_empirically() {
    let mut cfg = ExperimentConfig::from_json(
        r#"{"synth": {"p": 8, "s": 1, "n": 50, "m": 100, "rho": 0.1, "sigma2": 1.0, "seed": 7},
            "eta": 0.1,
            "theory": {"objective": "denoising", "estimator": "dantzig", "kappa_reps": 1000, "check_reps": 500}}"#,
    )
    .unwrap();
    cfg.output = OutputPaths::default();
    let setup = cli::theory_setup(&cfg).unwrap();
    assert_eq!(setup.report.c_method, ConeMethod::FaceEnumeration);
    let (_, v) = cli::check(&cfg).unwrap();
    let pass = v.violation_rate <= 0.1 + 0.05;
    report(
        7,
        "Dantzig prediction bound, p=8 s=1 n=50",
        pass,
        &format!(
            "violation rate {:.3} over {} replications (<= 0.15); exact c = {:.4}, Monte-Carlo kappa = {:.4}",
            v.violation_rate, v.reps, setup.report.c_estimate, setup.report.kappa
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_kappa_for_the_response() {
    let (raw, beta) = generate(&synth(8, 1, 50, 100, 0.5, 8)).unwrap();
    let (ds, _) = normalize_columns(&raw).unwrap();
    let mut rng = GaussianRng::seed_from_u64(88);
    let y = translasso::synth::response(ds.x(), &beta, ds.sigma(), &mut rng).unwrap();
    let ds: RegressionDataset = ds.with_response(y).unwrap();
    let spec = build_target(&ds, Objective::Denoising).unwrap();
    let scaled = kappa_least_squares(&ds, &spec, KappaForm::Scaled).unwrap();
    let unscaled = kappa_least_squares(&ds, &spec, KappaForm::Unscaled).unwrap();
    let prelim = PrelimSpec { method: PrelimMethod::IdentityResponse, label_preserving: false };
    let mc = conf_kappa_mc(&ds, &spec, &beta, &prelim, 0.1, 10_000, 808, &SolverConfig::default()).unwrap();
    let exact = (scaled - 1.0).abs() <= 1e-12 && (unscaled - 1.0).abs() <= 1e-12;
    let pass = exact && mc <= 1.1;
    report(
        8,
        "kappa with A = X and normalized columns",
        pass,
        &format!("least-squares kappa {scaled:.15} / {unscaled:.15} (1 within 1e-12), Monte-Carlo kappa {mc:.4} (<= 1.1)"),
    );
    assert!(pass);
}

#[test]
fn criterion_9_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_json(
        r#"{"synth": {"p": 10, "s": 2, "n": 12, "m": 30, "rho": 0.5, "sigma2": 1.0, "seed": 9},
            "replications": 6, "grid": {"K": 20}}"#,
    )
    .unwrap();
    let files = ["records.csv", "summary.json", "curve.csv"].map(|f| dir.path().join(f));
    cfg.output = OutputPaths {
        records_csv: Some(files[0].clone()),
        summary_json: Some(files[1].clone()),
        curve_csv: Some(files[2].clone()),
    };
    let run = || {
        cli::experiment(&cfg).unwrap();
        files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>()
    };
    let first = run();
    let second = run();
    let same = first == second;
    report(
        9,
        "byte-identical experiment outputs",
        same,
        &format!("records {} bytes, summary {} bytes, curve {} bytes", first[0].len(), first[1].len(), first[2].len()),
    );
    assert!(same);
}
