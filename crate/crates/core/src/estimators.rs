//! Target matrices, preliminary estimators and the transductive LASSO /
//! Dantzig Selector built on top of them.
//!
//! Every estimator here is "a LASSO or Dantzig Selector on modified data":
//! the design becomes the target matrix `A` and the response becomes a
//! preliminary estimate of `A beta*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_finite, cholesky_solve, gram, norm2_sq, pseudo_inverse, sub, Matrix, DEFAULT_PINV_TOL,
};
use crate::solvers::{
    dantzig_fit, DantzigProblem, FitResult, FitStatus, LassoProblem, LassoSolver, SolverConfig,
};

/// Labeled design `X` (n x p), response `Y`, and the full design `Z` (m x p)
/// whose first `n` rows are `X`.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    x: Matrix,
    y: Vec<f64>,
    z: Matrix,
    sigma: f64,
    normalized: bool,
}

impl RegressionDataset {
    /// `z = None` means no unlabeled rows (`Z = X`).
    pub fn new(x: Matrix, y: Vec<f64>, z: Option<Matrix>, sigma: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Dimension(format!("X has {} rows but Y has length {}", x.rows(), y.len())));
        }
        check_finite(&y, "Y")?;
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        let z = match z {
            None => x.clone(),
            Some(z) => {
                if z.cols() != x.cols() {
                    return Err(Error::Dimension(format!("Z has {} columns, X has {}", z.cols(), x.cols())));
                }
                if z.rows() < x.rows() {
                    return Err(Error::Dimension(format!("Z has {} rows, fewer than n = {}", z.rows(), x.rows())));
                }
                if let Some(i) = (0..x.rows()).find(|&i| z.row(i) != x.row(i)) {
                    return Err(Error::Data(format!("row {} of Z differs from row {} of X", i + 1, i + 1)));
                }
                z
            }
        };
        Ok(Self { x, y, z, sigma, normalized: false })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn z(&self) -> &Matrix {
        &self.z
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn n(&self) -> usize {
        self.x.rows()
    }
    pub fn m(&self) -> usize {
        self.z.rows()
    }
    pub fn p(&self) -> usize {
        self.x.cols()
    }
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Same design, different response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::Dimension(format!("response of length {} for n = {}", y.len(), self.n())));
        }
        check_finite(&y, "Y")?;
        Ok(Self { y, ..self.clone() })
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self { sigma, ..self.clone() }
    }

    /// Sets the `normalized` flag after checking `X_j'X_j / n = 1` to 1e-8.
    pub fn mark_normalized(mut self) -> Result<Self> {
        let n = self.n() as f64;
        for (j, col) in self.x.columns().iter().enumerate() {
            let d = norm2_sq(col) / n;
            if (d - 1.0).abs() > 1e-8 {
                return Err(Error::Data(format!("column {} has X_j'X_j/n = {d}", j + 1)));
            }
        }
        self.normalized = true;
        Ok(self)
    }

    /// Replaces both designs, keeping the response. Used by column scaling.
    pub(crate) fn with_designs(&self, x: Matrix, z: Matrix) -> Self {
        Self { x, z, normalized: false, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `A = sqrt(n/m) Z`: predict `Z beta*`.
    Transductive,
    /// `A = sqrt(n/m) Z_X` with `Z_X` the projection of `Z` onto the row
    /// space of `X`.
    TransductiveProjected,
    /// `A = X`: denoise `Y`.
    Denoising,
    /// `A = sqrt(n) I_p`: estimate `beta*`.
    Estimation,
    Custom,
}

impl Objective {
    pub fn is_transductive(self) -> bool {
        matches!(self, Objective::Transductive | Objective::TransductiveProjected)
    }
}

#[derive(Debug, Clone)]
pub struct TargetSpec {
    pub a: Matrix,
    pub objective: Objective,
    /// Row-space projector of `X` for `TransductiveProjected`. Fitted
    /// coefficients are mapped through it, which leaves `A b` unchanged and
    /// makes `(Z - Z_X) b = 0` hold exactly.
    pub projector: Option<Matrix>,
}

impl TargetSpec {
    pub fn custom(a: Matrix) -> Self {
        Self { a, objective: Objective::Custom, projector: None }
    }

    fn restrict(&self, mut fit: FitResult) -> Result<FitResult> {
        if let Some(proj) = &self.projector {
            fit.beta = proj.matvec(&fit.beta)?;
        }
        Ok(fit)
    }
}

/// Target matrix for `objective`, with the scaling stored in `A`.
pub fn build_target(ds: &RegressionDataset, objective: Objective) -> Result<TargetSpec> {
    let scale = (ds.n() as f64 / ds.m() as f64).sqrt();
    let mut projector = None;
    let a = match objective {
        Objective::Transductive => ds.z().scale(scale),
        Objective::TransductiveProjected => {
            let proj = rowspace_projector(ds.x(), DEFAULT_PINV_TOL)?;
            let a = ds.z().matmul(&proj)?.scale(scale);
            projector = Some(proj);
            a
        }
        Objective::Denoising => ds.x().clone(),
        Objective::Estimation => Matrix::scaled_identity(ds.p(), (ds.n() as f64).sqrt()),
        Objective::Custom => {
            return Err(Error::InvalidParameter("custom targets are built with TargetSpec::custom".into()))
        }
    };
    Ok(TargetSpec { a, objective, projector })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrelimMethod {
    PseudoLs { tol: f64 },
    Ridge { gamma: f64 },
    Lasso { lambda1: f64 },
    IdentityResponse,
}

/// A preliminary estimate of `A beta*`.
#[derive(Debug, Clone)]
pub struct PreliminaryEstimate {
    pub value: Vec<f64>,
    pub method: PrelimMethod,
    pub objective: Objective,
    /// The coefficient vector behind `value`, when there is one.
    pub coefficients: Option<Vec<f64>>,
    /// Status of the inner LASSO fit for `PrelimMethod::Lasso`.
    pub solver_status: Option<FitStatus>,
    pub label_preserved: bool,
}

fn check_spec(ds: &RegressionDataset, spec: &TargetSpec) -> Result<()> {
    if spec.a.cols() != ds.p() {
        return Err(Error::Dimension(format!("A has {} columns, data has p = {}", spec.a.cols(), ds.p())));
    }
    Ok(())
}

fn from_coefficients(spec: &TargetSpec, method: PrelimMethod, coef: Vec<f64>) -> Result<PreliminaryEstimate> {
    let value = spec.a.matvec(&coef)?;
    check_finite(&value, "preliminary estimate")?;
    Ok(PreliminaryEstimate {
        value,
        method,
        objective: spec.objective,
        coefficients: Some(coef),
        solver_status: None,
        label_preserved: false,
    })
}

/// `A (X'X)^+ X'Y` with the pseudo-inverse cut at relative tolerance `tol`.
pub fn preliminary_pseudo_ls(ds: &RegressionDataset, spec: &TargetSpec, tol: f64) -> Result<PreliminaryEstimate> {
    check_spec(ds, spec)?;
    let g_pinv = pseudo_inverse(&gram(ds.x()), tol)?;
    let coef = g_pinv.matvec(&ds.x().tr_matvec(ds.y())?)?;
    from_coefficients(spec, PrelimMethod::PseudoLs { tol }, coef)
}

/// `A (gamma A'A + X'X)^-1 X'Y`.
pub fn preliminary_ridge(ds: &RegressionDataset, spec: &TargetSpec, gamma: f64) -> Result<PreliminaryEstimate> {
    check_spec(ds, spec)?;
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidParameter(format!("ridge gamma must be >= 0, got {gamma}")));
    }
    let mut system = gram(ds.x());
    if gamma > 0.0 {
        system = system.add(&gram(&spec.a).scale(gamma))?;
    }
    let coef = cholesky_solve(&system, &ds.x().tr_matvec(ds.y())?).map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("gamma A'A + X'X is singular ({msg}); try a larger gamma")),
        other => other,
    })?;
    from_coefficients(spec, PrelimMethod::Ridge { gamma }, coef)
}

/// `A b` where `b` is the LASSO on `(X, Y)` at `lambda1`.
pub fn preliminary_lasso(
    ds: &RegressionDataset,
    spec: &TargetSpec,
    lambda1: f64,
    cfg: &SolverConfig,
) -> Result<PreliminaryEstimate> {
    check_spec(ds, spec)?;
    let fit = crate::solvers::lasso_fit(&LassoProblem::new(ds.x(), ds.y(), lambda1)?, cfg)?;
    let mut est = from_coefficients(spec, PrelimMethod::Lasso { lambda1 }, fit.beta)?;
    est.solver_status = Some(fit.status);
    Ok(est)
}

/// Builds the LASSO-based preliminary from an already computed coefficient
/// vector (used along regularization paths).
pub fn preliminary_from_lasso_fit(spec: &TargetSpec, fit: &FitResult) -> Result<PreliminaryEstimate> {
    let mut est = from_coefficients(spec, PrelimMethod::Lasso { lambda1: fit.lambda }, fit.beta.clone())?;
    est.solver_status = Some(fit.status);
    Ok(est)
}

/// `Y` itself as the estimate of `X beta*`. Only meaningful for `A = X`.
pub fn preliminary_identity(ds: &RegressionDataset, spec: &TargetSpec) -> Result<PreliminaryEstimate> {
    check_spec(ds, spec)?;
    let is_x = match spec.objective {
        Objective::Denoising => true,
        Objective::Custom => spec.a == *ds.x(),
        _ => false,
    };
    if !is_x {
        return Err(Error::InvalidParameter("the identity preliminary requires A = X".into()));
    }
    Ok(PreliminaryEstimate {
        value: ds.y().to_vec(),
        method: PrelimMethod::IdentityResponse,
        objective: spec.objective,
        coefficients: None,
        solver_status: None,
        label_preserved: false,
    })
}

pub fn preliminary(
    ds: &RegressionDataset,
    spec: &TargetSpec,
    method: PrelimMethod,
    cfg: &SolverConfig,
) -> Result<PreliminaryEstimate> {
    match method {
        PrelimMethod::PseudoLs { tol } => preliminary_pseudo_ls(ds, spec, tol),
        PrelimMethod::Ridge { gamma } => preliminary_ridge(ds, spec, gamma),
        PrelimMethod::Lasso { lambda1 } => preliminary_lasso(ds, spec, lambda1, cfg),
        PrelimMethod::IdentityResponse => preliminary_identity(ds, spec),
    }
}

/// How to build a preliminary estimate, including the optional
/// label-preserving step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrelimSpec {
    pub method: PrelimMethod,
    #[serde(default)]
    pub label_preserving: bool,
}

impl PrelimSpec {
    pub fn compute(&self, ds: &RegressionDataset, spec: &TargetSpec, cfg: &SolverConfig) -> Result<PreliminaryEstimate> {
        let est = preliminary(ds, spec, self.method, cfg)?;
        if self.label_preserving {
            label_preserving_adjust(ds, &est)
        } else {
            Ok(est)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Lasso,
    Dantzig,
}

impl EstimatorKind {
    pub fn fit(
        self,
        ds: &RegressionDataset,
        spec: &TargetSpec,
        prelim: &PreliminaryEstimate,
        lambda: f64,
        cfg: &SolverConfig,
    ) -> Result<FitResult> {
        match self {
            EstimatorKind::Lasso => transductive_lasso(ds, spec, prelim, lambda, cfg),
            EstimatorKind::Dantzig => transductive_dantzig(ds, spec, prelim, lambda, cfg),
        }
    }
}

/// Overwrites the labeled block of a transductive preliminary with the
/// observed responses: in `Z`-space the first `n` entries become `Y`, and the
/// `sqrt(n/m)` scale of `A` is applied to them. The other entries are kept.
pub fn label_preserving_adjust(ds: &RegressionDataset, prelim: &PreliminaryEstimate) -> Result<PreliminaryEstimate> {
    if !prelim.objective.is_transductive() {
        return Err(Error::InvalidParameter(format!(
            "label-preserving adjustment needs a transductive target, got {:?}",
            prelim.objective
        )));
    }
    if prelim.value.len() != ds.m() {
        return Err(Error::Dimension(format!("preliminary has length {}, m = {}", prelim.value.len(), ds.m())));
    }
    let scale = (ds.n() as f64 / ds.m() as f64).sqrt();
    let mut out = prelim.clone();
    for (v, &y) in out.value.iter_mut().zip(ds.y()) {
        *v = scale * y;
    }
    out.label_preserved = true;
    Ok(out)
}

fn check_prelim(spec: &TargetSpec, prelim: &PreliminaryEstimate) -> Result<()> {
    if prelim.value.len() != spec.a.rows() {
        return Err(Error::Dimension(format!(
            "preliminary has length {} but A has {} rows",
            prelim.value.len(),
            spec.a.rows()
        )));
    }
    Ok(())
}

/// `argmin ||prelim - A b||^2 + 2 lambda2 ||b||_1`.
///
/// At `lambda2 = 0` with a LASSO preliminary the preliminary coefficients are
/// returned unchanged, so the plain LASSO is the `lambda2 = 0` member of the
/// family.
pub fn transductive_lasso(
    ds: &RegressionDataset,
    spec: &TargetSpec,
    prelim: &PreliminaryEstimate,
    lambda2: f64,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    check_spec(ds, spec)?;
    check_prelim(spec, prelim)?;
    if lambda2 == 0.0 {
        if let (PrelimMethod::Lasso { .. }, Some(coef)) = (prelim.method, &prelim.coefficients) {
            return spec.restrict(preliminary_passthrough(spec, prelim, coef));
        }
    }
    spec.restrict(crate::solvers::lasso_fit(&LassoProblem::new(&spec.a, &prelim.value, lambda2)?, cfg)?)
}

/// Transductive LASSO over a decreasing `lambda2` path with warm starts,
/// reusing a prepared solver for `A`.
pub fn transductive_lasso_path(
    solver: &LassoSolver,
    spec: &TargetSpec,
    prelim: &PreliminaryEstimate,
    lambdas: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<FitResult>> {
    check_prelim(spec, prelim)?;
    let mut out: Vec<FitResult> = Vec::with_capacity(lambdas.len());
    for &lambda2 in lambdas {
        let fit = match (lambda2 == 0.0, prelim.method, &prelim.coefficients) {
            (true, PrelimMethod::Lasso { .. }, Some(coef)) => preliminary_passthrough(spec, prelim, coef),
            _ => {
                let start = out.last().map(|f| f.beta.as_slice());
                solver.fit(&prelim.value, lambda2, start, cfg)?
            }
        };
        out.push(fit);
    }
    out.into_iter().map(|f| spec.restrict(f)).collect()
}

fn preliminary_passthrough(spec: &TargetSpec, prelim: &PreliminaryEstimate, coef: &[f64]) -> FitResult {
    let fitted = spec.a.matvec(coef).expect("shapes checked");
    let r = sub(&prelim.value, &fitted);
    let kkt = spec.a.tr_matvec(&r).expect("shapes checked").iter().fold(0.0f64, |m, g| m.max(g.abs()));
    FitResult {
        beta: coef.to_vec(),
        lambda: 0.0,
        iterations: 0,
        kkt_residual: kkt,
        objective: norm2_sq(&r),
        status: prelim.solver_status.unwrap_or(FitStatus::Converged),
        objective_trace: Vec::new(),
    }
}

/// `argmin ||b||_1  s.t.  ||A'(prelim - A b)||_inf <= lambda2`.
pub fn transductive_dantzig(
    ds: &RegressionDataset,
    spec: &TargetSpec,
    prelim: &PreliminaryEstimate,
    lambda2: f64,
    cfg: &SolverConfig,
) -> Result<FitResult> {
    check_spec(ds, spec)?;
    check_prelim(spec, prelim)?;
    spec.restrict(dantzig_fit(&DantzigProblem::new(&spec.a, &prelim.value, lambda2)?, cfg)?)
}

/// `Z_X = Z P` where `P = (X'X)^+ (X'X)` projects onto the row space of `X`.
pub fn project_onto_rowspace(ds: &RegressionDataset, tol: f64) -> Result<Matrix> {
    ds.z().matmul(&rowspace_projector(ds.x(), tol)?)
}

/// `(X'X)^+ (X'X)`, symmetrized.
pub fn rowspace_projector(x: &Matrix, tol: f64) -> Result<Matrix> {
    let g = gram(x);
    let mut proj = pseudo_inverse(&g, tol)?.matmul(&g)?;
    let p = proj.rows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (proj.get(i, j) + proj.get(j, i));
            proj.set(i, j, v);
            proj.set(j, i, v);
        }
    }
    Ok(proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm_inf, GaussianRng};
    use crate::solvers::lasso_fit;
    use crate::synth::{generate, SynthConfig};

    fn dataset(n: usize, m: usize, p: usize, seed: u64) -> (RegressionDataset, Vec<f64>) {
        let cfg = SynthConfig { p, s: 2.min(p), n, m, rho: 0.3, sigma2: 1.0, beta_value: 5.0, seed };
        generate(&cfg).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn z_prefix_must_match_x() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let z = Matrix::from_rows(&[vec![1.0, 2.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(RegressionDataset::new(x, vec![1.0], Some(z), 1.0), Err(Error::Data(_))));
    }

    #[test]
    fn targets_have_documented_scaling() {
        let (ds, _) = dataset(4, 4, 2, 1);
        assert_eq!(build_target(&ds, Objective::Denoising).unwrap().a, *ds.x());
        let est = build_target(&ds, Objective::Estimation).unwrap();
        assert_eq!(est.a, Matrix::scaled_identity(2, 2.0));
        // n = m: transductive target is Z = X.
        assert_eq!(build_target(&ds, Objective::Transductive).unwrap().a, *ds.x());
        let (ds, _) = dataset(5, 20, 3, 2);
        let t = build_target(&ds, Objective::Transductive).unwrap();
        assert_eq!(t.a, ds.z().scale(0.5));
    }

    #[test]
    fn pseudo_ls_is_projection_of_y() {
        // Full column rank.
        let (ds, _) = dataset(10, 10, 3, 3);
        let spec = build_target(&ds, Objective::Denoising).unwrap();
        let pre = preliminary_pseudo_ls(&ds, &spec, DEFAULT_PINV_TOL).unwrap();
        let ols = cholesky_solve(&gram(ds.x()), &ds.x().tr_matvec(ds.y()).unwrap()).unwrap();
        assert!(max_diff(&pre.value, &ds.x().matvec(&ols).unwrap()) < 1e-9);
    }

    /// Orthonormal basis of col(X) by modified Gram-Schmidt.
    fn column_space_basis(x: &Matrix) -> Vec<Vec<f64>> {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for col in x.columns() {
            let mut v = col.clone();
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                v.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
            }
            let nrm = norm2_sq(&v).sqrt();
            if nrm > 1e-8 * norm2_sq(&col).sqrt().max(1.0) {
                basis.push(v.iter().map(|a| a / nrm).collect());
            }
        }
        basis
    }

    #[test]
    fn pseudo_ls_wide_design_projects_y() {
        let (ds, _) = dataset(4, 4, 7, 4);
        let spec = build_target(&ds, Objective::Denoising).unwrap();
        let pre = preliminary_pseudo_ls(&ds, &spec, DEFAULT_PINV_TOL).unwrap();
        let basis = column_space_basis(ds.x());
        let mut proj = vec![0.0; ds.n()];
        for b in &basis {
            let d: f64 = b.iter().zip(ds.y()).map(|(u, v)| u * v).sum();
            proj.iter_mut().zip(b).for_each(|(o, u)| *o += d * u);
        }
        assert!(max_diff(&pre.value, &proj) < 1e-8);
    }

    #[test]
    fn pseudo_ls_noiseless_recovers_row_space_signal() {
        // beta* inside the row space of X; Ker(A) contains nothing special.
        let (ds, _) = dataset(3, 9, 6, 5);
        let beta = ds.x().tr_matvec(&[1.0, -0.5, 2.0]).unwrap();
        let ds = ds.with_response(ds.x().matvec(&beta).unwrap()).unwrap();
        let spec = build_target(&ds, Objective::Transductive).unwrap();
        let pre = preliminary_pseudo_ls(&ds, &spec, DEFAULT_PINV_TOL).unwrap();
        assert!(max_diff(&pre.value, &spec.a.matvec(&beta).unwrap()) < 1e-8);
    }

    #[test]
    fn pseudo_ls_independent_of_cutoff_when_kernels_nest() {
        // A = X: Ker(A) = Ker(X).
        let (ds, _) = dataset(6, 6, 9, 6);
        let spec = build_target(&ds, Objective::Denoising).unwrap();
        let a = preliminary_pseudo_ls(&ds, &spec, 1e-8).unwrap();
        let b = preliminary_pseudo_ls(&ds, &spec, 1e-12).unwrap();
        assert!(max_diff(&a.value, &b.value) < 1e-6);
    }

    #[test]
    fn ridge_limits() {
        let (ds, _) = dataset(10, 10, 3, 7);
        let spec = build_target(&ds, Objective::Estimation).unwrap();
        let big = preliminary_ridge(&ds, &spec, 1e8).unwrap();
        assert!(norm_inf(&big.value) < 1e-4);

        let spec = build_target(&ds, Objective::Denoising).unwrap();
        let r0 = preliminary_ridge(&ds, &spec, 0.0).unwrap();
        let ls = preliminary_pseudo_ls(&ds, &spec, DEFAULT_PINV_TOL).unwrap();
        assert!(max_diff(&r0.value, &ls.value) < 1e-9);
    }

    #[test]
    fn ridge_matches_dense_elimination() {
        let (ds, _) = dataset(6, 12, 4, 8);
        let spec = build_target(&ds, Objective::Transductive).unwrap();
        let gamma = 0.3;
        let got = preliminary_ridge(&ds, &spec, gamma).unwrap();
        // Gauss-Jordan with partial pivoting on the augmented system.
        let sys = gram(ds.x()).add(&gram(&spec.a).scale(gamma)).unwrap();
        let rhs = ds.x().tr_matvec(ds.y()).unwrap();
        let p = ds.p();
        let mut aug: Vec<Vec<f64>> = (0..p).map(|i| {
            let mut r = sys.row(i).to_vec();
            r.push(rhs[i]);
            r
        }).collect();
        for c in 0..p {
            let piv = (c..p).max_by(|&a, &b| aug[a][c].abs().total_cmp(&aug[b][c].abs())).unwrap();
            aug.swap(c, piv);
            for r in 0..p {
                if r != c {
                    let f = aug[r][c] / aug[c][c];
                    let pr = aug[c].clone();
                    aug[r].iter_mut().zip(&pr).for_each(|(a, b)| *a -= f * b);
                }
            }
        }
        let coef: Vec<f64> = (0..p).map(|i| aug[i][p] / aug[i][i]).collect();
        assert!(max_diff(&got.value, &spec.a.matvec(&coef).unwrap()) < 1e-10);
    }

    #[test]
    fn ridge_singular_is_reported() {
        let (ds, _) = dataset(3, 3, 6, 9);
        let spec = build_target(&ds, Objective::Denoising).unwrap();
        assert!(matches!(preliminary_ridge(&ds, &spec, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn lasso_preliminary_cases() {
        let cfg = SolverConfig::default();
        let (ds, _) = dataset(12, 30, 4, 10);
        let spec = build_target(&ds, Objective::Transductive).unwrap();
        let lmax = norm_inf(&ds.x().tr_matvec(ds.y()).unwrap());
        let zero = preliminary_lasso(&ds, &spec, lmax, &cfg).unwrap();
        assert!(zero.value.iter().all(|&v| v == 0.0));

        let l0 = preliminary_lasso(&ds, &spec, 0.0, &cfg).unwrap();
        let ls = preliminary_pseudo_ls(&ds, &spec, DEFAULT_PINV_TOL).unwrap();
        assert!(max_diff(&l0.value, &ls.value) < 1e-6);

        // Noiseless recovery.
        let (ds, beta) = generate(&SynthConfig { p: 4, s: 2, n: 12, m: 30, rho: 0.3, sigma2: 0.0, beta_value: 5.0, seed: 11 }).unwrap();
        let spec = build_target(&ds, Objective::Transductive).unwrap();
        let pre = preliminary_lasso(&ds, &spec, 1e-6, &cfg).unwrap();
        assert!(max_diff(&pre.value, &spec.a.matvec(&beta).unwrap()) < 1e-3);
    }

    #[test]
    fn label_adjust_properties() {
        let cfg = SolverConfig::default();
        let (ds, _) = dataset(5, 15, 4, 12);
        let spec = build_target(&ds, Objective::Transductive).unwrap();
        let lmax = norm_inf(&ds.x().tr_matvec(ds.y()).unwrap());
        let zero = preliminary_lasso(&ds, &spec, lmax, &cfg).unwrap();
        let adj = label_preserving_adjust(&ds, &zero).unwrap();
        let scale = (5.0f64 / 15.0).sqrt();
        for i in 0..5 {
            assert_eq!(adj.value[i], scale * ds.y()[i]);
        }
        assert!(adj.value[5..].iter().all(|&v| v == 0.0));

        let pre = preliminary_lasso(&ds, &spec, 0.3 * lmax, &cfg).unwrap();
        let once = label_preserving_adjust(&ds, &pre).unwrap();
        let twice = label_preserving_adjust(&ds, &once).unwrap();
        assert_eq!(once.value, twice.value);
        assert_eq!(once.value[5..], pre.value[5..]);

        let den = build_target(&ds, Objective::Denoising).unwrap();
        let y = preliminary_identity(&ds, &den).unwrap();
        assert!(label_preserving_adjust(&ds, &y).is_err());
    }

    #[test]
    fn label_adjust_all_labeled_gives_y() {
        let cfg = SolverConfig::default();
        let (ds, _) = dataset(6, 6, 3, 13);
        let spec = build_target(&ds, Objective::Transductive).unwrap();
        let pre = preliminary_lasso(&ds, &spec, 1.0, &cfg).unwrap();
        assert_eq!(label_preserving_adjust(&ds, &pre).unwrap().value, ds.y());
    }

    #[test]
    fn reduces_to_plain_estimators() {
        let cfg = SolverConfig::default();
        let (ds, _) = dataset(15, 15, 6, 14);
        let spec = build_target(&ds, Objective::Denoising).unwrap();
        let pre = preliminary_identity(&ds, &spec).unwrap();
        let lmax = norm_inf(&ds.x().tr_matvec(ds.y()).unwrap());
        for k in 0..5 {
            let lambda = lmax * (k as f64) / 5.0;
            let tl = transductive_lasso(&ds, &spec, &pre, lambda, &cfg).unwrap();
            let l = lasso_fit(&LassoProblem::new(ds.x(), ds.y(), lambda).unwrap(), &cfg).unwrap();
            assert!(max_diff(&tl.beta, &l.beta) <= 1e-10);
        }
    }

    #[test]
    fn transductive_lasso_threshold_and_tie_break() {
        let cfg = SolverConfig::default();
        let (ds, _) = dataset(8, 20, 5, 15);
        let spec = build_target(&ds, Objective::Transductive).unwrap();
        let pre = label_preserving_adjust(&ds, &preliminary_lasso(&ds, &spec, 2.0, &cfg).unwrap()).unwrap();
        let thr = norm_inf(&spec.a.tr_matvec(&pre.value).unwrap());
        let zero = transductive_lasso(&ds, &spec, &pre, thr, &cfg).unwrap();
        assert!(zero.beta.iter().all(|&b| b == 0.0));
        let tie = transductive_lasso(&ds, &spec, &pre, 0.0, &cfg).unwrap();
        assert_eq!(Some(&tie.beta), pre.coefficients.as_ref());
    }

    #[test]
    fn transductive_lasso_grid_oracle() {
        let cfg = SolverConfig::default();
        let mut rng = GaussianRng::seed_from_u64(16);
        let z = Matrix::new(9, 2, (0..18).map(|_| rng.standard_normal()).collect()).unwrap();
        let x = z.top_rows(3).unwrap();
        let y = vec![1.0, -0.5, 2.0];
        let ds = RegressionDataset::new(x, y, Some(z), 1.0).unwrap();
        let spec = build_target(&ds, Objective::Transductive).unwrap();
        let pre = label_preserving_adjust(&ds, &preliminary_lasso(&ds, &spec, 0.2, &cfg).unwrap()).unwrap();
        let lambda2 = 0.3;
        let fit = transductive_lasso(&ds, &spec, &pre, lambda2, &cfg).unwrap();
        let mut best = f64::INFINITY;
        for a in -3000..=3000 {
            for b in -3000..=3000 {
                let beta = [a as f64 * 1e-3, b as f64 * 1e-3];
                let fitted = spec.a.matvec(&beta).unwrap();
                let rss: f64 = pre.value.iter().zip(&fitted).map(|(u, v)| (u - v) * (u - v)).sum();
                best = best.min(rss + 2.0 * lambda2 * (beta[0].abs() + beta[1].abs()));
            }
        }
        assert!((best - fit.objective).abs() <= 1e-4, "{best} vs {}", fit.objective);
    }

    #[test]
    fn transductive_dantzig_reductions() {
        let cfg = SolverConfig::default();
        let (ds, _) = dataset(10, 10, 3, 17);
        let spec = build_target(&ds, Objective::Denoising).unwrap();
        let pre = preliminary_identity(&ds, &spec).unwrap();
        let lambda = 3.0;
        let td = transductive_dantzig(&ds, &spec, &pre, lambda, &cfg).unwrap();
        let d = dantzig_fit(&DantzigProblem::new(ds.x(), ds.y(), lambda).unwrap(), &cfg).unwrap();
        assert!(max_diff(&td.beta, &d.beta) <= 1e-10);
        let huge = transductive_dantzig(&ds, &spec, &pre, 1e12, &cfg).unwrap();
        assert!(huge.beta.iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn rowspace_projection() {
        // Full column rank: Z_X = Z.
        let (ds, _) = dataset(10, 20, 4, 18);
        let zx = project_onto_rowspace(&ds, DEFAULT_PINV_TOL).unwrap();
        assert!(zx.sub(ds.z()).unwrap().max_abs() < 1e-9);

        // A zero column of X puts e_3 in Ker(X).
        let mut rng = GaussianRng::seed_from_u64(19);
        let mut z = Matrix::new(8, 4, (0..32).map(|_| rng.standard_normal()).collect()).unwrap();
        for i in 0..3 {
            z.set(i, 2, 0.0);
        }
        let ds = RegressionDataset::new(z.top_rows(3).unwrap(), vec![0.0; 3], Some(z), 1.0).unwrap();
        let zx = project_onto_rowspace(&ds, DEFAULT_PINV_TOL).unwrap();
        assert!(norm_inf(&zx.matvec(&[0.0, 0.0, 1.0, 0.0]).unwrap()) < 1e-10);

        // Wide design: P is an orthogonal projector.
        let (ds, _) = dataset(3, 6, 5, 20);
        let proj = rowspace_projector(ds.x(), DEFAULT_PINV_TOL).unwrap();
        assert!(proj.matmul(&proj).unwrap().sub(&proj).unwrap().max_abs() < 1e-10);
        assert!(proj.sub(&proj.transpose()).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn projected_target_fits_live_in_rowspace() {
        let cfg = SolverConfig::default();
        let (ds, _) = dataset(4, 12, 8, 21);
        let spec = build_target(&ds, Objective::TransductiveProjected).unwrap();
        let zx = project_onto_rowspace(&ds, DEFAULT_PINV_TOL).unwrap();
        let diff = ds.z().sub(&zx).unwrap();
        let pre = preliminary_pseudo_ls(&ds, &spec, DEFAULT_PINV_TOL).unwrap();
        for lambda in [0.1, 1.0, 5.0] {
            let fit = transductive_lasso(&ds, &spec, &pre, lambda, &cfg).unwrap();
            assert!(norm_inf(&diff.matvec(&fit.beta).unwrap()) <= 1e-8);
        }
    }
}
