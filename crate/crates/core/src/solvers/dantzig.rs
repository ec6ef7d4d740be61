use super::lasso::validate;
use super::{lp_simplex, FitResult, FitStatus, LpStatus, SolverConfig};
use crate::error::Result;
use crate::linalg::{gram, norm1, norm_inf, Matrix};

#[derive(Debug, Clone, Copy)]
pub struct DantzigProblem<'a> {
    pub design: &'a Matrix,
    pub response: &'a [f64],
    pub lambda: f64,
}

impl<'a> DantzigProblem<'a> {
    pub fn new(design: &'a Matrix, response: &'a [f64], lambda: f64) -> Result<Self> {
        validate(design, response, lambda)?;
        Ok(Self { design, response, lambda })
    }
}

/// Dantzig Selector through its LP form.
///
/// With `b = b+ - b-`, `b+, b- >= 0`, `G = A'A` and `c = A'y`, the LP is
/// `min sum(b+ + b-)` subject to `G(b+ - b-) <= lambda + c` and
/// `-G(b+ - b-) <= lambda - c`.
pub fn dantzig_fit(prob: &DantzigProblem<'_>, cfg: &SolverConfig) -> Result<FitResult> {
    let g = gram(prob.design);
    let corr = prob.design.tr_matvec(prob.response)?;
    let p = g.rows();
    let lambda = prob.lambda;

    let mut a_ub = Matrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        for j in 0..p {
            let v = g.get(i, j);
            a_ub.set(i, j, v);
            a_ub.set(i, p + j, -v);
            a_ub.set(p + i, j, -v);
            a_ub.set(p + i, p + j, v);
        }
    }
    let b_ub: Vec<f64> = corr.iter().map(|c| lambda + c).chain(corr.iter().map(|c| lambda - c)).collect();
    let cost = vec![1.0; 2 * p];

    let sol = lp_simplex(&cost, &a_ub, &b_ub, cfg)?;
    let beta: Vec<f64> = (0..p).map(|j| sol.x[j] - sol.x[p + j]).collect();
    let status = match sol.status {
        LpStatus::Optimal => FitStatus::Converged,
        LpStatus::Infeasible | LpStatus::Unbounded => FitStatus::Infeasible,
        LpStatus::IterationLimit => FitStatus::MaxIter,
    };
    let fitted = g.matvec(&beta)?;
    let residual_corr: Vec<f64> = corr.iter().zip(&fitted).map(|(c, f)| c - f).collect();
    let violation = (norm_inf(&residual_corr) - lambda).max(0.0);
    Ok(FitResult {
        objective: norm1(&beta),
        beta,
        lambda,
        iterations: sol.iterations,
        kkt_residual: violation,
        status,
        objective_trace: Vec::new(),
    })
}
