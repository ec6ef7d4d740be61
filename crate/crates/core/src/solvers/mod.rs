//! LASSO and Dantzig Selector solvers on a generic `(design, response)` pair.
//!
//! Penalty convention: the LASSO minimizes `||y - A b||_2^2 + 2 lambda ||b||_1`
//! on the *unscaled* residual (no `1/n`, no `1/2`). Its optimality conditions
//! are `A_j'(y - A b) = lambda sign(b_j)` when `b_j != 0` and
//! `|A_j'(y - A b)| <= lambda` otherwise. glmnet's `lambda` is this one
//! divided by `n`.
//!
//! The Dantzig Selector minimizes `||b||_1` subject to
//! `||A'(y - A b)||_inf <= lambda`, so the same `lambda` is the threshold
//! above which both estimators return zero.

mod dantzig;
mod lasso;
mod simplex;

pub use dantzig::{dantzig_fit, DantzigProblem};
pub use lasso::{lasso_fit, lasso_objective, soft_threshold, LassoProblem, LassoSolver};
pub use simplex::{lp_simplex, LpSolution, LpStatus};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Coordinate descent stops once a full sweep moves no coefficient by
    /// more than this.
    pub cd_tol: f64,
    /// Sweep limit for coordinate descent, pivot limit for the simplex.
    pub max_iter: usize,
    /// Required optimality residual before a LASSO fit reports `Converged`.
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Record the LASSO objective after every sweep.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cd_tol: 1e-9,
            max_iter: 100_000,
            kkt_tol: 1e-7,
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// LASSO: subgradient optimality residual. Dantzig: constraint violation.
    pub kkt_residual: f64,
    /// LASSO: `||y - A b||^2 + 2 lambda ||b||_1`. Dantzig: `||b||_1`.
    pub objective: f64,
    pub status: FitStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}
