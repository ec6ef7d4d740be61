//! Checks of the hypotheses behind the sparsity inequalities: the
//! restricted-cone constant `c(A, tau)`, the confidence constant `kappa` of a
//! preliminary estimator, the Gram-discrepancy constant `k`, and the bounds
//! they feed.

mod bounds;
mod cone;
mod kappa;

pub use bounds::{
    bound_transductive_mse, bound_dantzig, bound_lasso, validate_bound, BoundReport, BoundKind, BoundValidation,
};
pub use cone::{cone_constant, ConeBudget, ConeEstimate, ConeMethod, ConeSpec};
pub use kappa::{conf_kappa_mc, conf_scale, conf_statistic, k_bias_constant, kappa_least_squares, kernels_match, KappaForm};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Estimate of `c(A, tau)`; exact for small `p`, an upper estimate otherwise.
    pub c_estimate: f64,
    pub c_method: ConeMethod,
    pub tau: f64,
    /// The `kappa` the bounds were computed with.
    pub kappa: f64,
    pub kappa_source: String,
    pub kappa_scaled: Option<f64>,
    pub kappa_unscaled: Option<f64>,
    pub kappa_mc: Option<f64>,
    pub k_const: Option<f64>,
    pub eta: f64,
    pub notes: Vec<String>,
}
