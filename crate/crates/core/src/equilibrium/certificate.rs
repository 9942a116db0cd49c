use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::graph::{min_eigenvalue, Graph};
use crate::numerics::{BestResponseCurve, ModelParams};

/// Sufficient condition for a unique equilibrium: `tau < tau_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessCertificate {
    pub lambda_min: f64,
    /// Infinite when `lambda_min >= -1`; serialized as `"inf"`.
    #[serde(serialize_with = "finite_or_inf")]
    pub tau_hat: f64,
    pub tau: f64,
    pub guaranteed_unique: bool,
    /// `lambda_min` was taken from `(A + A^T) / 2`.
    pub symmetrized: bool,
    /// `phi'(0)`, which must exceed `1 / lambda_min` for the guarantee.
    pub slope_at_zero: f64,
}

fn finite_or_inf<S: Serializer>(
    value: &f64,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    if value.is_finite() {
        serializer.serialize_f64(*value)
    } else {
        serializer.serialize_str("inf")
    }
}

/// Uniqueness threshold for unit cost scale:
/// `(alpha / (-lambda_min - 1))^(alpha/(alpha+1)) exp(alpha / ((alpha+1)(-lambda_min - 1)))`.
pub fn tau_hat(lambda_min: f64, alpha: f64) -> f64 {
    if lambda_min >= -1.0 {
        return f64::INFINITY;
    }
    let k = alpha / (-lambda_min - 1.0);
    let exponent = alpha / (alpha + 1.0);
    k.powf(exponent) * (k / (alpha + 1.0)).exp()
}

/// Checks `tau < tau_hat`, with `tau_hat` scaled by `theta^(1/(alpha+1))`.
pub fn certify_uniqueness(graph: &Graph, params: &ModelParams) -> Result<UniquenessCertificate> {
    let eig = min_eigenvalue(graph)?;
    let (alpha, theta) = (params.alpha(), params.theta());
    let threshold = tau_hat(eig.value, alpha) * theta.powf(1.0 / (alpha + 1.0));
    Ok(UniquenessCertificate {
        lambda_min: eig.value,
        tau_hat: threshold,
        tau: params.tau(),
        guaranteed_unique: params.tau() < threshold,
        symmetrized: eig.symmetrized,
        slope_at_zero: BestResponseCurve::new(*params).slope(0.0),
    })
}
