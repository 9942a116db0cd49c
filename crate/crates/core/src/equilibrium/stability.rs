use serde::Serialize;

use super::{max_gap, respond_all, symmetric_equilibrium};
use crate::error::{Error, Result};
use crate::graph::{ensure_profile_len, EffortProfile, Graph};
use crate::numerics::{lambert_w_of_exp, BestResponseCurve, ModelParams};

/// Uniform perturbation size used by callers without a preference.
pub const DEFAULT_PERTURBATION: f64 = 1e-6;

/// Residual a profile must meet before it is perturbed.
const EQUILIBRIUM_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityMode {
    AnalyticSymmetric,
    Perturbation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub mode: StabilityMode,
    pub is_stable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetric_effort: Option<f64>,
    /// `2 ln tau - tau D y~`; unstable when it exceeds the right side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_lhs: Option<f64>,
    /// `-ln(D - 1) + 1 / (D - 1)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_rhs: Option<f64>,
    /// Degrees below 4 lie outside the range covered by the instability proof.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_proved_range: Option<bool>,
    /// `||phi(phi(y + eps)) - phi(phi(y))||_inf / eps` after the last round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation_growth: Option<f64>,
}

/// Stability of the symmetric equilibrium on a `degree`-regular graph with
/// quadratic unit cost.
///
/// The equilibrium is unstable exactly when the two-step map expands a
/// uniform perturbation, `D |phi'(D y~)| > 1`, which reduces to
/// `2 ln tau - tau D y~ > -ln(D - 1) + 1/(D - 1)`.
pub fn stability_analytic(degree: usize, params: &ModelParams) -> Result<StabilityReport> {
    if !(params.is_quadratic() && params.is_normalized()) {
        return Err(Error::Unsupported(
            "analytic stability needs alpha = 1 and theta = 1; use the perturbation test".into(),
        ));
    }
    if degree < 2 {
        return Err(Error::InvalidParameter(format!(
            "analytic stability needs degree >= 2, got {degree}"
        )));
    }
    let d = degree as f64;
    let tau = params.tau();
    let y = symmetric_equilibrium(degree, params);
    // tau D y~ = D / (D + 1) W(tau^2 (D + 1)), evaluated in log space
    let w = lambert_w_of_exp(2.0 * tau.ln() + (d + 1.0).ln());
    let lhs = 2.0 * tau.ln() - d / (d + 1.0) * w;
    let rhs = -(d - 1.0).ln() + 1.0 / (d - 1.0);
    Ok(StabilityReport {
        mode: StabilityMode::AnalyticSymmetric,
        is_stable: lhs <= rhs,
        degree: Some(degree),
        symmetric_effort: Some(y),
        threshold_lhs: Some(lhs),
        threshold_rhs: Some(rhs),
        within_proved_range: Some(degree >= 4),
        perturbation_growth: None,
    })
}

/// Adds `epsilon` to every node and runs `rounds` double applications of the
/// simultaneous best-response map, alongside the unperturbed profile. Stable
/// when the gap has not grown.
pub fn stability_perturbation(
    graph: &Graph,
    profile: &EffortProfile,
    params: &ModelParams,
    epsilon: f64,
    rounds: usize,
) -> Result<StabilityReport> {
    ensure_profile_len(graph, profile.len())?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    if rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be >= 1".into()));
    }
    let curve = BestResponseCurve::new(*params);
    let residual = max_gap(graph, &curve, profile.as_slice());
    if residual > EQUILIBRIUM_LIMIT {
        return Err(Error::NotAnEquilibrium {
            residual,
            limit: EQUILIBRIUM_LIMIT,
        });
    }
    let n = graph.node_count();
    let mut base = profile.as_slice().to_vec();
    let mut moved: Vec<f64> = base.iter().map(|y| y + epsilon).collect();
    let mut scratch = vec![0.0; n];
    for _ in 0..2 * rounds {
        respond_all(graph, &curve, &base, &mut scratch);
        std::mem::swap(&mut base, &mut scratch);
        respond_all(graph, &curve, &moved, &mut scratch);
        std::mem::swap(&mut moved, &mut scratch);
    }
    let gap = base
        .iter()
        .zip(&moved)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let growth = gap / epsilon;
    Ok(StabilityReport {
        mode: StabilityMode::Perturbation,
        is_stable: growth <= 1.0,
        degree: graph.regular_degree(),
        symmetric_effort: None,
        threshold_lhs: None,
        threshold_rhs: None,
        within_proved_range: None,
        perturbation_growth: Some(growth),
    })
}
