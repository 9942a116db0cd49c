//! Nash equilibria of the effort game: iterative best-response solving,
//! closed-form symmetric equilibria, uniqueness certificates, stability
//! tests and multi-start exploration.

mod certificate;
mod multistart;
mod stability;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ensure_profile_len, neighbor_sum_at, EffortProfile, Graph};
use crate::numerics::{lambert_w_of_exp, BestResponseCurve, ModelParams};

pub use certificate::{certify_uniqueness, tau_hat, UniquenessCertificate};
pub use multistart::{multi_start, EquilibriumCluster, MultiStartReport, CLUSTER_TOLERANCE};
pub use stability::{
    stability_analytic, stability_perturbation, StabilityMode, StabilityReport,
    DEFAULT_PERTURBATION,
};

/// How a sweep updates the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Gauss-Seidel: each node responds to the latest values of the others.
    #[default]
    InPlace,
    /// Jacobi: all nodes respond to the previous sweep's profile.
    Simultaneous,
}

/// Node visiting order for in-place sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    #[default]
    Ascending,
    /// A fixed random permutation drawn once from `seed`.
    Shuffled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Initialization {
    #[default]
    Zeros,
    Uniform(f64),
    /// Independent draws from `[low, high)`.
    Random {
        seed: u64,
        low: f64,
        high: f64,
    },
    Explicit(EffortProfile),
}

impl Initialization {
    fn seed(&self) -> Option<u64> {
        match self {
            Initialization::Random { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    fn build(&self, n: usize) -> Result<EffortProfile> {
        match self {
            Initialization::Zeros => Ok(EffortProfile::zeros(n)),
            Initialization::Uniform(v) => EffortProfile::constant(n, *v),
            Initialization::Random { seed, low, high } => {
                if !(low.is_finite() && high.is_finite() && *low >= 0.0 && high >= low) {
                    return Err(Error::InvalidParameter(format!(
                        "random initialisation needs 0 <= low <= high, got [{low}, {high})"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let values = (0..n)
                    .map(|_| {
                        if high > low {
                            rng.gen_range(*low..*high)
                        } else {
                            *low
                        }
                    })
                    .collect();
                EffortProfile::new(values)
            }
            Initialization::Explicit(profile) => {
                if profile.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        actual: profile.len(),
                    });
                }
                Ok(profile.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub schedule: Schedule,
    pub initialization: Initialization,
    pub order: SweepOrder,
    /// Keep the per-sweep maximum update.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 10_000,
            schedule: Schedule::InPlace,
            initialization: Initialization::Zeros,
            order: SweepOrder::Ascending,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_initialization(mut self, initialization: Initialization) -> Self {
        self.initialization = initialization;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_order(mut self, order: SweepOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

/// Outcome of [`solve`]. Non-convergence is reported here, not as an error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    #[serde(rename = "efforts")]
    pub profile: EffortProfile,
    pub converged: bool,
    pub iterations: usize,
    /// `max_i |y_i - phi(y_-i)|` of the returned profile.
    pub residual: f64,
    pub params: ModelParams,
    pub schedule: Schedule,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

fn sweep_order(n: usize, order: SweepOrder) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..n).collect();
    if let SweepOrder::Shuffled { seed } = order {
        nodes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    nodes
}

/// One application of the simultaneous best-response map.
pub(crate) fn respond_all(graph: &Graph, curve: &BestResponseCurve, y: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = curve.respond(neighbor_sum_at(graph, y, i));
    }
}

fn max_gap(graph: &Graph, curve: &BestResponseCurve, y: &[f64]) -> f64 {
    (0..graph.node_count())
        .map(|i| (y[i] - curve.respond(neighbor_sum_at(graph, y, i))).abs())
        .fold(0.0, f64::max)
}

/// Iterated best response from the configured starting profile.
///
/// A run converges once a full sweep moves no node by `tolerance` or more and
/// the resulting profile's residual is itself within `tolerance`.
pub fn solve(
    graph: &Graph,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    config.validate()?;
    let n = graph.node_count();
    let curve = BestResponseCurve::new(*params);
    let mut y = config.initialization.build(n)?.into_vec();
    let order = sweep_order(n, config.order);
    let mut next = vec![0.0; n];
    let mut trace = config.record_trace.then(Vec::new);

    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < config.max_iterations {
        iterations += 1;
        let delta = match config.schedule {
            Schedule::InPlace => {
                let mut delta: f64 = 0.0;
                for &i in &order {
                    let response = curve.respond(neighbor_sum_at(graph, &y, i));
                    delta = delta.max((response - y[i]).abs());
                    y[i] = response;
                }
                delta
            }
            Schedule::Simultaneous => {
                respond_all(graph, &curve, &y, &mut next);
                let delta = y
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                std::mem::swap(&mut y, &mut next);
                delta
            }
        };
        if let Some(t) = trace.as_mut() {
            t.push(delta);
        }
        if delta < config.tolerance {
            residual = max_gap(graph, &curve, &y);
            if residual <= config.tolerance {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        residual = max_gap(graph, &curve, &y);
    }
    Ok(EquilibriumResult {
        profile: EffortProfile::from_vec_unchecked(y),
        converged,
        iterations,
        residual,
        params: *params,
        schedule: config.schedule,
        seed: config.initialization.seed(),
        trace,
    })
}

/// Largest unilateral best-response gap `max_i |y_i - phi(y_-i)|`.
pub fn verify_equilibrium(
    graph: &Graph,
    profile: &EffortProfile,
    params: &ModelParams,
) -> Result<f64> {
    ensure_profile_len(graph, profile.len())?;
    Ok(max_gap(
        graph,
        &BestResponseCurve::new(*params),
        profile.as_slice(),
    ))
}

/// Per-node gaps `|y_i - phi(y_-i)|`.
pub fn node_residuals(
    graph: &Graph,
    profile: &EffortProfile,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    ensure_profile_len(graph, profile.len())?;
    let curve = BestResponseCurve::new(*params);
    let y = profile.as_slice();
    Ok((0..graph.node_count())
        .map(|i| (y[i] - curve.respond(neighbor_sum_at(graph, y, i))).abs())
        .collect())
}

/// Common effort of the symmetric equilibrium on a `degree`-regular graph.
///
/// With `theta = 1` this is `alpha / (tau (1 + D)) W(tau^((alpha+1)/alpha) (1 + D) / alpha)`;
/// otherwise the fixed point `y = phi(D y)` is bracketed on `[0, phi(0)]` and
/// bisected.
pub fn symmetric_equilibrium(degree: usize, params: &ModelParams) -> f64 {
    let d = degree as f64;
    let (a, t) = (params.alpha(), params.tau());
    if params.is_normalized() {
        let log_arg = (a + 1.0) / a * t.ln() + (1.0 + d).ln() - a.ln();
        return a / (t * (1.0 + d)) * lambert_w_of_exp(log_arg);
    }
    let curve = BestResponseCurve::new(*params);
    let (mut lo, mut hi) = (0.0, curve.max_effort());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mid - curve.respond(d * mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The symmetric-equilibrium profile of a regular undirected graph, used to
/// probe stability from the exact symmetric point.
pub fn symmetric_profile(graph: &Graph, params: &ModelParams) -> Result<EffortProfile> {
    let degree = graph.regular_degree().ok_or_else(|| {
        Error::Unsupported("symmetric profile needs a regular undirected graph".into())
    })?;
    EffortProfile::constant(graph.node_count(), symmetric_equilibrium(degree, params))
}
