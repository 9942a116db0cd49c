use rayon::prelude::*;
use serde::Serialize;

use super::{solve, EquilibriumResult, Initialization, Schedule, SolverConfig, SweepOrder};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::{BestResponseCurve, ModelParams};

/// Converged runs closer than this in max-norm share a cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumCluster {
    /// The first run that landed in the cluster.
    pub representative: EquilibriumResult,
    pub starts: Vec<usize>,
}

impl EquilibriumCluster {
    pub fn size(&self) -> usize {
        self.starts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiStartReport {
    pub clusters: Vec<EquilibriumCluster>,
    /// Start indices that hit the iteration cap.
    pub non_converged: Vec<usize>,
    pub seed: u64,
}

impl MultiStartReport {
    pub fn distinct_equilibria(&self) -> usize {
        self.clusters.len()
    }
}

fn start_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Solves from `starts` random profiles drawn uniformly from `[0, phi(0)]`
/// and groups the converged outcomes.
///
/// The initialisation and, for in-place sweeps, the node order of `config`
/// are replaced per start; both derive from `seed` and the start index.
/// Runs execute in parallel, results do not depend on the thread count.
pub fn multi_start(
    graph: &Graph,
    params: &ModelParams,
    starts: usize,
    seed: u64,
    config: &SolverConfig,
) -> Result<MultiStartReport> {
    if starts == 0 {
        return Err(Error::InvalidParameter("need at least one start".into()));
    }
    config.validate()?;
    let high = BestResponseCurve::new(*params).max_effort();
    let runs: Vec<EquilibriumResult> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let s = start_seed(seed, k);
            let mut run_config = config.clone().with_initialization(Initialization::Random {
                seed: s,
                low: 0.0,
                high,
            });
            if config.schedule == Schedule::InPlace {
                run_config.order = SweepOrder::Shuffled { seed: s };
            }
            solve(graph, params, &run_config)
        })
        .collect::<Result<_>>()?;

    let mut clusters: Vec<EquilibriumCluster> = Vec::new();
    let mut non_converged = Vec::new();
    for (k, run) in runs.into_iter().enumerate() {
        if !run.converged {
            non_converged.push(k);
            continue;
        }
        match clusters
            .iter_mut()
            .find(|c| c.representative.profile.max_abs_diff(&run.profile) < CLUSTER_TOLERANCE)
        {
            Some(cluster) => cluster.starts.push(k),
            None => clusters.push(EquilibriumCluster {
                representative: run,
                starts: vec![k],
            }),
        }
    }
    Ok(MultiStartReport {
        clusters,
        non_converged,
        seed,
    })
}
