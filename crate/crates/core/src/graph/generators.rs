use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Graph;
use crate::error::{Error, Result};

const REGULAR_MAX_ATTEMPTS: usize = 1000;

/// Canonical undirected graph families.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    /// `n` isolated nodes.
    Empty {
        n: usize,
    },
    Complete {
        n: usize,
    },
    Cycle {
        n: usize,
    },
    /// One center joined to `n - 1` leaves.
    Star {
        n: usize,
    },
    CompleteBipartite {
        left: usize,
        right: usize,
    },
    /// Node `i` joined to `i +- 1, ..., i +- degree/2` (mod n), plus the
    /// antipodal node when `degree` is odd.
    Circulant {
        n: usize,
        degree: usize,
    },
    /// Uniform-ish random `degree`-regular graph from the pairing model.
    RegularRandom {
        n: usize,
        degree: usize,
    },
    ErdosRenyi {
        n: usize,
        p: f64,
    },
}

impl GraphFamily {
    pub fn node_count(&self) -> usize {
        match *self {
            GraphFamily::Empty { n }
            | GraphFamily::Complete { n }
            | GraphFamily::Cycle { n }
            | GraphFamily::Star { n }
            | GraphFamily::Circulant { n, .. }
            | GraphFamily::RegularRandom { n, .. }
            | GraphFamily::ErdosRenyi { n, .. } => n,
            GraphFamily::CompleteBipartite { left, right } => left + right,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GraphFamily::Empty { .. } => "empty",
            GraphFamily::Complete { .. } => "complete",
            GraphFamily::Cycle { .. } => "cycle",
            GraphFamily::Star { .. } => "star",
            GraphFamily::CompleteBipartite { .. } => "complete_bipartite",
            GraphFamily::Circulant { .. } => "circulant",
            GraphFamily::RegularRandom { .. } => "d_regular_random",
            GraphFamily::ErdosRenyi { .. } => "erdos_renyi",
        }
    }

    /// Whether `seed` influences the generated graph.
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            GraphFamily::RegularRandom { .. } | GraphFamily::ErdosRenyi { .. }
        )
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Construction(msg));
        match *self {
            GraphFamily::Empty { n } if n < 1 => fail("empty graph needs n >= 1".into()),
            GraphFamily::Complete { n } | GraphFamily::Star { n } if n < 2 => {
                fail(format!("{} needs n >= 2, got {n}", self.name()))
            }
            GraphFamily::Cycle { n } if n < 3 => fail(format!("cycle needs n >= 3, got {n}")),
            GraphFamily::CompleteBipartite { left, right } if left < 1 || right < 1 => {
                fail("complete bipartite needs two nonempty parts".into())
            }
            GraphFamily::Circulant { n, degree } | GraphFamily::RegularRandom { n, degree } => {
                if n < 2 {
                    fail(format!("{} needs n >= 2, got {n}", self.name()))
                } else if degree >= n {
                    fail(format!("degree {degree} must be < n = {n}"))
                } else if (n * degree) % 2 != 0 {
                    fail(format!(
                        "n * degree must be even, got n = {n}, degree = {degree}"
                    ))
                } else {
                    Ok(())
                }
            }
            GraphFamily::ErdosRenyi { n, p } => {
                if n < 2 {
                    fail(format!("erdos_renyi needs n >= 2, got {n}"))
                } else if !(0.0..=1.0).contains(&p) {
                    fail(format!("p must lie in [0, 1], got {p}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Generates a member of `family`; deterministic given `seed`.
pub fn make_family(family: &GraphFamily, seed: u64) -> Result<Graph> {
    family.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = family.node_count();
    let edges: Vec<(usize, usize)> = match *family {
        GraphFamily::Empty { .. } => Vec::new(),
        GraphFamily::Complete { n } => (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect(),
        GraphFamily::Cycle { n } => (0..n).map(|u| (u, (u + 1) % n)).collect(),
        GraphFamily::Star { n } => (1..n).map(|v| (0, v)).collect(),
        GraphFamily::CompleteBipartite { left, right } => (0..left)
            .flat_map(|u| (left..left + right).map(move |v| (u, v)))
            .collect(),
        GraphFamily::Circulant { n, degree } => circulant_edges(n, degree),
        GraphFamily::RegularRandom { n, degree } => random_regular_edges(n, degree, &mut rng)?,
        GraphFamily::ErdosRenyi { n, p } => gnp_edges(n, p, &mut rng),
    };
    Ok(Graph::from_edges(n, edges, false)?.with_family(family.clone()))
}

fn circulant_edges(n: usize, degree: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(n * degree / 2);
    for u in 0..n {
        for k in 1..=degree / 2 {
            edges.push((u, (u + k) % n));
        }
        if degree % 2 == 1 && u < n / 2 {
            edges.push((u, u + n / 2));
        }
    }
    edges
}

/// Pairing model: shuffle the remaining stubs, keep every pair that is
/// neither a loop nor a repeat, and restart from scratch when a round makes
/// no progress.
fn random_regular_edges(
    n: usize,
    degree: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    if degree == 0 {
        return Ok(Vec::new());
    }
    'attempt: for _ in 0..REGULAR_MAX_ATTEMPTS {
        let mut stubs: Vec<usize> = (0..n)
            .flat_map(|u| std::iter::repeat_n(u, degree))
            .collect();
        let mut seen = HashSet::with_capacity(n * degree / 2);
        let mut edges = Vec::with_capacity(n * degree / 2);
        while !stubs.is_empty() {
            stubs.shuffle(rng);
            let mut leftover = Vec::new();
            let mut progressed = false;
            for pair in stubs.chunks_exact(2) {
                let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if u != v && seen.insert((u, v)) {
                    edges.push((u, v));
                    progressed = true;
                } else {
                    leftover.extend_from_slice(pair);
                }
            }
            if !progressed {
                continue 'attempt;
            }
            stubs = leftover;
        }
        return Ok(edges);
    }
    Err(Error::Construction(format!(
        "no simple {degree}-regular graph on {n} nodes after {REGULAR_MAX_ATTEMPTS} attempts"
    )))
}

/// G(n, p) by geometric skipping over the lower triangle.
fn gnp_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    if p <= 0.0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
    }
    let log_q = (1.0 - p).ln();
    let mut edges = Vec::new();
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.gen();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    edges
}
