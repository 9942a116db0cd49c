//! Immutable sparse graphs and effort profiles.
//!
//! Directed graphs use the "follows" orientation: an edge `u -> v` means `u`
//! follows `v`, so `u` receives whatever `v` discovers. [`Graph::neighbors`]
//! always returns the nodes whose effort a node receives.

mod edge_list;
mod generators;
mod spectral;

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

pub use edge_list::{from_edge_list, parse_edge_list, write_id_map, LoadedGraph};
pub use generators::{make_family, GraphFamily};
pub use spectral::{
    closed_form_lambda_min, lambda_min, min_eigenvalue, min_eigenvalue_dense,
    min_eigenvalue_lanczos, EigenMethod, MinEigenvalue, DENSE_LIMIT,
};

/// Compressed adjacency rows, sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Csr {
    fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(u, _) in pairs {
            counts[u + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut targets = vec![0usize; pairs.len()];
        for &(u, v) in pairs {
            targets[cursor[u]] = v;
            cursor[u] += 1;
        }
        // sort and dedup each row in place, then compact
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut write = 0;
        for i in 0..n {
            let row = &mut targets[counts[i]..counts[i + 1]];
            row.sort_unstable();
            let mut last = None;
            for k in counts[i]..counts[i + 1] {
                let t = targets[k];
                if last != Some(t) {
                    targets[write] = t;
                    write += 1;
                    last = Some(t);
                }
            }
            offsets.push(write);
        }
        targets.truncate(write);
        Self { offsets, targets }
    }

    fn row(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// External identifiers of nodes, kept so results can be reported in the
/// input's own ids.
#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeIds {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

/// Which degree to use on directed graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeKind {
    /// Number of nodes this node receives from (followees).
    Out,
    /// Number of nodes receiving from this node (followers).
    In,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    edge_count: usize,
    outgoing: Csr,
    incoming: Option<Csr>,
    ids: Option<NodeIds>,
    family: Option<GraphFamily>,
}

impl Graph {
    /// Builds a graph over nodes `0..n`. Duplicate edges are merged; for
    /// undirected graphs `(u, v)` and `(v, u)` are the same edge.
    pub fn from_edges<I>(n: usize, edges: I, directed: bool) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut pairs = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Construction(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::Construction(format!("self-loop on node {u}")));
            }
            pairs.push((u, v));
            if !directed {
                pairs.push((v, u));
            }
        }
        let outgoing = Csr::from_pairs(n, &pairs);
        let (edge_count, incoming) = if directed {
            let reversed: Vec<_> = pairs.iter().map(|&(u, v)| (v, u)).collect();
            (outgoing.targets.len(), Some(Csr::from_pairs(n, &reversed)))
        } else {
            (outgoing.targets.len() / 2, None)
        };
        Ok(Self {
            n,
            directed,
            edge_count,
            outgoing,
            incoming,
            ids: None,
            family: None,
        })
    }

    pub(crate) fn with_family(mut self, family: GraphFamily) -> Self {
        self.family = Some(family);
        self
    }

    pub(crate) fn with_ids(mut self, names: Vec<String>) -> Self {
        let lookup = names
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), i))
            .collect();
        self.ids = Some(NodeIds { names, lookup });
        self
    }

    /// Attaches external ids, one per node, all distinct.
    pub fn with_node_ids(self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: names.len(),
            });
        }
        let distinct: HashSet<&String> = names.iter().collect();
        if distinct.len() != names.len() {
            return Err(Error::Construction("node ids must be distinct".into()));
        }
        Ok(self.with_ids(names))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Logical edge count; an undirected edge counts once.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// The generator family, when the graph came from [`make_family`].
    pub fn family(&self) -> Option<&GraphFamily> {
        self.family.as_ref()
    }

    /// Nodes whose effort node `i` receives.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.outgoing.row(i)
    }

    /// Nodes that receive node `i`'s effort.
    pub fn followers(&self, i: usize) -> &[usize] {
        match &self.incoming {
            Some(csr) => csr.row(i),
            None => self.outgoing.row(i),
        }
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.neighbors(i).len()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.followers(i).len()
    }

    /// Degree sequence; `kind` only matters for directed graphs.
    pub fn degrees(&self, kind: DegreeKind) -> Vec<usize> {
        (0..self.n)
            .map(|i| match kind {
                DegreeKind::Out => self.out_degree(i),
                DegreeKind::In => self.in_degree(i),
            })
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n)
            .map(|i| self.out_degree(i).max(self.in_degree(i)))
            .max()
            .unwrap_or(0)
    }

    /// The common degree of an undirected regular graph.
    pub fn regular_degree(&self) -> Option<usize> {
        if self.directed {
            return None;
        }
        let d = self.out_degree(0);
        (1..self.n).all(|i| self.out_degree(i) == d).then_some(d)
    }

    /// Whether `u` receives from `v`.
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each logical edge once: `u < v` for undirected graphs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| self.directed || u < v)
                .map(move |&v| (u, v))
        })
    }

    /// External id of node `i` (its index when the graph has no id table).
    pub fn node_id(&self, i: usize) -> String {
        match &self.ids {
            Some(ids) => ids.names[i].clone(),
            None => i.to_string(),
        }
    }

    /// Dense index of an external id.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        match &self.ids {
            Some(ids) => ids.lookup.get(id).copied(),
            None => id.parse::<usize>().ok().filter(|&i| i < self.n),
        }
    }

    pub fn has_id_table(&self) -> bool {
        self.ids.is_some()
    }

    /// Recomputes structural invariants: no self-loops, sorted unique rows,
    /// symmetric rows when undirected, in/out rows mirroring each other.
    pub fn is_consistent(&self) -> bool {
        let rows_ok = (0..self.n).all(|u| {
            let row = self.neighbors(u);
            row.windows(2).all(|w| w[0] < w[1]) && !row.contains(&u)
        });
        let mirrored = (0..self.n).all(|u| {
            self.neighbors(u)
                .iter()
                .all(|&v| self.followers(v).binary_search(&u).is_ok())
        });
        let in_total: usize = (0..self.n).map(|i| self.in_degree(i)).sum();
        let out_total: usize = (0..self.n).map(|i| self.out_degree(i)).sum();
        let count_ok = if self.directed {
            out_total == self.edge_count
        } else {
            out_total == 2 * self.edge_count
        };
        rows_ok && mirrored && in_total == out_total && count_ok
    }
}

/// Per-node nonnegative discovery rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EffortProfile(Vec<f64>);

impl EffortProfile {
    pub fn new(efforts: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = efforts
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Domain(format!(
                "effort of node {i} must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self(efforts))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Caller guarantees entries are finite and nonnegative.
    pub(crate) fn from_vec_unchecked(efforts: Vec<f64>) -> Self {
        debug_assert!(efforts.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self(efforts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// L-infinity distance.
    pub fn max_abs_diff(&self, other: &EffortProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn ensure_profile_len(graph: &Graph, len: usize) -> Result<()> {
    if len != graph.node_count() {
        return Err(Error::LengthMismatch {
            expected: graph.node_count(),
            actual: len,
        });
    }
    Ok(())
}

pub(crate) fn neighbor_sum_at(graph: &Graph, efforts: &[f64], i: usize) -> f64 {
    graph.neighbors(i).iter().map(|&j| efforts[j]).sum()
}

/// Effort each node receives for free: the sum over the nodes it receives from.
pub fn neighbor_effort_sum(graph: &Graph, profile: &EffortProfile) -> Result<Vec<f64>> {
    ensure_profile_len(graph, profile.len())?;
    let y = profile.as_slice();
    Ok((0..graph.node_count())
        .map(|i| neighbor_sum_at(graph, y, i))
        .collect())
}
