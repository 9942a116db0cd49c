//! Smallest adjacency eigenvalue.
//!
//! Directed graphs are handled through the symmetrised matrix `(A + A^T) / 2`,
//! and the result says so. Below [`DENSE_LIMIT`] nodes a dense symmetric
//! eigendecomposition is used; above it, restarted Lanczos with full
//! reorthogonalisation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Graph, GraphFamily};
use crate::error::{Error, Result};

pub const DENSE_LIMIT: usize = 200;

const LANCZOS_BASIS: usize = 160;
const LANCZOS_MAX_RESTARTS: usize = 2000;
const LANCZOS_RESIDUAL_TOL: f64 = 1e-10;
const START_SEED: u64 = 0x5eed_1a9c;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinEigenvalue {
    pub value: f64,
    /// Computed on `(A + A^T) / 2` because the graph is directed.
    pub symmetrized: bool,
    pub method: EigenMethod,
}

/// Smallest eigenvalue of the (symmetrised) adjacency matrix.
pub fn lambda_min(graph: &Graph) -> Result<f64> {
    min_eigenvalue(graph).map(|m| m.value)
}

pub fn min_eigenvalue(graph: &Graph) -> Result<MinEigenvalue> {
    if graph.node_count() < DENSE_LIMIT {
        min_eigenvalue_dense(graph)
    } else {
        min_eigenvalue_lanczos(graph)
    }
}

fn ensure_size(graph: &Graph) -> Result<()> {
    if graph.node_count() < 2 {
        return Err(Error::Eigensolver(format!(
            "need at least 2 nodes, got {}",
            graph.node_count()
        )));
    }
    Ok(())
}

pub fn min_eigenvalue_dense(graph: &Graph) -> Result<MinEigenvalue> {
    ensure_size(graph)?;
    let n = graph.node_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    let weight = if graph.is_directed() { 0.5 } else { 1.0 };
    for (u, v) in graph.edges() {
        m[(u, v)] += weight;
        m[(v, u)] += weight;
    }
    let eig = SymmetricEigen::new(m);
    let value = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !value.is_finite() {
        return Err(Error::Eigensolver(
            "dense decomposition produced no finite eigenvalue".into(),
        ));
    }
    Ok(MinEigenvalue {
        value,
        symmetrized: graph.is_directed(),
        method: EigenMethod::Dense,
    })
}

fn apply(graph: &Graph, x: &[f64], out: &mut [f64]) {
    if graph.is_directed() {
        for (i, o) in out.iter_mut().enumerate() {
            let fwd: f64 = graph.neighbors(i).iter().map(|&j| x[j]).sum();
            let back: f64 = graph.followers(i).iter().map(|&j| x[j]).sum();
            *o = 0.5 * (fwd + back);
        }
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o = graph.neighbors(i).iter().map(|&j| x[j]).sum();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

pub fn min_eigenvalue_lanczos(graph: &Graph) -> Result<MinEigenvalue> {
    ensure_size(graph)?;
    let n = graph.node_count();
    let scale = graph.max_degree().max(1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut start);

    let basis_size = n.min(LANCZOS_BASIS);
    let mut w = vec![0.0; n];
    for _ in 0..LANCZOS_MAX_RESTARTS {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut diag = Vec::with_capacity(basis_size);
        let mut off = Vec::with_capacity(basis_size);
        let mut invariant = false;
        loop {
            let j = basis.len() - 1;
            apply(graph, &basis[j], &mut w);
            let a = dot(&basis[j], &w);
            diag.push(a);
            // two passes of full reorthogonalisation
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
                }
            }
            let beta = normalize(&mut w);
            if beta <= 1e-12 * scale {
                invariant = true;
                off.push(0.0);
                break;
            }
            off.push(beta);
            if basis.len() == basis_size {
                break;
            }
            basis.push(w.clone());
        }

        let theta = tridiagonal_min_eigenvalue(&diag, &off[..diag.len() - 1]);
        let s = tridiagonal_eigenvector(&diag, &off[..diag.len() - 1], theta, scale);
        let residual = (off[diag.len() - 1] * s[s.len() - 1]).abs();
        if invariant || residual <= LANCZOS_RESIDUAL_TOL * scale || diag.len() == n {
            return Ok(MinEigenvalue {
                value: theta,
                symmetrized: graph.is_directed(),
                method: EigenMethod::Lanczos,
            });
        }
        start.iter_mut().for_each(|x| *x = 0.0);
        for (coef, v) in s.iter().zip(&basis) {
            start.iter_mut().zip(v).for_each(|(x, y)| *x += coef * y);
        }
        normalize(&mut start);
    }
    Err(Error::Eigensolver(format!(
        "Lanczos did not converge after {LANCZOS_MAX_RESTARTS} restarts"
    )))
}

/// Number of eigenvalues of the tridiagonal matrix below `x` (Sturm count).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if q == 0.0 {
            f64::EPSILON * (off[i - 1].abs() + 1.0)
        } else {
            q
        };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_min_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i < off.len() { off[i].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..diag.len())
        .map(|i| diag[i] - radius(i))
        .fold(f64::INFINITY, f64::min);
    let mut hi = (0..diag.len())
        .map(|i| diag[i] + radius(i))
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse iteration just below `theta`, where `T - sigma I` is positive definite.
fn tridiagonal_eigenvector(diag: &[f64], off: &[f64], theta: f64, scale: f64) -> Vec<f64> {
    let k = diag.len();
    let sigma = theta - 1e-10 * scale;
    let mut x = vec![1.0; k];
    normalize(&mut x);
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    for _ in 0..4 {
        // Thomas algorithm on (T - sigma I) y = x
        let mut denom = diag[0] - sigma;
        if k > 1 {
            c[0] = off[0] / denom;
        }
        d[0] = x[0] / denom;
        for i in 1..k {
            denom = diag[i] - sigma - off[i - 1] * c[i - 1];
            if i < k - 1 {
                c[i] = off[i] / denom;
            }
            d[i] = (x[i] - off[i - 1] * d[i - 1]) / denom;
        }
        x[k - 1] = d[k - 1];
        for i in (0..k - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        normalize(&mut x);
    }
    x
}

/// Known smallest eigenvalue of a generated family, when one exists.
pub fn closed_form_lambda_min(family: &GraphFamily) -> Option<f64> {
    match *family {
        GraphFamily::Empty { .. } => Some(0.0),
        GraphFamily::Complete { .. } => Some(-1.0),
        GraphFamily::Cycle { n } if n % 2 == 0 => Some(-2.0),
        GraphFamily::Cycle { n } => Some(-2.0 * (PI / n as f64).cos()),
        GraphFamily::Star { n } => Some(-((n - 1) as f64).sqrt()),
        GraphFamily::CompleteBipartite { left, right } => Some(-((left * right) as f64).sqrt()),
        GraphFamily::Circulant { n, degree } => Some(
            (0..n)
                .map(|j| {
                    let angle = 2.0 * PI * j as f64 / n as f64;
                    let mut lambda: f64 = (1..=degree / 2)
                        .map(|k| 2.0 * (angle * k as f64).cos())
                        .sum();
                    if degree % 2 == 1 {
                        lambda += if j % 2 == 0 { 1.0 } else { -1.0 };
                    }
                    lambda
                })
                .fold(f64::INFINITY, f64::min),
        ),
        GraphFamily::RegularRandom { .. } | GraphFamily::ErdosRenyi { .. } => None,
    }
}
