//! Deterministic fixtures shared by unit tests, integration tests, and
//! benchmarks. Not part of the stable API.

use ndarray::Array2;
use rand::Rng;

use crate::graph::Graph;

/// Erdos-Renyi-style graph (edge probability 0.4) with one-hot features
/// spread round-robin over `feature_dim` columns and a random label.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, feature_dim: usize, num_classes: usize) -> Graph {
    let mut adj = Array2::from_elem((n, n), false);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_range(0.0..1.0) < 0.4 {
                adj[[u, v]] = true;
                adj[[v, u]] = true;
            }
        }
    }
    let mut features = Array2::zeros((n, feature_dim));
    for i in 0..n {
        let col = rng.random_range(0..feature_dim);
        features[[i, col]] = 1.0;
    }
    let label = rng.random_range(0..num_classes);
    Graph::new(adj, features, label).unwrap()
}

/// Symmetric matrix with zero diagonal and entries in (-1, 1).
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for u in 0..n {
        for v in (u + 1)..n {
            let x = rng.random_range(-1.0..1.0);
            m[[u, v]] = x;
            m[[v, u]] = x;
        }
    }
    m
}

/// Relative error with a unit floor: `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}
