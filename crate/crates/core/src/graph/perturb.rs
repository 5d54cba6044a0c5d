use std::collections::HashSet;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbConfig {
    pub edge_drop_rate: f64,
    pub feature_shuffle_rate: f64,
    pub seed: u64,
}

/// Test-time structural and feature noise.
///
/// Each undirected edge with at least one unprotected endpoint is dropped
/// with probability `edge_drop_rate` (edges visited in row order). Then
/// `round(feature_shuffle_rate * k)` of the `k` unprotected nodes are chosen
/// at random and their feature rows permuted among themselves.
pub fn perturb_graph(g: &Graph, cfg: &PerturbConfig, protected: &HashSet<usize>) -> Result<Graph> {
    for (name, r) in [
        ("edge_drop_rate", cfg.edge_drop_rate),
        ("feature_shuffle_rate", cfg.feature_shuffle_rate),
    ] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("{name}={r} is not in [0, 1]")));
        }
    }
    let mut rng = SeededRng::new(cfg.seed);

    let kept: Vec<(usize, usize)> = g
        .undirected_edges()
        .into_iter()
        .filter(|&(u, v)| {
            if protected.contains(&u) && protected.contains(&v) {
                return true;
            }
            !rng.bernoulli(cfg.edge_drop_rate)
        })
        .collect();

    let mut features = g.features().clone();
    let mut pool: Vec<usize> = (0..g.num_nodes()).filter(|u| !protected.contains(u)).collect();
    let k = (cfg.feature_shuffle_rate * pool.len() as f64).round() as usize;
    if k > 1 {
        rng.shuffle(&mut pool);
        let chosen = &pool[..k];
        let mut order = chosen.to_vec();
        rng.shuffle(&mut order);
        for (&dst, &src) in chosen.iter().zip(&order) {
            features.row_mut(dst).assign(&g.features().row(src));
        }
    }

    g.with_edges(&kept)?.with_features(features)
}
