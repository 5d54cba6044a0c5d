use ndarray::Array2;

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Parameters of a stochastic block model with shifted Gaussian features.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Added to feature `b % feature_dim` of every node in block `b`.
    pub feature_shift: f64,
    pub seed: u64,
}

/// Samples a graph; labels are block ids.
///
/// Pairs `u < v` are visited in lexicographic order and kept with
/// probability `p_in` (same block) or `p_out`. Features are then drawn
/// row-major from the standard normal.
pub fn generate_sbm(cfg: &SbmConfig) -> Result<Graph> {
    for (name, p) in [("p_in", cfg.p_in), ("p_out", cfg.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("{name}={p} is not a probability")));
        }
    }
    if cfg.block_sizes.is_empty() {
        return Err(Error::InvalidArgument("block_sizes is empty".into()));
    }
    let block: Vec<usize> = cfg
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = block.len();
    let mut rng = SeededRng::new(cfg.seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block[u] == block[v] { cfg.p_in } else { cfg.p_out };
            if rng.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    let d = cfg.feature_dim;
    let mut features = Array2::from_shape_simple_fn((n, d), || rng.normal());
    if d > 0 {
        for (u, &b) in block.iter().enumerate() {
            features[[u, b % d]] += cfg.feature_shift;
        }
    }
    let labels = block.iter().map(|&b| Some(b)).collect();
    Graph::from_edges(n, &edges, features, labels, cfg.block_sizes.len())
}
