use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::SeededRng;

/// Draws `count` distinct ordered non-edges `(u, v)`, `u != v`.
///
/// Sparse regime: rejection sampling of `(below(N), below(N))`. When more than
/// half of the available pairs are requested, every non-edge is enumerated in
/// row order and a prefix of a Fisher–Yates shuffle is returned instead.
pub fn sample_negative_edges(g: &Graph, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let n = g.num_nodes();
    let available = (n * n.saturating_sub(1)).saturating_sub(g.num_directed_edges());
    if count == 0 {
        return Ok(Vec::new());
    }
    if count > available {
        return Err(Error::Data(format!(
            "graph too dense: {count} negative pairs requested, {available} exist"
        )));
    }
    let mut rng = SeededRng::new(seed);
    if 2 * count > available {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (0..n).map(move |v| (u, v)))
            .filter(|&(u, v)| u != v && !g.has_edge(u, v))
            .collect();
        for i in 0..count {
            let j = i + rng.below(all.len() - i);
            all.swap(i, j);
        }
        all.truncate(count);
        return Ok(all);
    }
    let budget = 64 * count + 1024;
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    for _ in 0..budget {
        let u = rng.below(n);
        let v = rng.below(n);
        if u == v || g.has_edge(u, v) || !seen.insert((u, v)) {
            continue;
        }
        out.push((u, v));
        if out.len() == count {
            return Ok(out);
        }
    }
    Err(Error::Data(format!(
        "could not draw {count} negative pairs within {budget} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmConfig};
    use ndarray::Array2;

    fn plain(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges, Array2::zeros((n, 1)), vec![None; n], 1).unwrap()
    }

    #[test]
    fn edgeless_gives_distinct_pairs() {
        let neg = sample_negative_edges(&plain(4, &[]), 3, 0).unwrap();
        assert_eq!(neg.len(), 3);
        let set: HashSet<_> = neg.iter().collect();
        assert_eq!(set.len(), 3);
        assert!(neg.iter().all(|(u, v)| u != v));
    }

    #[test]
    fn complete_graph_errors() {
        let k3 = plain(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(sample_negative_edges(&k3, 1, 0).is_err());
    }

    #[test]
    fn sbm_membership_oracle() {
        let g = generate_sbm(&SbmConfig {
            block_sizes: vec![50, 50],
            p_in: 0.2,
            p_out: 0.01,
            feature_dim: 2,
            feature_shift: 0.0,
            seed: 3,
        })
        .unwrap();
        let edges: HashSet<(usize, usize)> = g
            .undirected_edges()
            .into_iter()
            .flat_map(|(u, v)| [(u, v), (v, u)])
            .collect();
        let neg = sample_negative_edges(&g, 500, 42).unwrap();
        assert_eq!(neg.len(), 500);
        assert!(neg.iter().all(|p| !edges.contains(p) && p.0 != p.1));
        assert_eq!(neg, sample_negative_edges(&g, 500, 42).unwrap());
    }

    #[test]
    fn dense_regime_enumerates() {
        // path 0-1-2-3: 12 ordered pairs, 6 directed edges, 6 non-edges
        let g = plain(4, &[(0, 1), (1, 2), (2, 3)]);
        let mut neg = sample_negative_edges(&g, 6, 1).unwrap();
        neg.sort();
        assert_eq!(neg, vec![(0, 2), (0, 3), (1, 3), (2, 0), (3, 0), (3, 1)]);
        assert!(sample_negative_edges(&g, 7, 1).is_err());
    }
}
