use std::collections::HashSet;

use ndarray::Array2;
use proptest::prelude::*;
use tgprompt::gcn::LayerEmbeddings;
use tgprompt::graph::Graph;
use tgprompt::rng::SeededRng;
use tgprompt::view::{graph_view, subgraph_view};

fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = SeededRng::new(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges, Array2::zeros((n, 1)), vec![None; n], 1).unwrap()
}

fn random_emb(n: usize, seed: u64) -> LayerEmbeddings {
    let mut r = SeededRng::new(seed);
    LayerEmbeddings {
        layers: vec![
            Array2::from_shape_simple_fn((n, 3), || r.normal()),
            Array2::from_shape_simple_fn((n, 2), || r.normal()),
        ],
    }
}

/// Ball of radius `hops` by repeated frontier expansion over the edge set.
fn ball_oracle(g: &Graph, root: usize, hops: usize) -> HashSet<usize> {
    let mut ball = HashSet::from([root]);
    for _ in 0..hops {
        let mut next = ball.clone();
        for (u, v) in g.undirected_edges() {
            if ball.contains(&u) {
                next.insert(v);
            }
            if ball.contains(&v) {
                next.insert(u);
            }
        }
        ball = next;
    }
    ball
}

#[test]
fn matches_frontier_expansion_oracle() {
    for seed in 0..10 {
        let g = random_graph(15, 0.15, seed);
        let emb = random_emb(15, seed);
        let v = subgraph_view(&g, &emb, 2).unwrap();
        for u in 0..15 {
            let ball = ball_oracle(&g, u, 2);
            for (h, out) in emb.layers.iter().zip(&v.embeddings.layers) {
                for j in 0..h.ncols() {
                    let mean = ball.iter().map(|&w| h[[w, j]]).sum::<f64>() / ball.len() as f64;
                    assert!((out[[u, j]] - mean).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn identical_graphs_get_identical_rows() {
    let e = random_emb(4, 1);
    let v = graph_view(&[e.clone(), e]).unwrap();
    for l in &v.embeddings.layers {
        assert_eq!(l.row(0), l.row(1));
    }
    let single = LayerEmbeddings { layers: vec![ndarray::array![[3.0, -1.0]]] };
    assert_eq!(graph_view(&[single]).unwrap().embeddings.layers[0], ndarray::array![[3.0, -1.0]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rows_stay_in_neighbourhood_hull(n in 1usize..25, hops in 0usize..3, seed in any::<u64>()) {
        let g = random_graph(n, 0.2, seed);
        let emb = random_emb(n, seed);
        let v = subgraph_view(&g, &emb, hops).unwrap();
        for u in 0..n {
            let ball = ball_oracle(&g, u, hops);
            for (h, out) in emb.layers.iter().zip(&v.embeddings.layers) {
                for j in 0..h.ncols() {
                    let lo = ball.iter().map(|&w| h[[w, j]]).fold(f64::INFINITY, f64::min);
                    let hi = ball.iter().map(|&w| h[[w, j]]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(lo - 1e-12 <= out[[u, j]] && out[[u, j]] <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn subgraph_view_is_permutation_equivariant(n in 1usize..25, seed in any::<u64>()) {
        let g = random_graph(n, 0.2, seed);
        let emb = random_emb(n, seed);
        let mut perm: Vec<usize> = (0..n).collect();
        SeededRng::new(seed ^ 7).shuffle(&mut perm);
        let edges: Vec<(usize, usize)> = g.undirected_edges().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let pg = Graph::from_edges(n, &edges, Array2::zeros((n, 1)), vec![None; n], 1).unwrap();
        let pemb = LayerEmbeddings {
            layers: emb.layers.iter().map(|h| {
                let mut out = Array2::zeros(h.raw_dim());
                for u in 0..n {
                    out.row_mut(perm[u]).assign(&h.row(u));
                }
                out
            }).collect(),
        };
        let a = subgraph_view(&g, &emb, 1).unwrap();
        let b = subgraph_view(&pg, &pemb, 1).unwrap();
        for (la, lb) in a.embeddings.layers.iter().zip(&b.embeddings.layers) {
            for u in 0..n {
                for (x, y) in la.row(u).iter().zip(lb.row(perm[u])) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}
