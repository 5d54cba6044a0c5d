//! Item embeddings for the tuning stack: raw node rows, means over each
//! node's k-hop neighbourhood, or one mean row per graph.

use std::collections::VecDeque;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::gcn::LayerEmbeddings;
use crate::graph::Graph;

pub const DEFAULT_HOPS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewMode {
    RawNode,
    SubgraphMean,
    GraphMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingView {
    pub mode: ViewMode,
    /// Neighbourhood radius; 0 outside subgraph mode.
    pub hops: usize,
    pub embeddings: LayerEmbeddings,
}

pub fn raw_view(emb: LayerEmbeddings) -> EmbeddingView {
    EmbeddingView {
        mode: ViewMode::RawNode,
        hops: 0,
        embeddings: emb,
    }
}

/// Nodes within `hops` edges of `root`, `root` first, in BFS order.
pub fn neighbourhood(g: &Graph, root: usize, hops: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.num_nodes()];
    let mut order = vec![root];
    let mut queue = VecDeque::from([root]);
    dist[root] = 0;
    while let Some(u) = queue.pop_front() {
        if dist[u] == hops {
            continue;
        }
        for &v in g.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                order.push(v);
                queue.push_back(v);
            }
        }
    }
    order
}

/// Row `i` of every layer becomes the mean over `i`'s `hops`-neighbourhood.
pub fn subgraph_view(g: &Graph, emb: &LayerEmbeddings, hops: usize) -> Result<EmbeddingView> {
    if emb.num_rows() != g.num_nodes() {
        return Err(Error::Dimension {
            context: "embedding rows",
            expected: g.num_nodes(),
            found: emb.num_rows(),
        });
    }
    let balls: Vec<Vec<usize>> = (0..g.num_nodes()).map(|u| neighbourhood(g, u, hops)).collect();
    let layers = emb
        .layers
        .iter()
        .map(|h| {
            let mut out = Array2::zeros(h.raw_dim());
            for (u, ball) in balls.iter().enumerate() {
                let mut row = out.row_mut(u);
                for &v in ball {
                    row += &h.row(v);
                }
                row /= ball.len() as f64;
            }
            out
        })
        .collect();
    Ok(EmbeddingView {
        mode: ViewMode::SubgraphMean,
        hops,
        embeddings: LayerEmbeddings { layers },
    })
}

/// One row per graph: the mean of its node rows, at every layer.
pub fn graph_view(embs: &[LayerEmbeddings]) -> Result<EmbeddingView> {
    let first = embs
        .first()
        .ok_or_else(|| Error::InvalidArgument("graph view needs at least one graph".into()))?;
    let dims = first.layer_dims();
    let mut layers: Vec<Array2<f64>> = dims.iter().map(|&d| Array2::zeros((embs.len(), d))).collect();
    for (i, emb) in embs.iter().enumerate() {
        if emb.layer_dims() != dims {
            return Err(Error::Data(format!("graph {i} has layer widths {:?}", emb.layer_dims())));
        }
        if emb.num_rows() == 0 {
            return Err(Error::Data(format!("graph {i} has no nodes")));
        }
        for (out, h) in layers.iter_mut().zip(&emb.layers) {
            out.row_mut(i).assign(&h.mean_axis(Axis(0)).expect("non-empty"));
        }
    }
    Ok(EmbeddingView {
        mode: ViewMode::GraphMean,
        hops: 0,
        embeddings: LayerEmbeddings { layers },
    })
}
