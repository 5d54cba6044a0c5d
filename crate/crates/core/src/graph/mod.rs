//! Undirected attributed graphs in CSR form, plus the dataset tooling around
//! them: text I/O, graph collections, few-shot splits, stochastic block
//! model fixtures and test-time perturbations.

mod collection;
mod io;
mod perturb;
mod sbm;
mod split;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use collection::{
    generate_collection, load_graph_dataset, save_graph_dataset, CollectionConfig, GraphDataset,
};
pub use io::{load_graph, read_split, save_graph, write_split};
pub use perturb::{perturb_graph, PerturbConfig};
pub use sbm::{generate_sbm, SbmConfig};
pub use split::{make_split, make_split_from_labels, FewShotSplit};

/// An undirected graph with node features and optional class labels.
///
/// Adjacency is stored symmetrically: every undirected edge `{u, v}` appears
/// as `v` in row `u` and `u` in row `v`. Rows are sorted, free of duplicates
/// and free of self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    features: Array2<f64>,
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list.
    ///
    /// Edges are symmetrised and deduplicated; self-loops are dropped.
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Data(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        Self::from_csr(
            num_nodes,
            row_offsets,
            col_indices,
            features,
            labels,
            num_classes,
        )
    }

    /// Builds a graph from CSR arrays, checking every structural invariant.
    pub fn from_csr(
        num_nodes: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let g = Graph {
            num_nodes,
            row_offsets,
            col_indices,
            features,
            labels,
            num_classes,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if self.row_offsets.len() != n + 1 {
            return Err(Error::Dimension {
                context: "csr row offsets",
                expected: n + 1,
                found: self.row_offsets.len(),
            });
        }
        if self.row_offsets[0] != 0
            || self.row_offsets.windows(2).any(|w| w[0] > w[1])
            || self.row_offsets[n] != self.col_indices.len()
        {
            return Err(Error::Data("malformed csr row offsets".into()));
        }
        for u in 0..n {
            let row = self.neighbors(u);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Data(format!("row {u} is not strictly increasing")));
            }
            for &v in row {
                if v >= n {
                    return Err(Error::Data(format!("row {u} references node {v}")));
                }
                if v == u {
                    return Err(Error::Data(format!("self-loop stored at node {u}")));
                }
                if !self.has_edge(v, u) {
                    return Err(Error::Data(format!("edge ({u}, {v}) has no reverse")));
                }
            }
        }
        if self.features.nrows() != n {
            return Err(Error::Dimension {
                context: "feature rows",
                expected: n,
                found: self.features.nrows(),
            });
        }
        if self.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("node features".into()));
        }
        if self.labels.len() != n {
            return Err(Error::Dimension {
                context: "labels",
                expected: n,
                found: self.labels.len(),
            });
        }
        if let Some((i, c)) = self
            .labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&c| c >= self.num_classes).map(|c| (i, c)))
        {
            return Err(Error::Data(format!(
                "node {i} has label {c} outside 0..{}",
                self.num_classes
            )));
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Number of stored (directed) adjacency entries, twice the undirected count.
    pub fn num_directed_edges(&self) -> usize {
        self.col_indices.len()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in row order.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_nodes)
            .flat_map(|u| {
                self.neighbors(u)
                    .iter()
                    .filter(move |&&v| v > u)
                    .map(move |&v| (u, v))
            })
            .collect()
    }

    /// Same structure and labels with a replacement feature matrix.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        Self::from_csr(
            self.num_nodes,
            self.row_offsets.clone(),
            self.col_indices.clone(),
            features,
            self.labels.clone(),
            self.num_classes,
        )
    }

    /// Same nodes and features restricted to the given undirected edges.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(
            self.num_nodes,
            edges,
            self.features.clone(),
            self.labels.clone(),
            self.num_classes,
        )
    }
}
