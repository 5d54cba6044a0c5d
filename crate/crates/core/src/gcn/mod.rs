//! Frozen multi-layer GCN producing one representation matrix per layer.

mod params_io;

use ndarray::{Array1, Array2};

use crate::align::AlignedFeatures;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::SeededRng;

pub use params_io::{load_params, save_params};

pub const DEFAULT_SLOPE: f64 = 0.25;
pub const DEFAULT_HIDDEN_DIM: usize = 64;
pub const DEFAULT_NUM_LAYERS: usize = 2;

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|u| (g.degree(u) + 1) as f64).collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(g.num_directed_edges() + n);
    let mut values = Vec::with_capacity(g.num_directed_edges() + n);
    row_offsets.push(0);
    for u in 0..n {
        let nbrs = g.neighbors(u);
        let split = nbrs.partition_point(|&v| v < u);
        let cols = nbrs[..split]
            .iter()
            .copied()
            .chain(std::iter::once(u))
            .chain(nbrs[split..].iter().copied());
        for v in cols {
            col_indices.push(v);
            values.push(1.0 / (deg[u] * deg[v]).sqrt());
        }
        row_offsets.push(col_indices.len());
    }
    NormalizedAdjacency {
        n,
        row_offsets,
        col_indices,
        values,
    }
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn row(&self, u: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[u]..self.row_offsets[u + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    /// `Â · x`, accumulated row by row in column order.
    pub fn spmm(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "spmm row mismatch");
        let mut out = Array2::zeros((self.n, x.ncols()));
        for u in 0..self.n {
            let (cols, vals) = self.row(u);
            let mut acc = out.row_mut(u);
            for (&v, &w) in cols.iter().zip(vals) {
                acc.scaled_add(w, &x.row(v));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.n));
        for u in 0..self.n {
            let (cols, vals) = self.row(u);
            for (&v, &w) in cols.iter().zip(vals) {
                d[[u, v]] = w;
            }
        }
        d
    }
}

/// Per-layer weights and biases of the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    /// `weights[l]` maps width `dims[l]` to `dims[l + 1]`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub slope: f64,
}

impl GcnParams {
    pub fn new(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>, slope: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("a GCN needs at least one layer".into()));
        }
        if weights.len() != biases.len() {
            return Err(Error::Dimension {
                context: "bias count",
                expected: weights.len(),
                found: biases.len(),
            });
        }
        for l in 0..weights.len() {
            if l > 0 && weights[l].nrows() != weights[l - 1].ncols() {
                return Err(Error::Dimension {
                    context: "chained layer width",
                    expected: weights[l - 1].ncols(),
                    found: weights[l].nrows(),
                });
            }
            if biases[l].len() != weights[l].ncols() {
                return Err(Error::Dimension {
                    context: "bias length",
                    expected: weights[l].ncols(),
                    found: biases[l].len(),
                });
            }
        }
        let p = GcnParams {
            weights,
            biases,
            slope,
        };
        if !p.is_finite() {
            return Err(Error::NonFinite("gcn parameters".into()));
        }
        Ok(p)
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    pub fn init_uniform(dims: &[usize], slope: f64, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidArgument("dims needs an input and at least one layer".into()));
        }
        let mut rng = SeededRng::new(seed);
        let weights = dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Array2::from_shape_simple_fn((w[0], w[1]), || bound * (2.0 * rng.uniform() - 1.0))
            })
            .collect();
        let biases = dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
        Self::new(weights, biases, slope)
    }

    pub fn zeros_like(&self) -> Self {
        GcnParams {
            weights: self.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            slope: self.slope,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    /// `[d_0, d_1, ..., d_L]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.weights.iter().map(|w| w.ncols()))
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// Visits every scalar parameter in a fixed order (weights then bias, per layer).
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(&mut f);
            b.iter_mut().for_each(&mut f);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

/// `H^(0) .. H^(L)`; for graph-level views, one row per graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEmbeddings {
    pub layers: Vec<Array2<f64>>,
}

impl LayerEmbeddings {
    /// Number of message-passing layers `L` (one less than the stored matrices).
    pub fn num_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        self.layers.iter().map(|h| h.ncols()).collect()
    }
}

pub(crate) fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn encode(g: &Graph, aligned: &AlignedFeatures, params: &GcnParams) -> Result<LayerEmbeddings> {
    encode_features(&normalize_adjacency(g), &aligned.matrix, params)
}

/// `H^(l) = σ(Â H^(l-1) W^(l) + b^(l))`, computed as `Â (H W) + b`.
pub fn encode_features(
    adj: &NormalizedAdjacency,
    features: &Array2<f64>,
    params: &GcnParams,
) -> Result<LayerEmbeddings> {
    if features.ncols() != params.input_dim() {
        return Err(Error::Dimension {
            context: "encoder input width",
            expected: params.input_dim(),
            found: features.ncols(),
        });
    }
    if features.nrows() != adj.num_nodes() {
        return Err(Error::Dimension {
            context: "encoder input rows",
            expected: adj.num_nodes(),
            found: features.nrows(),
        });
    }
    let mut layers = Vec::with_capacity(params.num_layers() + 1);
    layers.push(features.clone());
    for (l, (w, b)) in params.weights.iter().zip(&params.biases).enumerate() {
        let mut z = adj.spmm(&layers[l].dot(w));
        z += b;
        z.mapv_inplace(|x| leaky(x, params.slope));
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("encoder layer {}", l + 1)));
        }
        layers.push(z);
    }
    Ok(LayerEmbeddings { layers })
}
