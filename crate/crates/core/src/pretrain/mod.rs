//! Label-free pre-training of the encoder by link prediction.

mod negative;
mod tape;

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::gcn::{
    encode_features, normalize_adjacency, GcnParams, NormalizedAdjacency, DEFAULT_HIDDEN_DIM,
    DEFAULT_NUM_LAYERS, DEFAULT_SLOPE,
};
use crate::graph::Graph;
use crate::rng::{derive_seed, SeededRng};

pub use negative::sample_negative_edges;
pub use tape::{lp_loss, lp_loss_and_grads};

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Negative pairs drawn per positive training edge, every epoch.
    pub neg_ratio: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub slope: f64,
    /// Fraction of each graph's edges hidden from training and used for AUC.
    pub edge_holdout_fraction: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 200,
            neg_ratio: 1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            num_layers: DEFAULT_NUM_LAYERS,
            slope: DEFAULT_SLOPE,
            edge_holdout_fraction: 0.1,
        }
    }
}

impl PretrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be non-negative".into()));
        }
        if self.neg_ratio == 0 {
            return Err(Error::InvalidArgument("neg_ratio must be at least 1".into()));
        }
        if self.num_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("encoder needs a layer and a hidden width".into()));
        }
        if !(0.0..1.0).contains(&self.edge_holdout_fraction) {
            return Err(Error::InvalidArgument("edge_holdout_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over graphs, measured before this epoch's update.
    pub loss: f64,
    /// Mean held-out AUC over graphs after this epoch's update.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub params: GcnParams,
    pub best_epoch: usize,
    pub best_auc: Option<f64>,
    pub history: Vec<EpochRecord>,
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half (Mann–Whitney form, via average ranks).
pub fn auc(pos_scores: &[f64], neg_scores: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos_scores
        .iter()
        .map(|&s| (s, true))
        .chain(neg_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * all[i..=j].iter().filter(|x| x.1).count() as f64;
        i = j + 1;
    }
    let p = pos_scores.len() as f64;
    let n = neg_scores.len() as f64;
    (rank_sum - p * (p + 1.0) / 2.0) / (p * n)
}

struct Adam {
    m: GcnParams,
    v: GcnParams,
    t: i32,
}

impl Adam {
    fn new(params: &GcnParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut GcnParams, grads: &GcnParams, cfg: &PretrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
        };
        for l in 0..params.num_layers() {
            Zip::from(&mut params.weights[l])
                .and(&grads.weights[l])
                .and(&mut self.m.weights[l])
                .and(&mut self.v.weights[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut params.biases[l])
                .and(&grads.biases[l])
                .and(&mut self.m.biases[l])
                .and(&mut self.v.biases[l])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

struct SourceGraph<'a> {
    full: &'a Graph,
    adj: NormalizedAdjacency,
    train_edges: Vec<(usize, usize)>,
    held_out: Vec<(usize, usize)>,
    held_out_neg: Vec<(usize, usize)>,
    seed: u64,
}

impl<'a> SourceGraph<'a> {
    fn prepare(g: &'a Graph, index: usize, cfg: &PretrainConfig) -> Result<Self> {
        let seed = derive_seed(cfg.seed, 1 + index as u64);
        let mut edges = g.undirected_edges();
        if edges.is_empty() {
            return Err(Error::Data(format!("source graph {index} has no edges")));
        }
        SeededRng::new(seed).shuffle(&mut edges);
        let k = (cfg.edge_holdout_fraction * edges.len() as f64).round() as usize;
        let k = k.min(edges.len() - 1);
        let train_edges = edges.split_off(k);
        let held_out = edges;
        let held_out_neg = sample_negative_edges(g, held_out.len(), derive_seed(seed, u64::MAX))?;
        let adj = normalize_adjacency(&g.with_edges(&train_edges)?);
        Ok(Self {
            full: g,
            adj,
            train_edges,
            held_out,
            held_out_neg,
            seed,
        })
    }

    fn held_out_auc(&self, params: &GcnParams) -> Result<Option<f64>> {
        if self.held_out.is_empty() {
            return Ok(None);
        }
        let emb = encode_features(&self.adj, self.full.features(), params)?;
        let z: &Array2<f64> = emb.layers.last().expect("at least one layer");
        Ok(Some(auc(
            &tape::pair_scores(z, &self.held_out),
            &tape::pair_scores(z, &self.held_out_neg),
        )))
    }
}

fn mean_auc(sources: &[SourceGraph<'_>], params: &GcnParams) -> Result<Option<f64>> {
    let aucs: Vec<f64> = sources
        .iter()
        .map(|s| s.held_out_auc(params))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok((!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64))
}

/// Trains encoder weights from scratch on the given (already aligned) graphs.
///
/// Every epoch takes one Adam step per graph, in order, with freshly sampled
/// negatives. The returned parameters are the snapshot with the best mean
/// held-out AUC (earliest on ties), including the initialisation itself.
pub fn pretrain(graphs: &[Graph], cfg: &PretrainConfig) -> Result<PretrainOutcome> {
    cfg.validate()?;
    let first = graphs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no source graphs".into()))?;
    let d_a = first.feature_dim();
    if let Some(g) = graphs.iter().find(|g| g.feature_dim() != d_a) {
        return Err(Error::Dimension {
            context: "source graph feature width",
            expected: d_a,
            found: g.feature_dim(),
        });
    }
    let mut dims = vec![d_a];
    dims.extend(std::iter::repeat_n(cfg.hidden_dim, cfg.num_layers));
    let mut params = GcnParams::init_uniform(&dims, cfg.slope, cfg.seed)?;

    let sources = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| SourceGraph::prepare(g, i, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut best = params.clone();
    let mut best_auc = mean_auc(&sources, &params)?;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut adam = Adam::new(&params);

    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        for src in &sources {
            let neg = sample_negative_edges(
                src.full,
                cfg.neg_ratio * src.train_edges.len(),
                derive_seed(src.seed, epoch as u64),
            )?;
            let (loss, grads) =
                lp_loss_and_grads(&params, &src.adj, src.full.features(), &src.train_edges, &neg)?;
            loss_sum += loss;
            adam.step(&mut params, &grads, cfg);
        }
        if !params.is_finite() {
            return Err(Error::NonFinite(format!("encoder parameters at epoch {epoch}")));
        }
        let auc = mean_auc(&sources, &params)?;
        history.push(EpochRecord {
            epoch,
            loss: loss_sum / sources.len() as f64,
            auc,
        });
        let improved = match (auc, best_auc) {
            (Some(a), Some(b)) => a > b,
            (Some(_), None) => true,
            (None, _) => true,
        };
        if improved {
            best = params.clone();
            best_auc = auc;
            best_epoch = epoch;
        }
    }

    Ok(PretrainOutcome {
        params: best,
        best_epoch,
        best_auc,
        history,
    })
}
