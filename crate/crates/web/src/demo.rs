//! Native implementations behind the browser exports.

use ndarray::Array2;
use serde::Serialize;
use tgprompt::align::align_graph;
use tgprompt::centroid::{complementary_labels, entropy_report, init_centroids};
use tgprompt::error::Result;
use tgprompt::gcn::{GcnParams, LayerEmbeddings};
use tgprompt::graph::{generate_sbm, make_split_from_labels, Graph, PerturbConfig, SbmConfig};
use tgprompt::harness::{align_target, run_experiment, AlignedTarget, ExperimentConfig, Target};
use tgprompt::pretrain::{pretrain, PretrainConfig};
use tgprompt::rng::{derive_seed, SeededRng};

const DIM: usize = 32;
const BLOCK: usize = 60;

fn sbm(seed: u64, shift: f64) -> Result<Graph> {
    generate_sbm(&SbmConfig {
        block_sizes: vec![BLOCK; 3],
        p_in: 0.2,
        p_out: 0.01,
        feature_dim: DIM,
        feature_shift: shift,
        seed,
    })
}

/// Source encoder and aligned target, both drawn from `seed`.
fn setup(seed: u64, shift: f64) -> Result<(GcnParams, AlignedTarget)> {
    let source = align_graph(&sbm(derive_seed(seed, 10), shift)?, DIM)?;
    let params = pretrain(
        &[source],
        &PretrainConfig {
            learning_rate: 0.05,
            epochs: 200,
            hidden_dim: DIM,
            edge_holdout_fraction: 0.0,
            seed,
            ..Default::default()
        },
    )?
    .params;
    let target = align_target(&Target::Nodes(sbm(derive_seed(seed, 11), shift)?), DIM)?;
    Ok((params, target))
}

fn experiment(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        align_dim: DIM,
        seeds: vec![seed],
        threads: 1,
        ..Default::default()
    };
    cfg.tune.tau = 0.1;
    cfg.tune.alpha = 0.05;
    cfg
}

#[derive(Debug, Serialize)]
pub struct Adaptation {
    pub frozen_accuracy: f64,
    pub few_shot_accuracy: f64,
    pub tuned_accuracy: f64,
    pub pivot_layer: usize,
    pub layer_entropy: Vec<f64>,
    pub loss_curve: Vec<f64>,
    pub best_step: usize,
}

pub fn adaptation(seed: u64, shift: f64) -> Result<Adaptation> {
    let (params, target) = setup(seed, shift)?;
    let cfg = experiment(seed);
    let acc = |c: &ExperimentConfig| -> Result<f64> {
        Ok(run_experiment(&target, &params, c)?.mean_test_accuracy.unwrap_or(0.0))
    };
    let full = run_experiment(&target, &params, &cfg)?;
    let s = &full.seeds[0];
    Ok(Adaptation {
        frozen_accuracy: acc(&cfg.frozen_centroids())?,
        few_shot_accuracy: acc(&cfg.base_few_shot())?,
        tuned_accuracy: s.test_accuracy.unwrap_or(0.0),
        pivot_layer: s.pivot_layer,
        layer_entropy: s.layer_entropy.clone(),
        loss_curve: s.loss_curve.clone(),
        best_step: s.best_step,
    })
}

#[derive(Debug, Serialize)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
    pub label: usize,
    pub few_shot: bool,
    /// Nearest-centroid guess; `None` for the labelled points.
    pub pseudo: Option<usize>,
    /// Class the point is confidently not in; `None` for the labelled points.
    pub complement: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Complementary {
    pub points: Vec<PlanarPoint>,
    pub centroids: Vec<[f64; 2]>,
    pub pseudo_accuracy: f64,
    pub safety_rate: f64,
}

/// Three Gaussian clusters around the unit circle, one labelled point each.
pub fn complementary(seed: u64, spread: f64) -> Result<Complementary> {
    const PER: usize = 40;
    let mut rng = SeededRng::new(seed);
    let n = 3 * PER;
    let mut xy = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for u in 0..n {
        let c = u / PER;
        let angle = c as f64 * std::f64::consts::TAU / 3.0;
        xy[[u, 0]] = angle.cos() + spread * rng.normal();
        xy[[u, 1]] = angle.sin() + spread * rng.normal();
        labels.push(Some(c));
    }
    let split = make_split_from_labels(&labels, 3, 1, derive_seed(seed, 1))?;
    let emb = LayerEmbeddings { layers: vec![xy] };
    let cents = init_centroids(&emb, &split)?;
    let test: Vec<usize> = split.val_nodes.iter().chain(&split.test_nodes).copied().collect();
    let report = entropy_report(&emb, &cents, &test)?;
    let comp = complementary_labels(&emb, &cents, 0, &test)?;
    let safety_rate = comp.safety_rate(&labels).unwrap_or(1.0);

    let mut points: Vec<PlanarPoint> = (0..n)
        .map(|u| PlanarPoint {
            x: emb.layers[0][[u, 0]],
            y: emb.layers[0][[u, 1]],
            label: u / PER,
            few_shot: split.fs_nodes.iter().any(|f| f.0 == u),
            pseudo: None,
            complement: None,
        })
        .collect();
    let mut hits = 0;
    for (i, &u) in test.iter().enumerate() {
        points[u].pseudo = Some(report.pseudo_labels[i]);
        points[u].complement = Some(comp.labels[i].1);
        hits += usize::from(report.pseudo_labels[i] == u / PER);
    }
    let centroids = cents.layers[0]
        .rows()
        .into_iter()
        .map(|r| [r[0], r[1]])
        .collect();
    Ok(Complementary {
        points,
        centroids,
        pseudo_accuracy: hits as f64 / test.len() as f64,
        safety_rate,
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct SweepPoint {
    pub edge_drop: f64,
    pub frozen_accuracy: f64,
    pub tuned_accuracy: f64,
}

pub fn perturbation_sweep(seed: u64, rates: &[f64]) -> Result<Vec<SweepPoint>> {
    let (params, target) = setup(seed, 0.4)?;
    rates
        .iter()
        .map(|&rate| {
            let cfg = ExperimentConfig {
                perturb: Some(PerturbConfig {
                    edge_drop_rate: rate,
                    feature_shuffle_rate: 0.0,
                    seed,
                }),
                ..experiment(seed)
            };
            let acc = |c: &ExperimentConfig| -> Result<f64> {
                Ok(run_experiment(&target, &params, c)?.mean_test_accuracy.unwrap_or(0.0))
            };
            Ok(SweepPoint {
                edge_drop: rate,
                frozen_accuracy: acc(&cfg.frozen_centroids())?,
                tuned_accuracy: acc(&cfg)?,
            })
        })
        .collect()
}
