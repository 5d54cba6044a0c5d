mod common;

use std::collections::HashSet;

use common::{lp_fd_max_err, random_graph};
use tgprompt::align::align_graph;
use tgprompt::gcn::GcnParams;
use tgprompt::graph::{generate_sbm, Graph, SbmConfig};
use tgprompt::pretrain::{auc, pretrain, sample_negative_edges, PretrainConfig};

#[test]
fn gradients_match_finite_differences_on_20_seeds() {
    for seed in 0..20u64 {
        let err = lp_fd_max_err(seed, 6 + (seed as usize % 5));
        assert!(err < 1e-5, "seed {seed}: worst relative error {err}");
    }
}

#[test]
fn negatives_avoid_existing_edges() {
    let g = random_graph(100, 2, 0.05, 3);
    let edges: HashSet<(usize, usize)> = g
        .undirected_edges()
        .into_iter()
        .flat_map(|(u, v)| [(u, v), (v, u)])
        .collect();
    let neg = sample_negative_edges(&g, 500, 9).unwrap();
    assert_eq!(neg.len(), 500);
    assert!(neg.iter().all(|p| p.0 != p.1 && !edges.contains(p)));
    assert_eq!(neg, sample_negative_edges(&g, 500, 9).unwrap());
}

fn sbm(seed: u64) -> Graph {
    let g = generate_sbm(&SbmConfig {
        block_sizes: vec![50, 50],
        p_in: 0.2,
        p_out: 0.01,
        feature_dim: 16,
        feature_shift: 1.0,
        seed,
    })
    .unwrap();
    align_graph(&g, 16).unwrap()
}

#[test]
fn zero_epochs_returns_initialisation() {
    let g = sbm(1);
    let cfg = PretrainConfig {
        epochs: 0,
        hidden_dim: 8,
        seed: 5,
        ..Default::default()
    };
    let out = pretrain(std::slice::from_ref(&g), &cfg).unwrap();
    let init = GcnParams::init_uniform(&[16, 8, 8], cfg.slope, 5).unwrap();
    assert_eq!(out.params, init);
    assert!(out.history.is_empty());
}

#[test]
fn zero_learning_rate_leaves_params_unchanged() {
    let g = sbm(2);
    let cfg = PretrainConfig {
        epochs: 5,
        learning_rate: 0.0,
        hidden_dim: 8,
        seed: 6,
        ..Default::default()
    };
    let out = pretrain(std::slice::from_ref(&g), &cfg).unwrap();
    let init = GcnParams::init_uniform(&[16, 8, 8], cfg.slope, 6).unwrap();
    assert_eq!(out.params, init);
}

#[test]
fn sbm_pretraining_reaches_auc_above_075() {
    let g = sbm(11);
    let cfg = PretrainConfig {
        epochs: 200,
        hidden_dim: 32,
        seed: 7,
        ..Default::default()
    };
    let out = pretrain(std::slice::from_ref(&g), &cfg).unwrap();
    let best = out.best_auc.unwrap();
    assert!(best > 0.75, "best held-out AUC {best}");
}

#[test]
fn training_loss_decreases_in_most_seeds() {
    let mut passes = 0;
    for seed in 0..5 {
        let g = sbm(20 + seed);
        let cfg = PretrainConfig {
            epochs: 60,
            hidden_dim: 16,
            seed,
            ..Default::default()
        };
        let out = pretrain(std::slice::from_ref(&g), &cfg).unwrap();
        if out.history.last().unwrap().loss < out.history[0].loss {
            passes += 1;
        }
    }
    assert!(passes >= 4, "{passes}/5 seeds decreased");
}

#[test]
fn auc_of_constant_scorer_is_half() {
    assert_eq!(auc(&[0.3; 10], &[0.3; 3]), 0.5);
}

#[test]
fn mismatched_source_widths_are_rejected() {
    let a = sbm(1);
    let b = random_graph(20, 3, 0.3, 1);
    assert!(pretrain(&[a, b], &PretrainConfig::default()).is_err());
}
