//! Acceptance suite. Runs every criterion, prints one `PASS`/`FAIL` line per
//! criterion and exits non-zero if any of them failed.
//!
//! Built with `harness = false` so the lines are printed under a plain
//! `cargo test`; run it alone with `cargo test --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{
    augment_oracle, clustered_instance, complement_oracle, dense_norm_adj,
    lp_fd_max_err, max_abs_diff, pivot_oracle, prompt_fd_max_err, prompt_instance, random_graph,
    softmax_oracle,
};
use ndarray::{Array1, Array2};
use tgprompt::align::{align_graph, svd_align};
use tgprompt::centroid::{
    argmax, augment, complementary_labels, cosine_sim, entropy, entropy_report, init_centroids,
    softmax,
};
use tgprompt::gcn::{encode, encode_features, normalize_adjacency, GcnParams, LayerEmbeddings};
use tgprompt::graph::{generate_sbm, make_split, make_split_from_labels, Graph, PerturbConfig, SbmConfig};
use tgprompt::harness::{align_target, run_experiment, AlignedTarget, ExperimentConfig, Target};
use tgprompt::pretrain::{pretrain, PretrainConfig};
use tgprompt::prompt::{ensemble_logits, predict, tune, TgclTask, TuneConfig};
use tgprompt::rng::{derive_seed, SeededRng};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------------------
// 1, 2: gradients

fn prompt_gradients() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut r = SeededRng::new(derive_seed(seed, 77));
        let c = 2 + r.below(3);
        let n_te = 5 + r.below(26);
        let dims: Vec<usize> = (0..3).map(|_| 1 + r.below(8)).collect();
        let inst = prompt_instance(seed, n_te, 2 * c, c, &dims);
        let cfg = TuneConfig {
            tau: 0.25 + r.uniform() * 2.0,
            gamma: r.uniform(),
            ..Default::default()
        };
        worst = worst.max(prompt_fd_max_err(&inst, &cfg, 1e-6));
    }
    let t = start.elapsed();
    verdict(
        worst <= 1e-5 && t < Duration::from_secs(5),
        format!("20 instances, worst relative error {worst:.2e} (<= 1e-5), {t:.2?} (< 5 s)"),
    )
}

fn pretrain_gradients() -> Verdict {
    let start = Instant::now();
    let worst = (0..20u64)
        .map(|seed| lp_fd_max_err(seed, 5 + (seed as usize % 6)))
        .fold(0.0f64, f64::max);
    let t = start.elapsed();
    verdict(
        worst <= 1e-5 && t < Duration::from_secs(10),
        format!("20 seeds, worst relative error {worst:.2e} (<= 1e-5), {t:.2?} (< 10 s)"),
    )
}

// ---------------------------------------------------------------------------
// 3: selection oracles

fn selection_oracles() -> Verdict {
    let (mut pivots, mut augs, mut comps) = (0, 0, 0);
    for seed in 0..50u64 {
        let mut r = SeededRng::new(seed + 1000);
        let c = 2 + r.below(3);
        let n = (c + 10 + r.below(40 - c)).min(50);
        let inst = clustered_instance(seed, n, c, 1, 2 + r.below(3));
        let cents = init_centroids(&inst.emb, &inst.split).unwrap();
        let test = &inst.split.test_nodes;
        let rep = entropy_report(&inst.emb, &cents, test).unwrap();
        if rep.pivot_layer == pivot_oracle(&inst.emb, &cents, test).0 {
            pivots += 1;
        }
        let n_aug = r.below(6);
        if augment(&rep, &inst.split, n_aug).aug_nodes
            == augment_oracle(&inst.emb, &cents, &rep, test, n_aug)
        {
            augs += 1;
        }
        let comp = complementary_labels(&inst.emb, &cents, rep.pivot_layer, test).unwrap();
        if comp
            .labels
            .iter()
            .all(|&(u, yb)| yb == complement_oracle(&inst.emb, &cents, rep.pivot_layer, u))
        {
            comps += 1;
        }
    }
    verdict(
        pivots == 50 && augs == 50 && comps == 50,
        format!("exact matches: pivot {pivots}/50, augmentation {augs}/50, complementary {comps}/50"),
    )
}

// ---------------------------------------------------------------------------
// 4: invariants

fn invariants() -> Verdict {
    let mut failures = Vec::new();
    let mut r = SeededRng::new(4);

    let (mut worst_sum, mut entropy_ok, mut cosine_ok) = (0.0f64, true, true);
    for _ in 0..2000 {
        let c = 1 + r.below(8);
        let scale = 10f64.powf(4.0 * r.uniform() - 1.0);
        let z: Vec<f64> = (0..c).map(|_| scale * r.normal()).collect();
        let p = softmax(&z);
        worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
        let h = entropy(&p);
        entropy_ok &= h >= 0.0 && h <= (c as f64).ln() + 1e-12;
        let a = Array1::from_shape_fn(c, |_| scale * r.normal());
        let b = if r.below(10) == 0 {
            Array1::zeros(c)
        } else {
            Array1::from_shape_fn(c, |_| r.normal())
        };
        let s = cosine_sim(a.view(), b.view()).unwrap();
        cosine_ok &= (-1.0..=1.0).contains(&s);
    }
    if worst_sum > 1e-9 {
        failures.push(format!("softmax sum off by {worst_sum:.1e}"));
    }
    if !entropy_ok {
        failures.push("entropy outside [0, ln C]".into());
    }
    if !cosine_ok {
        failures.push("cosine outside [-1, 1]".into());
    }

    let mut argmax_ok = true;
    for seed in 0..50 {
        let inst = prompt_instance(seed, 20, 4, 2 + (seed as usize % 4), &[4, 6, 3]);
        let nodes: Vec<usize> = (0..24).collect();
        let preds = predict(&inst.emb, &inst.cents, &inst.prompts, &nodes).unwrap();
        let logits = ensemble_logits(&inst.emb, &inst.cents, &inst.prompts, &nodes).unwrap();
        for tau in [0.05, 0.3, 1.0, 7.0] {
            for (i, row) in logits.rows().into_iter().enumerate() {
                let z: Vec<f64> = row.iter().map(|x| x / tau).collect();
                argmax_ok &= argmax(&softmax_oracle(&z)) == preds[i];
            }
        }
    }
    if !argmax_ok {
        failures.push("prediction differs from tempered-softmax argmax".into());
    }

    let mut equivariance = 0.0f64;
    for seed in 0..30u64 {
        let n = 2 + (seed as usize * 7) % 40;
        let g = random_graph(n, 3, 0.25, seed);
        let mut perm: Vec<usize> = (0..n).collect();
        SeededRng::new(seed ^ 1).shuffle(&mut perm);
        let edges: Vec<(usize, usize)> =
            g.undirected_edges().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let mut f = Array2::zeros(g.features().raw_dim());
        for u in 0..n {
            f.row_mut(perm[u]).assign(&g.features().row(u));
        }
        let h = Graph::from_edges(n, &edges, f, vec![None; n], 1).unwrap();
        let params = GcnParams::init_uniform(&[3, 5, 4], 0.25, seed).unwrap();
        let a = encode_features(&normalize_adjacency(&g), g.features(), &params).unwrap();
        let b = encode_features(&normalize_adjacency(&h), h.features(), &params).unwrap();
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            for u in 0..n {
                for (x, y) in la.row(u).iter().zip(lb.row(perm[u])) {
                    equivariance = equivariance.max((x - y).abs());
                }
            }
        }
    }
    if equivariance > 1e-12 {
        failures.push(format!("permutation equivariance off by {equivariance:.1e}"));
    }

    let mut propagation = 0.0f64;
    for seed in 0..30u64 {
        let n = 1 + (seed as usize * 13) % 100;
        let g = random_graph(n, 3, 0.3 * (seed % 4) as f64 / 3.0, seed);
        let adj = normalize_adjacency(&g);
        let dense = dense_norm_adj(&g);
        propagation = propagation
            .max(max_abs_diff(&adj.to_dense(), &dense))
            .max(max_abs_diff(&adj.spmm(g.features()), &dense.dot(g.features())));
    }
    if propagation > 1e-10 {
        failures.push(format!("sparse and dense propagation differ by {propagation:.1e}"));
    }

    let detail = if failures.is_empty() {
        format!(
            "softmax sum err {worst_sum:.1e}, entropy/cosine bounds hold, argmax invariant for 4 temperatures, \
             equivariance err {equivariance:.1e}, sparse-vs-dense err {propagation:.1e}"
        )
    } else {
        failures.join("; ")
    };
    verdict(failures.is_empty(), detail)
}

// ---------------------------------------------------------------------------
// 5: complementary-label safety on well-separated clusters

fn complementary_safety() -> Verdict {
    // three clusters whose means are exactly 10 within-cluster std apart
    let (per_class, d, std) = (100, 8, 1.0);
    let radius = 10.0 * std / 2f64.sqrt();
    let mut rates = Vec::new();
    for seed in 0..5u64 {
        let mut r = SeededRng::new(derive_seed(seed, 5));
        let n = 3 * per_class;
        let labels: Vec<Option<usize>> = (0..n).map(|i| Some(i / per_class)).collect();
        let layers = (0..3)
            .map(|_| {
                Array2::from_shape_fn((n, d), |(i, j)| {
                    let mean = if j == i / per_class { radius } else { 0.0 };
                    mean + std * r.normal()
                })
            })
            .collect();
        let emb = LayerEmbeddings { layers };
        let split = make_split_from_labels(&labels, 3, 1, seed).unwrap();
        let cents = init_centroids(&emb, &split).unwrap();
        let rep = entropy_report(&emb, &cents, &split.test_nodes).unwrap();
        let comp = complementary_labels(&emb, &cents, rep.pivot_layer, &split.test_nodes).unwrap();
        rates.push(comp.safety_rate(&labels).unwrap());
    }
    let min = rates.iter().cloned().fold(1.0, f64::min);
    verdict(
        min >= 0.99,
        format!("per-seed safety {:?}, minimum {min:.4} (>= 0.99)", fmt_all(&rates)),
    )
}

// ---------------------------------------------------------------------------
// 6, 7, 8, 10: the SBM fixture
//
// Each seed is a full replicate: its own source sample, pre-training run,
// target sample and split. A single sample pair varies by several points
// between draws, and averaging over replicates keeps that variation out of
// the comparisons.

const SBM_DIM: usize = 64;
const SBM_SHIFT: f64 = 0.4;
const SBM_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn sbm_sample(seed: u64) -> Graph {
    generate_sbm(&SbmConfig {
        block_sizes: vec![100, 100],
        p_in: 0.2,
        p_out: 0.01,
        feature_dim: SBM_DIM,
        feature_shift: SBM_SHIFT,
        seed,
    })
    .unwrap()
}

fn sbm_pretrain_config(seed: u64) -> PretrainConfig {
    PretrainConfig {
        learning_rate: 0.05,
        epochs: 600,
        hidden_dim: 64,
        edge_holdout_fraction: 0.0,
        seed,
        ..Default::default()
    }
}

fn sbm_experiment(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        align_dim: SBM_DIM,
        seeds: vec![seed],
        threads: 1,
        tune: TuneConfig {
            tau: 0.1,
            alpha: 0.05,
            patience: 200,
            ..Default::default()
        },
        ..Default::default()
    }
}

struct Replicate {
    seed: u64,
    params: GcnParams,
    target: AlignedTarget,
    full_accuracy: f64,
}

struct SbmFixture {
    replicates: Vec<Replicate>,
    elapsed: Duration,
}

impl SbmFixture {
    fn build() -> Self {
        let start = Instant::now();
        let replicates = SBM_SEEDS
            .iter()
            .map(|&seed| {
                let source = align_graph(&sbm_sample(2 * seed), SBM_DIM).unwrap();
                let params = pretrain(&[source], &sbm_pretrain_config(seed)).unwrap().params;
                let target = align_target(&Target::Nodes(sbm_sample(2 * seed + 1)), SBM_DIM).unwrap();
                let full_accuracy = test_accuracy(&target, &params, &sbm_experiment(seed));
                Replicate {
                    seed,
                    params,
                    target,
                    full_accuracy,
                }
            })
            .collect();
        SbmFixture {
            replicates,
            elapsed: start.elapsed(),
        }
    }

    fn full(&self) -> Vec<f64> {
        self.replicates.iter().map(|r| r.full_accuracy).collect()
    }

    fn variant(&self, f: impl Fn(ExperimentConfig) -> ExperimentConfig) -> Vec<f64> {
        self.replicates
            .iter()
            .map(|r| test_accuracy(&r.target, &r.params, &f(sbm_experiment(r.seed))))
            .collect()
    }
}

fn test_accuracy(target: &AlignedTarget, params: &GcnParams, cfg: &ExperimentConfig) -> f64 {
    run_experiment(target, params, cfg)
        .unwrap()
        .mean_test_accuracy
        .unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn fmt_all(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|x| format!("{x:.3}")).collect()
}

fn sbm_end_to_end(fx: &SbmFixture) -> Verdict {
    let full = fx.full();
    let frozen = fx.variant(|c| c.frozen_centroids());
    let (m, mf) = (mean(&full), mean(&frozen));
    let t = fx.elapsed;
    verdict(
        m >= 0.85 && m >= mf && t < Duration::from_secs(60),
        format!(
            "mean accuracy {m:.4} (>= 0.85) per seed {:?}, frozen centroids {mf:.4} (<= full), \
             pre-train + run {t:.2?} (< 60 s)",
            fmt_all(&full)
        ),
    )
}

fn sbm_ablation(fx: &SbmFixture) -> Verdict {
    let full = mean(&fx.full());
    let base = fx.variant(|c| c.base_few_shot());
    let gap = 100.0 * (full - mean(&base));
    verdict(
        gap >= 2.0,
        format!(
            "full {full:.4} vs base few-shot {:.4} per seed {:?}: gap {gap:.2} pp (>= 2)",
            mean(&base),
            fmt_all(&base)
        ),
    )
}

fn sbm_descent(fx: &SbmFixture) -> Verdict {
    let mut descended = 0;
    let mut pairs = Vec::new();
    for r in &fx.replicates {
        let mut cfg = sbm_experiment(r.seed);
        cfg.tune.alpha = 1e-3;
        let report = run_experiment(&r.target, &r.params, &cfg).unwrap();
        let curve = &report.seeds[0].loss_curve;
        let (l0, l100) = (curve[0], curve[100]);
        pairs.push(format!("{l0:.4}->{l100:.4}"));
        if l100 < l0 {
            descended += 1;
        }
    }
    verdict(
        descended >= 4,
        format!("loss at step 100 below step 0 in {descended}/5 seeds (>= 4): {pairs:?}"),
    )
}

fn sbm_robustness(fx: &SbmFixture) -> Verdict {
    let full = mean(&fx.full());
    let dropped = fx.variant(|c| ExperimentConfig {
        perturb: Some(PerturbConfig {
            edge_drop_rate: 0.3,
            feature_shuffle_rate: 0.0,
            seed: c.seeds[0],
        }),
        ..c
    });
    let drop = 100.0 * (full - mean(&dropped));
    verdict(
        drop < 10.0,
        format!(
            "clean {full:.4}, 30% test-edge drop {:.4} per seed {:?}: degradation {drop:.2} pp (< 10)",
            mean(&dropped),
            fmt_all(&dropped)
        ),
    )
}

// ---------------------------------------------------------------------------
// 9: scaling of the tuning loop

struct TuneCase {
    emb: LayerEmbeddings,
    cents: tgprompt::centroid::Centroids,
    task: TgclTask,
    val: Vec<(usize, usize)>,
}

/// A C = 5, d = 32, two-layer instance with `n` nodes, ready for tuning.
fn tune_case(n: usize) -> TuneCase {
    let (c, d) = (5, 32);
    let per_block = n / c;
    let g = generate_sbm(&SbmConfig {
        block_sizes: vec![per_block; c],
        p_in: 10.0 / per_block as f64,
        p_out: 1.0 / n as f64,
        feature_dim: d,
        feature_shift: 1.0,
        seed: n as u64,
    })
    .unwrap();
    let aligned = svd_align(g.features(), d).unwrap();
    let params = GcnParams::init_uniform(&[d, d, d], 0.25, 1).unwrap();
    let emb = encode(&g, &aligned, &params).unwrap();
    let split = make_split(&g, 1, 0).unwrap();
    let cents = init_centroids(&emb, &split).unwrap();
    let rep = entropy_report(&emb, &cents, &split.test_nodes).unwrap();
    let aug = augment(&rep, &split, 10);
    let comp = complementary_labels(&emb, &cents, rep.pivot_layer, &split.test_nodes).unwrap();
    TuneCase {
        emb,
        cents,
        task: TgclTask {
            fs: aug.combined_fs,
            te: comp.labels,
        },
        val: split.labelled_val(g.labels()),
    }
}

fn tune_seconds(case: &TuneCase) -> f64 {
    let cfg = TuneConfig {
        steps: 200,
        patience: 200,
        ..Default::default()
    };
    let start = Instant::now();
    let out = tune(&case.emb, &case.task, &case.cents, &cfg, &case.val).unwrap();
    assert_eq!(out.history.len(), 201);
    start.elapsed().as_secs_f64()
}

fn linear_scaling() -> Verdict {
    // alternate the two sizes so machine load affects both alike; keep minima
    let (a, b) = (tune_case(2000), tune_case(4000));
    let (mut small, mut large) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..5 {
        small = small.min(tune_seconds(&a));
        large = large.min(tune_seconds(&b));
    }
    let ratio = large / small;
    verdict(
        ratio < 2.5 && large < 30.0,
        format!("tune N=2000 {small:.3} s, N=4000 {large:.3} s: ratio {ratio:.2} (< 2.5), absolute (< 30 s)"),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let sbm = std::cell::OnceCell::new();
    let fixture = || sbm.get_or_init(SbmFixture::build);
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("prompt gradients vs finite differences", Box::new(prompt_gradients)),
        ("pre-training gradients vs finite differences", Box::new(pretrain_gradients)),
        ("pivot / augmentation / complementary oracles", Box::new(selection_oracles)),
        ("invariant suite", Box::new(invariants)),
        ("complementary-label safety", Box::new(complementary_safety)),
        ("end-to-end SBM", Box::new(move || sbm_end_to_end(fixture()))),
        ("ablation: full vs base few-shot", Box::new(move || sbm_ablation(fixture()))),
        ("descent at alpha 1e-3", Box::new(move || sbm_descent(fixture()))),
        ("linear scaling of tuning", Box::new(linear_scaling)),
        ("robustness to 30% edge drop", Box::new(move || sbm_robustness(fixture()))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
