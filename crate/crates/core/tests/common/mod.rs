//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use tgprompt::centroid::{Centroids, EntropyReport};
use tgprompt::gcn::{normalize_adjacency, GcnParams, LayerEmbeddings};
use tgprompt::graph::{FewShotSplit, Graph};
use tgprompt::pretrain::{lp_loss, lp_loss_and_grads, sample_negative_edges};
use tgprompt::prompt::{tgcl_grads, tgcl_loss, PromptState, TgclTask, TuneConfig};
use tgprompt::rng::SeededRng;

/// Random embeddings, centroids, prompts and task items.
pub struct PromptInstance {
    pub emb: LayerEmbeddings,
    pub cents: Centroids,
    pub prompts: PromptState,
    pub task: TgclTask,
}

pub fn prompt_instance(seed: u64, n_te: usize, n_fs: usize, c: usize, dims: &[usize]) -> PromptInstance {
    let mut r = SeededRng::new(seed);
    let n = n_te + n_fs;
    let layers = dims
        .iter()
        .map(|&d| Array2::from_shape_simple_fn((n, d), || r.normal()))
        .collect();
    let cents = Centroids {
        layers: dims
            .iter()
            .map(|&d| Array2::from_shape_simple_fn((c, d), || r.normal()))
            .collect(),
    };
    let prompts = PromptState {
        beta: dims
            .iter()
            .map(|&d| Array2::from_shape_simple_fn((c, d), || 0.3 * r.normal()))
            .collect(),
        eta: dims.iter().map(|_| 0.5 + 2.0 * r.uniform()).collect(),
    };
    let fs = (0..n_fs).map(|i| (n_te + i, i % c)).collect();
    let te = (0..n_te).map(|i| (i, r.below(c))).collect();
    PromptInstance {
        emb: LayerEmbeddings { layers },
        cents,
        prompts,
        task: TgclTask { fs, te },
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine with the same norm floor, written out with plain loops.
pub fn cosine_oracle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (norm(a).max(1e-12) * norm(b).max(1e-12))).clamp(-1.0, 1.0)
}

pub fn softmax_oracle(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Straight-line reimplementation of the tuning objective: returns
/// `(total, test_time, few_shot)`.
pub fn tgcl_loss_oracle(inst: &PromptInstance, tau: f64, gamma: f64) -> (f64, f64, f64) {
    let (mut lte, mut lfs) = (0.0, 0.0);
    for l in 0..inst.emb.layers.len() {
        let h = &inst.emb.layers[l];
        let et = &inst.cents.layers[l] + &inst.prompts.beta[l];
        let c = et.nrows();
        let probs = |u: usize| {
            let z: Vec<f64> = (0..c)
                .map(|k| {
                    let s = cosine_oracle(&h.row(u).to_vec(), &et.row(k).to_vec());
                    inst.prompts.eta[l] * s / tau
                })
                .collect();
            softmax_oracle(&z)
        };
        let mut acc = 0.0;
        for &(u, yb) in &inst.task.te {
            let p = probs(u);
            let q: f64 = (0..c).filter(|&k| k != yb).map(|k| p[k]).sum();
            acc -= q.max(1e-12).ln();
        }
        lte += acc / inst.task.te.len() as f64;
        let mut acc = 0.0;
        for &(u, y) in &inst.task.fs {
            acc -= probs(u)[y].max(1e-12).ln();
        }
        lfs += acc / inst.task.fs.len() as f64;
    }
    (gamma * lte + (1.0 - gamma) * lfs, lte, lfs)
}

/// Brute-force pivot: mean entropy of the temperature-free softmax of cosine
/// similarities at each layer, smallest mean first, lowest layer on ties.
pub fn pivot_oracle(emb: &LayerEmbeddings, cents: &Centroids, test: &[usize]) -> (usize, Vec<f64>) {
    let mut means = Vec::new();
    for l in 0..emb.layers.len() {
        let mut tot = 0.0;
        for &u in test {
            let sims: Vec<f64> = (0..cents.layers[l].nrows())
                .map(|k| cosine_oracle(&emb.layers[l].row(u).to_vec(), &cents.layers[l].row(k).to_vec()))
                .collect();
            let p = softmax_oracle(&sims);
            tot += p.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum::<f64>();
        }
        means.push(tot / test.len() as f64);
    }
    let mut best = 0;
    for l in 1..means.len() {
        if means[l] < means[best] {
            best = l;
        }
    }
    (best, means)
}

/// Erdős–Rényi graph with standard-normal features and no labels.
pub fn random_graph(n: usize, d: usize, p: f64, seed: u64) -> Graph {
    let mut r = SeededRng::new(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.bernoulli(p) {
                edges.push((u, v));
            }
        }
    }
    let f = Array2::from_shape_simple_fn((n, d), || r.normal());
    Graph::from_edges(n, &edges, f, vec![None; n], 1).unwrap()
}

/// `D^-1/2 (A + I) D^-1/2` built densely from the edge list.
pub fn dense_norm_adj(g: &Graph) -> Array2<f64> {
    let n = g.num_nodes();
    let mut a = Array2::<f64>::eye(n);
    for (u, v) in g.undirected_edges() {
        a[[u, v]] = 1.0;
        a[[v, u]] = 1.0;
    }
    let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| a[[i, j]] / (deg[i] * deg[j]).sqrt())
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest relative error between the analytic prompt gradients and central
/// differences with step `h`.
pub fn prompt_fd_max_err(inst: &PromptInstance, cfg: &TuneConfig, h: f64) -> f64 {
    let g = tgcl_grads(&inst.emb, &inst.task, &inst.cents, &inst.prompts, cfg).unwrap();
    let loss_at = |p: &PromptState| tgcl_loss(&inst.emb, &inst.task, &inst.cents, p, cfg).unwrap().total;
    let mut worst = 0.0f64;
    for l in 0..g.beta.len() {
        for ((k, j), &a) in g.beta[l].indexed_iter() {
            let mut p = inst.prompts.clone();
            p.beta[l][[k, j]] += h;
            let up = loss_at(&p);
            p.beta[l][[k, j]] -= 2.0 * h;
            let down = loss_at(&p);
            worst = worst.max(rel_err(a, (up - down) / (2.0 * h)));
        }
        let mut p = inst.prompts.clone();
        p.eta[l] += h;
        let up = loss_at(&p);
        p.eta[l] -= 2.0 * h;
        let down = loss_at(&p);
        worst = worst.max(rel_err(g.eta[l], (up - down) / (2.0 * h)));
    }
    worst
}

/// Largest relative error of the link-prediction gradients against central
/// differences on a random graph with `n` nodes.
pub fn lp_fd_max_err(seed: u64, n: usize) -> f64 {
    let h = 1e-6;
    let g = random_graph(n, 3, 0.4, seed);
    let adj = normalize_adjacency(&g);
    let params = GcnParams::init_uniform(&[3, 4, 3], 0.25, seed + 100).unwrap();
    let mut pos = g.undirected_edges();
    if pos.is_empty() {
        pos.push((0, 1));
    }
    let neg = sample_negative_edges(&g, pos.len().min(4), seed).unwrap();
    let (_, grads) = lp_loss_and_grads(&params, &adj, g.features(), &pos, &neg).unwrap();
    let base = params.flatten();
    let mut worst = 0.0f64;
    for (k, &a) in grads.flatten().iter().enumerate() {
        let eval = |delta: f64| {
            let mut p = params.clone();
            let mut i = 0;
            p.for_each_mut(|x| {
                if i == k {
                    *x = base[k] + delta;
                }
                i += 1;
            });
            lp_loss(&p, &adj, g.features(), &pos, &neg).unwrap()
        };
        worst = worst.max(rel_err(a, (eval(h) - eval(-h)) / (2.0 * h)));
    }
    worst
}

pub struct ClusteredInstance {
    pub emb: LayerEmbeddings,
    pub split: FewShotSplit,
}

/// `n` rows of clustered embeddings over `layers` layers; few-shot nodes are
/// the first `shots * c` rows and every other row is a test node.
pub fn clustered_instance(seed: u64, n: usize, c: usize, shots: usize, layers: usize) -> ClusteredInstance {
    let mut r = SeededRng::new(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let emb = LayerEmbeddings {
        layers: (0..layers)
            .map(|l| {
                let d = 2 + (l + seed as usize) % 4;
                let spread = r.uniform() * 3.0;
                Array2::from_shape_fn((n, d), |(i, j)| {
                    let centre = if j == labels[i] % d { 1.0 } else { 0.0 };
                    centre + spread * (r.uniform() - 0.5)
                })
            })
            .collect(),
    };
    let fs_nodes: Vec<(usize, usize)> = (0..shots * c).map(|i| (i, labels[i])).collect();
    let test_nodes = (shots * c..n).collect();
    ClusteredInstance {
        emb,
        split: FewShotSplit {
            shots_per_class: shots,
            num_classes: c,
            fs_nodes,
            val_nodes: vec![],
            test_nodes,
        },
    }
}

pub fn sims_oracle(emb: &LayerEmbeddings, cents: &Centroids, l: usize, u: usize) -> Vec<f64> {
    (0..cents.layers[l].nrows())
        .map(|c| cosine_oracle(&emb.layers[l].row(u).to_vec(), &cents.layers[l].row(c).to_vec()))
        .collect()
}

/// Per class, the `n_aug` test nodes whose pivot-layer argmax is that class,
/// ranked by (entropy, id) with a hand-written selection sort.
pub fn augment_oracle(
    emb: &LayerEmbeddings,
    cents: &Centroids,
    report: &EntropyReport,
    test: &[usize],
    n_aug: usize,
) -> Vec<(usize, usize)> {
    let pivot = report.pivot_layer;
    let c = cents.layers[pivot].nrows();
    let mut expected = Vec::new();
    for class in 0..c {
        let mut members: Vec<(f64, usize)> = Vec::new();
        for (i, &u) in test.iter().enumerate() {
            let s = sims_oracle(emb, cents, pivot, u);
            let mut best = 0;
            for k in 1..c {
                if s[k] > s[best] {
                    best = k;
                }
            }
            if best == class {
                members.push((report.entropies[pivot][i], u));
            }
        }
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let (x, y) = (members[a], members[b]);
                if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) {
                    members.swap(a, b);
                }
            }
        }
        expected.extend(members.iter().take(n_aug).map(|m| (m.1, class)));
    }
    expected
}

/// Least similar class at `pivot` by a plain argmin loop, lowest class on ties.
pub fn complement_oracle(emb: &LayerEmbeddings, cents: &Centroids, pivot: usize, u: usize) -> usize {
    let s = sims_oracle(emb, cents, pivot, u);
    let mut worst = 0;
    for k in 1..s.len() {
        if s[k] < s[worst] {
            worst = k;
        }
    }
    worst
}
