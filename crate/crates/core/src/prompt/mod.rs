//! Centroid and layer prompts, the test-time contrastive objective, its
//! analytic gradients, gradient-descent tuning and ensemble prediction.

mod io;

use ndarray::{Array1, Array2, ArrayView1};

use crate::centroid::{argmax, softmax, Centroids, COSINE_EPS};
use crate::error::{Error, Result};
use crate::gcn::LayerEmbeddings;
use crate::rng::SeededRng;

pub use io::{load_prompts, save_prompts};

/// Floor applied to every probability before taking its log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Per-layer additive centroid prompts and per-layer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptState {
    /// `beta[l]` is `C × d_l`.
    pub beta: Vec<Array2<f64>>,
    /// One weight per layer `0..=L`.
    pub eta: Vec<f64>,
}

impl PromptState {
    pub fn num_classes(&self) -> usize {
        self.beta[0].nrows()
    }

    pub fn num_layers(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn is_finite(&self) -> bool {
        self.eta.iter().all(|x| x.is_finite())
            && self.beta.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn zeros_like(&self) -> Self {
        PromptState {
            beta: self.beta.iter().map(|b| Array2::zeros(b.raw_dim())).collect(),
            eta: vec![0.0; self.eta.len()],
        }
    }

    /// Prompts that leave the centroids as they are: `β = 0`, `η = 1`.
    pub fn identity(cents: &Centroids) -> Self {
        PromptState {
            beta: cents.layers.iter().map(|e| Array2::zeros(e.raw_dim())).collect(),
            eta: vec![1.0; cents.layers.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    /// Softmax temperature of the tuning losses.
    pub tau: f64,
    /// Weight of the test-time term; the few-shot term gets `1 - gamma`.
    pub gamma: f64,
    /// Gradient-descent step size.
    pub alpha: f64,
    pub steps: usize,
    pub beta_init_std: f64,
    /// Stop after this many steps without a strict validation improvement.
    pub patience: usize,
    pub seed: u64,
    pub train_beta: bool,
    pub train_eta: bool,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            gamma: 0.5,
            alpha: 1e-2,
            steps: 200,
            beta_init_std: 0.01,
            patience: 50,
            seed: 0,
            train_beta: true,
            train_eta: true,
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument("tau must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument("gamma must lie in [0, 1]".into()));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument("alpha must be non-negative".into()));
        }
        if !(self.beta_init_std >= 0.0) {
            return Err(Error::InvalidArgument("beta_init_std must be non-negative".into()));
        }
        Ok(())
    }
}

/// `β ~ N(0, beta_init_std²)` drawn layer by layer, row-major; `η = 1`.
pub fn init_prompts(cents: &Centroids, cfg: &TuneConfig) -> PromptState {
    let mut rng = SeededRng::new(cfg.seed);
    let beta = cents
        .layers
        .iter()
        .map(|e| Array2::from_shape_simple_fn(e.raw_dim(), || cfg.beta_init_std * rng.normal()))
        .collect();
    PromptState {
        beta,
        eta: vec![1.0; cents.layers.len()],
    }
}

fn check_prompt_shape(cents: &Centroids, prompts: &PromptState) -> Result<()> {
    if prompts.beta.len() != cents.layers.len() || prompts.eta.len() != cents.layers.len() {
        return Err(Error::Dimension {
            context: "prompt layer count",
            expected: cents.layers.len(),
            found: prompts.beta.len(),
        });
    }
    for (b, e) in prompts.beta.iter().zip(&cents.layers) {
        if b.dim() != e.dim() {
            return Err(Error::Dimension {
                context: "prompt width",
                expected: e.ncols(),
                found: b.ncols(),
            });
        }
    }
    Ok(())
}

pub fn prompted_centroids(cents: &Centroids, prompts: &PromptState) -> Result<Centroids> {
    check_prompt_shape(cents, prompts)?;
    Ok(Centroids {
        layers: cents.layers.iter().zip(&prompts.beta).map(|(e, b)| e + b).collect(),
    })
}

/// Softmax over classes of `eta · cos(h, ẽ_c) / tau`.
pub fn class_prob(h: ArrayView1<'_, f64>, e_tilde: &Array2<f64>, eta: f64, tau: f64) -> Vec<f64> {
    let hn = unit(h);
    let z: Vec<f64> = e_tilde
        .rows()
        .into_iter()
        .map(|e| eta * unit(e).dot(&hn).clamp(-1.0, 1.0) / tau)
        .collect();
    softmax(&z)
}

fn unit(v: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt().max(COSINE_EPS);
    v.mapv(|x| x / n)
}

/// Items the objective is evaluated on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TgclTask {
    /// `(node, label)` few-shot pairs, augmented ones included.
    pub fs: Vec<(usize, usize)>,
    /// `(node, complementary label)` test pairs.
    pub te: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub test_time: f64,
    pub few_shot: f64,
}

fn check_task(
    emb: &LayerEmbeddings,
    task: &TgclTask,
    cents: &Centroids,
    prompts: &PromptState,
) -> Result<()> {
    check_prompt_shape(cents, prompts)?;
    if emb.layers.len() != cents.layers.len() {
        return Err(Error::Dimension {
            context: "embedding layer count",
            expected: cents.layers.len(),
            found: emb.layers.len(),
        });
    }
    if task.fs.is_empty() || task.te.is_empty() {
        return Err(Error::InvalidArgument(
            "objective needs few-shot and test items".into(),
        ));
    }
    let (n, c) = (emb.num_rows(), cents.num_classes());
    for &(u, y) in task.fs.iter().chain(&task.te) {
        if u >= n || y >= c {
            return Err(Error::InvalidArgument(format!(
                "item ({u}, {y}) outside {n} rows or {c} classes"
            )));
        }
    }
    Ok(())
}

struct LayerPass {
    test_time: f64,
    few_shot: f64,
    d_beta: Array2<f64>,
    d_eta: f64,
}

/// Loss terms at one layer and, when `weights` is given, the gradient of
/// `weights.0 · test_time + weights.1 · few_shot`.
fn layer_pass(
    h: &Array2<f64>,
    e_tilde: &Array2<f64>,
    eta: f64,
    tau: f64,
    task: &TgclTask,
    weights: Option<(f64, f64)>,
) -> LayerPass {
    let c = e_tilde.nrows();
    let norms: Vec<f64> = e_tilde.rows().into_iter().map(|e| e.dot(&e).sqrt()).collect();
    let guarded: Vec<f64> = norms.iter().map(|n| n.max(COSINE_EPS)).collect();
    let mut e_hat = e_tilde.clone();
    for (mut row, n) in e_hat.rows_mut().into_iter().zip(&guarded) {
        row /= *n;
    }

    let mut a = Array2::<f64>::zeros(e_tilde.raw_dim());
    let mut b = vec![0.0; c];
    let mut d_eta = 0.0;
    let mut pass = |u: usize, y: usize, complementary: bool, w: Option<f64>| -> f64 {
        let hn = unit(h.row(u));
        let s: Vec<f64> = e_hat.dot(&hn).iter().map(|x| x.clamp(-1.0, 1.0)).collect();
        let z: Vec<f64> = s.iter().map(|x| eta * x / tau).collect();
        let p = softmax(&z);
        let (loss, dz): (f64, Vec<f64>) = if complementary {
            let q: f64 = (0..c).filter(|&k| k != y).map(|k| p[k]).sum();
            let dz = if q > LOG_CLAMP {
                (0..c)
                    .map(|k| p[y] * (f64::from(u8::from(k == y)) - p[k]) / q)
                    .collect()
            } else {
                vec![0.0; c]
            };
            (-q.max(LOG_CLAMP).ln(), dz)
        } else {
            let dz = if p[y] > LOG_CLAMP {
                (0..c).map(|k| p[k] - f64::from(u8::from(k == y))).collect()
            } else {
                vec![0.0; c]
            };
            (-p[y].max(LOG_CLAMP).ln(), dz)
        };
        if let Some(w) = w {
            for k in 0..c {
                let g = w * dz[k] * eta / tau;
                a.row_mut(k).scaled_add(g, &hn);
                b[k] += g * s[k];
                d_eta += w * dz[k] * s[k] / tau;
            }
        }
        loss
    };

    let w_te = weights.map(|w| w.0 / task.te.len() as f64);
    let w_fs = weights.map(|w| w.1 / task.fs.len() as f64);
    let test_time =
        task.te.iter().map(|&(u, y)| pass(u, y, true, w_te)).sum::<f64>() / task.te.len() as f64;
    let few_shot =
        task.fs.iter().map(|&(u, y)| pass(u, y, false, w_fs)).sum::<f64>() / task.fs.len() as f64;

    let mut d_beta = a;
    for k in 0..c {
        let mut row = d_beta.row_mut(k);
        row /= guarded[k];
        if norms[k] > COSINE_EPS {
            row.scaled_add(-b[k] / (guarded[k] * guarded[k]), &e_tilde.row(k));
        }
    }
    LayerPass {
        test_time,
        few_shot,
        d_beta,
        d_eta,
    }
}

fn combine(cfg: &TuneConfig, test_time: f64, few_shot: f64) -> LossParts {
    LossParts {
        total: cfg.gamma * test_time + (1.0 - cfg.gamma) * few_shot,
        test_time,
        few_shot,
    }
}

/// Sum over layers `0..=L` of the mean complementary and few-shot
/// cross-entropies, mixed by `gamma`.
pub fn tgcl_loss(
    emb: &LayerEmbeddings,
    task: &TgclTask,
    cents: &Centroids,
    prompts: &PromptState,
    cfg: &TuneConfig,
) -> Result<LossParts> {
    Ok(loss_and_grads(emb, task, cents, prompts, cfg, false)?.0)
}

/// Gradient of the total loss with respect to every prompt entry.
pub fn tgcl_grads(
    emb: &LayerEmbeddings,
    task: &TgclTask,
    cents: &Centroids,
    prompts: &PromptState,
    cfg: &TuneConfig,
) -> Result<PromptState> {
    Ok(loss_and_grads(emb, task, cents, prompts, cfg, true)?.1)
}

pub fn tgcl_loss_and_grads(
    emb: &LayerEmbeddings,
    task: &TgclTask,
    cents: &Centroids,
    prompts: &PromptState,
    cfg: &TuneConfig,
) -> Result<(LossParts, PromptState)> {
    loss_and_grads(emb, task, cents, prompts, cfg, true)
}

fn loss_and_grads(
    emb: &LayerEmbeddings,
    task: &TgclTask,
    cents: &Centroids,
    prompts: &PromptState,
    cfg: &TuneConfig,
    want_grads: bool,
) -> Result<(LossParts, PromptState)> {
    cfg.validate()?;
    check_task(emb, task, cents, prompts)?;
    let weights = want_grads.then_some((cfg.gamma, 1.0 - cfg.gamma));
    let mut grads = prompts.zeros_like();
    let (mut te, mut fs) = (0.0, 0.0);
    for l in 0..emb.layers.len() {
        let e_tilde = &cents.layers[l] + &prompts.beta[l];
        let pass = layer_pass(&emb.layers[l], &e_tilde, prompts.eta[l], cfg.tau, task, weights);
        te += pass.test_time;
        fs += pass.few_shot;
        grads.beta[l] = pass.d_beta;
        grads.eta[l] = pass.d_eta;
    }
    let parts = combine(cfg, te, fs);
    if !parts.total.is_finite() {
        return Err(Error::NonFinite("tuning loss".into()));
    }
    Ok((parts, grads))
}

/// Argmax over classes of `Σ_l η_l · cos(h_l, ẽ_c,l)`, ties to the lowest class.
pub fn predict(
    emb: &LayerEmbeddings,
    cents: &Centroids,
    prompts: &PromptState,
    nodes: &[usize],
) -> Result<Vec<usize>> {
    Ok(ensemble_logits(emb, cents, prompts, nodes)?
        .rows()
        .into_iter()
        .map(|r| argmax(r.as_slice().expect("standard layout")))
        .collect())
}

/// `|nodes| × C` matrix of the summed, `η`-weighted cosine similarities.
pub fn ensemble_logits(
    emb: &LayerEmbeddings,
    cents: &Centroids,
    prompts: &PromptState,
    nodes: &[usize],
) -> Result<Array2<f64>> {
    let et = prompted_centroids(cents, prompts)?;
    if emb.layers.len() != et.layers.len() {
        return Err(Error::Dimension {
            context: "embedding layer count",
            expected: et.layers.len(),
            found: emb.layers.len(),
        });
    }
    if let Some(&u) = nodes.iter().find(|&&u| u >= emb.num_rows()) {
        return Err(Error::InvalidArgument(format!("node {u} outside embedding table")));
    }
    let mut logits = Array2::zeros((nodes.len(), et.num_classes()));
    for ((h, e), &eta) in emb.layers.iter().zip(&et.layers).zip(&prompts.eta) {
        let mut e_hat = e.clone();
        for mut row in e_hat.rows_mut() {
            let n = row.dot(&row).sqrt().max(COSINE_EPS);
            row /= n;
        }
        for (i, &u) in nodes.iter().enumerate() {
            let s = e_hat.dot(&unit(h.row(u)));
            logits
                .row_mut(i)
                .zip_mut_with(&s, |acc, &x| *acc += eta * x.clamp(-1.0, 1.0));
        }
    }
    Ok(logits)
}

/// Fraction of `(node, label)` pairs predicted correctly; `None` when empty.
pub fn accuracy(predictions: &[usize], truth: &[(usize, usize)]) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| **p == t.1).count();
    Some(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: LossParts,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub prompts: PromptState,
    pub best_step: usize,
    pub best_val_accuracy: Option<f64>,
    /// One record per evaluated step, starting from the initial prompts.
    pub history: Vec<StepRecord>,
}

/// Gradient descent on the prompts from [`init_prompts`].
///
/// Validation accuracy is measured at every step including step 0. The
/// snapshot kept is the latest one reaching the best accuracy so far; tuning
/// stops once `patience` consecutive steps bring no strict improvement.
/// Without validation items the final prompts are returned.
pub fn tune(
    emb: &LayerEmbeddings,
    task: &TgclTask,
    cents: &Centroids,
    cfg: &TuneConfig,
    val: &[(usize, usize)],
) -> Result<TuneOutcome> {
    cfg.validate()?;
    // the objective is a sum over items, so their order is free; ascending
    // rows keep memory access sequential on large graphs
    let mut task = task.clone();
    task.fs.sort_unstable();
    task.te.sort_unstable();
    let task = &task;
    let mut prompts = init_prompts(cents, cfg);
    let val_nodes: Vec<usize> = val.iter().map(|p| p.0).collect();
    let mut best = (prompts.clone(), 0, None::<f64>);
    let mut stale = 0;
    let mut history = Vec::new();

    for step in 0..=cfg.steps {
        let (loss, mut grads) = tgcl_loss_and_grads(emb, task, cents, &prompts, cfg)?;
        let val_accuracy = accuracy(&predict(emb, cents, &prompts, &val_nodes)?, val);
        history.push(StepRecord {
            step,
            loss,
            val_accuracy,
        });
        match (val_accuracy, best.2) {
            (None, _) => best = (prompts.clone(), step, None),
            (Some(acc), prev) => {
                let prev = prev.unwrap_or(f64::NEG_INFINITY);
                if acc > prev || step == 0 {
                    stale = 0;
                } else {
                    stale += 1;
                }
                if acc >= prev {
                    best = (prompts.clone(), step, Some(acc));
                }
            }
        }
        if step == cfg.steps || (val_accuracy.is_some() && stale >= cfg.patience) {
            break;
        }
        if !cfg.train_beta {
            grads.beta.iter_mut().for_each(|b| b.fill(0.0));
        }
        if !cfg.train_eta {
            grads.eta.fill(0.0);
        }
        for (b, g) in prompts.beta.iter_mut().zip(&grads.beta) {
            b.scaled_add(-cfg.alpha, g);
        }
        for (e, g) in prompts.eta.iter_mut().zip(&grads.eta) {
            *e -= cfg.alpha * g;
        }
        if !prompts.is_finite() {
            return Err(Error::NonFinite(format!("prompts after step {}", step + 1)));
        }
    }

    let (prompts, best_step, best_val_accuracy) = best;
    Ok(TuneOutcome {
        prompts,
        best_step,
        best_val_accuracy,
        history,
    })
}
