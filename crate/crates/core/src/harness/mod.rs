//! End-to-end runs: split, encode, select, augment, tune, predict and score,
//! repeated over seeds, plus the ablation switches and a validation-driven
//! grid search.

mod config;
mod report;

use std::collections::HashSet;
use std::time::Duration;

use web_time::Instant;

use crate::align::{svd_align, svd_align_joint};
use crate::centroid::{
    augment, complementary_labels, entropy_report, init_centroids, AugmentedSplit, Centroids,
    ComplementaryLabels, EntropyReport,
};
use crate::error::{Error, Result};
use crate::gcn::{encode_features, normalize_adjacency, GcnParams, LayerEmbeddings};
use crate::graph::{make_split_from_labels, perturb_graph, FewShotSplit, Graph, GraphDataset, PerturbConfig};
use crate::pretrain::PretrainConfig;
use crate::prompt::{predict, tune, TgclTask, TuneConfig, TuneOutcome};
use crate::rng::derive_seed;
use crate::view::{graph_view, raw_view, subgraph_view, EmbeddingView};

pub use config::{parse_config, parse_config_str, ConfigFile};
pub use report::{PhaseTimings, RunReport, SeedReport};

pub const DEFAULT_N_AUG: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskMode {
    Node,
    Graph,
}

/// Everything a run needs besides the data and the encoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: TaskMode,
    /// `None` scores raw node rows; `Some(k)` scores k-hop neighbourhood means.
    pub hops: Option<usize>,
    pub shots: usize,
    pub n_aug: usize,
    pub align_dim: usize,
    pub use_augmentation: bool,
    pub use_centroid_prompt: bool,
    pub use_layer_prompt: bool,
    pub tune: TuneConfig,
    pub pretrain: PretrainConfig,
    /// Applied to the target after splitting; few-shot and validation nodes
    /// are protected.
    pub perturb: Option<PerturbConfig>,
    pub seeds: Vec<u64>,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskMode::Node,
            hops: None,
            shots: 1,
            n_aug: DEFAULT_N_AUG,
            align_dim: crate::align::DEFAULT_ALIGN_DIM,
            use_augmentation: true,
            use_centroid_prompt: true,
            use_layer_prompt: true,
            tune: TuneConfig::default(),
            pretrain: PretrainConfig::default(),
            perturb: None,
            seeds: vec![0, 1, 2, 3, 4],
            threads: 1,
        }
    }
}

impl ExperimentConfig {
    /// Prompt tuning on the original few-shot items only: no test-time term,
    /// no augmentation.
    pub fn base_few_shot(&self) -> Self {
        Self {
            use_augmentation: false,
            tune: TuneConfig {
                gamma: 0.0,
                ..self.tune.clone()
            },
            ..self.clone()
        }
    }

    /// Untuned mean centroids with unit layer weights.
    pub fn frozen_centroids(&self) -> Self {
        Self {
            use_augmentation: false,
            use_centroid_prompt: false,
            use_layer_prompt: false,
            tune: TuneConfig {
                steps: 0,
                ..self.tune.clone()
            },
            ..self.clone()
        }
    }

    fn effective_tune(&self, seed: u64) -> TuneConfig {
        TuneConfig {
            seed: derive_seed(seed, 3),
            train_beta: self.use_centroid_prompt && self.tune.train_beta,
            train_eta: self.use_layer_prompt && self.tune.train_eta,
            beta_init_std: if self.use_centroid_prompt {
                self.tune.beta_init_std
            } else {
                0.0
            },
            ..self.tune.clone()
        }
    }
}

/// A downstream dataset: one graph with labelled nodes, or labelled graphs.
#[derive(Debug, Clone)]
pub enum Target {
    Nodes(Graph),
    Graphs(GraphDataset),
}

impl Target {
    pub fn item_labels(&self) -> Vec<Option<usize>> {
        match self {
            Target::Nodes(g) => g.labels().to_vec(),
            Target::Graphs(ds) => ds.item_labels(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Target::Nodes(g) => g.num_classes(),
            Target::Graphs(ds) => ds.num_classes,
        }
    }

    pub fn task(&self) -> TaskMode {
        match self {
            Target::Nodes(_) => TaskMode::Node,
            Target::Graphs(_) => TaskMode::Graph,
        }
    }
}

/// A target with features projected to the encoder's input width.
#[derive(Debug, Clone)]
pub struct AlignedTarget(Target);

impl AlignedTarget {
    pub fn target(&self) -> &Target {
        &self.0
    }
}

/// Projects node features to `dim` columns; graph collections share one basis.
pub fn align_target(target: &Target, dim: usize) -> Result<AlignedTarget> {
    Ok(AlignedTarget(match target {
        Target::Nodes(g) => Target::Nodes(g.with_features(svd_align(g.features(), dim)?.matrix)?),
        Target::Graphs(ds) => {
            let blocks: Vec<_> = ds.graphs.iter().map(|g| g.features().clone()).collect();
            let aligned = svd_align_joint(&blocks, dim)?;
            let graphs = ds
                .graphs
                .iter()
                .zip(aligned)
                .map(|(g, f)| g.with_features(f))
                .collect::<Result<Vec<_>>>()?;
            Target::Graphs(GraphDataset::new(graphs, ds.labels.clone(), ds.num_classes)?)
        }
    }))
}

fn with_phase<T>(phase: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFinite(m) => Error::NonFinite(format!("{phase}: {m}")),
        Error::Data(m) => Error::Data(format!("{phase}: {m}")),
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{phase}: {m}")),
        other => other,
    })
}

/// Item embeddings for the configured view.
pub fn embed_target(
    target: &AlignedTarget,
    params: &GcnParams,
    hops: Option<usize>,
) -> Result<EmbeddingView> {
    match &target.0 {
        Target::Nodes(g) => {
            let emb = encode_features(&normalize_adjacency(g), g.features(), params)?;
            match hops {
                None => Ok(raw_view(emb)),
                Some(k) => subgraph_view(g, &emb, k),
            }
        }
        Target::Graphs(ds) => {
            let embs = ds
                .graphs
                .iter()
                .map(|g| encode_features(&normalize_adjacency(g), g.features(), params))
                .collect::<Result<Vec<LayerEmbeddings>>>()?;
            graph_view(&embs)
        }
    }
}

/// Matches over total; errors on empty or unequal inputs.
pub fn accuracy(preds: &[usize], truth: &[usize]) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::Dimension {
            context: "prediction count",
            expected: truth.len(),
            found: preds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty prediction set".into()));
    }
    Ok(preds.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / preds.len() as f64)
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let r = f();
    *slot += t.elapsed();
    r
}

/// Tuning inputs prepared for one seed. Test labels are not part of it.
struct Prepared {
    split: FewShotSplit,
    view: EmbeddingView,
    timings: PhaseTimings,
}

fn prepare(
    target: &AlignedTarget,
    params: &GcnParams,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Prepared> {
    let mut timings = PhaseTimings::default();
    let labels = target.0.item_labels();
    let split = with_phase(
        "split",
        make_split_from_labels(&labels, target.0.num_classes(), cfg.shots, derive_seed(seed, 1)),
    )?;
    let perturbed;
    let target = match (&cfg.perturb, &target.0) {
        (None, _) => target,
        (Some(p), Target::Nodes(g)) => {
            let protected: HashSet<usize> = split
                .fs_nodes
                .iter()
                .map(|p| p.0)
                .chain(split.val_nodes.iter().copied())
                .collect();
            let p = PerturbConfig {
                seed: derive_seed(seed ^ p.seed, 2),
                ..p.clone()
            };
            perturbed = AlignedTarget(Target::Nodes(with_phase(
                "perturb",
                perturb_graph(g, &p, &protected),
            )?));
            &perturbed
        }
        (Some(_), Target::Graphs(_)) => {
            return Err(Error::InvalidArgument(
                "perturbation applies to node tasks only".into(),
            ))
        }
    };
    let view = timed(&mut timings.encode, || {
        with_phase("encode", embed_target(target, params, cfg.hops))
    })?;
    Ok(Prepared {
        split,
        view,
        timings,
    })
}

/// Centroids, selection and tuned prompts for one split.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub centroids: Centroids,
    pub report: EntropyReport,
    pub augmented: AugmentedSplit,
    pub complementary: ComplementaryLabels,
    pub outcome: TuneOutcome,
    /// Only `select` and `tune` are filled in.
    pub timings: PhaseTimings,
}

/// Runs selection and tuning on fixed embeddings and split.
///
/// Only few-shot labels, the `(node, label)` validation pairs and labels
/// derived from the embeddings reach the tuner.
pub fn fit_prompts(
    emb: &LayerEmbeddings,
    split: &FewShotSplit,
    val: &[(usize, usize)],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Fitted> {
    let mut timings = PhaseTimings::default();
    let (centroids, report, augmented, complementary) = timed(&mut timings.select, || {
        let cents = with_phase("centroids", init_centroids(emb, split))?;
        let report = with_phase("entropy", entropy_report(emb, &cents, &split.test_nodes))?;
        let n_aug = if cfg.use_augmentation { cfg.n_aug } else { 0 };
        let aug = augment(&report, split, n_aug);
        let comp = complementary_labels(emb, &cents, report.pivot_layer, &split.test_nodes)?;
        Ok((cents, report, aug, comp))
    })?;
    let task = TgclTask {
        fs: augmented.combined_fs.clone(),
        te: complementary.labels.clone(),
    };
    let tune_cfg = cfg.effective_tune(seed);
    let outcome = timed(&mut timings.tune, || {
        with_phase("tune", tune(emb, &task, &centroids, &tune_cfg, val))
    })?;
    Ok(Fitted {
        centroids,
        report,
        augmented,
        complementary,
        outcome,
        timings,
    })
}

fn run_seed(
    target: &AlignedTarget,
    params: &GcnParams,
    cfg: &ExperimentConfig,
    seed: u64,
    score_test: bool,
) -> Result<SeedReport> {
    let Prepared {
        split,
        view,
        mut timings,
    } = prepare(target, params, cfg, seed)?;
    let emb = &view.embeddings;
    let labels = target.0.item_labels();
    let val = split.labelled_val(&labels);
    let Fitted {
        centroids,
        report,
        augmented,
        complementary,
        outcome,
        timings: fit_timings,
    } = fit_prompts(emb, &split, &val, cfg, seed)?;
    timings.select = fit_timings.select;
    timings.tune = fit_timings.tune;

    let test_accuracy = if score_test {
        let preds = timed(&mut timings.predict, || {
            predict(emb, &centroids, &outcome.prompts, &split.test_nodes)
        })?;
        let truth: Vec<usize> = split
            .test_nodes
            .iter()
            .map(|&u| labels[u].expect("split items are labelled"))
            .collect();
        Some(accuracy(&preds, &truth)?)
    } else {
        None
    };

    Ok(SeedReport {
        seed,
        test_accuracy,
        val_accuracy: outcome.best_val_accuracy,
        pivot_layer: report.pivot_layer,
        layer_entropy: report.mean_entropy,
        complementary_safety: complementary.safety_rate(&labels),
        num_augmented: augmented.aug_nodes.len(),
        best_step: outcome.best_step,
        loss_curve: outcome.history.iter().map(|r| r.loss.total).collect(),
        timings,
    })
}

fn run_seeds(
    target: &AlignedTarget,
    params: &GcnParams,
    cfg: &ExperimentConfig,
    score_test: bool,
) -> Result<RunReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds given".into()));
    }
    if target.0.task() != cfg.task {
        return Err(Error::InvalidArgument(format!(
            "config task {:?} does not match the {:?} dataset",
            cfg.task,
            target.0.task()
        )));
    }
    let threads = cfg.threads.clamp(1, cfg.seeds.len());
    let seeds = if threads == 1 {
        cfg.seeds
            .iter()
            .map(|&s| run_seed(target, params, cfg, s, score_test))
            .collect::<Result<Vec<_>>>()?
    } else {
        let chunk = cfg.seeds.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = cfg
                .seeds
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        part.iter()
                            .map(|&s| run_seed(target, params, cfg, s, score_test))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(cfg.seeds.len());
            for h in handles {
                all.extend(h.join().expect("seed worker panicked")?);
            }
            Ok::<_, Error>(all)
        })?
    };
    Ok(RunReport::from_seeds(seeds))
}

/// Runs every seed of `cfg` against an aligned target with a frozen encoder.
pub fn run_experiment(
    target: &AlignedTarget,
    params: &GcnParams,
    cfg: &ExperimentConfig,
) -> Result<RunReport> {
    check_widths(target, params)?;
    run_seeds(target, params, cfg, true)
}

fn check_widths(target: &AlignedTarget, params: &GcnParams) -> Result<()> {
    let d = match &target.0 {
        Target::Nodes(g) => g.feature_dim(),
        Target::Graphs(ds) => ds.feature_dim(),
    };
    if d != params.input_dim() {
        return Err(Error::Dimension {
            context: "aligned target width vs encoder input",
            expected: params.input_dim(),
            found: d,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub gamma: Vec<f64>,
    pub n_aug: Vec<usize>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GridCandidate {
    pub gamma: f64,
    pub n_aug: usize,
    pub alpha: f64,
    pub mean_val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: ExperimentConfig,
    /// Test accuracy is measured for the selected configuration only.
    pub report: RunReport,
    /// Every configuration in grid order with its mean validation accuracy.
    pub candidates: Vec<GridCandidate>,
}

/// Picks the configuration with the highest mean validation accuracy
/// (first in grid order on ties), visiting gamma, then n_aug, then alpha.
pub fn grid_search(
    target: &AlignedTarget,
    params: &GcnParams,
    base: &ExperimentConfig,
    grid: &Grid,
) -> Result<GridResult> {
    check_widths(target, params)?;
    let gammas = if grid.gamma.is_empty() { vec![base.tune.gamma] } else { grid.gamma.clone() };
    let n_augs = if grid.n_aug.is_empty() { vec![base.n_aug] } else { grid.n_aug.clone() };
    let alphas = if grid.alpha.is_empty() { vec![base.tune.alpha] } else { grid.alpha.clone() };

    let mut candidates = Vec::new();
    let mut best: Option<(f64, ExperimentConfig)> = None;
    for &gamma in &gammas {
        for &n_aug in &n_augs {
            for &alpha in &alphas {
                let cfg = ExperimentConfig {
                    n_aug,
                    tune: TuneConfig {
                        gamma,
                        alpha,
                        ..base.tune.clone()
                    },
                    ..base.clone()
                };
                let rep = run_seeds(target, params, &cfg, false)?;
                let val = rep.mean_val_accuracy.ok_or_else(|| {
                    Error::Data("grid search needs validation items".into())
                })?;
                candidates.push(GridCandidate {
                    gamma,
                    n_aug,
                    alpha,
                    mean_val_accuracy: val,
                });
                if best.as_ref().is_none_or(|(b, _)| val > *b) {
                    best = Some((val, cfg));
                }
            }
        }
    }
    let (_, best) = best.expect("grid has at least one point");
    let report = run_seeds(target, params, &best, true)?;
    Ok(GridResult {
        best,
        report,
        candidates,
    })
}

/// Pretrains on the given source graphs after aligning each to `align_dim`.
pub fn pretrain_sources(sources: &[Graph], cfg: &ExperimentConfig) -> Result<GcnParams> {
    let aligned = sources
        .iter()
        .map(|g| crate::align::align_graph(g, cfg.align_dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(with_phase("pretrain", crate::pretrain::pretrain(&aligned, &cfg.pretrain))?.params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2], &[1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 0]).unwrap(), 2.0 / 3.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn ablation_presets() {
        let cfg = ExperimentConfig::default();
        let base = cfg.base_few_shot();
        assert_eq!(base.tune.gamma, 0.0);
        assert!(!base.use_augmentation && base.use_centroid_prompt);
        let frozen = cfg.frozen_centroids();
        assert_eq!(frozen.tune.steps, 0);
        assert_eq!(frozen.effective_tune(3).beta_init_std, 0.0);
    }
}
