use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tgprompt::align::align_graph;
use tgprompt::centroid::{entropy_report, init_centroids, Centroids};
use tgprompt::error::Error;
use tgprompt::gcn::{load_params, save_params, GcnParams, LayerEmbeddings};
use tgprompt::graph::{
    generate_collection, generate_sbm, load_graph, load_graph_dataset, make_split_from_labels,
    perturb_graph, read_split, save_graph, save_graph_dataset, write_split, CollectionConfig,
    FewShotSplit, PerturbConfig, SbmConfig,
};
use tgprompt::harness::{
    align_target, embed_target, fit_prompts, grid_search, parse_config, pretrain_sources,
    run_experiment, ConfigFile, ExperimentConfig, TaskMode, Target,
};
use tgprompt::prompt::{accuracy, load_prompts, predict, prompted_centroids, save_prompts};

use crate::{Cli, CliError, Command, EncoderSource, Fixed, TaskArg};

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cli: &Cli) -> Result<()> {
    let ConfigFile {
        experiment: cfg,
        grid,
    } = settings(cli)?;
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Sbm {
            out,
            blocks,
            p_in,
            p_out,
            feature_dim,
            shift,
        } => {
            let g = generate_sbm(&SbmConfig {
                block_sizes: blocks.clone(),
                p_in: *p_in,
                p_out: *p_out,
                feature_dim: *feature_dim,
                feature_shift: *shift,
                seed,
            })?;
            save_graph(&g, out)?;
            eprintln!(
                "wrote {} nodes, {} edges to {}",
                g.num_nodes(),
                g.num_directed_edges() / 2,
                out.display()
            );
        }
        Command::Collection {
            out,
            graphs_per_class,
            min_nodes,
            max_nodes,
            p_edge,
            feature_dim,
            shift,
        } => {
            let ds = generate_collection(&CollectionConfig {
                graphs_per_class: *graphs_per_class,
                min_nodes: *min_nodes,
                max_nodes: *max_nodes,
                p_edge: p_edge.clone(),
                feature_dim: *feature_dim,
                feature_shift: *shift,
                seed,
            })?;
            save_graph_dataset(&ds, out)?;
            eprintln!("wrote {} graphs to {}", ds.graphs.len(), out.display());
        }
        Command::Align { graph, out, dim } => {
            let dim = dim.unwrap_or(cfg.align_dim);
            match load_target(graph, cfg.task)? {
                Target::Nodes(g) => save_graph(&align_graph(&g, dim)?, out)?,
                t @ Target::Graphs(_) => match align_target(&t, dim)?.target() {
                    Target::Graphs(ds) => save_graph_dataset(ds, out)?,
                    Target::Nodes(_) => unreachable!("alignment keeps the task"),
                },
            }
        }
        Command::Split { graph, out, shots } => {
            let target = load_target(graph, cfg.task)?;
            let split = make_split_from_labels(
                &target.item_labels(),
                target.num_classes(),
                shots.unwrap_or(cfg.shots),
                seed,
            )?;
            write_split(&split, out)?;
            eprintln!(
                "{} few-shot, {} validation, {} test items",
                split.fs_nodes.len(),
                split.val_nodes.len(),
                split.test_nodes.len()
            );
        }
        Command::Perturb {
            graph,
            out,
            edge_drop,
            feature_shuffle,
            split,
        } => {
            if cfg.task == TaskMode::Graph {
                return Err(CliError::Usage("perturb applies to node tasks only".into()));
            }
            let g = load_graph(graph)?;
            let protected: HashSet<usize> = match split {
                Some(p) => {
                    let s = read_split(p, g.labels(), g.num_classes())?;
                    s.fs_nodes.iter().map(|f| f.0).chain(s.val_nodes).collect()
                }
                None => HashSet::new(),
            };
            let cfg = PerturbConfig {
                edge_drop_rate: *edge_drop,
                feature_shuffle_rate: *feature_shuffle,
                seed,
            };
            save_graph(&perturb_graph(&g, &cfg, &protected)?, out)?;
        }
        Command::Pretrain { sources, out } => {
            let mut cfg = cfg;
            if let Some(s) = cli.seed {
                cfg.pretrain.seed = s;
            }
            let params = pretrain_from(sources, &cfg)?;
            save_params(&params, out)?;
        }
        Command::Tune { fixed, out } => {
            let loaded = Loaded::open(fixed, &cfg)?;
            let val = loaded.split.labelled_val(&loaded.labels);
            let fitted = fit_prompts(&loaded.emb, &loaded.split, &val, &cfg, seed)?;
            save_prompts(&fitted.outcome.prompts, out)?;
            let acc = fitted
                .outcome
                .best_val_accuracy
                .map_or_else(|| "NA".into(), |a| format!("{a:.4}"));
            println!(
                "pivot_layer={} augmented={} best_step={} val_accuracy={acc}",
                fitted.report.pivot_layer,
                fitted.augmented.aug_nodes.len(),
                fitted.outcome.best_step
            );
        }
        Command::Predict {
            fixed,
            prompts,
            out,
        } => {
            let loaded = Loaded::open(fixed, &cfg)?;
            let preds = loaded.predict(prompts, &loaded.split.test_nodes)?;
            let mut text = String::new();
            for (u, y) in loaded.split.test_nodes.iter().zip(preds) {
                writeln!(text, "{u}\t{y}").unwrap();
            }
            write(out, &text)?;
        }
        Command::Eval { fixed, prompts } => {
            let loaded = Loaded::open(fixed, &cfg)?;
            let val = loaded.split.labelled_val(&loaded.labels);
            let test: Vec<(usize, usize)> = loaded
                .split
                .test_nodes
                .iter()
                .filter_map(|&u| loaded.labels[u].map(|y| (u, y)))
                .collect();
            let mut out = String::from("split\titems\taccuracy\n");
            for (name, items) in [("val", &val), ("test", &test)] {
                let nodes: Vec<usize> = items.iter().map(|p| p.0).collect();
                let acc = accuracy(&loaded.predict(prompts, &nodes)?, items)
                    .map_or_else(|| "NA".into(), |a| format!("{a:.6}"));
                writeln!(out, "{name}\t{}\t{acc}", items.len()).unwrap();
            }
            print!("{out}");
        }
        Command::InspectEntropy { fixed, out } => {
            let loaded = Loaded::open(fixed, &cfg)?;
            let report = entropy_report(&loaded.emb, &loaded.centroids()?, &loaded.split.test_nodes)?;
            let mut text = String::from("layer\tmean_entropy\tis_pivot\n");
            for (l, h) in report.mean_entropy.iter().enumerate() {
                writeln!(text, "{l}\t{h:.6}\t{}", u8::from(l == report.pivot_layer)).unwrap();
            }
            emit(out.as_deref(), &text)?;
        }
        Command::ExportCentroids {
            fixed,
            prompts,
            out,
        } => {
            let loaded = Loaded::open(fixed, &cfg)?;
            let mut cents = loaded.centroids()?;
            if let Some(p) = prompts {
                cents = prompted_centroids(&cents, &load_prompts(p)?)?;
            }
            let mut text = String::new();
            for (l, e) in cents.layers.iter().enumerate() {
                for (c, row) in e.rows().into_iter().enumerate() {
                    write!(text, "{l}\t{c}").unwrap();
                    for x in row {
                        write!(text, "\t{x}").unwrap();
                    }
                    text.push('\n');
                }
            }
            write(out, &text)?;
        }
        Command::Run {
            graph,
            encoder,
            report,
        } => {
            let params = encoder_params(encoder, &cfg)?;
            let target = align_target(&load_target(graph, cfg.task)?, params.input_dim())?;
            let rep = run_experiment(&target, &params, &cfg)?;
            print!("{}", rep.to_table());
            if let Some(p) = report {
                write(p, &rep.to_tsv())?;
            }
        }
        Command::Grid {
            graph,
            encoder,
            report,
        } => {
            let params = encoder_params(encoder, &cfg)?;
            let target = align_target(&load_target(graph, cfg.task)?, params.input_dim())?;
            let result = grid_search(&target, &params, &cfg, &grid)?;
            println!("gamma\tn_aug\talpha\tmean_val_accuracy");
            for c in &result.candidates {
                println!("{}\t{}\t{}\t{:.6}", c.gamma, c.n_aug, c.alpha, c.mean_val_accuracy);
            }
            println!(
                "selected gamma={} n_aug={} alpha={}",
                result.best.tune.gamma, result.best.n_aug, result.best.tune.alpha
            );
            print!("{}", result.report.to_table());
            if let Some(p) = report {
                write(p, &result.report.to_tsv())?;
            }
        }
    }
    Ok(())
}

/// Configuration file (or defaults) with the global flags applied on top.
fn settings(cli: &Cli) -> Result<ConfigFile> {
    let mut file = match &cli.config {
        Some(p) => parse_config(p).map_err(|e| CliError::Usage(format!("config: {e}")))?,
        None => ConfigFile {
            experiment: ExperimentConfig::default(),
            grid: Default::default(),
        },
    };
    let cfg = &mut file.experiment;
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        cfg.threads = t;
    }
    if let Some(t) = cli.task {
        cfg.task = match t {
            TaskArg::Node => TaskMode::Node,
            TaskArg::Graph => TaskMode::Graph,
        };
    }
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    Ok(file)
}

fn load_target(dir: &Path, task: TaskMode) -> Result<Target> {
    Ok(match task {
        TaskMode::Node => Target::Nodes(load_graph(dir)?),
        TaskMode::Graph => Target::Graphs(load_graph_dataset(dir)?),
    })
}

fn pretrain_from(sources: &[PathBuf], cfg: &ExperimentConfig) -> Result<GcnParams> {
    let graphs = sources.iter().map(load_graph).collect::<tgprompt::error::Result<Vec<_>>>()?;
    Ok(pretrain_sources(&graphs, cfg)?)
}

fn encoder_params(src: &EncoderSource, cfg: &ExperimentConfig) -> Result<GcnParams> {
    match (&src.model, &src.sources) {
        (Some(m), _) => Ok(load_params(m)?),
        (None, Some(s)) => pretrain_from(s, cfg),
        (None, None) => Err(CliError::Usage("give --model or --sources".into())),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// A dataset encoded under a saved model, with its split.
struct Loaded {
    emb: LayerEmbeddings,
    split: FewShotSplit,
    labels: Vec<Option<usize>>,
}

impl Loaded {
    fn open(fixed: &Fixed, cfg: &ExperimentConfig) -> Result<Self> {
        let params = load_params(&fixed.model)?;
        let target = load_target(&fixed.graph, cfg.task)?;
        let labels = target.item_labels();
        let split = read_split(&fixed.split, &labels, target.num_classes())?;
        let aligned = align_target(&target, params.input_dim())?;
        let emb = embed_target(&aligned, &params, cfg.hops)?.embeddings;
        Ok(Loaded { emb, split, labels })
    }

    fn centroids(&self) -> Result<Centroids> {
        Ok(init_centroids(&self.emb, &self.split)?)
    }

    fn predict(&self, prompts: &Path, nodes: &[usize]) -> Result<Vec<usize>> {
        let prompts = load_prompts(prompts)?;
        Ok(predict(&self.emb, &self.centroids()?, &prompts, nodes)?)
    }
}
