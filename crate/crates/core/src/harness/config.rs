//! `key=value` experiment files. Blank lines and `#` comments are skipped;
//! unknown keys are errors.

use std::path::Path;

use super::{ExperimentConfig, Grid, TaskMode};
use crate::error::{Error, Result};
use crate::graph::PerturbConfig;
use crate::textio::{content_lines, parse_num, read_to_string};

/// A parsed file: the run settings and any grid-search lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub grid: Grid,
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let path = path.as_ref();
    parse_config_str(&read_to_string(path)?, path)
}

fn parse_list<T: std::str::FromStr>(path: &Path, line: usize, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|t| parse_num(path, line, t)).collect()
}

fn parse_bool(path: &Path, line: usize, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::parse(path, line, format!("expected a boolean, found {v:?}"))),
    }
}

fn perturb(cfg: &mut ExperimentConfig) -> &mut PerturbConfig {
    cfg.perturb.get_or_insert(PerturbConfig {
        edge_drop_rate: 0.0,
        feature_shuffle_rate: 0.0,
        seed: 0,
    })
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<ConfigFile> {
    let mut file = ConfigFile::default();
    let cfg = &mut file.experiment;
    for (line, raw) in content_lines(text) {
        let l = raw.trim();
        if l.starts_with('#') {
            continue;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line, "expected key=value"))?;
        let (k, v) = (k.trim(), v.trim());
        let num = |v: &str| parse_num::<f64>(path, line, v);
        let count = |v: &str| parse_num::<usize>(path, line, v);
        match k {
            "task" => {
                cfg.task = match v {
                    "node" => TaskMode::Node,
                    "graph" => TaskMode::Graph,
                    _ => return Err(Error::parse(path, line, "task must be node or graph")),
                }
            }
            "hops" => cfg.hops = if v == "none" { None } else { Some(count(v)?) },
            "shots" => cfg.shots = count(v)?,
            "n_aug" => cfg.n_aug = count(v)?,
            "align_dim" => cfg.align_dim = count(v)?,
            "use_augmentation" => cfg.use_augmentation = parse_bool(path, line, v)?,
            "use_centroid_prompt" => cfg.use_centroid_prompt = parse_bool(path, line, v)?,
            "use_layer_prompt" => cfg.use_layer_prompt = parse_bool(path, line, v)?,
            "seeds" => cfg.seeds = parse_list(path, line, v)?,
            "threads" => cfg.threads = count(v)?,
            "tau" => cfg.tune.tau = num(v)?,
            "gamma" => cfg.tune.gamma = num(v)?,
            "alpha" => cfg.tune.alpha = num(v)?,
            "steps" => cfg.tune.steps = count(v)?,
            "beta_init_std" => cfg.tune.beta_init_std = num(v)?,
            "patience" => cfg.tune.patience = count(v)?,
            "learning_rate" => cfg.pretrain.learning_rate = num(v)?,
            "epochs" => cfg.pretrain.epochs = count(v)?,
            "neg_ratio" => cfg.pretrain.neg_ratio = count(v)?,
            "adam_beta1" => cfg.pretrain.adam_beta1 = num(v)?,
            "adam_beta2" => cfg.pretrain.adam_beta2 = num(v)?,
            "adam_eps" => cfg.pretrain.adam_eps = num(v)?,
            "pretrain_seed" => cfg.pretrain.seed = parse_num(path, line, v)?,
            "hidden_dim" => cfg.pretrain.hidden_dim = count(v)?,
            "num_layers" => cfg.pretrain.num_layers = count(v)?,
            "slope" => cfg.pretrain.slope = num(v)?,
            "edge_holdout_fraction" => cfg.pretrain.edge_holdout_fraction = num(v)?,
            "edge_drop_rate" => perturb(cfg).edge_drop_rate = num(v)?,
            "feature_shuffle_rate" => perturb(cfg).feature_shuffle_rate = num(v)?,
            "perturb_seed" => perturb(cfg).seed = parse_num(path, line, v)?,
            "grid_gamma" => file.grid.gamma = parse_list(path, line, v)?,
            "grid_n_aug" => file.grid.n_aug = parse_list(path, line, v)?,
            "grid_alpha" => file.grid.alpha = parse_list(path, line, v)?,
            _ => return Err(Error::parse(path, line, format!("unknown key {k:?}"))),
        }
    }
    Ok(file)
}
