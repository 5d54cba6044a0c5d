//! Labelled graph collections for graph-level classification.
//!
//! ```text
//! meta.txt                 num_graphs=<G> / num_classes=<C> / feature_dim=<d>
//! graphs.tsv               graph_id<TAB>node_count<TAB>label, ids 0..G in order
//! graphs/<id>/edges.tsv    src<TAB>dst, local 0-based ids
//! graphs/<id>/features.tsv node_count rows of d floats
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::io::{format_edges, format_features, parse_edges, parse_features};
use super::Graph;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::textio::{content_lines, parse_header, parse_num, read_to_string, write_string};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub graphs: Vec<Graph>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl GraphDataset {
    pub fn new(graphs: Vec<Graph>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if graphs.len() != labels.len() {
            return Err(Error::Dimension {
                context: "graph label count",
                expected: graphs.len(),
                found: labels.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Data(format!("graph label {y} outside 0..{num_classes}")));
        }
        if let Some(i) = graphs.iter().position(|g| g.num_nodes() == 0) {
            return Err(Error::Data(format!("graph {i} has no nodes")));
        }
        let d = graphs.first().map_or(0, Graph::feature_dim);
        if let Some(g) = graphs.iter().find(|g| g.feature_dim() != d) {
            return Err(Error::Dimension {
                context: "graph feature width",
                expected: d,
                found: g.feature_dim(),
            });
        }
        Ok(Self {
            graphs,
            labels,
            num_classes,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, Graph::feature_dim)
    }

    /// Labels in the per-item form the split sampler takes.
    pub fn item_labels(&self) -> Vec<Option<usize>> {
        self.labels.iter().map(|&y| Some(y)).collect()
    }
}

pub fn load_graph_dataset(dir: impl AsRef<Path>) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.txt");
    let meta = read_to_string(&meta_path)?;
    let [count, c, d] = parse_header(&meta_path, &meta, &["num_graphs", "num_classes", "feature_dim"])?[..]
    else {
        unreachable!()
    };

    let index_path = dir.join("graphs.tsv");
    let index = read_to_string(&index_path)?;
    let mut graphs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for (line, l) in content_lines(&index) {
        let cols: Vec<&str> = l.split_whitespace().collect();
        let [id, n, y] = cols[..] else {
            return Err(Error::parse(&index_path, line, "expected graph_id, node_count, label"));
        };
        let id: usize = parse_num(&index_path, line, id)?;
        if id != graphs.len() {
            return Err(Error::parse(&index_path, line, format!("expected graph id {}", graphs.len())));
        }
        let n: usize = parse_num(&index_path, line, n)?;
        let y: usize = parse_num(&index_path, line, y)?;
        let gdir = dir.join("graphs").join(id.to_string());
        let edges_path = gdir.join("edges.tsv");
        let edges = parse_edges(&edges_path)?;
        let features = parse_features(&gdir.join("features.tsv"), n, d)?;
        let g = Graph::from_edges(n, &edges, features, vec![None; n], c)
            .map_err(|e| Error::Data(format!("{}: {e}", edges_path.display())))?;
        graphs.push(g);
        labels.push(y);
    }
    if graphs.len() != count {
        return Err(Error::parse(
            &index_path,
            0,
            format!("meta.txt declares {count} graphs, index lists {}", graphs.len()),
        ));
    }
    GraphDataset::new(graphs, labels, c)
}

pub fn save_graph_dataset(ds: &GraphDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_string(
        &dir.join("meta.txt"),
        &format!(
            "num_graphs={}\nnum_classes={}\nfeature_dim={}\n",
            ds.graphs.len(),
            ds.num_classes,
            ds.feature_dim()
        ),
    )?;
    let mut index = String::new();
    for (i, (g, y)) in ds.graphs.iter().zip(&ds.labels).enumerate() {
        writeln!(index, "{i}\t{}\t{y}", g.num_nodes()).unwrap();
        let gdir = dir.join("graphs").join(i.to_string());
        fs::create_dir_all(&gdir).map_err(|e| Error::io(&gdir, e))?;
        write_string(&gdir.join("edges.tsv"), &format_edges(&g.undirected_edges()))?;
        write_string(&gdir.join("features.tsv"), &format_features(g.features()))?;
    }
    write_string(&dir.join("graphs.tsv"), &index)
}

/// Synthetic graph-classification data: graphs of class `c` have edge
/// density `p_edge[c]` and features shifted by `feature_shift` on axis
/// `c % feature_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionConfig {
    pub graphs_per_class: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub p_edge: Vec<f64>,
    pub feature_dim: usize,
    pub feature_shift: f64,
    pub seed: u64,
}

pub fn generate_collection(cfg: &CollectionConfig) -> Result<GraphDataset> {
    if cfg.min_nodes == 0 || cfg.min_nodes > cfg.max_nodes {
        return Err(Error::InvalidArgument("need 1 <= min_nodes <= max_nodes".into()));
    }
    if cfg.p_edge.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("p_edge entries must be probabilities".into()));
    }
    let c = cfg.p_edge.len();
    let mut rng = SeededRng::new(cfg.seed);
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..cfg.graphs_per_class * c {
        let y = i % c;
        let n = cfg.min_nodes + rng.below(cfg.max_nodes - cfg.min_nodes + 1);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.bernoulli(cfg.p_edge[y]) {
                    edges.push((u, v));
                }
            }
        }
        let mut f = Array2::from_shape_simple_fn((n, cfg.feature_dim), || rng.normal());
        if cfg.feature_dim > 0 {
            f.column_mut(y % cfg.feature_dim).mapv_inplace(|x| x + cfg.feature_shift);
        }
        graphs.push(Graph::from_edges(n, &edges, f, vec![None; n], c)?);
        labels.push(y);
    }
    GraphDataset::new(graphs, labels, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GraphDataset {
        generate_collection(&CollectionConfig {
            graphs_per_class: 3,
            min_nodes: 1,
            max_nodes: 6,
            p_edge: vec![0.2, 0.8],
            feature_dim: 3,
            feature_shift: 2.0,
            seed: 4,
        })
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let ds = small();
        let t = tempfile::tempdir().unwrap();
        save_graph_dataset(&ds, t.path()).unwrap();
        assert_eq!(load_graph_dataset(t.path()).unwrap(), ds);
    }

    #[test]
    fn out_of_order_index_is_rejected() {
        let ds = small();
        let t = tempfile::tempdir().unwrap();
        save_graph_dataset(&ds, t.path()).unwrap();
        let idx = t.path().join("graphs.tsv");
        let text = fs::read_to_string(&idx).unwrap().replacen("0\t", "7\t", 1);
        fs::write(&idx, text).unwrap();
        assert!(matches!(load_graph_dataset(t.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn labels_alternate_by_class() {
        let ds = small();
        assert_eq!(ds.labels, vec![0, 1, 0, 1, 0, 1]);
        assert!(ds.graphs.iter().all(|g| (1..=6).contains(&g.num_nodes())));
    }
}
