//! Plain-text dataset directories.
//!
//! ```text
//! meta.txt      num_nodes=<N> / num_classes=<C> / feature_dim=<d>
//! edges.tsv     src<TAB>dst, 0-based
//! features.tsv  N lines of d whitespace-separated floats
//! labels.tsv    N lines, one integer each, -1 for unlabelled
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{FewShotSplit, Graph};
use crate::error::{Error, Result};
use crate::textio::{content_lines, parse_header, parse_num, parse_row, read_to_string, write_string};

pub(crate) fn parse_features(path: &Path, n: usize, d: usize) -> Result<Array2<f64>> {
    let text = read_to_string(path)?;
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (line, l) in content_lines(&text) {
        let row = parse_row(path, line, l)?;
        if row.len() != d {
            return Err(Error::parse(
                path,
                line,
                format!("expected {d} values, found {}", row.len()),
            ));
        }
        data.extend(row);
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(path, 0, format!("expected {n} rows, found {rows}")));
    }
    Ok(Array2::from_shape_vec((n, d), data).expect("shape checked"))
}

pub(crate) fn parse_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read_to_string(path)?;
    content_lines(&text)
        .map(|(line, l)| {
            let mut it = l.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => {
                    Ok((parse_num(path, line, a)?, parse_num(path, line, b)?))
                }
                _ => Err(Error::parse(path, line, "expected src<TAB>dst")),
            }
        })
        .collect()
}

pub(crate) fn format_features(features: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in features.rows() {
        let mut first = true;
        for x in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub(crate) fn format_edges(edges: &[(usize, usize)]) -> String {
    let mut out = String::new();
    for (u, v) in edges {
        writeln!(out, "{u}\t{v}").unwrap();
    }
    out
}

pub fn load_graph(dir: impl AsRef<Path>) -> Result<Graph> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.txt");
    let meta = read_to_string(&meta_path)?;
    let [n, c, d] = parse_header(&meta_path, &meta, &["num_nodes", "num_classes", "feature_dim"])?[..]
    else {
        unreachable!()
    };

    let edges_path = dir.join("edges.tsv");
    let edges = parse_edges(&edges_path)?;
    if let Some(&(u, v)) = edges.iter().find(|(u, v)| *u >= n || *v >= n) {
        return Err(Error::Data(format!(
            "{}: edge ({u}, {v}) outside 0..{n}",
            edges_path.display()
        )));
    }

    let features = parse_features(&dir.join("features.tsv"), n, d)?;

    let labels_path = dir.join("labels.tsv");
    let text = read_to_string(&labels_path)?;
    let mut labels = Vec::with_capacity(n);
    for (line, l) in content_lines(&text) {
        let y: i64 = parse_num(&labels_path, line, l)?;
        labels.push(match y {
            -1 => None,
            y if y >= 0 && (y as usize) < c => Some(y as usize),
            y => {
                return Err(Error::parse(
                    &labels_path,
                    line,
                    format!("label {y} outside -1 or 0..{c}"),
                ))
            }
        });
    }
    if labels.len() != n {
        return Err(Error::parse(
            &labels_path,
            0,
            format!("expected {n} labels, found {}", labels.len()),
        ));
    }

    Graph::from_edges(n, &edges, features, labels, c)
}

/// Writes a dataset directory; each undirected edge is stored once.
pub fn save_graph(g: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_string(
        &dir.join("meta.txt"),
        &format!(
            "num_nodes={}\nnum_classes={}\nfeature_dim={}\n",
            g.num_nodes(),
            g.num_classes(),
            g.feature_dim()
        ),
    )?;
    write_string(&dir.join("edges.tsv"), &format_edges(&g.undirected_edges()))?;
    write_string(&dir.join("features.tsv"), &format_features(g.features()))?;
    let mut labels = String::new();
    for l in g.labels() {
        match l {
            Some(c) => writeln!(labels, "{c}").unwrap(),
            None => labels.push_str("-1\n"),
        }
    }
    write_string(&dir.join("labels.tsv"), &labels)
}

/// Writes `node_id<TAB>role` lines with roles `fs`, `val`, `test`.
pub fn write_split(split: &FewShotSplit, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (u, _) in &split.fs_nodes {
        writeln!(out, "{u}\tfs").unwrap();
    }
    for u in &split.val_nodes {
        writeln!(out, "{u}\tval").unwrap();
    }
    for u in &split.test_nodes {
        writeln!(out, "{u}\ttest").unwrap();
    }
    write_string(path.as_ref(), &out)
}

/// Reads a split file; few-shot labels are taken from `labels`.
pub fn read_split(
    path: impl AsRef<Path>,
    labels: &[Option<usize>],
    num_classes: usize,
) -> Result<FewShotSplit> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut fs_nodes = Vec::new();
    let mut val_nodes = Vec::new();
    let mut test_nodes = Vec::new();
    let mut seen = vec![false; labels.len()];
    for (line, l) in content_lines(&text) {
        let (id, role) = l
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line, "expected node_id<TAB>role"))?;
        let u: usize = parse_num(path, line, id)?;
        if u >= labels.len() {
            return Err(Error::parse(path, line, format!("node {u} out of range")));
        }
        if std::mem::replace(&mut seen[u], true) {
            return Err(Error::parse(path, line, format!("node {u} listed twice")));
        }
        let label = labels[u]
            .ok_or_else(|| Error::parse(path, line, format!("node {u} is unlabelled")))?;
        match role.trim() {
            "fs" => fs_nodes.push((u, label)),
            "val" => val_nodes.push(u),
            "test" => test_nodes.push(u),
            other => return Err(Error::parse(path, line, format!("unknown role {other:?}"))),
        }
    }
    let mut per_class = vec![0usize; num_classes];
    for &(_, c) in &fs_nodes {
        per_class[c] += 1;
    }
    let shots = per_class[0];
    if shots == 0 || per_class.iter().any(|&k| k != shots) {
        return Err(Error::Data(format!(
            "{}: few-shot counts per class differ: {per_class:?}",
            path.display()
        )));
    }
    Ok(FewShotSplit {
        shots_per_class: shots,
        num_classes,
        fs_nodes,
        val_nodes,
        test_nodes,
    })
}
