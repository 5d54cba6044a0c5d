//! Class centroids, layer-wise prediction entropy, pivot-layer choice,
//! entropy-ranked augmentation and complementary labels.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::gcn::LayerEmbeddings;
use crate::graph::FewShotSplit;

/// Norm floor used by [`cosine_sim`].
pub const COSINE_EPS: f64 = 1e-12;

/// `a·b / (max(‖a‖, ε) · max(‖b‖, ε))`, clamped to `[-1, 1]`.
pub fn cosine_sim(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            context: "cosine operand length",
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(cosine_unchecked(a, b))
}

pub(crate) fn cosine_unchecked(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let na = a.dot(&a).sqrt().max(COSINE_EPS);
    let nb = b.dot(&b).sqrt().max(COSINE_EPS);
    (a.dot(&b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Shannon entropy in nats, with `0 · ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    h.max(0.0)
}

/// Index of the first maximum.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the first minimum.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// One `C × d_l` matrix per layer `0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    pub layers: Vec<Array2<f64>>,
}

impl Centroids {
    pub fn num_classes(&self) -> usize {
        self.layers[0].nrows()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len() - 1
    }
}

fn check_rows(emb: &LayerEmbeddings, ids: impl IntoIterator<Item = usize>) -> Result<()> {
    let n = emb.num_rows();
    match ids.into_iter().find(|&u| u >= n) {
        Some(u) => Err(Error::InvalidArgument(format!(
            "node {u} outside embedding table of {n} rows"
        ))),
        None => Ok(()),
    }
}

fn check_compatible(emb: &LayerEmbeddings, cents: &Centroids) -> Result<()> {
    if emb.layers.len() != cents.layers.len() {
        return Err(Error::Dimension {
            context: "centroid layer count",
            expected: emb.layers.len(),
            found: cents.layers.len(),
        });
    }
    for (h, e) in emb.layers.iter().zip(&cents.layers) {
        if h.ncols() != e.ncols() {
            return Err(Error::Dimension {
                context: "centroid width",
                expected: h.ncols(),
                found: e.ncols(),
            });
        }
    }
    Ok(())
}

/// Per-class mean of the few-shot rows, at every layer.
pub fn init_centroids(emb: &LayerEmbeddings, split: &FewShotSplit) -> Result<Centroids> {
    check_rows(emb, split.fs_nodes.iter().map(|p| p.0))?;
    let c = split.num_classes;
    let mut counts = vec![0usize; c];
    for &(_, y) in &split.fs_nodes {
        if y >= c {
            return Err(Error::InvalidArgument(format!("label {y} outside {c} classes")));
        }
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&k| k == 0) {
        return Err(Error::Data(format!("class {empty} has no few-shot nodes")));
    }
    let layers = emb
        .layers
        .iter()
        .map(|h| {
            let mut e = Array2::zeros((c, h.ncols()));
            for &(u, y) in &split.fs_nodes {
                let mut row = e.row_mut(y);
                row += &h.row(u);
            }
            for (y, &k) in counts.iter().enumerate() {
                e.row_mut(y).mapv_inplace(|x| x / k as f64);
            }
            e
        })
        .collect();
    Ok(Centroids { layers })
}

/// Cosine similarity of item `u` to every class centroid at one layer.
pub(crate) fn class_sims(h: &Array2<f64>, e: &Array2<f64>, u: usize) -> Vec<f64> {
    e.rows().into_iter().map(|ec| cosine_unchecked(h.row(u), ec)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub test_nodes: Vec<usize>,
    /// `probs[l]` is `|test| × C`, rows aligned with `test_nodes`.
    pub probs: Vec<Array2<f64>>,
    /// `entropies[l][i]` for test node `test_nodes[i]`.
    pub entropies: Vec<Vec<f64>>,
    pub mean_entropy: Vec<f64>,
    pub pivot_layer: usize,
    /// Argmax class at the pivot layer, aligned with `test_nodes`.
    pub pseudo_labels: Vec<usize>,
}

/// Softmax over raw cosine similarities (no temperature), entropy per test
/// node and layer, and the layer with the lowest mean entropy.
pub fn entropy_report(
    emb: &LayerEmbeddings,
    cents: &Centroids,
    test_nodes: &[usize],
) -> Result<EntropyReport> {
    if test_nodes.is_empty() {
        return Err(Error::InvalidArgument("entropy report needs test nodes".into()));
    }
    check_compatible(emb, cents)?;
    check_rows(emb, test_nodes.iter().copied())?;
    let c = cents.num_classes();
    let mut probs = Vec::with_capacity(emb.layers.len());
    let mut entropies = Vec::with_capacity(emb.layers.len());
    for (h, e) in emb.layers.iter().zip(&cents.layers) {
        let mut p_l = Array2::zeros((test_nodes.len(), c));
        let mut h_l = Vec::with_capacity(test_nodes.len());
        for (i, &u) in test_nodes.iter().enumerate() {
            let p = softmax(&class_sims(h, e, u));
            h_l.push(entropy(&p));
            p_l.row_mut(i).assign(&ArrayView1::from(&p));
        }
        probs.push(p_l);
        entropies.push(h_l);
    }
    let mean_entropy: Vec<f64> = entropies
        .iter()
        .map(|h| h.iter().sum::<f64>() / h.len() as f64)
        .collect();
    let pivot_layer = argmin(&mean_entropy);
    let pseudo_labels = probs[pivot_layer]
        .rows()
        .into_iter()
        .map(|p| argmax(p.as_slice().expect("standard layout")))
        .collect();
    Ok(EntropyReport {
        test_nodes: test_nodes.to_vec(),
        probs,
        entropies,
        mean_entropy,
        pivot_layer,
        pseudo_labels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSplit {
    pub n_aug: usize,
    /// `(node, pseudo label)`, grouped by class, lowest entropy first.
    pub aug_nodes: Vec<(usize, usize)>,
    /// Original few-shot pairs followed by `aug_nodes`.
    pub combined_fs: Vec<(usize, usize)>,
}

/// Adds, per class, the `n_aug` test nodes predicted as that class with the
/// lowest pivot-layer entropy (ties by node id).
pub fn augment(report: &EntropyReport, split: &FewShotSplit, n_aug: usize) -> AugmentedSplit {
    let ent = &report.entropies[report.pivot_layer];
    let fs: std::collections::HashSet<usize> = split.fs_nodes.iter().map(|p| p.0).collect();
    let mut aug_nodes = Vec::new();
    for class in 0..split.num_classes {
        let mut cands: Vec<(f64, usize)> = report
            .test_nodes
            .iter()
            .zip(&report.pseudo_labels)
            .enumerate()
            .filter(|(_, (u, &y))| y == class && !fs.contains(u))
            .map(|(i, (&u, _))| (ent[i], u))
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        aug_nodes.extend(cands.into_iter().take(n_aug).map(|(_, u)| (u, class)));
    }
    let mut combined_fs = split.fs_nodes.clone();
    combined_fs.extend_from_slice(&aug_nodes);
    AugmentedSplit {
        n_aug,
        aug_nodes,
        combined_fs,
    }
}

/// `(node, class)` with the least similar initial centroid at `pivot`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplementaryLabels {
    pub labels: Vec<(usize, usize)>,
}

impl ComplementaryLabels {
    /// Fraction of labelled nodes whose complementary label differs from
    /// their true label.
    pub fn safety_rate(&self, truth: &[Option<usize>]) -> Option<f64> {
        let judged: Vec<bool> = self
            .labels
            .iter()
            .filter_map(|&(u, yb)| truth.get(u).copied().flatten().map(|y| y != yb))
            .collect();
        (!judged.is_empty())
            .then(|| judged.iter().filter(|&&ok| ok).count() as f64 / judged.len() as f64)
    }
}

pub fn complementary_labels(
    emb: &LayerEmbeddings,
    cents: &Centroids,
    pivot: usize,
    test_nodes: &[usize],
) -> Result<ComplementaryLabels> {
    check_compatible(emb, cents)?;
    check_rows(emb, test_nodes.iter().copied())?;
    if pivot >= emb.layers.len() {
        return Err(Error::InvalidArgument(format!(
            "pivot layer {pivot} outside 0..={}",
            emb.num_layers()
        )));
    }
    let (h, e) = (&emb.layers[pivot], &cents.layers[pivot]);
    let labels = test_nodes
        .iter()
        .map(|&u| (u, argmin(&class_sims(h, e, u))))
        .collect();
    Ok(ComplementaryLabels { labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        cosine_sim(ArrayView1::from(a), ArrayView1::from(b)).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cos(&[3.0, 4.0], &[3.0, 4.0]), 1.0);
        assert_eq!(cos(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cos(&[1.0, 0.0], &[-2.0, 0.0]), -1.0);
        assert_eq!(cos(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!(cosine_sim(ArrayView1::from(&[1.0][..]), ArrayView1::from(&[1.0, 2.0][..])).is_err());
    }

    #[test]
    fn softmax_of_opposite_sims() {
        let p = softmax(&[1.0, -1.0]);
        let e2 = 1f64.exp().powi(2);
        assert!((p[0] - e2 / (e2 + 1.0)).abs() < 1e-15);
        let h = -(p[0] * p[0].ln() + p[1] * p[1].ln());
        assert!((entropy(&p) - h).abs() < 1e-15);
        assert!((entropy(&p) - 0.365_333_855_087).abs() < 1e-11);
    }

    #[test]
    fn uniform_entropy_is_ln_c() {
        let p = softmax(&[0.3; 5]);
        assert!((entropy(&p) - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
        assert_eq!(argmin(&[0.5, 0.1, 0.1]), 1);
    }

    fn split(fs: Vec<(usize, usize)>, c: usize, test: Vec<usize>) -> FewShotSplit {
        FewShotSplit {
            shots_per_class: 1,
            num_classes: c,
            fs_nodes: fs,
            val_nodes: vec![],
            test_nodes: test,
        }
    }

    #[test]
    fn centroid_is_class_mean() {
        let emb = LayerEmbeddings {
            layers: vec![array![[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]],
        };
        let s = FewShotSplit {
            shots_per_class: 2,
            ..split(vec![(0, 0), (1, 0), (2, 1)], 2, vec![])
        };
        let c = init_centroids(&emb, &s).unwrap();
        assert_eq!(c.layers[0], array![[0.5, 0.5], [5.0, 5.0]]);
    }

    #[test]
    fn empty_class_is_rejected() {
        let emb = LayerEmbeddings {
            layers: vec![array![[1.0, 0.0], [0.0, 1.0]]],
        };
        assert!(init_centroids(&emb, &split(vec![(0, 0)], 2, vec![])).is_err());
    }

    #[test]
    fn pivot_prefers_confident_layer() {
        // layer 0 separates the two test nodes, layer 1 sees both centroids equally
        let emb = LayerEmbeddings {
            layers: vec![
                array![[1.0, 0.0], [-1.0, 0.0], [1.0, 0.1], [-1.0, 0.1]],
                array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]],
            ],
        };
        let s = split(vec![(0, 0), (1, 1)], 2, vec![2, 3]);
        let c = init_centroids(&emb, &s).unwrap();
        let r = entropy_report(&emb, &c, &s.test_nodes).unwrap();
        assert!((r.mean_entropy[1] - 2f64.ln()).abs() < 1e-12);
        assert_eq!(r.pivot_layer, 0);
        assert_eq!(r.pseudo_labels, vec![0, 1]);
    }

    #[test]
    fn augment_picks_lowest_entropy() {
        let report = EntropyReport {
            test_nodes: vec![10, 11, 12],
            probs: vec![Array2::zeros((3, 1))],
            entropies: vec![vec![0.1, 0.5, 0.3]],
            mean_entropy: vec![0.3],
            pivot_layer: 0,
            pseudo_labels: vec![0, 0, 0],
        };
        let s = split(vec![(0, 0)], 1, vec![10, 11, 12]);
        let a = augment(&report, &s, 2);
        assert_eq!(a.aug_nodes, vec![(10, 0), (12, 0)]);
        assert_eq!(a.combined_fs, vec![(0, 0), (10, 0), (12, 0)]);
        assert_eq!(augment(&report, &s, 0).combined_fs, s.fs_nodes);
    }

    #[test]
    fn antiparallel_centroid_is_complementary() {
        let emb = LayerEmbeddings {
            layers: vec![array![[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]]],
        };
        let s = split(vec![(0, 0), (1, 1)], 2, vec![2]);
        let c = init_centroids(&emb, &s).unwrap();
        let cl = complementary_labels(&emb, &c, 0, &[2]).unwrap();
        assert_eq!(cl.labels, vec![(2, 1)]);
        assert!(complementary_labels(&emb, &c, 1, &[2]).is_err());
    }
}
