use super::Graph;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Few-shot / validation / test partition of the labelled nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotSplit {
    pub shots_per_class: usize,
    pub num_classes: usize,
    /// `(node, label)`, `shots_per_class` entries per class, grouped by class.
    pub fs_nodes: Vec<(usize, usize)>,
    pub val_nodes: Vec<usize>,
    pub test_nodes: Vec<usize>,
}

impl FewShotSplit {
    /// `(node, label)` pairs for the validation nodes.
    pub fn labelled_val(&self, labels: &[Option<usize>]) -> Vec<(usize, usize)> {
        self.val_nodes
            .iter()
            .filter_map(|&u| labels[u].map(|c| (u, c)))
            .collect()
    }
}

pub fn make_split(g: &Graph, shots: usize, seed: u64) -> Result<FewShotSplit> {
    make_split_from_labels(g.labels(), g.num_classes(), shots, seed)
}

/// Samples `shots` few-shot items per class, then splits the remaining
/// labelled items `floor(r / 10)` : rest into validation and test.
///
/// Class members are visited in ascending id order before shuffling, so the
/// result depends only on `labels` and `seed`.
pub fn make_split_from_labels(
    labels: &[Option<usize>],
    num_classes: usize,
    shots: usize,
    seed: u64,
) -> Result<FewShotSplit> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots per class must be at least 1".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (u, l) in labels.iter().enumerate() {
        if let Some(c) = *l {
            by_class[c].push(u);
        }
    }
    let mut rng = SeededRng::new(seed);
    let mut fs_nodes = Vec::with_capacity(shots * num_classes);
    let mut taken = vec![false; labels.len()];
    for (c, members) in by_class.iter_mut().enumerate() {
        if members.len() < shots {
            return Err(Error::Data(format!(
                "class {c} has {} labelled nodes, fewer than {shots} shots",
                members.len()
            )));
        }
        rng.shuffle(members);
        for &u in &members[..shots] {
            fs_nodes.push((u, c));
            taken[u] = true;
        }
    }
    let mut rest: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(u, l)| l.is_some() && !taken[*u])
        .map(|(u, _)| u)
        .collect();
    if rest.len() < 10 {
        return Err(Error::Data(format!(
            "only {} labelled nodes remain after few-shot sampling, need at least 10",
            rest.len()
        )));
    }
    rng.shuffle(&mut rest);
    let n_val = rest.len() / 10;
    let test_nodes = rest.split_off(n_val);
    Ok(FewShotSplit {
        shots_per_class: shots,
        num_classes,
        fs_nodes,
        val_nodes: rest,
        test_nodes,
    })
}
