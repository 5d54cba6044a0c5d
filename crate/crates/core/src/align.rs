//! Projection of node features onto their leading right-singular directions,
//! giving every graph the same input width regardless of its raw feature
//! space.
//!
//! The thin SVD is obtained from the eigendecomposition of the smaller Gram
//! matrix (`XᵀX` when `d ≤ N`, otherwise `XXᵀ`). Right-singular vectors are
//! sign-fixed so their largest-magnitude entry is positive; directions beyond
//! the numerical rank become zero columns.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Default aligned width.
pub const DEFAULT_ALIGN_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFeatures {
    /// `N × target_dim`, equal to `X · basis`.
    pub matrix: Array2<f64>,
    pub target_dim: usize,
    /// `d_in × target_dim` right-singular basis; padded columns are zero.
    pub basis: Array2<f64>,
    /// Leading singular values, descending, one per non-padded column.
    pub singular_values: Vec<f64>,
}

pub fn svd_align(features: &Array2<f64>, target_dim: usize) -> Result<AlignedFeatures> {
    if target_dim == 0 {
        return Err(Error::InvalidArgument("alignment dimension must be at least 1".into()));
    }
    let (n, d) = features.dim();
    if n == 0 || d == 0 {
        return Err(Error::Data(format!("cannot align an empty {n}x{d} feature matrix")));
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("features passed to svd_align".into()));
    }

    let right_side = d <= n;
    let gram = if right_side {
        features.t().dot(features)
    } else {
        features.dot(&features.t())
    };
    let m = gram.nrows();
    let eig = SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| gram[[i, j]]));

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let tol = lambda_max * (n.max(d) as f64) * f64::EPSILON;

    let mut basis = Array2::<f64>::zeros((d, target_dim));
    let mut singular_values = Vec::new();
    for (k, &idx) in order.iter().take(target_dim).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= tol || lambda_max == 0.0 {
            break;
        }
        let vec = eig.eigenvectors.column(idx);
        let mut v: Array1<f64> = if right_side {
            Array1::from_iter(vec.iter().copied())
        } else {
            let u = Array1::from_iter(vec.iter().copied());
            features.t().dot(&u) / lambda.sqrt()
        };
        let norm = v.dot(&v).sqrt();
        v /= norm;
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &x)| {
                if x.abs() > bv.abs() {
                    (i, x)
                } else {
                    (bi, bv)
                }
            })
            .1;
        if pivot < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        basis.column_mut(k).assign(&v);
        singular_values.push(lambda.sqrt());
    }

    let matrix = features.dot(&basis);
    Ok(AlignedFeatures {
        matrix,
        target_dim,
        basis,
        singular_values,
    })
}

/// Replaces a graph's features by their aligned projection.
pub fn align_graph(g: &Graph, target_dim: usize) -> Result<Graph> {
    let aligned = svd_align(g.features(), target_dim)?;
    g.with_features(aligned.matrix)
}

/// Aligns several feature matrices that share one feature space with a single
/// basis computed from their row-wise concatenation.
pub fn svd_align_joint(blocks: &[Array2<f64>], target_dim: usize) -> Result<Vec<Array2<f64>>> {
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let stacked = ndarray::concatenate(Axis(0), &views)
        .map_err(|e| Error::Data(format!("cannot stack feature blocks: {e}")))?;
    let aligned = svd_align(&stacked, target_dim)?;
    Ok(blocks.iter().map(|b| b.dot(&aligned.basis)).collect())
}
