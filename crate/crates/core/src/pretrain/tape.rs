//! Link-prediction loss and its reverse-mode gradient through the encoder.
//!
//! The tape records, per layer, the layer input `H^(l-1)` and the
//! pre-activation `Z^(l) = Â (H^(l-1) W^(l)) + b^(l)`. The backward pass
//! walks it in reverse:
//!
//! ```text
//! dZ      = dH ⊙ σ'(Z)
//! db      = Σ_rows dZ
//! G       = Âᵀ dZ = Â dZ          (Â is symmetric)
//! dW      = H^(l-1)ᵀ G
//! dH^(l-1) = G W^(l)ᵀ
//! ```

use ndarray::{Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::gcn::{leaky, GcnParams, NormalizedAdjacency};

struct Tape {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    output: Array2<f64>,
}

fn forward(params: &GcnParams, adj: &NormalizedAdjacency, features: &Array2<f64>) -> Tape {
    let mut inputs = Vec::with_capacity(params.num_layers());
    let mut pre_activations = Vec::with_capacity(params.num_layers());
    let mut h = features.clone();
    for (w, b) in params.weights.iter().zip(&params.biases) {
        let mut z = adj.spmm(&h.dot(w));
        z += b;
        let next = z.mapv(|x| leaky(x, params.slope));
        inputs.push(h);
        pre_activations.push(z);
        h = next;
    }
    Tape {
        inputs,
        pre_activations,
        output: h,
    }
}

fn backward(
    params: &GcnParams,
    adj: &NormalizedAdjacency,
    tape: &Tape,
    d_out: Array2<f64>,
) -> GcnParams {
    let mut grads = params.zeros_like();
    let mut d_h = d_out;
    for l in (0..params.num_layers()).rev() {
        let mut d_z = d_h;
        Zip::from(&mut d_z)
            .and(&tape.pre_activations[l])
            .for_each(|g, &z| {
                if z < 0.0 {
                    *g *= params.slope;
                }
            });
        grads.biases[l] = d_z.sum_axis(Axis(0));
        let g = adj.spmm(&d_z);
        grads.weights[l] = tape.inputs[l].t().dot(&g);
        d_h = if l > 0 {
            g.dot(&params.weights[l].t())
        } else {
            Array2::zeros((0, 0))
        };
    }
    grads
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn pair_scores(z: &Array2<f64>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs.iter().map(|&(u, v)| z.row(u).dot(&z.row(v))).collect()
}

/// Mean BCE over positive pairs plus mean BCE over negative pairs, on
/// logistic final-layer dot products. An empty negative list contributes 0.
pub fn lp_loss(
    params: &GcnParams,
    adj: &NormalizedAdjacency,
    features: &Array2<f64>,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> Result<f64> {
    let tape = forward(params, adj, features);
    score_loss(&tape.output, pos, neg)
}

fn score_loss(z: &Array2<f64>, pos: &[(usize, usize)], neg: &[(usize, usize)]) -> Result<f64> {
    if pos.is_empty() {
        return Err(Error::InvalidArgument("link prediction needs positive pairs".into()));
    }
    let pos_term =
        pair_scores(z, pos).iter().map(|&s| softplus(-s)).sum::<f64>() / pos.len() as f64;
    let neg_term = if neg.is_empty() {
        0.0
    } else {
        pair_scores(z, neg).iter().map(|&s| softplus(s)).sum::<f64>() / neg.len() as f64
    };
    let loss = pos_term + neg_term;
    if !loss.is_finite() {
        return Err(Error::NonFinite("link prediction loss".into()));
    }
    Ok(loss)
}

/// Loss and exact gradient with respect to every weight and bias.
pub fn lp_loss_and_grads(
    params: &GcnParams,
    adj: &NormalizedAdjacency,
    features: &Array2<f64>,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> Result<(f64, GcnParams)> {
    let tape = forward(params, adj, features);
    let z = &tape.output;
    let loss = score_loss(z, pos, neg)?;

    let mut d_z = Array2::zeros(z.raw_dim());
    let mut push = |pairs: &[(usize, usize)], weight: f64, positive: bool| {
        for (&(u, v), s) in pairs.iter().zip(pair_scores(z, pairs)) {
            let g = if positive {
                -logistic(-s) * weight
            } else {
                logistic(s) * weight
            };
            let zv = z.row(v).to_owned();
            let zu = z.row(u).to_owned();
            d_z.row_mut(u).scaled_add(g, &zv);
            d_z.row_mut(v).scaled_add(g, &zu);
        }
    };
    push(pos, 1.0 / pos.len() as f64, true);
    if !neg.is_empty() {
        push(neg, 1.0 / neg.len() as f64, false);
    }
    Ok((loss, backward(params, adj, &tape, d_z)))
}
