//! Gauss-Newton-Bartlett diagonal Hessian estimate for Sophia's
//! preconditioner.
//!
//! Labels are resampled from the model's own softmax, the gradient is taken
//! on the sampled labels, and `batch_size * g~ (.) g~` estimates the
//! Gauss-Newton diagonal. The quadratic bowl uses its exact diagonal.

use crate::error::{Error, Result};
use crate::math::{RandomStream, Tensor};
use crate::zoo::{Family, Model};

pub fn gnb_hessian_estimate(
    model: &mut Model,
    features: &Tensor,
    labels: &[usize],
    stream: &mut RandomStream,
) -> Result<Vec<Tensor>> {
    if model.spec.family == Family::QuadBowl {
        let diag = model.quad_diagonal();
        return Ok(vec![Tensor::from_vec(&[diag.len()], diag)?]);
    }
    if model.classes < 2 {
        return Err(Error::Config(
            "hessian estimate needs a classification model or exact-diagonal support".into(),
        ));
    }
    let batch = features.rows();
    // Forward once for the current softmax; the labels only shape the loss.
    let (_, logits) = model.forward_loss(features, labels)?;
    let k = logits.cols();
    let mut sampled = Vec::with_capacity(batch);
    for r in 0..batch {
        let row = &logits.data()[r * k..(r + 1) * k];
        let maxv = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|z| (z - maxv).exp()).sum();
        let u = stream.uniform();
        let mut acc = 0.0;
        let mut pick = k - 1;
        for (c, &z) in row.iter().enumerate() {
            acc += (z - maxv).exp() / denom;
            if u < acc {
                pick = c;
                break;
            }
        }
        sampled.push(pick);
    }
    model.forward_loss(features, &sampled)?;
    let grads = model.backward(features, &sampled)?;
    let mut h = Vec::with_capacity(grads.len());
    for g in grads {
        let mut t = Tensor::zeros(g.shape());
        for (hv, &gv) in t.data_mut().iter_mut().zip(g.data()) {
            *hv = batch as f64 * gv * gv;
        }
        h.push(t);
    }
    Ok(h)
}
