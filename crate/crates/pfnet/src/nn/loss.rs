//! Softmax cross-entropy over frame logits.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Numerically stable (max-subtracted) softmax cross-entropy.
///
/// Returns the mean loss over the batch, the logit gradients
/// `(posterior − onehot)/B`, and the posterior rows (each summing to 1).
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor, Tensor)> {
    let shape = logits.shape();
    if shape.len() != 2 {
        return Err(Error::shape(format!(
            "logits must be [B, C], got {shape:?}"
        )));
    }
    let (batch, classes) = (shape[0], shape[1]);
    if labels.len() != batch {
        return Err(Error::shape(format!(
            "got {} labels for batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut posteriors = Tensor::zeros(&[batch, classes]);
    let mut grads = Tensor::zeros(&[batch, classes]);
    let mut total = 0.0;
    for b in 0..batch {
        let row = logits.row(b);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &z in row {
            denom += (z - max).exp();
        }
        let log_denom = denom.ln();
        total += log_denom - (row[labels[b]] - max);
        let p_row = &mut posteriors.data_mut()[b * classes..(b + 1) * classes];
        let g_row = &mut grads.data_mut()[b * classes..(b + 1) * classes];
        for j in 0..classes {
            let p = (row[j] - max).exp() / denom;
            p_row[j] = p;
            g_row[j] = (p - if j == labels[b] { 1.0 } else { 0.0 }) / batch as f64;
        }
    }
    Ok((total / batch as f64, grads, posteriors))
}

/// Posterior rows alone (softmax without a loss), for evaluation.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let shape = logits.shape();
    if shape.len() != 2 {
        return Err(Error::shape(format!(
            "logits must be [B, C], got {shape:?}"
        )));
    }
    let (batch, classes) = (shape[0], shape[1]);
    let mut posteriors = Tensor::zeros(&[batch, classes]);
    for b in 0..batch {
        let row = logits.row(b);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &z in row {
            denom += (z - max).exp();
        }
        let p_row = &mut posteriors.data_mut()[b * classes..(b + 1) * classes];
        for j in 0..classes {
            p_row[j] = (row[j] - max).exp() / denom;
        }
    }
    Ok(posteriors)
}
