//! Leaky-ReLU activation.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `x if x >= 0 else slope·x`, elementwise.
#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub slope: f64,
    cache: Option<Vec<bool>>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        LeakyRelu { slope, cache: None }
    }

    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        let mask: Vec<bool> = x.data().iter().map(|&v| v >= 0.0).collect();
        for (v, &pos) in out.data_mut().iter_mut().zip(&mask) {
            if !pos {
                *v *= self.slope;
            }
        }
        self.cache = Some(mask);
        out
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let mask = self.cache.as_ref().ok_or(Error::MissingCache)?;
        if mask.len() != upstream.len() {
            return Err(Error::shape(format!(
                "upstream length {} vs cached {}",
                upstream.len(),
                mask.len()
            )));
        }
        let mut dx = upstream.clone();
        for (v, &pos) in dx.data_mut().iter_mut().zip(mask) {
            if !pos {
                *v *= self.slope;
            }
        }
        Ok(dx)
    }
}

/// Scalar form, for desk checks.
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}
