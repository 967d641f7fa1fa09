//! Layer and batch normalization.

use crate::error::{Error, Result};
use crate::param::Param;
use crate::tensor::Tensor;

const NORM_EPS: f64 = 1e-5;

/// Per-sample normalization over all non-batch axes, with elementwise affine.
///
/// Accepts `[B, D]` or `[B, C, T]`; the normalized extent is the product of
/// the non-batch dims and must match the affine parameter length.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: Param,
    pub bias: Param,
    cache: Option<LnCache>,
}

#[derive(Debug, Clone)]
struct LnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    shape: Vec<usize>,
}

impl LayerNorm {
    pub fn new(normalized_size: usize) -> Result<Self> {
        if normalized_size < 2 {
            return Err(Error::config(format!(
                "layer norm needs a normalized extent >= 2, got {normalized_size}"
            )));
        }
        Ok(LayerNorm {
            gain: Param::new(Tensor::filled(&[normalized_size], 1.0)),
            bias: Param::zeros(&[normalized_size]),
            cache: None,
        })
    }

    pub fn normalized_size(&self) -> usize {
        self.gain.len()
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape().to_vec();
        if shape.len() < 2 {
            return Err(Error::shape("layer norm expects at least 2 axes"));
        }
        let batch = shape[0];
        let n: usize = shape[1..].iter().product();
        if n != self.normalized_size() {
            return Err(Error::shape(format!(
                "normalized extent {n} vs affine size {}",
                self.normalized_size()
            )));
        }
        let gain = self.gain.value.data();
        let bias = self.bias.value.data();
        let mut out = Tensor::zeros(&shape);
        let mut xhat = Tensor::zeros(&[batch, n]);
        let mut inv_std = vec![0.0; batch];
        for b in 0..batch {
            let row = &x.data()[b * n..(b + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[b] = r;
            let xh = &mut xhat.data_mut()[b * n..(b + 1) * n];
            let o = &mut out.data_mut()[b * n..(b + 1) * n];
            for i in 0..n {
                let h = (row[i] - mean) * r;
                xh[i] = h;
                o[i] = h * gain[i] + bias[i];
            }
        }
        self.cache = Some(LnCache {
            xhat,
            inv_std,
            shape,
        });
        Ok(out)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache)?;
        if upstream.shape() != cache.shape.as_slice() {
            return Err(Error::shape(format!(
                "upstream shape {:?} vs cached {:?}",
                upstream.shape(),
                cache.shape
            )));
        }
        let batch = cache.shape[0];
        let n = self.normalized_size();
        let gain = self.gain.value.data();
        let dgain = self.gain.grad.data_mut();
        let dbias = self.bias.grad.data_mut();
        let mut dx = Tensor::zeros(&cache.shape);
        for b in 0..batch {
            let up = &upstream.data()[b * n..(b + 1) * n];
            let xh = &cache.xhat.data()[b * n..(b + 1) * n];
            let r = cache.inv_std[b];
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for i in 0..n {
                dgain[i] += up[i] * xh[i];
                dbias[i] += up[i];
                let dxh = up[i] * gain[i];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xh[i];
            }
            let m1 = sum_dxhat / n as f64;
            let m2 = sum_dxhat_xhat / n as f64;
            let o = &mut dx.data_mut()[b * n..(b + 1) * n];
            for i in 0..n {
                let dxh = up[i] * gain[i];
                o[i] = r * (dxh - m1 - xh[i] * m2);
            }
        }
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        self.gain.zero_grad();
        self.bias.zero_grad();
    }
}

/// Per-feature normalization over the batch axis of `[B, D]` inputs.
///
/// Training mode normalizes by batch statistics (biased variance) and updates
/// the running stats with momentum; eval mode uses the running stats.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gain: Param,
    pub bias: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    train: bool,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gain: Param::new(Tensor::filled(&[features], 1.0)),
            bias: Param::zeros(&[features]),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::filled(&[features], 1.0),
            momentum: 0.1,
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.gain.len()
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let shape = x.shape();
        if shape.len() != 2 || shape[1] != self.features() {
            return Err(Error::shape(format!(
                "batch norm expects [B, {}], got {shape:?}",
                self.features()
            )));
        }
        let (batch, d) = (shape[0], shape[1]);
        if train && batch < 2 {
            return Err(Error::config(format!(
                "batch norm in train mode needs B >= 2, got {batch}"
            )));
        }
        let gain = self.gain.value.data();
        let bias = self.bias.value.data();
        let mut out = Tensor::zeros(&[batch, d]);
        let mut xhat = Tensor::zeros(&[batch, d]);
        let mut inv_std = vec![0.0; d];
        for j in 0..d {
            let (mean, var) = if train {
                let mut m = 0.0;
                for b in 0..batch {
                    m += x.data()[b * d + j];
                }
                m /= batch as f64;
                let mut v = 0.0;
                for b in 0..batch {
                    let c = x.data()[b * d + j] - m;
                    v += c * c;
                }
                v /= batch as f64;
                (m, v)
            } else {
                (self.running_mean.data()[j], self.running_var.data()[j])
            };
            let r = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[j] = r;
            for b in 0..batch {
                let h = (x.data()[b * d + j] - mean) * r;
                xhat.data_mut()[b * d + j] = h;
                out.data_mut()[b * d + j] = h * gain[j] + bias[j];
            }
            if train {
                let m = self.momentum;
                self.running_mean.data_mut()[j] =
                    (1.0 - m) * self.running_mean.data()[j] + m * mean;
                self.running_var.data_mut()[j] = (1.0 - m) * self.running_var.data()[j] + m * var;
            }
        }
        self.cache = Some(BnCache {
            xhat,
            inv_std,
            train,
        });
        Ok(out)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache)?;
        let (batch, d) = (cache.xhat.dim(0), cache.xhat.dim(1));
        if upstream.shape() != [batch, d] {
            return Err(Error::shape(format!(
                "upstream shape {:?} vs cached [{batch}, {d}]",
                upstream.shape()
            )));
        }
        let gain = self.gain.value.data();
        let dgain = self.gain.grad.data_mut();
        let dbias = self.bias.grad.data_mut();
        let mut dx = Tensor::zeros(&[batch, d]);
        for j in 0..d {
            let r = cache.inv_std[j];
            if cache.train {
                let mut sum_dxhat = 0.0;
                let mut sum_dxhat_xhat = 0.0;
                for b in 0..batch {
                    let u = upstream.data()[b * d + j];
                    let xh = cache.xhat.data()[b * d + j];
                    dgain[j] += u * xh;
                    dbias[j] += u;
                    let dxh = u * gain[j];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xh;
                }
                let m1 = sum_dxhat / batch as f64;
                let m2 = sum_dxhat_xhat / batch as f64;
                for b in 0..batch {
                    let u = upstream.data()[b * d + j];
                    let xh = cache.xhat.data()[b * d + j];
                    dx.data_mut()[b * d + j] = r * (u * gain[j] - m1 - xh * m2);
                }
            } else {
                for b in 0..batch {
                    let u = upstream.data()[b * d + j];
                    let xh = cache.xhat.data()[b * d + j];
                    dgain[j] += u * xh;
                    dbias[j] += u;
                    dx.data_mut()[b * d + j] = u * gain[j] * r;
                }
            }
        }
        Ok(dx)
    }

    pub fn zero_grads(&mut self) {
        self.gain.zero_grad();
        self.bias.zero_grad();
    }
}
