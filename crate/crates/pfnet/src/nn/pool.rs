//! Max pooling with stride equal to the window width.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub width: usize,
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    argmax: Vec<usize>,
    in_shape: Vec<usize>,
}

impl MaxPool1d {
    pub fn new(width: usize) -> Result<Self> {
        if width < 1 {
            return Err(Error::config("pool width must be >= 1"));
        }
        Ok(MaxPool1d { width, cache: None })
    }

    /// `[B, C, T] -> [B, C, floor(T/width)]`; ties pick the lowest index.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape();
        if shape.len() != 3 {
            return Err(Error::shape(format!(
                "max pool expects [B, C, T], got {shape:?}"
            )));
        }
        let (batch, chans, t) = (shape[0], shape[1], shape[2]);
        if t < self.width {
            return Err(Error::shape(format!(
                "input length {t} shorter than pool width {}",
                self.width
            )));
        }
        let t_out = t / self.width;
        let mut out = Tensor::zeros(&[batch, chans, t_out]);
        let mut argmax = vec![0usize; batch * chans * t_out];
        for b in 0..batch {
            for c in 0..chans {
                let lane = x.lane(b, c);
                let o_lane = out.lane_mut(b, c);
                for to in 0..t_out {
                    let start = to * self.width;
                    let mut best = lane[start];
                    let mut best_i = start;
                    for (i, &v) in lane[start..start + self.width].iter().enumerate().skip(1) {
                        if v > best {
                            best = v;
                            best_i = start + i;
                        }
                    }
                    o_lane[to] = best;
                    argmax[(b * chans + c) * t_out + to] = best_i;
                }
            }
        }
        self.cache = Some(PoolCache {
            argmax,
            in_shape: shape.to_vec(),
        });
        Ok(out)
    }

    /// Routes each upstream value to its window's argmax position.
    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(Error::MissingCache)?;
        let (batch, chans, t) = (cache.in_shape[0], cache.in_shape[1], cache.in_shape[2]);
        let t_out = t / self.width;
        if upstream.shape() != [batch, chans, t_out] {
            return Err(Error::shape(format!(
                "upstream shape {:?} vs expected [{batch}, {chans}, {t_out}]",
                upstream.shape()
            )));
        }
        let mut dx = Tensor::zeros(&cache.in_shape);
        for b in 0..batch {
            for c in 0..chans {
                let up = upstream.lane(b, c);
                let lane = dx.lane_mut(b, c);
                for (to, &u) in up.iter().enumerate() {
                    lane[cache.argmax[(b * chans + c) * t_out + to]] += u;
                }
            }
        }
        Ok(dx)
    }
}
