//! Fully connected layer.

use crate::error::{Error, Result};
use crate::param::Param;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Dense {
    /// `[D_out, D_in]`, one row per output neuron.
    pub w: Param,
    /// `[D_out]`
    pub b: Param,
    cache: Option<Tensor>,
}

impl Dense {
    pub fn new(d_out: usize, d_in: usize) -> Self {
        Dense {
            w: Param::zeros(&[d_out, d_in]),
            b: Param::zeros(&[d_out]),
            cache: None,
        }
    }

    pub fn kaiming(d_out: usize, d_in: usize, slope: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Dense::new(d_out, d_in);
        let gain = (2.0 / (1.0 + slope * slope)).sqrt();
        let bound = gain * (3.0 / d_in as f64).sqrt();
        for v in layer.w.value.data_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        layer
    }

    pub fn d_out(&self) -> usize {
        self.w.value.dim(0)
    }

    pub fn d_in(&self) -> usize {
        self.w.value.dim(1)
    }

    /// `[B, D_in] -> [B, D_out]`, `y = W·x + b`.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape();
        if shape.len() != 2 || shape[1] != self.d_in() {
            return Err(Error::shape(format!(
                "dense expects [B, {}], got {shape:?}",
                self.d_in()
            )));
        }
        let batch = shape[0];
        let (d_out, d_in) = (self.d_out(), self.d_in());
        let w = self.w.value.data();
        let bias = self.b.value.data();
        let mut out = Tensor::zeros(&[batch, d_out]);
        for b in 0..batch {
            let row = x.row(b);
            let o_row = &mut out.data_mut()[b * d_out..(b + 1) * d_out];
            for (o, ov) in o_row.iter_mut().enumerate() {
                let w_row = &w[o * d_in..(o + 1) * d_in];
                *ov = bias[o] + w_row.iter().zip(row).map(|(&a, &b)| a * b).sum::<f64>();
            }
        }
        self.cache = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, upstream: &Tensor, need_input_grad: bool) -> Result<Option<Tensor>> {
        let x = self.cache.as_ref().ok_or(Error::MissingCache)?;
        let batch = x.dim(0);
        let (d_out, d_in) = (self.d_out(), self.d_in());
        if upstream.shape() != [batch, d_out] {
            return Err(Error::shape(format!(
                "upstream shape {:?} vs expected [{batch}, {d_out}]",
                upstream.shape()
            )));
        }
        let dw = self.w.grad.data_mut();
        let db = self.b.grad.data_mut();
        for b in 0..batch {
            let x_row = x.row(b);
            let u_row = upstream.row(b);
            for (o, &u) in u_row.iter().enumerate() {
                if u != 0.0 {
                    db[o] += u;
                    let dw_row = &mut dw[o * d_in..(o + 1) * d_in];
                    for (dv, &xv) in dw_row.iter_mut().zip(x_row) {
                        *dv += u * xv;
                    }
                }
            }
        }
        if !need_input_grad {
            return Ok(None);
        }
        let w = self.w.value.data();
        let mut dx = Tensor::zeros(&[batch, d_in]);
        for b in 0..batch {
            let u_row = upstream.row(b);
            let dx_row = &mut dx.data_mut()[b * d_in..(b + 1) * d_in];
            for (o, &u) in u_row.iter().enumerate() {
                if u != 0.0 {
                    let w_row = &w[o * d_in..(o + 1) * d_in];
                    for (dv, &wv) in dx_row.iter_mut().zip(w_row) {
                        *dv += u * wv;
                    }
                }
            }
        }
        Ok(Some(dx))
    }

    pub fn zero_grads(&mut self) {
        self.w.zero_grad();
        self.b.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identity_weights() {
        let mut dense = Dense::new(2, 2);
        dense
            .w
            .value
            .data_mut()
            .copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let x = Tensor::from_vec(&[1, 2], vec![3.0, -4.0]).unwrap();
        let y = dense.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn hand_computed_case() {
        // rows of W are output neurons: [[1,1],[0,1]]·[1,2] = [3,2]
        let mut dense = Dense::new(2, 2);
        dense
            .w
            .value
            .data_mut()
            .copy_from_slice(&[1.0, 1.0, 0.0, 1.0]);
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        let y = dense.forward(&x).unwrap();
        assert_eq!(y.data(), &[3.0, 2.0]);
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let mut dense = Dense::new(3, 4);
        dense.b.value.data_mut().copy_from_slice(&[0.1, 0.2, 0.3]);
        let x = Tensor::zeros(&[2, 4]);
        let y = dense.forward(&x).unwrap();
        assert_eq!(y.row(0), &[0.1, 0.2, 0.3]);
        assert_eq!(y.row(1), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut dense = Dense::kaiming(3, 5, 0.2, &mut rng);
        let x =
            Tensor::from_vec(&[2, 5], (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let u =
            Tensor::from_vec(&[2, 3], (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let _ = dense.forward(&x).unwrap();
        let dx = dense.backward(&u, true).unwrap().unwrap();

        let loss = |d: &mut Dense, x: &Tensor| -> f64 {
            let y = d.forward(x).unwrap();
            y.data().iter().zip(u.data()).map(|(&a, &b)| a * b).sum()
        };
        let h = 1e-6;
        for idx in 0..dense.w.len() {
            let mut plus = dense.clone();
            plus.w.value.data_mut()[idx] += h;
            let mut minus = dense.clone();
            minus.w.value.data_mut()[idx] -= h;
            let fd = (loss(&mut plus, &x) - loss(&mut minus, &x)) / (2.0 * h);
            let a = dense.w.grad.data()[idx];
            assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-3) < 1e-6);
        }
        for idx in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fd = (loss(&mut dense.clone(), &xp) - loss(&mut dense.clone(), &xm)) / (2.0 * h);
            let a = dx.data()[idx];
            assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-3) < 1e-6);
        }
    }
}
