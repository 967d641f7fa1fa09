//! Standard 1-D convolution layer (valid-mode cross-correlation plus bias).

use crate::error::{Error, Result};
use crate::param::Param;
use crate::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Conv1d {
    /// `[C_out, C_in, K]`
    pub w: Param,
    /// `[C_out]`
    pub b: Param,
    cache: Option<Tensor>,
}

impl Conv1d {
    pub fn new(c_out: usize, c_in: usize, k: usize) -> Self {
        Conv1d {
            w: Param::zeros(&[c_out, c_in, k]),
            b: Param::zeros(&[c_out]),
            cache: None,
        }
    }

    /// Kaiming-uniform fan-in initialization for leaky-ReLU stacks.
    pub fn kaiming(c_out: usize, c_in: usize, k: usize, slope: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Conv1d::new(c_out, c_in, k);
        let fan_in = (c_in * k) as f64;
        let gain = (2.0 / (1.0 + slope * slope)).sqrt();
        let bound = gain * (3.0 / fan_in).sqrt();
        for v in layer.w.value.data_mut() {
            *v = rng.gen_range(-bound..bound);
        }
        layer
    }

    pub fn c_out(&self) -> usize {
        self.w.value.dim(0)
    }

    pub fn c_in(&self) -> usize {
        self.w.value.dim(1)
    }

    pub fn kernel(&self) -> usize {
        self.w.value.dim(2)
    }

    /// `[B, C_in, T] -> [B, C_out, T − K + 1]`.
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape();
        if shape.len() != 3 || shape[1] != self.c_in() {
            return Err(Error::shape(format!(
                "conv1d expects [B, {}, T], got {shape:?}",
                self.c_in()
            )));
        }
        let (batch, t) = (shape[0], shape[2]);
        let k = self.kernel();
        if t < k {
            return Err(Error::shape(format!(
                "input length {t} shorter than kernel {k}"
            )));
        }
        let t_out = t - k + 1;
        let c_out = self.c_out();
        let c_in = self.c_in();
        let mut out = Tensor::zeros(&[batch, c_out, t_out]);
        let w = self.w.value.data();
        let bias = self.b.value.data();
        for b in 0..batch {
            for o in 0..c_out {
                let lane = out.lane_mut(b, o);
                lane.iter_mut().for_each(|v| *v = bias[o]);
                for c in 0..c_in {
                    let x_lane = x.lane(b, c);
                    let w_row = &w[(o * c_in + c) * k..(o * c_in + c + 1) * k];
                    for (kk, &wv) in w_row.iter().enumerate() {
                        if wv != 0.0 {
                            for (ov, &xv) in lane.iter_mut().zip(&x_lane[kk..kk + t_out]) {
                                *ov += wv * xv;
                            }
                        }
                    }
                }
            }
        }
        self.cache = Some(x.clone());
        Ok(out)
    }

    /// Accumulates weight/bias gradients; returns input gradients on request.
    pub fn backward(&mut self, upstream: &Tensor, need_input_grad: bool) -> Result<Option<Tensor>> {
        let x = self.cache.as_ref().ok_or(Error::MissingCache)?;
        let (batch, t) = (x.dim(0), x.dim(2));
        let k = self.kernel();
        let t_out = t - k + 1;
        let (c_out, c_in) = (self.c_out(), self.c_in());
        if upstream.shape() != [batch, c_out, t_out] {
            return Err(Error::shape(format!(
                "upstream shape {:?} vs expected [{batch}, {c_out}, {t_out}]",
                upstream.shape()
            )));
        }
        let dw = self.w.grad.data_mut();
        let db = self.b.grad.data_mut();
        for b in 0..batch {
            for o in 0..c_out {
                let up = upstream.lane(b, o);
                db[o] += up.iter().sum::<f64>();
                for c in 0..c_in {
                    let x_lane = x.lane(b, c);
                    let dw_row = &mut dw[(o * c_in + c) * k..(o * c_in + c + 1) * k];
                    for (kk, dv) in dw_row.iter_mut().enumerate() {
                        *dv += up
                            .iter()
                            .zip(&x_lane[kk..kk + t_out])
                            .map(|(&u, &xv)| u * xv)
                            .sum::<f64>();
                    }
                }
            }
        }
        if !need_input_grad {
            return Ok(None);
        }
        let w = self.w.value.data();
        let mut dx = Tensor::zeros(&[batch, c_in, t]);
        for b in 0..batch {
            for c in 0..c_in {
                let lane = dx.lane_mut(b, c);
                for o in 0..c_out {
                    let up = upstream.lane(b, o);
                    let w_row = &w[(o * c_in + c) * k..(o * c_in + c + 1) * k];
                    for (kk, &wv) in w_row.iter().enumerate() {
                        if wv != 0.0 {
                            for (dv, &u) in lane[kk..kk + t_out].iter_mut().zip(up) {
                                *dv += wv * u;
                            }
                        }
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
    fn identity_kernel_passes_input() {
        let mut conv = Conv1d::new(1, 1, 1);
        conv.w.value.data_mut()[0] = 1.0;
        let x = Tensor::from_vec(&[1, 1, 4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn hand_computed_case() {
        let mut conv = Conv1d::new(1, 1, 2);
        conv.w.value.data_mut().copy_from_slice(&[1.0, 1.0]);
        let x = Tensor::from_vec(&[1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut conv = Conv1d::new(2, 1, 3);
        conv.b.value.data_mut().copy_from_slice(&[0.7, -0.2]);
        let x = Tensor::from_vec(&[1, 1, 5], vec![1.0; 5]).unwrap();
        let y = conv.forward(&x).unwrap();
        assert!(y.lane(0, 0).iter().all(|&v| v == 0.7));
        assert!(y.lane(0, 1).iter().all(|&v| v == -0.2));
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut conv = Conv1d::new(1, 2, 3);
        let x = Tensor::zeros(&[1, 1, 5]);
        assert!(conv.forward(&x).is_err());
        let short = Tensor::zeros(&[1, 2, 2]);
        assert!(conv.forward(&short).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut conv = Conv1d::kaiming(3, 2, 3, 0.2, &mut rng);
        for v in conv.b.value.data_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        let x = Tensor::from_vec(
            &[2, 2, 9],
            (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let u = Tensor::from_vec(
            &[2, 3, 7],
            (0..42).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();

        let _ = conv.forward(&x).unwrap();
        let dx = conv.backward(&u, true).unwrap().unwrap();

        let loss = |conv: &mut Conv1d, x: &Tensor| -> f64 {
            let y = conv.forward(x).unwrap();
            y.data().iter().zip(u.data()).map(|(&a, &b)| a * b).sum()
        };
        let h = 1e-6;
        for idx in 0..conv.w.len() {
            let mut plus = conv.clone();
            plus.w.value.data_mut()[idx] += h;
            let mut minus = conv.clone();
            minus.w.value.data_mut()[idx] -= h;
            let fd = (loss(&mut plus, &x) - loss(&mut minus, &x)) / (2.0 * h);
            let a = conv.w.grad.data()[idx];
            assert!(
                (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3) < 1e-6,
                "w[{idx}]: {a} vs {fd}"
            );
        }
        for idx in 0..conv.b.len() {
            let mut plus = conv.clone();
            plus.b.value.data_mut()[idx] += h;
            let mut minus = conv.clone();
            minus.b.value.data_mut()[idx] -= h;
            let fd = (loss(&mut plus, &x) - loss(&mut minus, &x)) / (2.0 * h);
            let a = conv.b.grad.data()[idx];
            assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-3) < 1e-6);
        }
        for idx in (0..x.len()).step_by(7) {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fd = (loss(&mut conv.clone(), &xp) - loss(&mut conv.clone(), &xm)) / (2.0 * h);
            let a = dx.data()[idx];
            assert!((a - fd).abs() / a.abs().max(fd.abs()).max(1e-3) < 1e-6);
        }
    }
}
