//! Dense row-major f64 tensor.
//!
//! Deliberately minimal: the layers in this crate index raw slices for their
//! inner loops, so `Tensor` only carries shape bookkeeping and a few
//! constructors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {:?} requires {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Extent of axis `i`.
    pub fn dim(&self, i: usize) -> usize {
        self.shape[i]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// Row `b` of a 2-D tensor.
    pub fn row(&self, b: usize) -> &[f64] {
        debug_assert_eq!(self.shape.len(), 2);
        let d = self.shape[1];
        &self.data[b * d..(b + 1) * d]
    }

    /// Contiguous slice for `[b, c, ..]` of a 3-D tensor.
    pub fn lane(&self, b: usize, c: usize) -> &[f64] {
        debug_assert_eq!(self.shape.len(), 3);
        let t = self.shape[2];
        let off = (b * self.shape[1] + c) * t;
        &self.data[off..off + t]
    }

    pub fn lane_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        debug_assert_eq!(self.shape.len(), 3);
        let t = self.shape[2];
        let off = (b * self.shape[1] + c) * t;
        &mut self.data[off..off + t]
    }

    /// Same data, new shape (element count must match).
    pub fn into_reshaped(self, shape: &[usize]) -> Result<Tensor> {
        Tensor::from_vec(shape, self.data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
    }

    #[test]
    fn lane_indexing() {
        let t = Tensor::from_vec(&[2, 2, 3], (0..12).map(|i| i as f64).collect()).unwrap();
        assert_eq!(t.lane(0, 0), &[0.0, 1.0, 2.0]);
        assert_eq!(t.lane(1, 0), &[6.0, 7.0, 8.0]);
        assert_eq!(t.lane(1, 1), &[9.0, 10.0, 11.0]);
    }

    #[test]
    fn finiteness() {
        let mut t = Tensor::zeros(&[3]);
        assert!(t.all_finite());
        t.data_mut()[1] = f64::NAN;
        assert!(!t.all_finite());
    }
}
