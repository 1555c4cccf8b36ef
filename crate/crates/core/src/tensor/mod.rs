//! Minimal dense-tensor engine with reverse-mode differentiation.
//!
//! [`Tensor`] is a plain shape + `f64` buffer value type. Differentiable
//! computation happens on a [`Graph`](graph::Graph): inserting an operation
//! evaluates it immediately (define-by-run), records it on the tape, and
//! `backward` replays the tape once in reverse. Parameters live outside the
//! graph as plain tensors and are bound as leaves each step.

pub mod adam;
pub mod checkpoint;
pub mod graph;
pub mod init;
pub(crate) mod kernels;

pub use adam::Adam;
pub use graph::{Graph, PoolMode, TensorId};

use crate::error::{Error, Result};

/// Dense row-major tensor of 64-bit floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor from a shape and matching data buffer.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("degenerate tensor shape {shape:?}")));
        }
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} wants {numel} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel] }
    }

    pub fn full(shape: Vec<usize>, value: f64) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![value; numel] }
    }

    /// Single-element tensor, the scalar convention used throughout.
    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Same data under a new shape with identical element count.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() || shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} elements) to {shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor { shape, data: self.data.clone() })
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_data_mismatch_is_rejected() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 4]).is_ok());
    }

    #[test]
    fn reshape_preserves_data() {
        let t = Tensor::new(vec![2, 3], (0..6).map(|v| v as f64).collect()).unwrap();
        let r = t.reshaped(vec![3, 2]).unwrap();
        assert_eq!(r.shape(), &[3, 2]);
        assert_eq!(r.data(), t.data());
        assert!(t.reshaped(vec![4, 2]).is_err());
    }
}
