//! Dense row-major tensor.

use crate::error::{shape_err, Error, Result};

use super::Real;

/// Dense tensor, row-major. Network code uses 4-D (batch, channel, height,
/// width); parameters use their natural rank (conv weights 4-D, biases 1-D).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<Real>,
}

impl Tensor {
    pub fn zeros(dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Tensor { dims: dims.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(dims: &[usize], data: Vec<Real>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(shape_err("Tensor::from_vec", n, data.len()));
        }
        Ok(Tensor { dims: dims.to_vec(), data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Real] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Real] {
        &mut self.data
    }

    /// (batch, channels, height, width) of a 4-D tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.dims[..] {
            [b, c, h, w] => Ok((b, c, h, w)),
            _ => Err(shape_err("Tensor::dims4", "rank 4", format!("rank {}", self.dims.len()))),
        }
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { context: context.to_string() })
        }
    }

    pub fn fill(&mut self, v: Real) {
        self.data.iter_mut().for_each(|d| *d = v);
    }

    pub fn scale(&mut self, s: Real) {
        self.data.iter_mut().for_each(|d| *d *= s);
    }

    /// self += other (dims must match).
    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.dims != other.dims {
            return Err(shape_err(
                "Tensor::add_assign",
                format!("{:?}", self.dims),
                format!("{:?}", other.dims),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| *a as f64 * *b as f64)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| *v as f64 * *v as f64).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn finite_check_flags_nan() {
        let mut t = Tensor::zeros(&[4]);
        assert!(t.check_finite("t").is_ok());
        t.data_mut()[2] = Real::NAN;
        assert!(t.check_finite("t").is_err());
    }
}
