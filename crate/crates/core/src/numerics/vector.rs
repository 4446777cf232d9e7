//! Dense f64 vector and the stable reductions built on it.

use crate::error::{Error, Result};
use std::ops::{Deref, DerefMut};

/// Dense vector of 64-bit floats.
///
/// Thin newtype over `Vec<f64>`; derefs to a slice so indexing and iteration
/// read like plain slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn zeros(dim: usize) -> Self {
        Vector {
            data: vec![0.0; dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        Vector {
            data: (0..dim).map(f).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_same_dim("dot", self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Max-magnitude norm; 0 for the empty vector.
    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn squared_distance(&self, other: &Vector) -> Result<f64> {
        check_same_dim("squared_distance", self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum())
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        check_same_dim("add", self, other)?;
        Ok(Vector::from_fn(self.dim(), |i| self[i] + other[i]))
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        check_same_dim("sub", self, other)?;
        Ok(Vector::from_fn(self.dim(), |i| self[i] - other[i]))
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Vector::from_fn(self.dim(), |i| self[i] * factor)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

fn check_same_dim(op: &'static str, a: &Vector, b: &Vector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            op,
            left: format!("vector[{}]", a.dim()),
            right: format!("vector[{}]", b.dim()),
        });
    }
    Ok(())
}

/// y <- y + alpha * x
pub fn axpy(alpha: f64, x: &Vector, y: &mut Vector) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::ShapeMismatch {
            op: "axpy",
            left: format!("vector[{}]", x.dim()),
            right: format!("vector[{}]", y.dim()),
        });
    }
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
    Ok(())
}

/// log(sum_i exp(v_i)) evaluated with max-subtraction so it stays finite for
/// any finite input.
pub fn log_sum_exp(v: &Vector) -> Result<f64> {
    if v.dim() == 0 {
        return Err(Error::EmptyReduction);
    }
    let max = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Shift-invariant softmax: exp(v_i - max) / sum_j exp(v_j - max).
pub fn softmax(v: &Vector) -> Result<Vector> {
    if v.dim() == 0 {
        return Err(Error::EmptyReduction);
    }
    let max = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut out = Vector::from_fn(v.dim(), |i| (v[i] - max).exp());
    let sum: f64 = out.iter().sum();
    for w in out.iter_mut() {
        *w /= sum;
    }
    Ok(out)
}
