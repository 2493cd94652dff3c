//! Dense `f64` vectors used for models, gradients and residuals.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

/// A fixed-dimension vector of 64-bit floats.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += scale * other`; a zero scale leaves `self` untouched so that
    /// degenerate coefficients do not perturb signed zeros.
    pub fn axpy(&mut self, scale: f64, other: &[f64]) {
        debug_assert_eq!(self.0.len(), other.len());
        if scale == 0.0 {
            return;
        }
        if scale == 1.0 {
            for (a, b) in self.0.iter_mut().zip(other) {
                *a += *b;
            }
        } else {
            for (a, b) in self.0.iter_mut().zip(other) {
                *a += scale * *b;
            }
        }
    }

    /// `self *= scale`, skipping the multiply when `scale == 1`.
    pub fn scale(&mut self, scale: f64) {
        if scale != 1.0 {
            for a in &mut self.0 {
                *a *= scale;
            }
        }
    }

    /// Element-wise `self - other`.
    pub fn sub(&self, other: &[f64]) -> DenseVector {
        debug_assert_eq!(self.0.len(), other.len());
        self.0.iter().zip(other).map(|(a, b)| a - b).collect()
    }

    /// Element-wise `self + other`.
    pub fn add(&self, other: &[f64]) -> DenseVector {
        debug_assert_eq!(self.0.len(), other.len());
        self.0.iter().zip(other).map(|(a, b)| a + b).collect()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0` and comparing NaN payloads.
    pub fn bitwise_eq(&self, other: &DenseVector) -> bool {
        self.0.len() == other.0.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear combination `Σ wᵢ·vᵢ`, summed in argument order; zero weights are skipped.
pub fn combine(dim: usize, terms: &[(f64, &[f64])]) -> DenseVector {
    let mut out = DenseVector::zeros(dim);
    let mut first = true;
    for &(w, v) in terms {
        if w == 0.0 {
            continue;
        }
        if first {
            out.0.copy_from_slice(v);
            out.scale(w);
            first = false;
        } else {
            out.axpy(w, v);
        }
    }
    out
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl FromIterator<f64> for DenseVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl AsRef<[f64]> for DenseVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_skips_zero_weights() {
        let a = [1.0, -0.0];
        let b = [5.0, 7.0];
        let out = combine(2, &[(1.0, &a), (0.0, &b)]);
        assert!(out.bitwise_eq(&DenseVector::from(vec![1.0, -0.0])));
    }

    #[test]
    fn norms() {
        let v = DenseVector::from(vec![3.0, -4.0]);
        assert_eq!(v.norm(), 5.0);
        assert_eq!(v.norm_l1(), 7.0);
        assert_eq!(v.norm_inf(), 4.0);
    }
}
