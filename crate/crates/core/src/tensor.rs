//! Symmetric tensor algebra on the space of symmetric n×n matrices, n ∈ {2, 3}.
//!
//! Only the upper triangle is stored, so symmetry cannot be broken. Besides the
//! plain component view, tensors can be mapped to Kelvin (Mandel) coordinates:
//! an orthonormal basis of the symmetric space in which the Frobenius inner
//! product `ξ:η` becomes the Euclidean dot product. The solver and the
//! constitutive Hessians work in those coordinates.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Largest number of independent components (n = 3).
pub const MAX_SYM: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unsupported dimension {0}, expected 2 or 3")]
    UnsupportedDimension(usize),
}

/// Number of independent components of a symmetric `dim × dim` tensor.
pub const fn nsym(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// (i, j) pairs in packed order, for each dimension.
const PAIRS_2: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];
const PAIRS_3: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Index pairs of the packed storage, in storage order.
pub fn packed_pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        2 => &PAIRS_2,
        3 => &PAIRS_3,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// A symmetric n×n tensor.
#[derive(Clone, Copy, PartialEq)]
pub struct SymTensor {
    dim: usize,
    e: [f64; MAX_SYM],
}

impl SymTensor {
    /// Zero tensor. Panics unless `dim` is 2 or 3.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "unsupported dimension {dim}");
        Self { dim, e: [0.0; MAX_SYM] }
    }

    pub fn try_zeros(dim: usize) -> Result<Self, TensorError> {
        if dim == 2 || dim == 3 {
            Ok(Self::zeros(dim))
        } else {
            Err(TensorError::UnsupportedDimension(dim))
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.set(i, i, 1.0);
        }
        t
    }

    /// Tensor whose (i, j) entry (i ≤ j) is `f(i, j)`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for (s, &(i, j)) in packed_pairs(dim).iter().enumerate() {
            t.e[s] = f(i, j);
        }
        t
    }

    /// Tensor with a single symmetric off-diagonal pair `a_ij = a_ji = value`.
    pub fn offdiag(dim: usize, i: usize, j: usize, value: f64) -> Self {
        let mut t = Self::zeros(dim);
        t.set(i, j, value);
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[packed_slot(self.dim, i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.e[packed_slot(self.dim, i, j)] = v;
    }

    /// Packed upper-triangle entries.
    pub fn packed(&self) -> &[f64] {
        &self.e[..nsym(self.dim)]
    }

    /// `ξ:η = Σ_ij ξ_ij η_ij`; panics on dimension mismatch.
    #[inline]
    pub fn inner(&self, other: &Self) -> f64 {
        self.try_inner(other).expect("tensor dimension mismatch")
    }

    pub fn try_inner(&self, other: &Self) -> Result<f64, TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::DimensionMismatch(self.dim, other.dim));
        }
        let mut s = 0.0;
        for (k, &(i, j)) in packed_pairs(self.dim).iter().enumerate() {
            let w = if i == j { 1.0 } else { 2.0 };
            s += w * self.e[k] * other.e[k];
        }
        Ok(s)
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `½(J + Jᵀ)` of the leading `dim × dim` block of `j`.
    pub fn symmetrize(dim: usize, j: &[[f64; 3]; 3]) -> Self {
        Self::from_fn(dim, |a, b| 0.5 * (j[a][b] + j[b][a]))
    }

    /// Kelvin coordinates: diagonal entries as is, off-diagonals scaled by √2.
    pub fn to_kelvin(&self) -> [f64; MAX_SYM] {
        let mut k = [0.0; MAX_SYM];
        for (s, &(i, j)) in packed_pairs(self.dim).iter().enumerate() {
            k[s] = if i == j { self.e[s] } else { std::f64::consts::SQRT_2 * self.e[s] };
        }
        k
    }

    pub fn from_kelvin(dim: usize, k: &[f64]) -> Self {
        let mut t = Self::zeros(dim);
        for (s, &(i, j)) in packed_pairs(dim).iter().enumerate() {
            t.e[s] = if i == j { k[s] } else { k[s] / std::f64::consts::SQRT_2 };
        }
        t
    }

    /// Dense copy in the top-left block of a 3×3 array.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[i][j] = self.get(i, j);
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.packed().iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut t = *self;
        t.e.iter_mut().for_each(|v| *v *= a);
        t
    }
}

#[inline]
fn packed_slot(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    match (dim, i, j) {
        (2, 0, 0) => 0,
        (2, 0, 1) => 1,
        (2, 1, 1) => 2,
        (3, 0, 0) => 0,
        (3, 0, 1) => 1,
        (3, 0, 2) => 2,
        (3, 1, 1) => 3,
        (3, 1, 2) => 4,
        (3, 2, 2) => 5,
        _ => panic!("index ({i}, {j}) out of range for dimension {dim}"),
    }
}

impl fmt::Debug for SymTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymTensor{}{:?}", self.dim, self.packed())
    }
}

impl Add for SymTensor {
    type Output = SymTensor;
    fn add(mut self, rhs: SymTensor) -> SymTensor {
        assert_eq!(self.dim, rhs.dim, "tensor dimension mismatch");
        self.e.iter_mut().zip(rhs.e).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for SymTensor {
    type Output = SymTensor;
    fn sub(mut self, rhs: SymTensor) -> SymTensor {
        assert_eq!(self.dim, rhs.dim, "tensor dimension mismatch");
        self.e.iter_mut().zip(rhs.e).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Neg for SymTensor {
    type Output = SymTensor;
    fn neg(self) -> SymTensor {
        self.scale(-1.0)
    }
}

impl Mul<f64> for SymTensor {
    type Output = SymTensor;
    fn mul(self, a: f64) -> SymTensor {
        self.scale(a)
    }
}

/// Frobenius norm over all n² entries of a (not necessarily symmetric) matrix.
pub fn matrix_norm(dim: usize, j: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for row in j.iter().take(dim) {
        for v in row.iter().take(dim) {
            s += v * v;
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_inner() {
        assert_eq!(SymTensor::identity(3).inner(&SymTensor::identity(3)), 3.0);
        let xi = SymTensor::from_fn(3, |i, j| (i + 2 * j) as f64);
        assert_eq!(xi.inner(&SymTensor::zeros(3)), 0.0);
    }

    #[test]
    fn offdiagonal_counts_twice() {
        let a = SymTensor::offdiag(3, 0, 1, 1.0);
        let b = SymTensor::offdiag(3, 1, 0, 2.0);
        assert_eq!(a.inner(&b), 4.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = SymTensor::zeros(2).try_inner(&SymTensor::zeros(3));
        assert_eq!(r, Err(TensorError::DimensionMismatch(2, 3)));
        assert!(SymTensor::try_zeros(4).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(SymTensor::zeros(3).norm(), 0.0);
        assert!((SymTensor::identity(2).norm() - 2f64.sqrt()).abs() < 1e-15);
        let a = SymTensor::offdiag(3, 0, 2, 0.5);
        assert!((a.norm() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_examples() {
        let mut id = [[0.0; 3]; 3];
        for (i, row) in id.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        assert_eq!(SymTensor::symmetrize(3, &id), SymTensor::identity(3));

        // shear flow u = (x3, 0, 0)
        let mut j = [[0.0; 3]; 3];
        j[0][2] = 1.0;
        let d = SymTensor::symmetrize(3, &j);
        assert_eq!(d.get(0, 2), 0.5);
        assert_eq!(d.get(2, 0), 0.5);
        assert!((d.norm() - 2f64.sqrt() / 2.0).abs() < 1e-15);

        let skew = [[0.0, 1.5, -2.0], [-1.5, 0.0, 0.25], [2.0, -0.25, 0.0]];
        assert_eq!(SymTensor::symmetrize(3, &skew), SymTensor::zeros(3));
    }

    #[test]
    fn kelvin_roundtrip_preserves_inner() {
        let a = SymTensor::from_fn(3, |i, j| 1.0 + i as f64 - 0.5 * j as f64);
        let b = SymTensor::from_fn(3, |i, j| (i * j) as f64 - 0.3);
        let (ka, kb) = (a.to_kelvin(), b.to_kelvin());
        let dot: f64 = ka.iter().zip(kb).map(|(x, y)| x * y).sum();
        assert!((dot - a.inner(&b)).abs() < 1e-13);
        let back = SymTensor::from_kelvin(3, &ka);
        for (x, y) in back.packed().iter().zip(a.packed()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    fn tensor(dim: usize) -> impl Strategy<Value = SymTensor> {
        prop::collection::vec(-1e3f64..1e3, nsym(dim)).prop_map(move |v| {
            let mut t = SymTensor::zeros(dim);
            for (s, &(i, j)) in packed_pairs(dim).iter().enumerate() {
                t.set(i, j, v[s]);
            }
            t
        })
    }

    fn matrix() -> impl Strategy<Value = [[f64; 3]; 3]> {
        prop::array::uniform3(prop::array::uniform3(-10.0f64..10.0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn inner_bilinear_symmetric(a in tensor(3), b in tensor(3), c in tensor(3), s in -5.0f64..5.0) {
            let lhs = (a * s + b).inner(&c);
            let rhs = s * a.inner(&c) + b.inner(&c);
            let scale = (a.norm() * s.abs() + b.norm()) * c.norm() + 1.0;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            prop_assert_eq!(a.inner(&b), b.inner(&a));
        }

        #[test]
        fn triangle_inequality(a in tensor(2), b in tensor(2)) {
            prop_assert!((a + b).norm() <= a.norm() + b.norm() + 1e-9);
        }

        #[test]
        fn symmetrize_contracts_and_is_idempotent(j in matrix(), dim in 2usize..=3) {
            let s = SymTensor::symmetrize(dim, &j);
            prop_assert!(s.norm() <= matrix_norm(dim, &j) * (1.0 + 1e-14));
            let again = SymTensor::symmetrize(dim, &s.to_matrix());
            prop_assert_eq!(again, s);
        }
    }
}
