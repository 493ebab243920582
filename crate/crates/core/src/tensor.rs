//! Dense third-order tensors.
//!
//! Entries are stored with the row index fastest, then the column index, then
//! the frontal-slice index, so every frontal slice `x(:, :, k)` is a contiguous
//! column-major `n1 x n2` block. That is exactly nalgebra's matrix layout, which
//! lets slices move in and out of `DMatrix` with a single copy.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::OrthogonalTransform;

/// Shape of a third-order tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Dims {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        Dims { n1, n2, n3 }
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_len(&self) -> usize {
        self.n1 * self.n2
    }

    /// `min(n1, n2)`, the number of singular values per frontal slice.
    pub fn min_side(&self) -> usize {
        self.n1.min(self.n2)
    }

    fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.n3 == 0 {
            return Err(Error::Dimension(format!(
                "all dimensions must be positive, got {self}"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.n1, self.n2, self.n3)
    }
}

impl From<[usize; 3]> for Dims {
    fn from([n1, n2, n3]: [usize; 3]) -> Self {
        Dims { n1, n2, n3 }
    }
}

impl From<(usize, usize, usize)> for Dims {
    fn from((n1, n2, n3): (usize, usize, usize)) -> Self {
        Dims { n1, n2, n3 }
    }
}

/// Dense real `n1 x n2 x n3` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor3 {
    /// Builds a tensor from raw data in slice-sequential, column-major order.
    ///
    /// Rejects zero dimensions, a length mismatch, and non-finite entries.
    pub fn from_vec(dims: impl Into<Dims>, data: Vec<f64>) -> Result<Self> {
        let dims = dims.into();
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::Dimension(format!(
                "data length {} does not match {dims} = {}",
                data.len(),
                dims.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("entry {pos} is {}", data[pos])));
        }
        Ok(Tensor3 { dims, data })
    }

    /// Unchecked constructor for results of internal arithmetic.
    pub(crate) fn from_raw(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.len());
        Tensor3 { dims, data }
    }

    pub fn zeros(dims: impl Into<Dims>) -> Self {
        let dims = dims.into();
        Tensor3 {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn filled(dims: impl Into<Dims>, value: f64) -> Self {
        let dims = dims.into();
        Tensor3 {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn from_fn(dims: impl Into<Dims>, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let dims = dims.into();
        let mut data = Vec::with_capacity(dims.len());
        for k in 0..dims.n3 {
            for j in 0..dims.n2 {
                for i in 0..dims.n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 { dims, data }
    }

    /// Stacks `n1 x n2` matrices as frontal slices.
    pub fn from_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Dimension("no frontal slices given".into()))?;
        let (n1, n2) = first.shape();
        let dims = Dims::new(n1, n2, slices.len());
        dims.validate()?;
        let mut data = Vec::with_capacity(dims.len());
        for (k, s) in slices.iter().enumerate() {
            if s.shape() != (n1, n2) {
                return Err(Error::Dimension(format!(
                    "slice {k} has shape {:?}, expected ({n1}, {n2})",
                    s.shape()
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n1(&self) -> usize {
        self.dims.n1
    }

    pub fn n2(&self) -> usize {
        self.dims.n2
    }

    pub fn n3(&self) -> usize {
        self.dims.n3
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.n1 * (j + self.dims.n2 * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Frontal slice `k` as raw column-major data.
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.dims.slice_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.dims.slice_len();
        &mut self.data[k * n..(k + 1) * n]
    }

    /// Frontal slice `k` as an `n1 x n2` matrix.
    pub fn slice_matrix(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dims.n1, self.dims.n2, self.slice(k))
    }

    pub fn slices(&self) -> Vec<DMatrix<f64>> {
        (0..self.dims.n3).map(|k| self.slice_matrix(k)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3::from_raw(self.dims, self.data.iter().map(|&v| f(v)).collect())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor3) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&self, alpha: f64) -> Tensor3 {
        self.map(|v| alpha * v)
    }

    pub fn fro_norm(&self) -> f64 {
        fro_norm(self)
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(self)
    }

    pub(crate) fn check_same_dims(&self, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Dimension(format!(
                "tensor shapes differ: {} vs {}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Entrywise `a - b` without the shape check; callers guarantee equal shapes.
    pub(crate) fn diff(a: &Tensor3, b: &Tensor3) -> Tensor3 {
        debug_assert_eq!(a.dims, b.dims);
        Tensor3::from_raw(
            a.dims,
            a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect(),
        )
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

// Arithmetic operators panic on shape mismatch, like nalgebra's.
impl Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, rhs.dims, "tensor shapes differ");
        Tensor3::from_raw(
            self.dims,
            self.data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, rhs.dims, "tensor shapes differ");
        Tensor3::diff(self, rhs)
    }
}

impl Neg for &Tensor3 {
    type Output = Tensor3;

    fn neg(self) -> Tensor3 {
        self.map(|v| -v)
    }
}

impl Mul<f64> for &Tensor3 {
    type Output = Tensor3;

    fn mul(self, rhs: f64) -> Tensor3 {
        self.scale(rhs)
    }
}

/// Mode-3 unfolding: an `n3 x (n1*n2)` matrix whose row `k` is frontal slice `k`
/// flattened column-major.
pub fn unfold3(x: &Tensor3) -> DMatrix<f64> {
    let d = x.dims();
    DMatrix::from_fn(d.n3, d.slice_len(), |k, c| x.data[k * d.slice_len() + c])
}

/// Inverse of [`unfold3`].
pub fn fold3(m: &DMatrix<f64>, dims: impl Into<Dims>) -> Result<Tensor3> {
    let dims = dims.into();
    dims.validate()?;
    if m.shape() != (dims.n3, dims.slice_len()) {
        return Err(Error::Dimension(format!(
            "matrix shape {:?} cannot fold into {dims}; expected ({}, {})",
            m.shape(),
            dims.n3,
            dims.slice_len()
        )));
    }
    let n = dims.slice_len();
    let mut data = vec![0.0; dims.len()];
    for k in 0..dims.n3 {
        for c in 0..n {
            data[k * n + c] = m[(k, c)];
        }
    }
    Ok(Tensor3::from_raw(dims, data))
}

/// Mixes frontal slices: output slice `k` is `sum_m w[(k, m)] * x_m`.
fn mix_slices(x: &Tensor3, w: impl Fn(usize, usize) -> f64) -> Tensor3 {
    let d = x.dims();
    let n = d.slice_len();
    let mut out = vec![0.0; d.len()];
    for (k, out_slice) in out.chunks_exact_mut(n).enumerate() {
        for m in 0..d.n3 {
            let c = w(k, m);
            if c == 0.0 {
                continue;
            }
            for (o, v) in out_slice.iter_mut().zip(x.slice(m)) {
                *o += c * v;
            }
        }
    }
    Tensor3::from_raw(d, out)
}

fn check_transform(x: &Tensor3, u: &OrthogonalTransform) -> Result<()> {
    if u.size() != x.n3() {
        return Err(Error::Dimension(format!(
            "transform of size {} does not match n3 = {}",
            u.size(),
            x.n3()
        )));
    }
    Ok(())
}

/// `Fold3(U * Unfold3(x))`: the tensor in the transformed domain.
pub fn apply_transform(x: &Tensor3, u: &OrthogonalTransform) -> Result<Tensor3> {
    check_transform(x, u)?;
    if u.is_identity() {
        return Ok(x.clone());
    }
    let m = u.matrix();
    Ok(mix_slices(x, |k, j| m[(k, j)]))
}

/// `Fold3(U^T * Unfold3(xhat))`, the inverse of [`apply_transform`].
pub fn inverse_transform(xhat: &Tensor3, u: &OrthogonalTransform) -> Result<Tensor3> {
    check_transform(xhat, u)?;
    if u.is_identity() {
        return Ok(xhat.clone());
    }
    let m = u.matrix();
    Ok(mix_slices(xhat, |k, j| m[(j, k)]))
}

/// Box projection `max(min(x, c), -c)` applied entrywise.
pub fn project_box(x: &Tensor3, c: f64) -> Result<Tensor3> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::param(
            "c",
            format!("box bound must be positive, got {c}"),
        ));
    }
    Ok(x.map(|v| v.clamp(-c, c)))
}

pub fn fro_norm(x: &Tensor3) -> f64 {
    x.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn inf_norm(x: &Tensor3) -> f64 {
    x.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn inner(x: &Tensor3, y: &Tensor3) -> Result<f64> {
    x.check_same_dims(y)?;
    Ok(dot(&x.data, &y.data))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;
    use crate::transform::{dct_transform, identity_transform};

    #[test]
    fn unfold_small_cases() {
        let x = Tensor3::from_vec((1, 1, 2), vec![3.0, -1.0]).unwrap();
        let m = unfold3(&x);
        assert_eq!(m.shape(), (2, 1));
        assert_eq!((m[(0, 0)], m[(1, 0)]), (3.0, -1.0));

        // slice [[1,3],[2,4]] stored column-major
        let x = Tensor3::from_vec((2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(x[(0, 1, 0)], 3.0);
        let m = unfold3(&x);
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn fold_round_trips() {
        let x = random_tensor((4, 3, 5), 1);
        assert_eq!(fold3(&unfold3(&x), x.dims()).unwrap(), x);

        let m = DMatrix::from_fn(6, 12, |r, c| (r * 12 + c) as f64 * 0.5 - 3.0);
        let t = fold3(&m, (3, 4, 6)).unwrap();
        assert_eq!(unfold3(&t), m);

        let z = fold3(&DMatrix::zeros(2, 6), (2, 3, 2)).unwrap();
        assert_eq!(z, Tensor3::zeros((2, 3, 2)));

        let col = DMatrix::from_column_slice(2, 1, &[5.0, 7.0]);
        assert_eq!(fold3(&col, (1, 1, 2)).unwrap().as_slice(), &[5.0, 7.0]);
    }

    #[test]
    fn fold_rejects_bad_shape() {
        let m = DMatrix::<f64>::zeros(3, 5);
        assert!(matches!(fold3(&m, (2, 2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn from_vec_validates() {
        assert!(Tensor3::from_vec((2, 2, 2), vec![0.0; 7]).is_err());
        assert!(Tensor3::from_vec((0, 2, 2), vec![]).is_err());
        assert!(matches!(
            Tensor3::from_vec((1, 1, 2), vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn transform_identity_and_dct() {
        let x = random_tensor((5, 4, 3), 2);
        let id = identity_transform(3);
        assert_eq!(apply_transform(&x, &id).unwrap(), x);
        assert_eq!(inverse_transform(&x, &id).unwrap(), x);

        let dct = dct_transform(3);
        let back = inverse_transform(&apply_transform(&x, &dct).unwrap(), &dct).unwrap();
        assert!(fro_norm(&(&back - &x)) <= 1e-14 * fro_norm(&x));

        let z = Tensor3::zeros((2, 2, 3));
        assert_eq!(inverse_transform(&z, &dct).unwrap(), z);
    }

    #[test]
    fn dct_maps_constant_tubes() {
        let x = Tensor3::filled((2, 3, 2), 1.0);
        let xh = apply_transform(&x, &dct_transform(2)).unwrap();
        for j in 0..3 {
            for i in 0..2 {
                assert!((xh[(i, j, 0)] - 2f64.sqrt()).abs() < 1e-15);
                assert!(xh[(i, j, 1)].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn transform_rejects_size_mismatch() {
        let x = Tensor3::zeros((2, 2, 3));
        assert!(apply_transform(&x, &dct_transform(4)).is_err());
    }

    #[test]
    fn box_projection() {
        let x = Tensor3::from_vec((1, 1, 3), vec![2.5, -3.0, 0.5]).unwrap();
        assert_eq!(project_box(&x, 1.0).unwrap().as_slice(), &[1.0, -1.0, 0.5]);
        assert_eq!(project_box(&x, 2.0).unwrap().as_slice(), &[2.0, -2.0, 0.5]);
        assert_eq!(project_box(&x, 5.0).unwrap(), x);
        assert!(project_box(&x, 0.0).is_err());
        assert!(project_box(&x, -1.0).is_err());
    }

    #[test]
    fn norms_and_inner() {
        let z = Tensor3::zeros((2, 2, 2));
        assert_eq!(fro_norm(&z), 0.0);
        assert_eq!(inf_norm(&z), 0.0);
        assert_eq!(inner(&z, &z).unwrap(), 0.0);

        let ones = Tensor3::filled((2, 2, 2), 1.0);
        assert!((fro_norm(&ones) - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(inf_norm(&ones), 1.0);
        assert!(inner(&ones, &Tensor3::zeros((2, 2, 1))).is_err());

        for seed in 0..10 {
            let a = random_tensor((3, 4, 5), seed);
            let b = random_tensor((3, 4, 5), seed + 100);
            // slice-trace oracle
            let trace_sum: f64 = (0..5)
                .map(|k| (a.slice_matrix(k).transpose() * b.slice_matrix(k)).trace())
                .sum();
            assert!((inner(&a, &b).unwrap() - trace_sum).abs() < 1e-12);
            assert!((inner(&a, &a).unwrap() - fro_norm(&a).powi(2)).abs() < 1e-12);
        }
    }
}
