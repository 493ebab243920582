//! Dense reference computations shared by the integration tests.
//!
//! Everything here works on the block-diagonal matrix of transformed frontal
//! slices, built with explicit loops over the transform matrix. None of it
//! calls the library's own transform or t-SVD code.

#![allow(dead_code)]

use lowrank_tensor::synth::gaussian_tensor;
use lowrank_tensor::transform::OrthogonalTransform;
use lowrank_tensor::Tensor3;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(dims: (usize, usize, usize), rng: &mut ChaCha8Rng) -> Tensor3 {
    gaussian_tensor(dims, rng)
}

/// Random shape with every side in `1..=max`.
pub fn random_dims(rng: &mut ChaCha8Rng, max: (usize, usize, usize)) -> (usize, usize, usize) {
    (
        rng.random_range(1..=max.0),
        rng.random_range(1..=max.1),
        rng.random_range(1..=max.2),
    )
}

/// Transformed slices `xhat_k = sum_j U[k, j] X_j`.
pub fn dense_forward(x: &Tensor3, u: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let (n1, n2, n3) = (x.n1(), x.n2(), x.n3());
    (0..n3)
        .map(|k| {
            DMatrix::from_fn(n1, n2, |i, j| {
                (0..n3).map(|l| u[(k, l)] * x.get(i, j, l)).sum()
            })
        })
        .collect()
}

/// Inverse of [`dense_forward`]: `X_l = sum_k U[k, l] xhat_k`.
pub fn dense_inverse(slices: &[DMatrix<f64>], u: &DMatrix<f64>) -> Tensor3 {
    let n3 = slices.len();
    let (n1, n2) = slices[0].shape();
    Tensor3::from_fn((n1, n2, n3), |i, j, l| {
        (0..n3).map(|k| u[(k, l)] * slices[k][(i, j)]).sum()
    })
}

pub fn block_diag(slices: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (r, c) = slices[0].shape();
    let mut out = DMatrix::zeros(r * slices.len(), c * slices.len());
    for (k, s) in slices.iter().enumerate() {
        out.view_mut((k * r, k * c), (r, c)).copy_from(s);
    }
    out
}

/// Splits a block-diagonal matrix back into its blocks.
pub fn blocks(m: &DMatrix<f64>, n3: usize) -> Vec<DMatrix<f64>> {
    let (r, c) = (m.nrows() / n3, m.ncols() / n3);
    (0..n3)
        .map(|k| m.view((k * r, k * c), (r, c)).into_owned())
        .collect()
}

pub fn bdiag_of(x: &Tensor3, u: &OrthogonalTransform) -> DMatrix<f64> {
    block_diag(&dense_forward(x, u.matrix()))
}

/// Singular values of the whole block-diagonal matrix, descending.
pub fn dense_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular-value soft thresholding of every transformed slice.
pub fn dense_svt(x: &Tensor3, u: &OrthogonalTransform, tau: f64) -> Tensor3 {
    let shrunk: Vec<DMatrix<f64>> = dense_forward(x, u.matrix())
        .into_iter()
        .map(|s| {
            let mut svd = s.svd(true, true);
            svd.singular_values.apply(|v| *v = (*v - tau).max(0.0));
            svd.recompose().expect("factors were requested")
        })
        .collect();
    dense_inverse(&shrunk, u.matrix())
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn rel_tensor_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    rel_diff(a.as_slice(), b.as_slice())
}

/// `|a - b| / |b|`, or the absolute difference when `b` is zero.
pub fn rel_scalar_diff(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Central finite-difference gradient of `f`, one coordinate at a time.
pub fn fd_gradient(x: &Tensor3, h: f64, f: impl Fn(&Tensor3) -> f64) -> Tensor3 {
    let mut g = Tensor3::zeros(x.dims());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let orig = probe.as_slice()[idx];
        probe.as_mut_slice()[idx] = orig + h;
        let fp = f(&probe);
        probe.as_mut_slice()[idx] = orig - h;
        let fm = f(&probe);
        probe.as_mut_slice()[idx] = orig;
        g.as_mut_slice()[idx] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Smallest gap between distinct-index transformed singular values of a
/// slice, including the gap to zero for the smallest one.
pub fn min_singular_gap(x: &Tensor3, u: &OrthogonalTransform) -> f64 {
    dense_forward(x, u.matrix())
        .into_iter()
        .map(|s| {
            let mut v: Vec<f64> = s
                .svd(false, false)
                .singular_values
                .iter()
                .copied()
                .collect();
            v.sort_by(|a, b| b.total_cmp(a));
            let mut gap = v.last().copied().unwrap_or(f64::INFINITY);
            for w in v.windows(2) {
                gap = gap.min(w[0] - w[1]);
            }
            gap
        })
        .fold(f64::INFINITY, f64::min)
}
