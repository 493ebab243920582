//! Tensor-tensor products and the transformed t-SVD.
//!
//! Everything here works slice by slice in the transformed domain: transform
//! along mode 3, run an ordinary matrix operation on each frontal slice, and
//! transform back. Slices are independent, so they are processed with rayon;
//! every reduction happens afterwards in slice order, keeping results
//! independent of the thread schedule.

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{apply_transform, inverse_transform, Dims, Tensor3};
use crate::transform::{complete_orthonormal_columns, OrthogonalTransform};

const SVD_MAX_SWEEPS: usize = 10_000;

/// Frontal slices of `x` in the transformed domain.
pub fn transformed_slices(x: &Tensor3, u: &OrthogonalTransform) -> Result<Vec<DMatrix<f64>>> {
    Ok(apply_transform(x, u)?.slices())
}

/// Stacks transformed-domain slices and maps them back to the original domain.
pub fn from_transformed_slices(
    slices: &[DMatrix<f64>],
    u: &OrthogonalTransform,
) -> Result<Tensor3> {
    inverse_transform(&Tensor3::from_slices(slices)?, u)
}

/// Thin SVD of one slice with singular values sorted descending.
pub(crate) fn slice_svd(m: DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    SVD::try_new(m, true, true, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical("matrix SVD did not converge".into()))
}

fn singular_values(m: DMatrix<f64>) -> Result<DVector<f64>> {
    let mut sv = m.singular_values();
    if sv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite singular value".into()));
    }
    // nalgebra returns them sorted, but the ordering guarantee is cheap to restate.
    sv.as_mut_slice()
        .sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sv)
}

/// Per-slice singular values of the transformed tensor, each vector descending
/// and of length `min(n1, n2)`.
pub fn transformed_singular_values(x: &Tensor3, u: &OrthogonalTransform) -> Result<Vec<Vec<f64>>> {
    transformed_slices(x, u)?
        .into_par_iter()
        .map(|s| singular_values(s).map(|v| v.as_slice().to_vec()))
        .collect()
}

/// U-product: per transformed slice `a_i * b_i`, transformed back.
pub fn t_product(a: &Tensor3, b: &Tensor3, u: &OrthogonalTransform) -> Result<Tensor3> {
    if a.n2() != b.n1() || a.n3() != b.n3() {
        return Err(Error::Dimension(format!(
            "cannot form U-product of {} and {}",
            a.dims(),
            b.dims()
        )));
    }
    let ah = transformed_slices(a, u)?;
    let bh = transformed_slices(b, u)?;
    let prod: Vec<DMatrix<f64>> = ah.par_iter().zip(&bh).map(|(x, y)| x * y).collect();
    from_transformed_slices(&prod, u)
}

/// Transpose with respect to the U-product.
///
/// Transposing every transformed slice and transforming back equals transposing
/// every original slice, because a real mode-3 transform only takes linear
/// combinations of whole frontal slices.
pub fn t_transpose(x: &Tensor3, u: &OrthogonalTransform) -> Result<Tensor3> {
    if u.size() != x.n3() {
        return Err(Error::Dimension(format!(
            "transform of size {} does not match n3 = {}",
            u.size(),
            x.n3()
        )));
    }
    let d = x.dims();
    let mut out = Tensor3::zeros((d.n2, d.n1, d.n3));
    for k in 0..d.n3 {
        for j in 0..d.n2 {
            for i in 0..d.n1 {
                out[(j, i, k)] = x[(i, j, k)];
            }
        }
    }
    Ok(out)
}

/// Identity tensor for the U-product: every transformed slice is `I_n`.
pub fn identity_tensor(n: usize, u: &OrthogonalTransform) -> Result<Tensor3> {
    let slices = vec![DMatrix::<f64>::identity(n, n); u.size()];
    from_transformed_slices(&slices, u)
}

/// Factors of the transformed t-SVD `x = U * S * V^T` (U-products).
#[derive(Debug, Clone)]
pub struct TSVDFactors {
    /// `n1 x n1 x n3`, orthogonal slices in the transformed domain.
    pub u_tensor: Tensor3,
    /// Per transformed slice, descending singular values of length `min(n1, n2)`.
    pub sigma: Vec<Vec<f64>>,
    /// `n2 x n2 x n3`, orthogonal slices in the transformed domain.
    pub v_tensor: Tensor3,
    pub transform: OrthogonalTransform,
}

impl TSVDFactors {
    /// The f-diagonal middle factor as an `n1 x n2 x n3` tensor in the original domain.
    pub fn sigma_tensor(&self) -> Result<Tensor3> {
        let (n1, n2) = (self.u_tensor.n1(), self.v_tensor.n1());
        let slices: Vec<DMatrix<f64>> = self
            .sigma
            .iter()
            .map(|s| {
                let mut m = DMatrix::zeros(n1, n2);
                for (j, &v) in s.iter().enumerate() {
                    m[(j, j)] = v;
                }
                m
            })
            .collect();
        from_transformed_slices(&slices, &self.transform)
    }

    /// `U * S * V^T` with U-products.
    pub fn reconstruct(&self) -> Result<Tensor3> {
        let u = &self.transform;
        let us = t_product(&self.u_tensor, &self.sigma_tensor()?, u)?;
        t_product(&us, &t_transpose(&self.v_tensor, u)?, u)
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.u_tensor.n1(), self.v_tensor.n1(), self.u_tensor.n3())
    }
}

/// Transformed tensor SVD.
pub fn t_svd(x: &Tensor3, u: &OrthogonalTransform) -> Result<TSVDFactors> {
    let d = x.dims();
    let per_slice: Vec<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> = transformed_slices(x, u)?
        .into_par_iter()
        .map(|s| {
            let svd = slice_svd(s)?;
            let left = svd.u.as_ref().expect("requested U");
            let right = svd.v_t.as_ref().expect("requested V^T").transpose();
            Ok((
                complete_orthonormal_columns(left, d.n1),
                svd.singular_values.as_slice().to_vec(),
                complete_orthonormal_columns(&right, d.n2),
            ))
        })
        .collect::<Result<_>>()?;

    let mut us = Vec::with_capacity(d.n3);
    let mut sigma = Vec::with_capacity(d.n3);
    let mut vs = Vec::with_capacity(d.n3);
    for (a, s, b) in per_slice {
        us.push(a);
        sigma.push(s);
        vs.push(b);
    }
    Ok(TSVDFactors {
        u_tensor: from_transformed_slices(&us, u)?,
        sigma,
        v_tensor: from_transformed_slices(&vs, u)?,
        transform: u.clone(),
    })
}

/// Transformed tensor nuclear norm: sum of nuclear norms of the transformed slices.
pub fn ttnn(x: &Tensor3, u: &OrthogonalTransform) -> Result<f64> {
    Ok(transformed_singular_values(x, u)?
        .iter()
        .map(|s| s.iter().sum::<f64>())
        .sum())
}

/// Largest singular value over all transformed slices.
pub fn spectral_norm_u(x: &Tensor3, u: &OrthogonalTransform) -> Result<f64> {
    Ok(transformed_singular_values(x, u)?
        .iter()
        .filter_map(|s| s.first().copied())
        .fold(0.0, f64::max))
}

/// Ranks of the transformed frontal slices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiRank {
    pub ranks: Vec<usize>,
}

impl MultiRank {
    pub fn sum(&self) -> usize {
        self.ranks.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(0)
    }
}

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Counts, per transformed slice, the singular values above `tol` times the
/// largest singular value of the whole tensor.
pub fn multi_rank(x: &Tensor3, u: &OrthogonalTransform, tol: f64) -> Result<MultiRank> {
    if !(tol >= 0.0) {
        return Err(Error::param("tol", "rank tolerance must be nonnegative"));
    }
    Ok(multi_rank_from_sigma(
        &transformed_singular_values(x, u)?,
        tol,
    ))
}

pub fn multi_rank_from_sigma(sigma: &[Vec<f64>], tol: f64) -> MultiRank {
    let smax = sigma
        .iter()
        .filter_map(|s| s.first().copied())
        .fold(0.0, f64::max);
    if smax == 0.0 {
        return MultiRank {
            ranks: vec![0; sigma.len()],
        };
    }
    let cut = tol * smax;
    MultiRank {
        ranks: sigma
            .iter()
            .map(|s| s.iter().filter(|&&v| v > cut).count())
            .collect(),
    }
}

/// Replaces every transformed singular value `s` by `f(s)` and reassembles the
/// tensor. This is the spectral-calculus primitive behind singular-value
/// thresholding and the gradient of spectral penalties.
pub(crate) fn map_singular_values(
    x: &Tensor3,
    u: &OrthogonalTransform,
    f: impl Fn(f64) -> f64 + Sync,
) -> Result<Tensor3> {
    let mapped: Vec<DMatrix<f64>> = transformed_slices(x, u)?
        .into_par_iter()
        .map(|s| {
            let svd = slice_svd(s)?;
            let left = svd.u.as_ref().expect("requested U");
            let vt = svd.v_t.as_ref().expect("requested V^T");
            let scaled = DVector::from_iterator(
                svd.singular_values.len(),
                svd.singular_values.iter().map(|&v| f(v)),
            );
            Ok(left * DMatrix::from_diagonal(&scaled) * vt)
        })
        .collect::<Result<_>>()?;
    from_transformed_slices(&mapped, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::fro_norm;
    use crate::testutil::random_tensor;
    use crate::transform::{dct_transform, identity_transform};

    fn diag_slices(diags: &[&[f64]], n1: usize, n2: usize) -> Tensor3 {
        let slices: Vec<DMatrix<f64>> = diags
            .iter()
            .map(|d| {
                let mut m = DMatrix::zeros(n1, n2);
                for (j, &v) in d.iter().enumerate() {
                    m[(j, j)] = v;
                }
                m
            })
            .collect();
        Tensor3::from_slices(&slices).unwrap()
    }

    #[test]
    fn product_with_identity_tensor() {
        let u = dct_transform(3);
        let a = random_tensor((4, 4, 3), 11);
        let i = identity_tensor(4, &u).unwrap();
        let p = t_product(&a, &i, &u).unwrap();
        assert!(fro_norm(&(&p - &a)) < 1e-13 * fro_norm(&a));
    }

    #[test]
    fn product_degenerates_to_matrix_product() {
        let u = identity_transform(1);
        let a = random_tensor((3, 2, 1), 1);
        let b = random_tensor((2, 4, 1), 2);
        let p = t_product(&a, &b, &u).unwrap();
        let expected = a.slice_matrix(0) * b.slice_matrix(0);
        assert!((p.slice_matrix(0) - expected).abs().max() < 1e-14);
    }

    #[test]
    fn product_rejects_bad_shapes() {
        let u = identity_transform(2);
        let a = Tensor3::zeros((3, 2, 2));
        assert!(t_product(&a, &Tensor3::zeros((3, 2, 2)), &u).is_err());
        assert!(t_product(&a, &Tensor3::zeros((2, 2, 3)), &u).is_err());
    }

    #[test]
    fn transpose_cases() {
        let u = identity_transform(1);
        let a = random_tensor((3, 2, 1), 5);
        assert_eq!(
            t_transpose(&a, &u).unwrap().slice_matrix(0),
            a.slice_matrix(0).transpose()
        );

        let u = dct_transform(4);
        let x = random_tensor((5, 3, 4), 6);
        assert_eq!(t_transpose(&t_transpose(&x, &u).unwrap(), &u).unwrap(), x);

        // symmetric in every transformed slice
        let sym: Vec<DMatrix<f64>> = (0..4)
            .map(|k| {
                let m = random_tensor((3, 3, 1), 20 + k).slice_matrix(0);
                &m + m.transpose()
            })
            .collect();
        let s = from_transformed_slices(&sym, &u).unwrap();
        let st = t_transpose(&s, &u).unwrap();
        assert!(fro_norm(&(&st - &s)) < 1e-13);

        // (a b)^T = b^T a^T
        let a = random_tensor((3, 2, 4), 7);
        let b = random_tensor((2, 5, 4), 8);
        let lhs = t_transpose(&t_product(&a, &b, &u).unwrap(), &u).unwrap();
        let rhs = t_product(
            &t_transpose(&b, &u).unwrap(),
            &t_transpose(&a, &u).unwrap(),
            &u,
        )
        .unwrap();
        assert!(fro_norm(&(&lhs - &rhs)) < 1e-12);
    }

    #[test]
    fn svd_of_zero_and_diagonal() {
        let u = dct_transform(3);
        let f = t_svd(&Tensor3::zeros((4, 3, 3)), &u).unwrap();
        assert!(f.sigma.iter().flatten().all(|&v| v == 0.0));

        let x = diag_slices(&[&[3.0, 1.0]], 2, 2);
        let f = t_svd(&x, &identity_transform(1)).unwrap();
        assert!((f.sigma[0][0] - 3.0).abs() < 1e-14 && (f.sigma[0][1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_rectangular_tensors() {
        for (dims, seed) in [((8, 6, 5), 1u64), ((3, 7, 4), 2), ((5, 5, 1), 3)] {
            let x = random_tensor(dims, seed);
            let u = dct_transform(dims.2);
            let f = t_svd(&x, &u).unwrap();
            assert_eq!(f.u_tensor.dims(), Dims::new(dims.0, dims.0, dims.2));
            assert_eq!(f.v_tensor.dims(), Dims::new(dims.1, dims.1, dims.2));
            let r = f.reconstruct().unwrap();
            assert!(fro_norm(&(&r - &x)) <= 1e-10 * fro_norm(&x));
            for s in &f.sigma {
                assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|&v| v >= 0.0));
            }
            for k in 0..dims.2 {
                let uh = apply_transform(&f.u_tensor, &u).unwrap().slice_matrix(k);
                let id = DMatrix::<f64>::identity(dims.0, dims.0);
                assert!((uh.transpose() * &uh - id).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn nuclear_and_spectral_norms_of_diagonal_slices() {
        let x = diag_slices(&[&[2.0, 1.0], &[3.0, 0.0]], 2, 2);
        let u = identity_transform(2);
        assert!((ttnn(&x, &u).unwrap() - 6.0).abs() < 1e-14);
        assert!((spectral_norm_u(&x, &u).unwrap() - 3.0).abs() < 1e-14);
        let z = Tensor3::zeros((2, 2, 2));
        assert_eq!(ttnn(&z, &u).unwrap(), 0.0);
        assert_eq!(spectral_norm_u(&z, &u).unwrap(), 0.0);
    }

    #[test]
    fn ttnn_is_sum_of_tsvd_sigma() {
        let x = random_tensor((6, 5, 4), 9);
        let u = dct_transform(4);
        let total: f64 = t_svd(&x, &u).unwrap().sigma.iter().flatten().sum();
        assert!((ttnn(&x, &u).unwrap() - total).abs() <= 1e-10 * total);
    }

    #[test]
    fn multi_rank_cases() {
        let u = identity_transform(2);
        assert_eq!(
            multi_rank(&Tensor3::zeros((3, 3, 2)), &u, DEFAULT_RANK_TOL)
                .unwrap()
                .ranks,
            vec![0, 0]
        );
        let x = diag_slices(&[&[5.0, 0.0], &[1.0, 1.0]], 2, 2);
        assert_eq!(
            multi_rank(&x, &u, DEFAULT_RANK_TOL).unwrap().ranks,
            vec![1, 2]
        );
        assert!(multi_rank(&x, &u, -1.0).is_err());
    }

    #[test]
    fn singular_value_map_identity_is_noop() {
        let x = random_tensor((4, 6, 3), 4);
        let u = dct_transform(3);
        let y = map_singular_values(&x, &u, |s| s).unwrap();
        assert!(fro_norm(&(&y - &x)) < 1e-12 * fro_norm(&x));
    }
}
