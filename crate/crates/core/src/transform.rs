//! Real orthogonal transforms along the third mode.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{unfold3, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Identity,
    Dct,
    DataDriven,
}

/// An `n3 x n3` real orthogonal matrix defining the transformed domain.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalTransform {
    matrix: DMatrix<f64>,
    kind: TransformKind,
}

impl OrthogonalTransform {
    /// Wraps a caller-supplied matrix after checking it is square and orthogonal.
    pub fn from_matrix(matrix: DMatrix<f64>, kind: TransformKind) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "transform must be a non-empty square matrix, got {:?}",
                matrix.shape()
            )));
        }
        if !validate_orthogonal(&matrix) {
            return Err(Error::param("transform", "matrix is not orthogonal"));
        }
        Ok(OrthogonalTransform { matrix, kind })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub(crate) fn is_identity(&self) -> bool {
        self.kind == TransformKind::Identity
    }
}

pub fn identity_transform(n3: usize) -> OrthogonalTransform {
    assert!(n3 >= 1, "transform size must be positive");
    OrthogonalTransform {
        matrix: DMatrix::identity(n3, n3),
        kind: TransformKind::Identity,
    }
}

/// Orthonormal DCT-II matrix: `U[k, m] = a_k cos(pi (2m + 1) k / (2 n3))`
/// with `a_0 = sqrt(1/n3)` and `a_k = sqrt(2/n3)` otherwise.
pub fn dct_transform(n3: usize) -> OrthogonalTransform {
    assert!(n3 >= 1, "transform size must be positive");
    let n = n3 as f64;
    let matrix = DMatrix::from_fn(n3, n3, |k, m| {
        let alpha = if k == 0 {
            (1.0 / n).sqrt()
        } else {
            (2.0 / n).sqrt()
        };
        alpha * (PI * (2 * m + 1) as f64 * k as f64 / (2.0 * n)).cos()
    });
    OrthogonalTransform {
        matrix,
        kind: TransformKind::Dct,
    }
}

/// Transform learned from a pilot estimate: the transpose of the left singular
/// vectors of the mode-3 unfolding, rows ordered by descending singular value.
///
/// Each row is sign-normalized so its largest-magnitude entry is nonnegative,
/// which makes the result a deterministic function of the pilot.
pub fn data_driven_transform(pilot: &Tensor3) -> Result<OrthogonalTransform> {
    if pilot.inf_norm() == 0.0 {
        return Err(Error::Degenerate(
            "pilot tensor is zero; no data-driven transform exists".into(),
        ));
    }
    let n3 = pilot.n3();
    let unfolded = unfold3(pilot);
    let svd = SVD::new(unfolded, true, false);
    let left = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD did not return left singular vectors".into()))?;
    let left = complete_orthonormal_columns(&left, n3);

    let mut rows = left.transpose();
    for mut row in rows.row_iter_mut() {
        let pivot = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0f64), |best, (idx, v)| {
                if v.abs() > best.1.abs() {
                    (idx, v)
                } else {
                    best
                }
            })
            .1;
        if pivot < 0.0 {
            row.neg_mut();
        }
    }
    OrthogonalTransform::from_matrix(rows, TransformKind::DataDriven)
}

/// Returns true iff `U U^T` and `U^T U` are both within `1e-10 * sqrt(n)` of the identity
/// in Frobenius norm.
pub fn validate_orthogonal(u: &DMatrix<f64>) -> bool {
    if !u.is_square() {
        return false;
    }
    let n = u.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let tol = 1e-10 * (n as f64).sqrt();
    (u * u.transpose() - &id).norm() <= tol && (u.transpose() * u - &id).norm() <= tol
}

/// Extends an `n x m` matrix with orthonormal columns to an `n x n` orthogonal matrix.
/// The first `m` columns are kept exactly.
pub(crate) fn complete_orthonormal_columns(q: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let m = q.ncols();
    if m >= n {
        return q.columns(0, n).into_owned();
    }
    let mut out = DMatrix::<f64>::zeros(n, n);
    out.columns_mut(0, m).copy_from(q);
    let mut filled = m;
    // Gram-Schmidt (twice) against the standard basis, taking the candidates
    // that leave the largest residual first.
    while filled < n {
        let mut best: Option<(f64, nalgebra::DVector<f64>)> = None;
        for e in 0..n {
            let mut v = nalgebra::DVector::<f64>::zeros(n);
            v[e] = 1.0;
            for _ in 0..2 {
                for c in 0..filled {
                    let col = out.column(c);
                    let proj = col.dot(&v);
                    v.axpy(-proj, &col, 1.0);
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0");
        out.column_mut(filled).copy_from(&(v / norm));
        filled += 1;
    }
    out
}
