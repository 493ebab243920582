//! Smooth convex data-fit terms.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{dot, Dims, Tensor3};

/// A convex, differentiable loss with Lipschitz gradient.
pub trait SmoothLoss: Sync {
    fn dims(&self) -> Dims;

    fn value(&self, x: &Tensor3) -> Result<f64>;

    fn grad(&self, x: &Tensor3) -> Result<Tensor3>;

    /// Lipschitz constant of the gradient with respect to the Frobenius norm.
    fn lipschitz(&self) -> f64;

    /// Lipschitz constant used to gate the sufficient-descent check. Any valid
    /// constant works; losses with a cheaper sharp bound override this.
    fn descent_lipschitz(&self) -> f64 {
        self.lipschitz()
    }

    fn check_dims(&self, x: &Tensor3) -> Result<()> {
        if x.dims() != self.dims() {
            return Err(Error::Dimension(format!(
                "loss expects {}, got {}",
                self.dims(),
                x.dims()
            )));
        }
        Ok(())
    }
}

/// Boolean mask over a tensor's entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(dims: impl Into<Dims>, bits: Vec<bool>) -> Result<Self> {
        let dims = dims.into();
        if bits.len() != dims.len() {
            return Err(Error::Dimension(format!(
                "mask length {} does not match {dims}",
                bits.len()
            )));
        }
        Ok(Mask { dims, bits })
    }

    pub fn full(dims: impl Into<Dims>) -> Self {
        let dims = dims.into();
        Mask {
            dims,
            bits: vec![true; dims.len()],
        }
    }

    /// Nonzero entries of `t` are observed.
    pub fn from_tensor(t: &Tensor3) -> Self {
        Mask {
            dims: t.dims(),
            bits: t.as_slice().iter().map(|&v| v != 0.0).collect(),
        }
    }

    pub fn to_tensor(&self) -> Tensor3 {
        Tensor3::from_raw(
            self.dims,
            self.bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `P_Omega(x)`: zero outside the mask.
    pub fn apply(&self, x: &Tensor3) -> Result<Tensor3> {
        if x.dims() != self.dims {
            return Err(Error::Dimension(format!(
                "mask is {}, tensor is {}",
                self.dims,
                x.dims()
            )));
        }
        Ok(Tensor3::from_raw(
            self.dims,
            x.as_slice()
                .iter()
                .zip(&self.bits)
                .map(|(&v, &b)| if b { v } else { 0.0 })
                .collect(),
        ))
    }
}

/// `(1 / 2p) * ||P_Omega(x - y)||_F^2` with `p = |Omega| / N`.
#[derive(Debug, Clone)]
pub struct CompletionLoss {
    y_obs: Tensor3,
    mask: Mask,
    p: f64,
}

impl CompletionLoss {
    /// `y` is masked on construction, so entries outside `mask` are ignored.
    pub fn new(y: &Tensor3, mask: Mask) -> Result<Self> {
        let y_obs = mask.apply(y)?;
        let observed = mask.count();
        if observed == 0 {
            return Err(Error::Degenerate("mask observes no entries".into()));
        }
        let p = observed as f64 / mask.dims().len() as f64;
        Ok(CompletionLoss { y_obs, mask, p })
    }

    pub fn y_obs(&self) -> &Tensor3 {
        &self.y_obs
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    /// Observed fraction of entries.
    pub fn sampling_fraction(&self) -> f64 {
        self.p
    }
}

impl SmoothLoss for CompletionLoss {
    fn dims(&self) -> Dims {
        self.y_obs.dims()
    }

    fn value(&self, x: &Tensor3) -> Result<f64> {
        self.check_dims(x)?;
        let sum: f64 = x
            .as_slice()
            .iter()
            .zip(self.y_obs.as_slice())
            .zip(self.mask.as_slice())
            .filter(|(_, &b)| b)
            .map(|((a, y), _)| (a - y) * (a - y))
            .sum();
        Ok(sum / (2.0 * self.p))
    }

    fn grad(&self, x: &Tensor3) -> Result<Tensor3> {
        self.check_dims(x)?;
        let inv_p = 1.0 / self.p;
        Ok(Tensor3::from_raw(
            x.dims(),
            x.as_slice()
                .iter()
                .zip(self.y_obs.as_slice())
                .zip(self.mask.as_slice())
                .map(|((a, y), &b)| if b { inv_p * (a - y) } else { 0.0 })
                .collect(),
        ))
    }

    fn lipschitz(&self) -> f64 {
        1.0 / self.p
    }
}

/// Numerically safe `log(1 + exp(u))`.
pub fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u + (-u).exp()
    } else if u < -30.0 {
        u.exp()
    } else {
        u.exp().ln_1p()
    }
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `(1/n) sum_i [log(1 + exp<Z_i, x>) - y_i <Z_i, x>]`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    samples: Vec<Tensor3>,
    labels: Vec<u8>,
    sum_sq_norms: f64,
    design_sq_norm: f64,
}

impl LogisticLoss {
    pub fn new(samples: Vec<Tensor3>, labels: Vec<u8>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Degenerate("logistic loss needs at least one sample".into()))?;
        let dims = first.dims();
        if let Some(i) = samples.iter().position(|s| s.dims() != dims) {
            return Err(Error::Dimension(format!(
                "sample {i} is {}, expected {dims}",
                samples[i].dims()
            )));
        }
        if labels.len() != samples.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} samples",
                labels.len(),
                samples.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::param(
                "labels",
                format!("label {i} is {}, expected 0 or 1", labels[i]),
            ));
        }
        let sum_sq_norms = samples
            .iter()
            .map(|s| dot(s.as_slice(), s.as_slice()))
            .sum();
        let design_sq_norm = design_spectral_sq(&samples);
        Ok(LogisticLoss {
            samples,
            labels,
            sum_sq_norms,
            design_sq_norm,
        })
    }

    pub fn samples(&self) -> &[Tensor3] {
        &self.samples
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// `<Z_i, x>` for every sample, in sample order.
    pub fn linear_predictors(&self, x: &Tensor3) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(self
            .samples
            .par_iter()
            .map(|z| dot(z.as_slice(), x.as_slice()))
            .collect())
    }
}

impl SmoothLoss for LogisticLoss {
    fn dims(&self) -> Dims {
        self.samples[0].dims()
    }

    fn value(&self, x: &Tensor3) -> Result<f64> {
        let u = self.linear_predictors(x)?;
        let sum: f64 = u
            .iter()
            .zip(&self.labels)
            .map(|(&u, &y)| softplus(u) - f64::from(y) * u)
            .sum();
        Ok(sum / self.n() as f64)
    }

    fn grad(&self, x: &Tensor3) -> Result<Tensor3> {
        let u = self.linear_predictors(x)?;
        let mut g = Tensor3::zeros(x.dims());
        for ((z, &ui), &y) in self.samples.iter().zip(&u).zip(&self.labels) {
            let w = sigmoid(ui) - f64::from(y);
            if w != 0.0 {
                g.axpy(w, z)?;
            }
        }
        Ok(g.scale(1.0 / self.n() as f64))
    }

    /// `(1 / 4n) * sum_i ||Z_i||_F^2`.
    fn lipschitz(&self) -> f64 {
        self.sum_sq_norms / (4.0 * self.n() as f64)
    }

    /// `(1 / 4n) * ||Z||_2^2` with `Z` the sample-by-entry design matrix. Never
    /// larger than [`SmoothLoss::lipschitz`] and usually far smaller.
    fn descent_lipschitz(&self) -> f64 {
        (self.design_sq_norm / (4.0 * self.n() as f64)).min(self.lipschitz())
    }
}

/// Squared spectral norm of the design matrix whose rows are the vectorized
/// samples, from the smaller of its two Gram matrices.
fn design_spectral_sq(samples: &[Tensor3]) -> f64 {
    let d = samples[0].len();
    let z = DMatrix::from_fn(d, samples.len(), |i, j| samples[j].as_slice()[i]);
    let gram = if samples.len() <= d {
        z.transpose() * &z
    } else {
        &z * z.transpose()
    };
    let top = gram.symmetric_eigenvalues().max();
    // guard against eigensolver rounding so the bound stays an upper bound
    top * (1.0 + 1e-10)
}
