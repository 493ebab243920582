//! Folded-concave spectral penalties and their difference-of-convex split.
//!
//! A scalar penalty `g` is written as `g(x) = s1(x) - s2(x)` with `s1(x) = lambda * x`
//! and `s2` convex and differentiable. Applied to every transformed singular
//! value, `s1` becomes `lambda` times the transformed nuclear norm (whose
//! proximal map is singular-value soft thresholding) and `s2` becomes a smooth
//! convex spectral function whose gradient is obtained by mapping the
//! singular values through `s2'`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;
use crate::transform::OrthogonalTransform;
use crate::tsvd::{map_singular_values, transformed_singular_values};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Mcp,
    Scad,
    Log,
    /// `g(x) = lambda * x`; the regularizer reduces to the transformed nuclear norm.
    Convex,
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcp" => Ok(PenaltyKind::Mcp),
            "scad" => Ok(PenaltyKind::Scad),
            "log" | "logarithm" => Ok(PenaltyKind::Log),
            "convex" | "ttnn" | "nuclear" => Ok(PenaltyKind::Convex),
            other => Err(Error::param(
                "penalty",
                format!("unknown penalty kind `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyKind::Mcp => "mcp",
            PenaltyKind::Scad => "scad",
            PenaltyKind::Log => "log",
            PenaltyKind::Convex => "convex",
        })
    }
}

/// A validated penalty `(kind, lambda, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    kind: PenaltyKind,
    lambda: f64,
    gamma: f64,
}

impl PenaltyParams {
    /// `gamma` is ignored for [`PenaltyKind::Convex`].
    pub fn new(kind: PenaltyKind, lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::param(
                "lambda",
                format!("must be positive, got {lambda}"),
            ));
        }
        match kind {
            PenaltyKind::Mcp | PenaltyKind::Log if !(gamma > 0.0) || !gamma.is_finite() => {
                return Err(Error::param(
                    "gamma",
                    format!("must be positive for {kind}, got {gamma}"),
                ))
            }
            PenaltyKind::Scad if !(gamma > 1.0) || !gamma.is_finite() => {
                return Err(Error::param(
                    "gamma",
                    format!("must exceed 1 for scad, got {gamma}"),
                ))
            }
            _ => {}
        }
        Ok(PenaltyParams {
            kind,
            lambda,
            gamma,
        })
    }

    pub fn convex(lambda: f64) -> Result<Self> {
        PenaltyParams::new(PenaltyKind::Convex, lambda, 1.0)
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Slope factor: `g'(0+) = lambda * k0`.
    pub fn k0(&self) -> f64 {
        match self.kind {
            PenaltyKind::Log => 1.0 / self.gamma,
            _ => 1.0,
        }
    }

    /// Lipschitz constant of `s2'`; `g + (mu/2) x^2` is convex.
    pub fn mu(&self) -> f64 {
        match self.kind {
            PenaltyKind::Mcp => 1.0 / self.gamma,
            PenaltyKind::Scad => 1.0 / (self.gamma - 1.0),
            PenaltyKind::Log => self.lambda / (self.gamma * self.gamma),
            PenaltyKind::Convex => 0.0,
        }
    }

    pub fn g(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(self.g_unchecked(x))
    }

    /// Derivative of `g`; at `x = 0` this is the right limit `lambda * k0`.
    pub fn g_derivative(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(self.s1_derivative() - self.s2_derivative_unchecked(x))
    }

    pub fn s1(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(self.lambda * x)
    }

    fn s1_derivative(&self) -> f64 {
        self.lambda
    }

    pub fn s2(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(self.s2_unchecked(x))
    }

    /// Derivative of `s2`; at `x = 0` the right limit.
    pub fn s2_derivative(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(self.s2_derivative_unchecked(x))
    }

    pub(crate) fn g_unchecked(&self, x: f64) -> f64 {
        let (l, g) = (self.lambda, self.gamma);
        match self.kind {
            PenaltyKind::Mcp => {
                if x <= g * l {
                    l * x - x * x / (2.0 * g)
                } else {
                    0.5 * g * l * l
                }
            }
            PenaltyKind::Scad => {
                if x < l {
                    l * x
                } else if x < g * l {
                    (-x * x + 2.0 * g * l * x - l * l) / (2.0 * (g - 1.0))
                } else {
                    0.5 * l * l * (g + 1.0)
                }
            }
            PenaltyKind::Log => l * (x / g).ln_1p(),
            PenaltyKind::Convex => l * x,
        }
    }

    pub(crate) fn s2_unchecked(&self, x: f64) -> f64 {
        let (l, g) = (self.lambda, self.gamma);
        match self.kind {
            PenaltyKind::Mcp => {
                if x <= g * l {
                    x * x / (2.0 * g)
                } else {
                    l * x - 0.5 * g * l * l
                }
            }
            PenaltyKind::Scad => {
                if x < l {
                    0.0
                } else if x < g * l {
                    (x - l) * (x - l) / (2.0 * (g - 1.0))
                } else {
                    l * x - 0.5 * (g + 1.0) * l * l
                }
            }
            // extended continuously by s2(0) = 0
            PenaltyKind::Log => l * x - l * (x / g).ln_1p(),
            PenaltyKind::Convex => 0.0,
        }
    }

    pub(crate) fn s2_derivative_unchecked(&self, x: f64) -> f64 {
        let (l, g) = (self.lambda, self.gamma);
        match self.kind {
            PenaltyKind::Mcp => {
                if x <= g * l {
                    x / g
                } else {
                    l
                }
            }
            PenaltyKind::Scad => {
                if x < l {
                    0.0
                } else if x < g * l {
                    (x - l) / (g - 1.0)
                } else {
                    l
                }
            }
            PenaltyKind::Log => l - l / (x + g),
            PenaltyKind::Convex => 0.0,
        }
    }
}

fn check_domain(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "penalty argument must be a finite nonnegative number, got {x}"
        )))
    }
}

/// `G(x) = sum_i sum_j g(sigma_j(xhat_i))` over the transformed slices.
pub fn g_lambda(x: &Tensor3, u: &OrthogonalTransform, p: &PenaltyParams) -> Result<f64> {
    spectral_sum(x, u, |s| p.g_unchecked(s))
}

/// `S2(x) = sum_i sum_j s2(sigma_j(xhat_i))`, so that `G = lambda * ttnn - S2`.
pub fn s2_value(x: &Tensor3, u: &OrthogonalTransform, p: &PenaltyParams) -> Result<f64> {
    if p.kind == PenaltyKind::Convex {
        return Ok(0.0);
    }
    spectral_sum(x, u, |s| p.s2_unchecked(s))
}

fn spectral_sum(x: &Tensor3, u: &OrthogonalTransform, f: impl Fn(f64) -> f64) -> Result<f64> {
    Ok(transformed_singular_values(x, u)?
        .iter()
        .map(|s| s.iter().map(|&v| f(v)).sum::<f64>())
        .sum())
}

/// Gradient of [`s2_value`]: same singular vectors, singular values mapped through `s2'`.
pub fn grad_s2(x: &Tensor3, u: &OrthogonalTransform, p: &PenaltyParams) -> Result<Tensor3> {
    if p.kind == PenaltyKind::Convex {
        return Ok(Tensor3::zeros(x.dims()));
    }
    map_singular_values(x, u, |s| p.s2_derivative_unchecked(s))
}

/// Proximal map of `theta * lambda * ||.||_TTNN`: soft-threshold every transformed
/// singular value by `theta * lambda`.
pub fn prox_s1(
    a: &Tensor3,
    theta: f64,
    u: &OrthogonalTransform,
    p: &PenaltyParams,
) -> Result<Tensor3> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::param(
            "theta",
            format!("must be positive, got {theta}"),
        ));
    }
    let tau = theta * p.lambda;
    map_singular_values(a, u, |s| (s - tau).max(0.0))
}
