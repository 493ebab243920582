//! End-to-end completion and classification runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{CompletionLoss, LogisticLoss, Mask, SmoothLoss};
use crate::metrics::{predict, psnr, relative_error, ssim, test_accuracy};
use crate::penalty::PenaltyParams;
use crate::solver::{pmm_solve, AdmmConfig, PmmConfig, SolveTrace};
use crate::synth::{ClassificationProblem, Observation};
use crate::tensor::Tensor3;
use crate::transform::{
    data_driven_transform, dct_transform, identity_transform, OrthogonalTransform,
};
use crate::tsvd::{multi_rank, MultiRank};

/// Default proximal weight for completion.
pub const COMPLETION_RHO: f64 = 10.0;
/// Default proximal weight for classification.
pub const CLASSIFICATION_RHO: f64 = 100.0;
/// Default box bound for classification.
pub const CLASSIFICATION_BOX_C: f64 = 10.0;
/// Completion box bound as a multiple of the largest observed magnitude.
pub const COMPLETION_BOX_FACTOR: f64 = 1.05;
/// Multi-rank tolerance used when reporting estimates.
pub const REPORT_RANK_TOL: f64 = 1e-6;

/// Which mode-3 transform to solve under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformChoice {
    Identity,
    Dct,
    /// Solve once under the DCT, then learn the transform from that estimate.
    Data {
        /// Outer-iteration cap for the pilot solve; `None` uses the main cap.
        pilot_max_outer: Option<usize>,
    },
}

impl std::str::FromStr for TransformChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(TransformChoice::Identity),
            "dct" => Ok(TransformChoice::Dct),
            "data" | "data-driven" => Ok(TransformChoice::Data {
                pilot_max_outer: None,
            }),
            other => Err(Error::param(
                "transform",
                format!("unknown transform `{other}`"),
            )),
        }
    }
}

/// Builds the transform, running the pilot solve for [`TransformChoice::Data`].
pub fn resolve_transform(
    choice: TransformChoice,
    n3: usize,
    pilot: impl FnOnce(&OrthogonalTransform, Option<usize>) -> Result<Tensor3>,
) -> Result<OrthogonalTransform> {
    match choice {
        TransformChoice::Identity => Ok(identity_transform(n3)),
        TransformChoice::Dct => Ok(dct_transform(n3)),
        TransformChoice::Data { pilot_max_outer } => {
            let estimate = pilot(&dct_transform(n3), pilot_max_outer)?;
            data_driven_transform(&estimate)
        }
    }
}

/// Completion defaults: `rho = 10`, box bound `1.05 * max |observed|`.
pub fn completion_pmm_defaults(observed: &Tensor3, beta: f64) -> PmmConfig {
    let peak = observed.inf_norm();
    let c = if peak > 0.0 {
        COMPLETION_BOX_FACTOR * peak
    } else {
        1.0
    };
    PmmConfig::new(COMPLETION_RHO, beta, c)
}

/// Classification defaults: `rho = 100`, box bound 10.
pub fn classification_pmm_defaults(beta: f64) -> PmmConfig {
    PmmConfig::new(CLASSIFICATION_RHO, beta, CLASSIFICATION_BOX_C)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub estimate: Tensor3,
    pub trace: SolveTrace,
    pub transform: OrthogonalTransform,
    pub multi_rank: MultiRank,
}

fn solve_with(
    loss: &dyn SmoothLoss,
    penalty: &PenaltyParams,
    transform: TransformChoice,
    pmm: &PmmConfig,
    admm: &AdmmConfig,
    x0: &Tensor3,
) -> Result<SolveOutcome> {
    let u = resolve_transform(transform, x0.n3(), |dct, cap| {
        let pilot_cfg = PmmConfig {
            max_outer: cap.unwrap_or(pmm.max_outer),
            ..*pmm
        };
        Ok(pmm_solve(loss, penalty, dct, &pilot_cfg, admm, x0)?.0)
    })?;
    let (estimate, trace) = pmm_solve(loss, penalty, &u, pmm, admm, x0)?;
    let multi_rank = multi_rank(&estimate, &u, REPORT_RANK_TOL)?;
    Ok(SolveOutcome {
        estimate,
        trace,
        transform: u,
        multi_rank,
    })
}

/// Recovers a tensor from masked observations, starting from `P_Omega(Y)`.
pub fn solve_completion(
    observation: &Observation,
    penalty: &PenaltyParams,
    transform: TransformChoice,
    pmm: &PmmConfig,
    admm: &AdmmConfig,
) -> Result<SolveOutcome> {
    let loss = CompletionLoss::new(&observation.observed, observation.mask.clone())?;
    let x0 = loss.y_obs().clone();
    solve_with(&loss, penalty, transform, pmm, admm, &x0)
}

/// Fits a logistic coefficient tensor, starting from zero.
pub fn solve_classification(
    samples: Vec<Tensor3>,
    labels: Vec<u8>,
    penalty: &PenaltyParams,
    transform: TransformChoice,
    pmm: &PmmConfig,
    admm: &AdmmConfig,
) -> Result<SolveOutcome> {
    let loss = LogisticLoss::new(samples, labels)?;
    let x0 = Tensor3::zeros(loss.dims());
    solve_with(&loss, penalty, transform, pmm, admm, &x0)
}

/// Recovery quality against a known ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionMetrics {
    /// `null` in JSON when the recovery is exact.
    pub psnr: f64,
    pub ssim: f64,
    pub relative_error: f64,
}

pub fn completion_metrics(recovered: &Tensor3, truth: &Tensor3) -> Result<CompletionMetrics> {
    Ok(CompletionMetrics {
        psnr: psnr(recovered, truth)?,
        ssim: ssim(recovered, truth)?,
        relative_error: relative_error(recovered, truth)?,
    })
}

/// Solves a synthetic classification problem and scores it on the held-out set.
pub fn run_classification(
    problem: &ClassificationProblem,
    penalty: &PenaltyParams,
    transform: TransformChoice,
    pmm: &PmmConfig,
    admm: &AdmmConfig,
) -> Result<(SolveOutcome, f64)> {
    let outcome = solve_classification(
        problem.train_samples.clone(),
        problem.train_labels.clone(),
        penalty,
        transform,
        pmm,
        admm,
    )?;
    let pred = predict(&outcome.estimate, &problem.test_samples)?;
    let acc = test_accuracy(&pred.labels, &problem.test_labels)?;
    Ok((outcome, acc))
}

/// Mask and masked data for a fully observed or user-supplied tensor.
pub fn observation_from(observed: &Tensor3, mask: Option<Mask>) -> Result<Observation> {
    let mask = mask.unwrap_or_else(|| Mask::full(observed.dims()));
    Ok(Observation {
        observed: mask.apply(observed)?,
        mask,
    })
}
