//! Nonconvex low-rank tensor learning under transformed tensor SVD.
//!
//! Third-order tensors are regularized through the singular values of their
//! frontal slices after an orthogonal transform along mode 3. The regularizer
//! applies a folded-concave penalty (MCP, SCAD, logarithmic, or the convex
//! nuclear norm) to each transformed singular value. Models are fitted with a
//! proximal majorization-minimization loop whose convex subproblems are solved
//! by ADMM. Two losses are provided: masked least squares for tensor
//! completion and logistic loss for binary classification.
//!
//! ```
//! use lowrank_tensor::prelude::*;
//!
//! let u = dct_transform(4);
//! let truth = synth_low_multirank((20, 20, 4), 2, &u, 7).unwrap();
//! let problem = CompletionProblem::new(truth.clone(), 0.6, 0.0, 7).unwrap();
//! let obs = problem.observe().unwrap();
//!
//! let penalty = PenaltyParams::new(PenaltyKind::Mcp, 3.0, 2.7).unwrap();
//! let pmm = completion_pmm_defaults(&obs.observed, 2.0);
//! let out = solve_completion(&obs, &penalty, TransformChoice::Dct, &pmm, &AdmmConfig::default()).unwrap();
//! assert!(relative_error(&out.estimate, &truth).unwrap() < 0.1);
//! ```

// Range checks are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod penalty;
pub mod pipeline;
pub mod solver;
pub mod synth;
pub mod tensor;
pub mod transform;
pub mod tsvd;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use tensor::{Dims, Tensor3};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::loss::{CompletionLoss, LogisticLoss, Mask, SmoothLoss};
    pub use crate::metrics::{predict, psnr, relative_error, ssim, test_accuracy};
    pub use crate::penalty::{g_lambda, grad_s2, prox_s1, s2_value, PenaltyKind, PenaltyParams};
    pub use crate::pipeline::{
        classification_pmm_defaults, completion_metrics, completion_pmm_defaults,
        run_classification, solve_classification, solve_completion, TransformChoice,
    };
    pub use crate::solver::{
        admm_subproblem, kkt_residual, objective_h, pmm_solve, AdmmConfig, PmmConfig, SolveTrace,
    };
    pub use crate::synth::{
        add_gaussian_noise, make_mask, synth_logistic, synth_low_multirank, CompletionProblem,
    };
    pub use crate::tensor::{
        apply_transform, fold3, fro_norm, inf_norm, inner, inverse_transform, project_box, unfold3,
        Dims, Tensor3,
    };
    pub use crate::transform::{
        data_driven_transform, dct_transform, identity_transform, validate_orthogonal,
        OrthogonalTransform,
    };
    pub use crate::tsvd::{multi_rank, spectral_norm_u, t_product, t_svd, t_transpose, ttnn};
}
