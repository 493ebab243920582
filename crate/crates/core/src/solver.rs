//! Proximal majorization-minimization with an ADMM inner solver.
//!
//! The objective is `H(x) = f(x) + beta * G(x)` over the box `||x||_inf <= c`,
//! with `G = S1 - S2` split into a nuclear-norm part `S1` and a smooth convex
//! part `S2`. Each outer step linearizes `f` and `-S2` at the current iterate
//! `x_t` and adds a proximal term, giving the strongly convex subproblem
//!
//! ```text
//! min_x  <grad f(x_t) - beta grad S2(x_t), x> + beta S1(x) + rho/2 ||x - x_t||^2 + indicator_box(x)
//! ```
//!
//! which ADMM solves through the splitting `x = m`:
//!
//! ```text
//! m <- prox_{(beta/eta) S1}(x + z/eta)
//! x <- P_box((rho x_t - grad f(x_t) + beta grad S2(x_t) + eta m - z) / (rho + eta))
//! z <- z + tau eta (x - m)
//! ```

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::SmoothLoss;
use crate::penalty::{g_lambda, grad_s2, prox_s1, PenaltyParams};
use crate::tensor::{fro_norm, inf_norm, project_box, Tensor3};
use crate::transform::OrthogonalTransform;

/// Absolute slack allowed in the monotone-descent check.
pub const DESCENT_SLACK: f64 = 1e-9;

/// Slack on the box constraint when reporting feasibility.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Golden ratio, the upper limit for the dual step `tau`.
pub const TAU_MAX: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmmConfig {
    /// Proximal weight.
    pub rho: f64,
    /// Regularization weight.
    pub beta: f64,
    /// Box bound `c` on every entry.
    pub box_c: f64,
    /// Inexactness constant in `(0, 1/2)`.
    pub xi: f64,
    pub max_outer: usize,
    /// Stop once `||x_{t+1} - x_t||_F / ||x_t||_F` drops to this value.
    pub tol_outer: f64,
    /// Extra inner iterations allowed per outer step when the descent check fails.
    pub max_refine: usize,
}

impl PmmConfig {
    pub const DEFAULT_XI: f64 = 0.1;
    pub const DEFAULT_MAX_OUTER: usize = 100;
    pub const DEFAULT_TOL_OUTER: f64 = 5e-4;
    pub const DEFAULT_MAX_REFINE: usize = 400;

    pub fn new(rho: f64, beta: f64, box_c: f64) -> Self {
        PmmConfig {
            rho,
            beta,
            box_c,
            xi: Self::DEFAULT_XI,
            max_outer: Self::DEFAULT_MAX_OUTER,
            tol_outer: Self::DEFAULT_TOL_OUTER,
            max_refine: Self::DEFAULT_MAX_REFINE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("rho", self.rho)?;
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::param(
                "beta",
                format!("must be nonnegative, got {}", self.beta),
            ));
        }
        positive("box_c", self.box_c)?;
        if !(self.xi > 0.0 && self.xi < 0.5) {
            return Err(Error::param(
                "xi",
                format!("must lie in (0, 1/2), got {}", self.xi),
            ));
        }
        positive("tol_outer", self.tol_outer)?;
        Ok(())
    }

    /// `a = ((1 - 2 xi) rho - L) / 2`; descent is guaranteed when this is positive.
    pub fn descent_constant(&self, lipschitz: f64) -> f64 {
        ((1.0 - 2.0 * self.xi) * self.rho - lipschitz) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Augmented-Lagrangian weight.
    pub eta: f64,
    /// Dual step factor in `(0, (1 + sqrt 5) / 2)`.
    pub tau: f64,
    pub max_inner: usize,
    pub tol_inner: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            eta: 10.0,
            tau: 1.618,
            max_inner: 100,
            tol_inner: 3e-3,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta)?;
        if !(self.tau > 0.0 && self.tau < TAU_MAX) {
            return Err(Error::param(
                "tau",
                format!("must lie in (0, (1+sqrt(5))/2), got {}", self.tau),
            ));
        }
        if self.max_inner == 0 {
            return Err(Error::param("max_inner", "must be at least 1"));
        }
        positive("tol_inner", self.tol_inner)?;
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

/// Relative KKT residuals of the ADMM subproblem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub eta_e: f64,
    pub eta_d: f64,
    pub eta_p: f64,
    pub eta_res: f64,
}

/// ADMM iterates `(m, x, z)`, carried across outer iterations as a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub m: Tensor3,
    pub x: Tensor3,
    pub z: Tensor3,
}

impl AdmmState {
    /// `m = z = 0`, `x = x0`.
    pub fn cold(x0: &Tensor3) -> Self {
        AdmmState {
            m: Tensor3::zeros(x0.dims()),
            x: x0.clone(),
            z: Tensor3::zeros(x0.dims()),
        }
    }
}

/// Objective value `f(x) + beta G(x)`; the box indicator is reported as a flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub value: f64,
    pub feasible: bool,
}

pub fn objective_h(
    x: &Tensor3,
    loss: &dyn SmoothLoss,
    penalty: &PenaltyParams,
    u: &OrthogonalTransform,
    pmm: &PmmConfig,
) -> Result<Objective> {
    let mut value = loss.value(x)?;
    if pmm.beta != 0.0 {
        value += pmm.beta * g_lambda(x, u, penalty)?;
    }
    Ok(Objective {
        value,
        feasible: inf_norm(x) <= pmm.box_c + FEASIBILITY_SLACK,
    })
}

/// `Prox_{theta * lambda * ||.||_TTNN}`, which is the identity when `theta = 0`.
fn shrink(a: &Tensor3, theta: f64, u: &OrthogonalTransform, p: &PenaltyParams) -> Result<Tensor3> {
    if theta == 0.0 {
        Ok(a.clone())
    } else {
        prox_s1(a, theta, u, p)
    }
}

/// Relative KKT residuals of the subproblem at `(x, m, z)`:
///
/// ```text
/// eta_e = ||m - x|| / (1 + ||m|| + ||x||)
/// eta_d = ||m - prox_{beta S1}(m + z)|| / (1 + ||m|| + ||z||)
/// eta_p = ||x - P_box(x_t - (grad f - beta grad S2 + z) / rho)||
///         / (1 + ||z/rho|| + ||x_t|| + ||grad f / rho|| + ||beta grad S2 / rho||)
/// ```
#[allow(clippy::too_many_arguments)]
pub fn kkt_residual(
    x: &Tensor3,
    m: &Tensor3,
    z: &Tensor3,
    xt: &Tensor3,
    grad_f_xt: &Tensor3,
    grad_s2_xt: &Tensor3,
    penalty: &PenaltyParams,
    u: &OrthogonalTransform,
    pmm: &PmmConfig,
) -> Result<KktResiduals> {
    for t in [m, z, xt, grad_f_xt, grad_s2_xt] {
        x.check_same_dims(t)?;
    }
    let kkt = residuals_within(
        x,
        m,
        z,
        xt,
        grad_f_xt,
        grad_s2_xt,
        penalty,
        u,
        pmm,
        f64::INFINITY,
    )?;
    Ok(kkt.expect("infinite tolerance always yields residuals"))
}

/// Computes the residuals, skipping the SVD-based dual term when the primal
/// terms already exceed `tol`. Returns `None` in that case.
#[allow(clippy::too_many_arguments)]
fn residuals_within(
    x: &Tensor3,
    m: &Tensor3,
    z: &Tensor3,
    xt: &Tensor3,
    grad_f_xt: &Tensor3,
    grad_s2_xt: &Tensor3,
    penalty: &PenaltyParams,
    u: &OrthogonalTransform,
    pmm: &PmmConfig,
    tol: f64,
) -> Result<Option<KktResiduals>> {
    let (nx, nm, nz) = (fro_norm(x), fro_norm(m), fro_norm(z));
    let eta_e = fro_norm(&Tensor3::diff(m, x)) / (1.0 + nm + nx);

    let inv_rho = 1.0 / pmm.rho;
    let mut arg = xt.clone();
    arg.axpy(-inv_rho, grad_f_xt)?;
    arg.axpy(inv_rho * pmm.beta, grad_s2_xt)?;
    arg.axpy(-inv_rho, z)?;
    let proj = project_box(&arg, pmm.box_c)?;
    let denom = 1.0
        + inv_rho * nz
        + fro_norm(xt)
        + inv_rho * fro_norm(grad_f_xt)
        + inv_rho * pmm.beta * fro_norm(grad_s2_xt);
    let eta_p = fro_norm(&Tensor3::diff(x, &proj)) / denom;
    if eta_e.max(eta_p) > tol {
        return Ok(None);
    }

    let mz = m + z;
    let prox = shrink(&mz, pmm.beta, u, penalty)?;
    let eta_d = fro_norm(&Tensor3::diff(m, &prox)) / (1.0 + nm + nz);

    Ok(Some(KktResiduals {
        eta_e,
        eta_d,
        eta_p,
        eta_res: eta_e.max(eta_d).max(eta_p),
    }))
}

/// Result of one ADMM subproblem solve.
#[derive(Debug, Clone)]
pub struct SubproblemOutput {
    pub x_next: Tensor3,
    pub state: AdmmState,
    pub kkt: KktResiduals,
    pub inner_iters: usize,
    /// Whether `eta_res <= tol_inner` was reached within `max_inner` iterations.
    pub converged: bool,
}

/// ADMM for one PMM subproblem, kept as a stepper so the outer loop can keep
/// iterating after the tolerance-based stop.
struct InnerSolver<'a> {
    xt: &'a Tensor3,
    grad_f: &'a Tensor3,
    grad_s2: &'a Tensor3,
    /// `rho x_t - grad f(x_t) + beta grad S2(x_t)`, fixed for the subproblem.
    linear: Tensor3,
    penalty: &'a PenaltyParams,
    u: &'a OrthogonalTransform,
    pmm: &'a PmmConfig,
    admm: &'a AdmmConfig,
    state: AdmmState,
}

impl<'a> InnerSolver<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        xt: &'a Tensor3,
        grad_f: &'a Tensor3,
        grad_s2: &'a Tensor3,
        penalty: &'a PenaltyParams,
        u: &'a OrthogonalTransform,
        pmm: &'a PmmConfig,
        admm: &'a AdmmConfig,
        state: AdmmState,
    ) -> Result<Self> {
        for t in [grad_f, grad_s2, &state.m, &state.x, &state.z] {
            xt.check_same_dims(t)?;
        }
        let mut linear = xt.scale(pmm.rho);
        linear.axpy(-1.0, grad_f)?;
        linear.axpy(pmm.beta, grad_s2)?;
        Ok(InnerSolver {
            xt,
            grad_f,
            grad_s2,
            linear,
            penalty,
            u,
            pmm,
            admm,
            state,
        })
    }

    fn step(&mut self) -> Result<()> {
        let eta = self.admm.eta;
        let s = &mut self.state;

        let mut v = s.x.clone();
        v.axpy(1.0 / eta, &s.z)?;
        s.m = shrink(&v, self.pmm.beta / eta, self.u, self.penalty)?;

        let mut h = self.linear.clone();
        h.axpy(eta, &s.m)?;
        h.axpy(-1.0, &s.z)?;
        s.x = project_box(&h.scale(1.0 / (self.pmm.rho + eta)), self.pmm.box_c)?;

        let gap = Tensor3::diff(&s.x, &s.m);
        s.z.axpy(self.admm.tau * eta, &gap)?;
        Ok(())
    }

    fn residuals(&self) -> Result<KktResiduals> {
        kkt_residual(
            &self.state.x,
            &self.state.m,
            &self.state.z,
            self.xt,
            self.grad_f,
            self.grad_s2,
            self.penalty,
            self.u,
            self.pmm,
        )
    }

    /// Runs until `eta_res <= tol_inner` or `max_inner` steps.
    fn run(&mut self) -> Result<(KktResiduals, usize, bool)> {
        let tol = self.admm.tol_inner;
        for k in 1..=self.admm.max_inner {
            self.step()?;
            let s = &self.state;
            let kkt = residuals_within(
                &s.x,
                &s.m,
                &s.z,
                self.xt,
                self.grad_f,
                self.grad_s2,
                self.penalty,
                self.u,
                self.pmm,
                tol,
            )?;
            if let Some(kkt) = kkt.filter(|r| r.eta_res <= tol) {
                return Ok((kkt, k, true));
            }
        }
        Ok((self.residuals()?, self.admm.max_inner, false))
    }
}

/// Solves one linearized PMM subproblem with ADMM.
///
/// `warm` supplies the starting `(m, x, z)`; without it ADMM starts from
/// `m = z = 0`, `x = x_t`.
#[allow(clippy::too_many_arguments)]
pub fn admm_subproblem(
    xt: &Tensor3,
    grad_f_xt: &Tensor3,
    grad_s2_xt: &Tensor3,
    penalty: &PenaltyParams,
    u: &OrthogonalTransform,
    pmm: &PmmConfig,
    admm: &AdmmConfig,
    warm: Option<AdmmState>,
) -> Result<SubproblemOutput> {
    pmm.validate()?;
    admm.validate()?;
    let state = warm.unwrap_or_else(|| AdmmState::cold(xt));
    let mut inner = InnerSolver::new(xt, grad_f_xt, grad_s2_xt, penalty, u, pmm, admm, state)?;
    let (kkt, inner_iters, converged) = inner.run()?;
    Ok(SubproblemOutput {
        x_next: inner.state.x.clone(),
        state: inner.state,
        kkt,
        inner_iters,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Relative step fell to `tol_outer`.
    Converged,
    MaxOuter,
}

/// One outer PMM iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    /// `H(x_{t+1})`.
    pub objective: f64,
    pub step_norm: f64,
    /// `||x_{t+1} - x_t||_F / ||x_t||_F`; infinite when `x_t = 0` and the step is not.
    pub rel_step: f64,
    pub inner_iters: usize,
    pub inner_converged: bool,
    /// Inner iterations spent after the tolerance stop to restore descent.
    pub refine_iters: usize,
    pub kkt: KktResiduals,
    pub feasible: bool,
    /// `None` when the descent check does not apply.
    pub descent_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    /// `H(x0)`.
    pub initial_objective: f64,
    pub initial_feasible: bool,
    /// Gradient Lipschitz constant used for the descent check.
    pub lipschitz: f64,
    /// `((1 - 2 xi) rho - L) / 2`.
    pub descent_constant: f64,
    /// True when `rho > L / (1 - 2 xi)`.
    pub descent_enforced: bool,
    pub records: Vec<OuterRecord>,
    pub stop: Option<StopReason>,
}

impl SolveTrace {
    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }

    pub fn outer_iters(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.stop == Some(StopReason::Converged)
    }

    /// Iterations violating `H(x_{t+1}) + a ||dx||^2 <= H(x_t) + slack`.
    pub fn descent_violations(&self, slack: f64) -> Vec<usize> {
        let a = self.descent_constant;
        let mut prev = (self.initial_objective, self.initial_feasible);
        let mut out = Vec::new();
        for r in &self.records {
            if prev.1 && r.objective + a * r.step_norm * r.step_norm > prev.0 + slack {
                out.push(r.iteration);
            }
            prev = (r.objective, r.feasible);
        }
        out
    }
}

/// Runs the inexact PMM from `x0` and returns the last iterate with its trace.
///
/// Each outer step evaluates `grad f` and `grad S2` once, warm-starts ADMM from
/// the previous inner state and stops it at `eta_res <= tol_inner` (or
/// `max_inner`). When `rho > L / (1 - 2 xi)` the step must also satisfy the
/// sufficient-descent inequality; if it does not, ADMM keeps iterating (up to
/// `max_refine` extra steps) until it does.
pub fn pmm_solve(
    loss: &dyn SmoothLoss,
    penalty: &PenaltyParams,
    u: &OrthogonalTransform,
    pmm: &PmmConfig,
    admm: &AdmmConfig,
    x0: &Tensor3,
) -> Result<(Tensor3, SolveTrace)> {
    pmm.validate()?;
    admm.validate()?;
    loss.check_dims(x0)?;
    if !x0.is_finite() {
        return Err(Error::NonFinite("initial iterate".into()));
    }

    let lipschitz = loss.descent_lipschitz();
    let a = pmm.descent_constant(lipschitz);
    let enforced = a > 0.0;
    if !enforced && pmm.max_outer > 0 {
        warn!(
            "rho = {} does not exceed L / (1 - 2 xi) = {:.6}; descent check disabled",
            pmm.rho,
            lipschitz / (1.0 - 2.0 * pmm.xi)
        );
    }

    let h0 = objective_h(x0, loss, penalty, u, pmm)?;
    let mut trace = SolveTrace {
        initial_objective: h0.value,
        initial_feasible: h0.feasible,
        lipschitz,
        descent_constant: a,
        descent_enforced: enforced,
        records: Vec::new(),
        stop: None,
    };
    if pmm.max_outer == 0 {
        return Ok((x0.clone(), trace));
    }

    let mut x = x0.clone();
    let mut h_prev = h0;
    let mut state = AdmmState::cold(x0);

    for t in 0..pmm.max_outer {
        let grad_f = loss.grad(&x)?;
        let grad_s2 = grad_s2(&x, u, penalty)?;
        let mut inner = InnerSolver::new(&x, &grad_f, &grad_s2, penalty, u, pmm, admm, state)?;
        let (mut kkt, inner_iters, inner_converged) = inner.run()?;

        let diverged = |inner: &InnerSolver, trace: SolveTrace| -> Result<()> {
            if inner.state.x.is_finite() && inner.state.m.is_finite() && inner.state.z.is_finite() {
                Ok(())
            } else {
                Err(Error::Divergence {
                    iteration: t,
                    trace: Box::new(trace),
                })
            }
        };
        diverged(&inner, trace.clone())?;

        let mut h_new = objective_h(&inner.state.x, loss, penalty, u, pmm)?;
        let mut step_norm = fro_norm(&Tensor3::diff(&inner.state.x, &x));
        let check = enforced && h_prev.feasible;
        let descends = |h: &Objective, s: f64| h.value + a * s * s <= h_prev.value + DESCENT_SLACK;

        let mut refine_iters = 0;
        if check {
            while !descends(&h_new, step_norm) && refine_iters < pmm.max_refine {
                let block = 5.min(pmm.max_refine - refine_iters);
                for _ in 0..block {
                    inner.step()?;
                }
                refine_iters += block;
                diverged(&inner, trace.clone())?;
                h_new = objective_h(&inner.state.x, loss, penalty, u, pmm)?;
                step_norm = fro_norm(&Tensor3::diff(&inner.state.x, &x));
            }
            if refine_iters > 0 {
                kkt = inner.residuals()?;
            }
        }
        let descent_ok = check.then(|| descends(&h_new, step_norm));
        if descent_ok == Some(false) {
            warn!("outer iteration {t}: sufficient-descent inequality violated after refinement");
        }

        let x_norm = fro_norm(&x);
        let rel_step = if x_norm > 0.0 {
            step_norm / x_norm
        } else if step_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };

        state = inner.state;
        debug!(
            "outer {t}: H = {:.10e}, rel step = {rel_step:.3e}, inner = {inner_iters}+{refine_iters}, eta_res = {:.3e}",
            h_new.value, kkt.eta_res
        );
        trace.records.push(OuterRecord {
            iteration: t,
            objective: h_new.value,
            step_norm,
            rel_step,
            inner_iters,
            inner_converged,
            refine_iters,
            kkt,
            feasible: h_new.feasible,
            descent_ok,
        });
        x = state.x.clone();
        h_prev = h_new;

        if rel_step <= pmm.tol_outer {
            trace.stop = Some(StopReason::Converged);
            return Ok((x, trace));
        }
    }
    trace.stop = Some(StopReason::MaxOuter);
    Ok((x, trace))
}
