//! Experiment configuration loaded from JSON, with defaults for every field.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::{PenaltyKind, PenaltyParams};
use crate::pipeline::{TransformChoice, CLASSIFICATION_BOX_C, CLASSIFICATION_RHO, COMPLETION_RHO};
use crate::solver::{AdmmConfig, PmmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Complete,
    Classify,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "complete" => Ok(Task::Complete),
            "classify" => Ok(Task::Classify),
            other => Err(Error::param("task", format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformName {
    Identity,
    #[default]
    Dct,
    #[serde(alias = "data-driven")]
    Data,
}

impl std::str::FromStr for TransformName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(TransformName::Identity),
            "dct" => Ok(TransformName::Dct),
            "data" | "data-driven" => Ok(TransformName::Data),
            other => Err(Error::param(
                "transform",
                format!("unknown transform `{other}`"),
            )),
        }
    }
}

/// Every knob of a completion or classification run.
///
/// `rho` and `box_c` default per task: `rho` is 10 for completion and 100 for
/// classification; `box_c` is 1.05 times the largest observed magnitude for
/// completion and 10 for classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub penalty: PenaltyKind,
    pub lambda: f64,
    pub gamma: f64,
    pub beta: f64,
    pub transform: TransformName,
    /// Outer-iteration cap of the pilot solve behind the data-driven transform.
    pub pilot_max_outer: Option<usize>,
    pub rho: Option<f64>,
    pub xi: f64,
    pub box_c: Option<f64>,
    pub eta: f64,
    pub tau: f64,
    pub max_outer: usize,
    pub tol_outer: f64,
    pub max_inner: usize,
    pub tol_inner: f64,
    pub max_refine: usize,
    /// Sampling ratio of synthetic completion problems.
    pub sr: f64,
    /// Noise level of synthetic completion problems.
    pub sigma: f64,
    pub seed: u64,
    /// Shape of synthetic problems.
    pub dims: [usize; 3],
    /// Transformed multi-rank of synthetic ground truths.
    pub rank: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Optional sweep values; when set they replace `lambda` / `beta`.
    pub lambda_grid: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<f64>>,
    pub input: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub train_samples: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_samples: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let pmm = PmmConfig::new(COMPLETION_RHO, 1.0, 1.0);
        let admm = AdmmConfig::default();
        ExperimentConfig {
            task: Task::Complete,
            penalty: PenaltyKind::Mcp,
            lambda: 1.0,
            gamma: 2.7,
            beta: 1.0,
            transform: TransformName::Dct,
            pilot_max_outer: None,
            rho: None,
            xi: pmm.xi,
            box_c: None,
            eta: admm.eta,
            tau: admm.tau,
            max_outer: pmm.max_outer,
            tol_outer: pmm.tol_outer,
            max_inner: admm.max_inner,
            tol_inner: admm.tol_inner,
            max_refine: pmm.max_refine,
            sr: 0.4,
            sigma: 0.01,
            seed: 0,
            dims: [30, 30, 10],
            rank: 2,
            n_train: 500,
            n_test: 200,
            lambda_grid: None,
            beta_grid: None,
            input: None,
            mask: None,
            truth: None,
            train_samples: None,
            train_labels: None,
            test_samples: None,
            test_labels: None,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn for_task(task: Task) -> Self {
        ExperimentConfig {
            task,
            ..Default::default()
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(match self.task {
            Task::Complete => COMPLETION_RHO,
            Task::Classify => CLASSIFICATION_RHO,
        })
    }

    pub fn penalty_params(&self, lambda: f64) -> Result<PenaltyParams> {
        PenaltyParams::new(self.penalty, lambda, self.gamma)
    }

    /// Outer-loop settings; `data_box` is the completion default bound used
    /// when `box_c` is unset.
    pub fn pmm(&self, beta: f64, data_box: f64) -> PmmConfig {
        let c = self.box_c.unwrap_or(match self.task {
            Task::Complete => data_box,
            Task::Classify => CLASSIFICATION_BOX_C,
        });
        PmmConfig {
            xi: self.xi,
            max_outer: self.max_outer,
            tol_outer: self.tol_outer,
            max_refine: self.max_refine,
            ..PmmConfig::new(self.rho(), beta, c)
        }
    }

    pub fn admm(&self) -> AdmmConfig {
        AdmmConfig {
            eta: self.eta,
            tau: self.tau,
            max_inner: self.max_inner,
            tol_inner: self.tol_inner,
        }
    }

    pub fn transform_choice(&self) -> TransformChoice {
        match self.transform {
            TransformName::Identity => TransformChoice::Identity,
            TransformName::Dct => TransformChoice::Dct,
            TransformName::Data => TransformChoice::Data {
                pilot_max_outer: self.pilot_max_outer,
            },
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.lambda_grid
            .clone()
            .unwrap_or_else(|| vec![self.lambda])
    }

    pub fn betas(&self) -> Vec<f64> {
        self.beta_grid.clone().unwrap_or_else(|| vec![self.beta])
    }

    /// Checks every parameter range, reporting the offending field by name.
    pub fn validate(&self) -> Result<()> {
        for lambda in self.lambdas() {
            self.penalty_params(lambda)?;
        }
        for (name, grid) in [
            ("lambda_grid", &self.lambda_grid),
            ("beta_grid", &self.beta_grid),
        ] {
            if grid.as_ref().is_some_and(|g| g.is_empty()) {
                return Err(Error::param(name, "must not be empty"));
            }
        }
        for beta in self.betas() {
            self.pmm(beta, 1.0).validate()?;
        }
        self.admm().validate()?;
        if !(self.sr > 0.0 && self.sr <= 1.0) {
            return Err(Error::param(
                "sr",
                format!("must lie in (0, 1], got {}", self.sr),
            ));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::param(
                "sigma",
                format!("must be nonnegative, got {}", self.sigma),
            ));
        }
        if self.dims.contains(&0) {
            return Err(Error::param("dims", "every side must be positive"));
        }
        if self.rank > self.dims[0].min(self.dims[1]) {
            return Err(Error::param("rank", "exceeds min(n1, n2)"));
        }
        if self.n_train == 0 {
            return Err(Error::param("n_train", "must be at least 1"));
        }
        if self.pilot_max_outer == Some(0) {
            return Err(Error::param("pilot_max_outer", "must be at least 1"));
        }
        Ok(())
    }
}

/// Parses a JSON config; missing fields take their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
