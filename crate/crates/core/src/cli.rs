//! Command-line front end: `complete`, `classify`, `synth`, `tsvd` and `metrics`.
//!
//! Every command prints a JSON report on standard output. With `--output DIR`
//! the report is also written to `DIR/result.json` next to the produced
//! tensors. Exit codes: 0 on success, 1 on usage or input errors, 2 when the
//! solver diverges or a decomposition fails numerically.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::config::{load_config, ExperimentConfig, Task, TransformName};
use crate::error::{Error, Result};
use crate::io::{
    read_labels, read_mask, read_tensor, read_tensor_stack, write_labels, write_mask, write_tensor,
    write_tensor_stack,
};
use crate::metrics::{predict, test_accuracy};
use crate::penalty::PenaltyKind;
use crate::pipeline::{
    completion_metrics, observation_from, solve_classification, solve_completion,
    CompletionMetrics, SolveOutcome, COMPLETION_BOX_FACTOR,
};
use crate::solver::SolveTrace;
use crate::synth::{
    synth_logistic, synth_low_multirank, ClassificationProblem, CompletionProblem, Observation,
};
use crate::tensor::Tensor3;
use crate::transform::{dct_transform, identity_transform, OrthogonalTransform};
use crate::tsvd::{multi_rank_from_sigma, transformed_singular_values, DEFAULT_RANK_TOL};

#[derive(Debug, Parser)]
#[command(
    name = "lrtensor",
    version,
    about = "Nonconvex low-rank tensor learning under transformed t-SVD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recover a tensor from partial observations (files or a synthetic problem).
    Complete {
        #[command(flatten)]
        solve: SolveArgs,
        /// Observed tensor; entries outside the mask are ignored.
        #[arg(long)]
        input: Option<PathBuf>,
        /// 0/1 mask tensor; without it every entry counts as observed.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Ground truth used for metrics and grid selection.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Fit a low-rank logistic model (files or a synthetic problem).
    Classify {
        #[command(flatten)]
        solve: SolveArgs,
        #[arg(long)]
        train_samples: Option<PathBuf>,
        #[arg(long)]
        train_labels: Option<PathBuf>,
        #[arg(long)]
        test_samples: Option<PathBuf>,
        #[arg(long)]
        test_labels: Option<PathBuf>,
    },
    /// Write the files of a synthetic completion or classification problem.
    Synth {
        #[arg(long, default_value = "complete")]
        task: Task,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Per-slice transformed singular values and multi-rank of a tensor.
    Tsvd {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "dct")]
        transform: TransformName,
        /// Rank threshold relative to the largest singular value.
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
    },
    /// PSNR, SSIM and relative error of a recovered tensor against the truth.
    Metrics {
        #[arg(long)]
        recovered: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Debug, Args, Default)]
struct SolveArgs {
    /// JSON experiment config; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    penalty: Option<PenaltyKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    box_c: Option<f64>,
    #[arg(long)]
    transform: Option<TransformName>,
    #[arg(long)]
    pilot_max_outer: Option<usize>,
    #[arg(long)]
    sr: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    tol_outer: Option<f64>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    tol_inner: Option<f64>,
    #[arg(long)]
    max_refine: Option<usize>,
    /// Synthetic problem shape, e.g. `30x30x10`.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<[usize; 3]>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Comma-separated lambda values to sweep.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Comma-separated beta values to sweep.
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    /// Directory receiving `result.json` and the produced tensors.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
    if parts.len() != 3 {
        return Err(format!("expected N1xN2xN3, got `{s}`"));
    }
    let mut out = [0; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|_| format!("bad dimension `{p}`"))?;
    }
    Ok(out)
}

impl SolveArgs {
    fn into_config(self, task: Task) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.task = task;
        macro_rules! set {
            ($($field:ident),*) => {$(if let Some(v) = self.$field { cfg.$field = v; })*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(if self.$field.is_some() { cfg.$field = self.$field; })*};
        }
        set!(penalty, lambda, gamma, beta, eta, tau, xi, transform, sr, sigma, seed);
        set!(max_outer, tol_outer, max_inner, tol_inner, max_refine, dims, rank, n_train, n_test);
        set_opt!(rho, box_c, pilot_max_outer, lambda_grid, beta_grid, output);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Wall-clock time, kept apart from everything that must be reproducible.
#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub seconds: f64,
}

/// One `(lambda, beta)` point of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct GridEntry {
    pub lambda: f64,
    pub beta: f64,
    /// Relative error for completion, test accuracy for classification.
    pub score: f64,
    pub outer_iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompletionReport {
    pub command: &'static str,
    /// Effective configuration, with task-dependent defaults filled in.
    pub config: ExperimentConfig,
    pub seed: u64,
    pub source: &'static str,
    pub lambda: f64,
    pub beta: f64,
    /// `null` without a ground truth.
    pub metrics: Option<CompletionMetrics>,
    pub multi_rank: Vec<usize>,
    pub grid: Vec<GridEntry>,
    pub trace: SolveTrace,
    pub timing: Timing,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub source: &'static str,
    pub lambda: f64,
    pub beta: f64,
    /// `null` without a labelled test set.
    pub test_accuracy: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub multi_rank: Vec<usize>,
    pub grid: Vec<GridEntry>,
    pub trace: SolveTrace,
    pub timing: Timing,
}

#[derive(Debug, Clone, Serialize)]
pub struct TsvdReport {
    pub command: &'static str,
    pub dims: [usize; 3],
    pub transform: TransformName,
    pub rank_tol: f64,
    pub singular_values: Vec<Vec<f64>>,
    pub multi_rank: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub command: &'static str,
    #[serde(flatten)]
    pub metrics: CompletionMetrics,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
}

/// Transform used to generate synthetic ground truths: the identity when the
/// solve itself uses the identity, the DCT otherwise.
fn generating_transform(cfg: &ExperimentConfig) -> OrthogonalTransform {
    match cfg.transform {
        TransformName::Identity => identity_transform(cfg.dims[2]),
        _ => dct_transform(cfg.dims[2]),
    }
}

pub fn synthetic_completion(cfg: &ExperimentConfig) -> Result<(CompletionProblem, Observation)> {
    let u = generating_transform(cfg);
    let truth = synth_low_multirank(cfg.dims, cfg.rank, &u, cfg.seed)?;
    let problem = CompletionProblem::new(truth, cfg.sr, cfg.sigma, cfg.seed)?;
    let obs = problem.observe()?;
    Ok((problem, obs))
}

pub fn synthetic_classification(cfg: &ExperimentConfig) -> Result<ClassificationProblem> {
    let u = generating_transform(cfg);
    synth_logistic(cfg.dims, cfg.rank, cfg.n_train, cfg.n_test, &u, cfg.seed)
}

/// Winning grid point of [`sweep`].
struct Selected<T> {
    outcome: SolveOutcome,
    lambda: f64,
    beta: f64,
    score: Option<f64>,
    extra: T,
    grid: Vec<GridEntry>,
}

/// Runs every grid point and keeps the best-scoring one (first on ties).
fn sweep<T>(
    cfg: &ExperimentConfig,
    mut run: impl FnMut(f64, f64) -> Result<(SolveOutcome, Option<f64>, T)>,
    higher_is_better: bool,
) -> Result<Selected<T>> {
    let (lambdas, betas) = (cfg.lambdas(), cfg.betas());
    let sweeping = lambdas.len() * betas.len() > 1;
    let mut grid = Vec::new();
    let mut best: Option<(SolveOutcome, f64, f64, Option<f64>, T)> = None;
    for &lambda in &lambdas {
        for &beta in &betas {
            let (outcome, score, extra) = run(lambda, beta)?;
            if sweeping {
                let s = score.ok_or_else(|| {
                    Error::param(
                        "lambda_grid",
                        "a sweep needs a ground truth or test set to score against",
                    )
                })?;
                info!("grid lambda = {lambda}, beta = {beta}: score {s:.6e}");
                grid.push(GridEntry {
                    lambda,
                    beta,
                    score: s,
                    outer_iters: outcome.trace.outer_iters(),
                    converged: outcome.trace.converged(),
                });
            }
            let better = match (&best, score) {
                (None, _) => true,
                (Some((_, _, _, Some(b), _)), Some(s)) => {
                    if higher_is_better {
                        s > *b
                    } else {
                        s < *b
                    }
                }
                _ => false,
            };
            if better {
                best = Some((outcome, lambda, beta, score, extra));
            }
        }
    }
    let (outcome, lambda, beta, score, extra) = best.expect("grids are non-empty");
    Ok(Selected {
        outcome,
        lambda,
        beta,
        score,
        extra,
        grid,
    })
}

/// Runs a completion experiment and returns its report and the recovered tensor.
pub fn complete_report(cfg: &ExperimentConfig) -> Result<(CompletionReport, Tensor3)> {
    let start = Instant::now();
    let (obs, truth, source) = match &cfg.input {
        Some(path) => {
            let observed = read_tensor(path)?;
            let mask = cfg.mask.as_ref().map(read_mask).transpose()?;
            let truth = cfg.truth.as_ref().map(read_tensor).transpose()?;
            (observation_from(&observed, mask)?, truth, "file")
        }
        None => {
            let (problem, obs) = synthetic_completion(cfg)?;
            (obs, Some(problem.ground_truth), "synthetic")
        }
    };
    let peak = obs.observed.inf_norm();
    let data_box = if peak > 0.0 {
        COMPLETION_BOX_FACTOR * peak
    } else {
        1.0
    };
    let admm = cfg.admm();
    let Selected {
        outcome,
        lambda,
        beta,
        extra: metrics,
        grid,
        ..
    } = sweep(
        cfg,
        |lambda, beta| {
            let penalty = cfg.penalty_params(lambda)?;
            let pmm = cfg.pmm(beta, data_box);
            let outcome = solve_completion(&obs, &penalty, cfg.transform_choice(), &pmm, &admm)?;
            let metrics = truth
                .as_ref()
                .map(|t| completion_metrics(&outcome.estimate, t))
                .transpose()?;
            Ok((outcome, metrics.map(|m| m.relative_error), metrics))
        },
        false,
    )?;
    let mut echo = cfg.clone();
    echo.rho = Some(cfg.rho());
    echo.box_c = Some(cfg.pmm(beta, data_box).box_c);
    let report = CompletionReport {
        command: "complete",
        config: echo,
        seed: cfg.seed,
        source,
        lambda,
        beta,
        metrics,
        multi_rank: outcome.multi_rank.ranks.clone(),
        grid,
        trace: outcome.trace,
        timing: Timing {
            seconds: start.elapsed().as_secs_f64(),
        },
    };
    Ok((report, outcome.estimate))
}

/// Runs a classification experiment and returns its report, the fitted
/// coefficients and the test-set predictions.
pub fn classify_report(cfg: &ExperimentConfig) -> Result<(ClassificationReport, Tensor3, Vec<u8>)> {
    let start = Instant::now();
    let (train, train_labels, test, test_labels, source) = match &cfg.train_samples {
        Some(path) => {
            let labels_path = cfg
                .train_labels
                .as_ref()
                .ok_or_else(|| Error::param("train_labels", "required with train_samples"))?;
            let test = cfg
                .test_samples
                .as_ref()
                .map(read_tensor_stack)
                .transpose()?;
            let test_labels = cfg.test_labels.as_ref().map(read_labels).transpose()?;
            if test_labels.is_some() && test.is_none() {
                return Err(Error::param("test_samples", "required with test_labels"));
            }
            (
                read_tensor_stack(path)?,
                read_labels(labels_path)?,
                test.unwrap_or_default(),
                test_labels,
                "file",
            )
        }
        None => {
            let p = synthetic_classification(cfg)?;
            (
                p.train_samples,
                p.train_labels,
                p.test_samples,
                Some(p.test_labels),
                "synthetic",
            )
        }
    };
    if let Some(labels) = &test_labels {
        if labels.len() != test.len() {
            return Err(Error::Dimension(format!(
                "{} test labels for {} test samples",
                labels.len(),
                test.len()
            )));
        }
    }
    let admm = cfg.admm();
    let Selected {
        outcome,
        lambda,
        beta,
        score: accuracy,
        extra: predicted,
        grid,
    } = sweep(
        cfg,
        |lambda, beta| {
            let penalty = cfg.penalty_params(lambda)?;
            let pmm = cfg.pmm(beta, 1.0);
            let outcome = solve_classification(
                train.clone(),
                train_labels.clone(),
                &penalty,
                cfg.transform_choice(),
                &pmm,
                &admm,
            )?;
            let predicted = predict(&outcome.estimate, &test)?.labels;
            let acc = match &test_labels {
                Some(truth) if !truth.is_empty() => Some(test_accuracy(&predicted, truth)?),
                _ => None,
            };
            Ok((outcome, acc, predicted))
        },
        true,
    )?;
    let mut echo = cfg.clone();
    echo.rho = Some(cfg.rho());
    echo.box_c = Some(cfg.pmm(beta, 1.0).box_c);
    let report = ClassificationReport {
        command: "classify",
        config: echo,
        seed: cfg.seed,
        source,
        lambda,
        beta,
        test_accuracy: accuracy,
        n_train: train.len(),
        n_test: test.len(),
        multi_rank: outcome.multi_rank.ranks.clone(),
        grid,
        trace: outcome.trace,
        timing: Timing {
            seconds: start.elapsed().as_secs_f64(),
        },
    };
    Ok((report, outcome.estimate, predicted))
}

pub fn tsvd_report(x: &Tensor3, transform: TransformName, rank_tol: f64) -> Result<TsvdReport> {
    let u = match transform {
        TransformName::Identity => identity_transform(x.n3()),
        TransformName::Dct => dct_transform(x.n3()),
        TransformName::Data => crate::transform::data_driven_transform(x)?,
    };
    let sigma = transformed_singular_values(x, &u)?;
    let ranks = multi_rank_from_sigma(&sigma, rank_tol);
    Ok(TsvdReport {
        command: "tsvd",
        dims: [x.n1(), x.n2(), x.n3()],
        transform,
        rank_tol,
        singular_values: sigma,
        multi_rank: ranks.ranks,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn emit<T: Serialize>(report: &T, output: Option<&Path>) -> Result<()> {
    let json = to_json(report)?;
    if let Some(dir) = output {
        fs::write(dir.join("result.json"), &json)?;
    }
    print!("{json}");
    Ok(())
}

fn prepare_output(output: Option<&PathBuf>) -> Result<Option<&Path>> {
    if let Some(dir) = output {
        fs::create_dir_all(dir)?;
    }
    Ok(output.map(PathBuf::as_path))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Complete {
            solve,
            input,
            mask,
            truth,
        } => {
            let mut cfg = solve.into_config(Task::Complete)?;
            cfg.input = input.or(cfg.input);
            cfg.mask = mask.or(cfg.mask);
            cfg.truth = truth.or(cfg.truth);
            let out = prepare_output(cfg.output.as_ref())?;
            let (report, estimate) = complete_report(&cfg)?;
            if let Some(dir) = out {
                write_tensor(dir.join("recovered.tns"), &estimate)?;
            }
            emit(&report, out)
        }
        Command::Classify {
            solve,
            train_samples,
            train_labels,
            test_samples,
            test_labels,
        } => {
            let mut cfg = solve.into_config(Task::Classify)?;
            cfg.train_samples = train_samples.or(cfg.train_samples);
            cfg.train_labels = train_labels.or(cfg.train_labels);
            cfg.test_samples = test_samples.or(cfg.test_samples);
            cfg.test_labels = test_labels.or(cfg.test_labels);
            let out = prepare_output(cfg.output.as_ref())?;
            let (report, coeff, predicted) = classify_report(&cfg)?;
            if let Some(dir) = out {
                write_tensor(dir.join("coefficients.tns"), &coeff)?;
                write_labels(dir.join("predicted_labels.txt"), &predicted)?;
            }
            emit(&report, out)
        }
        Command::Synth { task, solve } => {
            let cfg = solve.into_config(task)?;
            let dir = cfg
                .output
                .clone()
                .ok_or_else(|| Error::param("output", "synth needs an output directory"))?;
            fs::create_dir_all(&dir)?;
            let files = write_synthetic(&cfg, &dir)?;
            emit(
                &SynthReport {
                    command: "synth",
                    config: cfg,
                    files,
                },
                Some(&dir),
            )
        }
        Command::Tsvd {
            input,
            transform,
            rank_tol,
        } => {
            if !(rank_tol >= 0.0) {
                return Err(Error::param("rank_tol", "must be nonnegative"));
            }
            emit(
                &tsvd_report(&read_tensor(input)?, transform, rank_tol)?,
                None,
            )
        }
        Command::Metrics { recovered, truth } => {
            let metrics = completion_metrics(&read_tensor(recovered)?, &read_tensor(truth)?)?;
            emit(
                &MetricsReport {
                    command: "metrics",
                    metrics,
                },
                None,
            )
        }
    }
}

fn write_synthetic(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut record = |name: &str| {
        files.push(name.to_string());
        dir.join(name)
    };
    match cfg.task {
        Task::Complete => {
            let (problem, obs) = synthetic_completion(cfg)?;
            write_tensor(record("truth.tns"), &problem.ground_truth)?;
            write_tensor(record("observed.tns"), &obs.observed)?;
            write_mask(record("mask.tns"), &obs.mask)?;
        }
        Task::Classify => {
            let p = synthetic_classification(cfg)?;
            write_tensor(record("truth.tns"), &p.coeff_truth)?;
            write_tensor_stack(record("train_samples.tns"), &p.train_samples)?;
            write_labels(record("train_labels.txt"), &p.train_labels)?;
            write_tensor_stack(record("test_samples.tns"), &p.test_samples)?;
            write_labels(record("test_labels.txt"), &p.test_labels)?;
        }
    }
    Ok(files)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } | Error::Numerical(_) => 2,
        _ => 1,
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn cli_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
