//! Seeded synthetic data: masks, noise, low multi-rank tensors and logistic
//! classification problems.
//!
//! All generators use ChaCha8 seeded from a `u64`, with a separate stream per
//! purpose, so outputs are reproducible across platforms.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::loss::{sigmoid, Mask};
use crate::tensor::{fro_norm, inner, Dims, Tensor3};
use crate::transform::OrthogonalTransform;
use crate::tsvd::from_transformed_slices;

const STREAM_NOISE: u64 = 1;
const STREAM_MASK: u64 = 2;
const STREAM_LOW_RANK: u64 = 3;
const STREAM_SAMPLES: u64 = 4;

/// Norm of the synthetic logistic coefficient tensor.
pub const LOGISTIC_COEFF_NORM: f64 = 5.0;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Tensor with i.i.d. standard normal entries.
pub fn gaussian_tensor(dims: impl Into<Dims>, rng: &mut impl Rng) -> Tensor3 {
    let dims = dims.into();
    let data = (0..dims.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Tensor3::from_raw(dims, data)
}

/// Uniformly random mask with exactly `round(sr * N)` observed entries.
pub fn make_mask(dims: impl Into<Dims>, sr: f64, seed: u64) -> Result<Mask> {
    let dims = dims.into();
    if !(sr > 0.0 && sr <= 1.0) {
        return Err(Error::param(
            "sr",
            format!("sampling ratio must lie in (0, 1], got {sr}"),
        ));
    }
    let n = dims.len();
    let count = (sr * n as f64).round() as usize;
    if count == 0 {
        return Err(Error::param(
            "sr",
            format!("sr = {sr} observes no entry of {dims}"),
        ));
    }
    let mut bits = vec![false; n];
    for i in index::sample(&mut rng_for(seed, STREAM_MASK), n, count) {
        bits[i] = true;
    }
    Mask::new(dims, bits)
}

/// `x + sigma * e` with `e` i.i.d. standard normal.
pub fn add_gaussian_noise(x: &Tensor3, sigma: f64, seed: u64) -> Result<Tensor3> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param(
            "sigma",
            format!("must be nonnegative, got {sigma}"),
        ));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let noise = gaussian_tensor(x.dims(), &mut rng_for(seed, STREAM_NOISE));
    let mut out = x.clone();
    out.axpy(sigma, &noise)?;
    Ok(out)
}

/// Tensor whose transformed slices are `A_i B_i^T` with Gaussian `n1 x r` and `n2 x r`
/// factors, so its transformed multi-rank is `(r, ..., r)` almost surely.
pub fn synth_low_multirank(
    dims: impl Into<Dims>,
    r: usize,
    u: &OrthogonalTransform,
    seed: u64,
) -> Result<Tensor3> {
    let dims = dims.into();
    if r > dims.min_side() {
        return Err(Error::param(
            "rank",
            format!("rank {r} exceeds min(n1, n2) = {}", dims.min_side()),
        ));
    }
    if u.size() != dims.n3 {
        return Err(Error::Dimension(format!(
            "transform of size {} for n3 = {}",
            u.size(),
            dims.n3
        )));
    }
    let mut rng = rng_for(seed, STREAM_LOW_RANK);
    let slices: Vec<DMatrix<f64>> = (0..dims.n3)
        .map(|_| {
            let a = DMatrix::<f64>::from_fn(dims.n1, r, |_, _| StandardNormal.sample(&mut rng));
            let b = DMatrix::<f64>::from_fn(dims.n2, r, |_, _| StandardNormal.sample(&mut rng));
            a * b.transpose()
        })
        .collect();
    from_transformed_slices(&slices, u)
}

/// Ground truth plus the noise and sampling settings of a completion experiment.
#[derive(Debug, Clone)]
pub struct CompletionProblem {
    pub ground_truth: Tensor3,
    pub sr: f64,
    pub sigma_noise: f64,
    pub seed: u64,
}

/// Noisy, partially observed data handed to the solver.
#[derive(Debug, Clone)]
pub struct Observation {
    /// Noisy tensor restricted to the mask (zero elsewhere).
    pub observed: Tensor3,
    pub mask: Mask,
}

impl CompletionProblem {
    pub fn new(ground_truth: Tensor3, sr: f64, sigma_noise: f64, seed: u64) -> Result<Self> {
        if !(sr > 0.0 && sr <= 1.0) {
            return Err(Error::param(
                "sr",
                format!("sampling ratio must lie in (0, 1], got {sr}"),
            ));
        }
        if (sr * ground_truth.len() as f64).round() < 1.0 {
            return Err(Error::param("sr", "sampling ratio observes no entry"));
        }
        if !(sigma_noise >= 0.0) || !sigma_noise.is_finite() {
            return Err(Error::param(
                "sigma",
                format!("must be nonnegative, got {sigma_noise}"),
            ));
        }
        Ok(CompletionProblem {
            ground_truth,
            sr,
            sigma_noise,
            seed,
        })
    }

    /// Adds noise to the whole tensor first, then samples the mask.
    pub fn observe(&self) -> Result<Observation> {
        let noisy = add_gaussian_noise(&self.ground_truth, self.sigma_noise, self.seed)?;
        let mask = make_mask(self.ground_truth.dims(), self.sr, self.seed)?;
        Ok(Observation {
            observed: mask.apply(&noisy)?,
            mask,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationProblem {
    pub coeff_truth: Tensor3,
    pub train_samples: Vec<Tensor3>,
    pub train_labels: Vec<u8>,
    pub test_samples: Vec<Tensor3>,
    pub test_labels: Vec<u8>,
    pub seed: u64,
}

/// Logistic model: standard Gaussian samples `Z_i`, labels
/// `y_i ~ Bernoulli(sigmoid(<Z_i, X*>))`, and `X*` of multi-rank `r` scaled to
/// Frobenius norm 5. Training data whose positive fraction falls outside
/// `[0.3, 0.7]` is redrawn once.
pub fn synth_logistic(
    dims: impl Into<Dims>,
    r: usize,
    n_train: usize,
    n_test: usize,
    u: &OrthogonalTransform,
    seed: u64,
) -> Result<ClassificationProblem> {
    let dims = dims.into();
    if n_train == 0 {
        return Err(Error::param("n_train", "need at least one training sample"));
    }
    let mut coeff = synth_low_multirank(dims, r, u, seed)?;
    let norm = fro_norm(&coeff);
    if norm > 0.0 {
        coeff = coeff.scale(LOGISTIC_COEFF_NORM / norm);
    }

    let mut rng = rng_for(seed, STREAM_SAMPLES);
    let draw_labeled = |rng: &mut ChaCha8Rng, n: usize| -> (Vec<Tensor3>, Vec<u8>) {
        let mut samples = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let z = gaussian_tensor(dims, rng);
            let score = inner(&z, &coeff).expect("same dims");
            let coin: f64 = rng.random();
            samples.push(z);
            labels.push(u8::from(coin < sigmoid(score)));
        }
        (samples, labels)
    };

    let (mut train_samples, mut train_labels) = draw_labeled(&mut rng, n_train);
    let balance =
        |labels: &[u8]| labels.iter().map(|&y| f64::from(y)).sum::<f64>() / labels.len() as f64;
    let frac = balance(&train_labels);
    if !(0.3..=0.7).contains(&frac) {
        (train_samples, train_labels) = draw_labeled(&mut rng, n_train);
    }
    let (test_samples, test_labels) = draw_labeled(&mut rng, n_test);

    Ok(ClassificationProblem {
        coeff_truth: coeff,
        train_samples,
        train_labels,
        test_samples,
        test_labels,
        seed,
    })
}
