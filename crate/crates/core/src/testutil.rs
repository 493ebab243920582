use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::synth::gaussian_tensor;
use crate::tensor::{Dims, Tensor3};

pub fn random_tensor(dims: impl Into<Dims>, seed: u64) -> Tensor3 {
    gaussian_tensor(dims, &mut ChaCha8Rng::seed_from_u64(seed))
}
