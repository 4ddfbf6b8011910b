//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! a 64-bit master seed and selected by a 64-bit stream index, so the run with
//! index `r` sees the same numbers no matter which thread executes it or in
//! what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Stream used for run `index` under `master_seed`.
pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

// Distinct stream families so that, e.g., instance generation and run 0 of an
// experiment never share numbers under the same seed.
pub const INSTANCE_STREAM: u64 = u64::MAX;
pub const VECTOR_STREAM: u64 = u64::MAX - 1;
pub const PERTURBATION_BASE: u64 = 1 << 62;

/// A uniformly random unit vector in `R^dim`.
pub fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|x| x / norm).collect();
        }
    }
}
