//! Seeded RNG streams.
//!
//! Every Monte Carlo task owns a ChaCha8 stream derived from
//! `(master_seed, task_id)`, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::C64;

pub type StreamRng = ChaCha8Rng;

/// Stream for task `task_id` under `master_seed`.
pub fn stream(master_seed: u64, task_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(task_id);
    rng
}

/// Task id combining an experiment tag with an index inside that experiment.
pub fn task_id(tag: u32, index: u64) -> u64 {
    ((tag as u64) << 40) ^ (index & ((1u64 << 40) - 1))
}

/// Standard complex normal: real and imaginary parts each of variance 1/2.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn fill_complex_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [C64]) {
    for v in out.iter_mut() {
        *v = complex_normal(rng);
    }
}
