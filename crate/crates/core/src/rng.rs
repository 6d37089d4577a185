//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed by the
//! experiment seed and a fixed stream id, so phases never share a stream and
//! runs are reproducible across platforms. Normal variates use the
//! Box–Muller transform on two uniforms from that stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// Stream ids used by the training pipeline.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const PHASE1: u64 = 1;
    pub const PHASE2: u64 = 2;
    pub const PHASE2_AUX: u64 = 3;
    pub const DRS: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const AUTOENCODER: u64 = 6;
    pub const BAYES: u64 = 7;
    pub const DATASET: u64 = 8;
}

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Uniform in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// One Box–Muller pair of independent standard normals.
pub fn normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // 1 - u lies in (0, 1], so the log is finite.
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Fills `out` with standard normals, consuming one uniform pair per two
/// outputs. An odd trailing slot uses the first value of a fresh pair.
pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = normal_pair(rng).0;
    }
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    normal_pair(rng).0
}
