//! Counter-addressable random streams.
//!
//! Every estimator draws from an [`RngStream`], an immutable (seed,
//! stream_index) pair. Distinct pairs yield statistically independent
//! substreams of a keyed ChaCha8 generator, and a pair alone fully
//! determines its sample sequence. Work is always split by item index,
//! each item deriving its own substream, so results are bit-identical
//! for any worker count and across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Immutable handle addressing one reproducible random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; a strong 64-bit avalanche.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    /// Root stream for a run.
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            stream_index: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Child stream `index` of this stream. Children of distinct parents
    /// or distinct indices land on distinct ChaCha streams except for
    /// 2^-64-scale hash collisions.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_index: mix64(self.stream_index ^ mix64(index ^ GOLDEN)),
        }
    }

    /// Instantiates the generator positioned at counter zero.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut word = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            word = mix64(word);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn uniform_vec(&self, count: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..count).map(|_| rng.gen::<f64>()).collect()
    }

    /// Standard normal draws.
    pub fn normal_vec(&self, count: usize) -> Vec<f64> {
        let mut rng = self.rng();
        (0..count).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// Standard normal vector drawn from an existing generator.
pub fn normal_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Uniform direction on the unit sphere: a normalized Gaussian vector.
pub fn sphere_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-154 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform point in the centered ball of the given radius: a sphere
/// direction scaled by radius * U^(1/dim).
pub fn ball_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    let dir = sphere_direction(rng, dim);
    let u: f64 = rng.gen();
    let r = radius * u.powf(1.0 / dim as f64);
    dir.into_iter().map(|x| x * r).collect()
}
