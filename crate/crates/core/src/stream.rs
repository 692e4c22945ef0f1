//! Reproducible uniform streams.
//!
//! Trial `i` of an ensemble draws from ChaCha8 keyed by the master seed with
//! stream id `i`; ChaCha is counter-based, so every trial's stream is fixed
//! by `(master_seed, i)` alone, independent of scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent ensemble families keyed off one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Sequential-reduction trajectories.
    Reduction,
    /// Direct jump-process oracle.
    Oracle,
    /// Reservoir priorities.
    Reservoir,
}

impl Family {
    fn tag(self) -> u64 {
        match self {
            Family::Reduction => 0,
            Family::Oracle => 0x6f72_6163_6c65,
            Family::Reservoir => 0x7265_7365_7276,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniforms in the open interval `(0, 1)` for one trial.
#[derive(Debug, Clone)]
pub struct Uniforms {
    rng: ChaCha8Rng,
}

impl Uniforms {
    pub fn for_trial(master_seed: u64, family: Family, trial: u64) -> Self {
        let key = match family {
            Family::Reduction => master_seed,
            other => mix64(master_seed ^ mix64(other.tag())),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(trial);
        Self { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// `(k + 0.5) / 2^53` for a 53-bit `k`: never 0, never 1.
    pub fn next_open01(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl Iterator for Uniforms {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_open01())
    }
}
