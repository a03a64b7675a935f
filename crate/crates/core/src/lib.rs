//! Robust matrix completion.
//!
//! Recovers a low-rank matrix `L₀` and a sparse corruption `S₀` from a few
//! noisy entries of `L₀ + S₀` by minimizing a squared loss plus nuclear-norm
//! and ℓ1 / ℓ2,1 penalties over an entrywise box. Alongside the estimator the
//! crate ships synthetic instance generators, closed-form regularization
//! parameters and rate predictions, stochastic-term diagnostics, and a
//! seeded Monte-Carlo experiment harness.

pub mod cli;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod prox;
pub mod sampling;
pub mod solver;
pub mod synth;
pub mod tuning;

pub use error::{Error, Result};
pub use matrix::{error_report, norm, restrict, DenseMatrix, ErrorReport, IndexSet, NormKind};
pub use sampling::{AssumptionConstants, SamplingDistribution};
pub use solver::{fit, objective, oracle_fit, Regularizer, SolverConfig, SolverResult};
pub use synth::{Adversary, CorruptionKind, ObservationSet, ProblemInstance, Sample};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// The crate-wide generator: ChaCha20, seeded from a `u64`.
pub type Rng = ChaCha20Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a label path
/// (SplitMix64 finalizer applied per component).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base;
    for &p in parts {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
