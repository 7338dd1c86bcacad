//! Shared fixtures for the kernel benchmarks in `benches/`.

use rwre_core::qmoments::DEFAULT_TRUNC_TOL;
use rwre_core::ratelab::{prepare_environment, PreparedEnv};
use rwre_core::{EnvDistribution, Result};

pub const SEED: u64 = 0x5eed;

/// Beta(5, 1), the `κ = 4` boundary law.
pub fn boundary_law() -> EnvDistribution {
    EnvDistribution::Beta { alpha: 5.0, beta: 1.0 }
}

/// A certified environment covering `[.., n + 1]`.
pub fn fixture(n: u64) -> Result<PreparedEnv> {
    prepare_environment(&boundary_law(), SEED, n as i64 + 1, DEFAULT_TRUNC_TOL)
}
