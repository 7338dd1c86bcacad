//! Exact-computation and simulation workbench for one-dimensional random
//! walks in i.i.d. random environments (RWRE).
//!
//! The crate is organised bottom-up:
//!
//! - [`envmodel`]: environment laws, sampled windows, `r_p`, κ and regime tags;
//! - [`qmoments`]: per-site quenched crossing-time moments by recursion, their
//!   prefix sums and the law-level constants `v_P`, `E[μ₀²]`, `σ²`;
//! - [`exactdist`]: exact quenched laws of hitting times, position and running
//!   maximum by dynamic programming, and lattice Kolmogorov distances;
//! - [`mcsim`]: seeded Monte Carlo oracles;
//! - [`ratelab`]: convergence-rate experiments, martingale identity checks,
//!   fluctuation diagnostics and Berry–Esseen bound evaluation.

// `!(x < y)` is used on purpose to reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envmodel;
pub mod error;
pub mod exactdist;
pub mod mcsim;
pub mod qmoments;
pub mod quadrature;
pub mod ratelab;
pub mod rng;
pub mod serde_ext;
pub mod stats;

pub use envmodel::{classify_regime, EnvDistribution, EnvironmentWindow, RegimeReport, RegimeTag};
pub use error::{Error, Result};
pub use qmoments::{law_constants, LawConstants, QuenchedMomentTable};
pub use ratelab::{RateExperimentConfig, Target};
