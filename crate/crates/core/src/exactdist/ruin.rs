//! Gambler's-ruin probabilities in a fixed environment.

use crate::envmodel::EnvironmentWindow;
use crate::error::{Error, Result};

/// Largest ruin probability accepted as certifying a truncation site.
pub const RUIN_CERT_TOL: f64 = 1e-12;

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `P_ω(T_left < T_right)` for the walk started at 0.
///
/// With `D_j = Π_{i=1}^{j} ρ_i` for `j ≥ 0` and `D_j = 1 / Π_{i=j+1}^{0} ρ_i`
/// for `j < 0`, the probability is `Σ_{j=0}^{right-1} D_j / Σ_{j=left}^{right-1} D_j`.
/// Sums are taken in log space.
pub fn ruin_probability(env: &EnvironmentWindow, left: i64, right: i64) -> Result<f64> {
    if !(left < 0 && 0 < right) {
        return Err(Error::param(format!("need left < 0 < right, got [{left}, {right}]")));
    }
    let mut logs = Vec::with_capacity((right - left) as usize);
    let mut acc = 0.0;
    for j in 0..right {
        if j > 0 {
            acc += env.rho(j).ln();
        }
        logs.push(acc);
    }
    let numerator = log_sum_exp(&logs);
    let mut acc = 0.0;
    for j in (left..0).rev() {
        acc -= env.rho(j + 1).ln();
        logs.push(acc);
    }
    let denominator = log_sum_exp(&logs);
    Ok((numerator - denominator).exp())
}

/// Whether the walk from 0 reaches `trunc_left` before `target` with
/// probability below [`RUIN_CERT_TOL`]; returns that probability.
pub fn certify_truncation(env: &EnvironmentWindow, trunc_left: i64, target: i64) -> Result<(bool, f64)> {
    let p = ruin_probability(env, trunc_left, target)?;
    Ok((p < RUIN_CERT_TOL, p))
}
