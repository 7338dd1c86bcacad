//! The event identity `{X_n* < k} = {T_k > n}` that carries rates from
//! hitting times to the running maximum, checked on exact laws.

use crate::envmodel::EnvironmentWindow;
use crate::error::{Error, Result};
use crate::exactdist::{first_passage_cdf, running_max_direct};
use crate::qmoments::{centering_zn, LawConstants, QuenchedMomentTable};
use serde::{Deserialize, Serialize};

/// Largest accepted `|P(X_n* < k) - P(T_k > n)|`.
pub const TRANSFER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPoint {
    pub x: f64,
    pub k: i64,
    /// `P_ω(X_n* < k)` from the running-maximum law.
    pub max_below: f64,
    /// `P_ω(T_k > n)` from the hitting-time law.
    pub hitting_survival: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub n: u64,
    pub points: Vec<TransferPoint>,
    /// Grid points whose level `k(x)` fell below 1.
    pub skipped: usize,
    pub max_residual: f64,
    pub holds: bool,
}

/// For each `x`, put `k(x) = ⌈n v - Z_n + x σ v^{3/2} √n⌉` and compare the
/// two probabilities of the same event.
pub fn transfer_check(
    env: &EnvironmentWindow,
    table: &QuenchedMomentTable,
    n: u64,
    x_grid: &[f64],
    constants: &LawConstants,
) -> Result<TransferReport> {
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let trunc = table.trunc_left();
    let max_law = running_max_direct(env, n, trunc)?;
    let v = constants.speed;
    let center = n as f64 * v - centering_zn(table, n, v)?;
    let scale = constants.sigma() * v.powf(1.5) * (n as f64).sqrt();
    let mut points = Vec::with_capacity(x_grid.len());
    let mut skipped = 0;
    for &x in x_grid {
        let k = (center + x * scale).ceil();
        if !(k >= 1.0) {
            skipped += 1;
            continue;
        }
        let k = k as i64;
        let (max_below, hitting_survival) = if k as u64 > n {
            (1.0, 1.0)
        } else {
            let law = first_passage_cdf(env, k, n, trunc)?;
            (max_law.cdf[(k - 1) as usize], 1.0 - law.cdf_at(n as i64))
        };
        points.push(TransferPoint {
            x,
            k,
            max_below,
            hitting_survival,
            residual: (max_below - hitting_survival).abs(),
        });
    }
    let max_residual = points.iter().map(|p| p.residual).fold(0.0, f64::max);
    Ok(TransferReport {
        n,
        points,
        skipped,
        max_residual,
        holds: max_residual <= TRANSFER_TOL,
    })
}
