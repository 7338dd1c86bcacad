//! Berry–Esseen bound for `T_n` as a sum of independent crossing times.

use crate::envmodel::EnvironmentWindow;
use crate::error::{Error, Result};
use crate::exactdist::{crossing_time_head, crossing_time_pmf, hitting_time_law, kolmogorov_distance_t, TScaling};
use crate::qmoments::QuenchedMomentTable;
use serde::{Deserialize, Serialize};

/// Berry–Esseen constant for non-identically distributed summands.
pub const DEFAULT_A1: f64 = 0.56;

/// `E_ω|τ_k - μ_k|³` for the crossing time `τ_k` from `k` to `k + 1`.
///
/// The signed third central moment comes from the moment table; the
/// correction `2 Σ_{t < μ_k} (μ_k - t)³ P(τ_k = t)` only needs the head of
/// the law up to `⌊μ_k⌋`. Within that horizon the walk cannot feel a
/// reflecting site further than `⌊μ_k⌋ + 1` to the left of `k`.
pub fn third_abs_central_moment(env: &EnvironmentWindow, table: &QuenchedMomentTable, k: i64) -> Result<f64> {
    if k < 0 || k > table.right() {
        return Err(Error::range(format!("site {k} outside the moment table")));
    }
    let (mu, m2, m3) = (table.mu().at(k), table.m2().at(k), table.m3().at(k));
    let signed = m3 - 3.0 * mu * m2 + 2.0 * mu * mu * mu;
    let t_max = mu.floor() as u64;
    let local = (k - t_max as i64 - 1).max(table.trunc_left());
    let head = crossing_time_head(env, k, local, t_max.max(1))?;
    let mut below = 0.0;
    for i in 0..head.len() {
        let t = head.value(i) as f64;
        if t < mu {
            below += (mu - t).powi(3) * head.probs[i];
        }
    }
    Ok((signed + 2.0 * below).max(0.0))
}

/// The same moment from the full crossing-time law, run until the
/// uncaptured mass is below `tail_tol`.
pub fn third_abs_central_moment_from_pmf(
    env: &EnvironmentWindow,
    table: &QuenchedMomentTable,
    k: i64,
    tail_tol: f64,
) -> Result<f64> {
    let law = crossing_time_pmf(env, k, table.trunc_left(), tail_tol)?;
    let mu = table.mu().at(k);
    Ok((0..law.len())
        .map(|i| (law.value(i) as f64 - mu).abs().powi(3) * law.probs[i])
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: u64,
    /// `A₁ Σ_{k<n} E_ω|τ_k - μ_k|³ / Var_ω(T_n)^{3/2}`.
    pub bound: f64,
    /// Exact `sup_x |F̄_n(x) - Φ(x)|`.
    pub distance: f64,
    pub tail_mass: f64,
    pub lyapunov_sum: f64,
    pub holds: bool,
}

/// Evaluate the bound and the exact distance at time `n`.
pub fn berry_esseen_bound_eval(
    env: &EnvironmentWindow,
    table: &QuenchedMomentTable,
    n: u64,
    a1: f64,
    tail_tol: f64,
) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::param("n must be positive"));
    }
    let lyapunov_sum: f64 = (0..n as i64)
        .map(|k| third_abs_central_moment(env, table, k))
        .sum::<Result<f64>>()?;
    let var = table.var_tn(n as usize)?;
    let bound = a1 * lyapunov_sum / var.powf(1.5);
    let law = hitting_time_law(env, table, n as i64, tail_tol)?;
    let report = kolmogorov_distance_t(&law, table, n, TScaling::Quenched)?;
    Ok(BoundReport {
        n,
        bound,
        distance: report.distance,
        tail_mass: report.tail_mass_bound,
        lyapunov_sum,
        holds: report.distance <= bound + report.tail_mass_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::EnvDistribution;

    #[test]
    fn head_route_matches_full_law() {
        for (dist, seed) in [
            (EnvDistribution::Beta { alpha: 5.0, beta: 1.0 }, 4),
            (EnvDistribution::Beta { alpha: 3.2, beta: 1.0 }, 5),
        ] {
            let env = EnvironmentWindow::sample(dist, -256, 80, seed).unwrap();
            let table = QuenchedMomentTable::build(&env, -128).unwrap();
            for k in [0i64, 3, 17, 40] {
                let a = third_abs_central_moment(&env, &table, k).unwrap();
                let b = third_abs_central_moment_from_pmf(&env, &table, k, 1e-22).unwrap();
                assert!((a - b).abs() <= 1e-8 * b, "{dist} k = {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn bound_holds_in_a_quick_case() {
        let dist = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 };
        let env = EnvironmentWindow::sample(dist, -256, 300, 8).unwrap();
        let table = QuenchedMomentTable::build(&env, -128).unwrap();
        let r = berry_esseen_bound_eval(&env, &table, 256, DEFAULT_A1, 1e-9).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.bound > r.distance);
    }
}
