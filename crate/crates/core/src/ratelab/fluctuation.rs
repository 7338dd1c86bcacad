//! Fluctuations of `E_ω[T_k]` over the window `I_{ε,n}` and of `Var_ω(T_n)`
//! around `σ² n`, across independent environments.

use super::output::ExperimentRow;
use super::{prepare_environment, KAPPA_TOL};
use crate::envmodel::EnvDistribution;
use crate::error::{Error, Result};
use crate::qmoments::{law_constants, DEFAULT_TRUNC_TOL};
use crate::rng::{derive_seed, Domain};
use crate::stats::median;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationRow {
    pub replicate: usize,
    pub env_seed: u64,
    pub n: u64,
    pub statistic: f64,
    /// Statistic divided by the in-probability scale (mean) or by
    /// `n^{2/(4∧κ)+ε}` (variance).
    pub normalized: f64,
    /// Statistic divided by the almost-sure scale (mean only).
    pub normalized_as: Option<f64>,
}

/// Whether the normalized statistic shrinks from the smallest to the
/// largest `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendSummary {
    pub median_first: f64,
    pub median_last: f64,
    pub decreasing: bool,
    /// Share of replicates whose own value decreases.
    pub replicate_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationResult {
    pub law: EnvDistribution,
    #[serde(with = "crate::serde_ext::extended_real")]
    pub kappa: f64,
    pub n_grid: Vec<u64>,
    pub epsilon: f64,
    pub epsilon_prime: Option<f64>,
    pub rows: Vec<FluctuationRow>,
    pub trend: TrendSummary,
    pub trend_as: Option<TrendSummary>,
}

impl FluctuationResult {
    pub fn experiment_rows(&self) -> Vec<ExperimentRow> {
        self.rows
            .iter()
            .map(|r| ExperimentRow {
                seed: r.env_seed,
                n: r.n,
                statistic: Some(r.statistic),
                normalized_statistic: Some(r.normalized),
                distance: None,
                bound: r.normalized_as,
            })
            .collect()
    }
}

fn trend(rows: &[FluctuationRow], grid: &[u64], pick: impl Fn(&FluctuationRow) -> f64) -> TrendSummary {
    let (first, last) = (grid[0], *grid.last().unwrap());
    let at = |n: u64| -> Vec<f64> { rows.iter().filter(|r| r.n == n).map(&pick).collect() };
    let (a, b) = (at(first), at(last));
    let down = a.iter().zip(&b).filter(|(x, y)| y < x).count();
    let (median_first, median_last) = (median(&a), median(&b));
    TrendSummary {
        median_first,
        median_last,
        decreasing: median_last < median_first,
        replicate_fraction: down as f64 / a.len().max(1) as f64,
    }
}

fn check_grid(grid: &[u64], n_envs: usize) -> Result<()> {
    if grid.len() < 2 || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "n grid must have two or more increasing positive entries".into(),
        ));
    }
    if n_envs == 0 {
        return Err(Error::Config("n_envs must be at least 1".into()));
    }
    Ok(())
}

/// `sup_{k ∈ I_{ε,n}} D_k - inf_{k ∈ I_{ε,n}} D_k` with `D_k = E_ω[T_k] - k/v`
/// and `I_{ε,n} = [nv - n^{1/2+ε}, nv + n^{1/2+ε}]`, normalized by
/// `n^{1/4+ε/2+ε'}` and by `n^{1/4+1/(2κ)+ε(1/2-1/κ)+ε'}`.
pub fn mean_fluctuation_experiment(
    dist: &EnvDistribution,
    n_grid: &[u64],
    epsilon: f64,
    epsilon_prime: f64,
    n_envs: usize,
    seed: u64,
) -> Result<FluctuationResult> {
    check_grid(n_grid, n_envs)?;
    let c = law_constants(dist)?;
    let kappa = dist.solve_kappa(KAPPA_TOL)?;
    let window = |n: u64| -> (u64, u64) {
        let (center, half) = (n as f64 * c.speed, (n as f64).powf(0.5 + epsilon));
        (((center - half).ceil().max(0.0)) as u64, (center + half).floor() as u64)
    };
    let right = window(*n_grid.last().unwrap()).1 as i64 + 1;
    let ip_exp = 0.25 + epsilon / 2.0 + epsilon_prime;
    let inv_kappa = if kappa.is_finite() { 1.0 / kappa } else { 0.0 };
    let as_exp = 0.25 + inv_kappa / 2.0 + epsilon * (0.5 - inv_kappa) + epsilon_prime;

    let per_rep: Vec<Vec<FluctuationRow>> = (0..n_envs)
        .into_par_iter()
        .map(|rep| -> Result<Vec<FluctuationRow>> {
            let env_seed = derive_seed(seed, Domain::Replicate, rep as u64);
            let p = prepare_environment(dist, env_seed, right, DEFAULT_TRUNC_TOL)?;
            n_grid
                .iter()
                .map(|&n| -> Result<FluctuationRow> {
                    let (lo, hi) = window(n);
                    let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
                    for k in lo..=hi {
                        let d = p.table.mean_tn(k as usize)? - k as f64 * c.inv_speed;
                        dmin = dmin.min(d);
                        dmax = dmax.max(d);
                    }
                    let stat = dmax - dmin;
                    let nf = n as f64;
                    Ok(FluctuationRow {
                        replicate: rep,
                        env_seed,
                        n,
                        statistic: stat,
                        normalized: stat / nf.powf(ip_exp),
                        normalized_as: Some(stat / nf.powf(as_exp)),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<FluctuationRow> = per_rep.into_iter().flatten().collect();
    Ok(FluctuationResult {
        law: *dist,
        kappa,
        n_grid: n_grid.to_vec(),
        epsilon,
        epsilon_prime: Some(epsilon_prime),
        trend: trend(&rows, n_grid, |r| r.normalized),
        trend_as: Some(trend(&rows, n_grid, |r| r.normalized_as.unwrap_or(f64::NAN))),
        rows,
    })
}

/// `|Var_ω(T_n) - σ² n| / n^{2/(4∧κ)+ε}`.
pub fn variance_fluctuation_experiment(
    dist: &EnvDistribution,
    n_grid: &[u64],
    epsilon: f64,
    n_envs: usize,
    seed: u64,
) -> Result<FluctuationResult> {
    check_grid(n_grid, n_envs)?;
    let c = law_constants(dist)?;
    let kappa = dist.solve_kappa(KAPPA_TOL)?;
    let exponent = 2.0 / kappa.min(4.0) + epsilon;
    let right = *n_grid.last().unwrap() as i64 + 1;
    let per_rep: Vec<Vec<FluctuationRow>> = (0..n_envs)
        .into_par_iter()
        .map(|rep| -> Result<Vec<FluctuationRow>> {
            let env_seed = derive_seed(seed, Domain::Replicate, rep as u64);
            let p = prepare_environment(dist, env_seed, right, DEFAULT_TRUNC_TOL)?;
            n_grid
                .iter()
                .map(|&n| -> Result<FluctuationRow> {
                    let stat = (p.table.var_tn(n as usize)? - c.sigma2 * n as f64).abs();
                    Ok(FluctuationRow {
                        replicate: rep,
                        env_seed,
                        n,
                        statistic: stat,
                        normalized: stat / (n as f64).powf(exponent),
                        normalized_as: None,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<FluctuationRow> = per_rep.into_iter().flatten().collect();
    Ok(FluctuationResult {
        law: *dist,
        kappa,
        n_grid: n_grid.to_vec(),
        epsilon,
        epsilon_prime: None,
        trend: trend(&rows, n_grid, |r| r.normalized),
        trend_as: None,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_mean_fluctuation_is_flat() {
        let d = EnvDistribution::Degenerate { p: 2.0 / 3.0 };
        let r = mean_fluctuation_experiment(&d, &[64, 256, 1024], 0.1, 0.05, 2, 1).unwrap();
        for row in &r.rows {
            assert!(row.statistic < 1e-9, "{row:?}");
        }
    }

    #[test]
    fn homogeneous_variance_matches_sigma2() {
        let d = EnvDistribution::Degenerate { p: 2.0 / 3.0 };
        let r = variance_fluctuation_experiment(&d, &[64, 256, 1024], 0.1, 1, 1).unwrap();
        // Only the reflection transient separates Var T_n from 24 n.
        assert!(r.rows.iter().all(|row| row.statistic < 1e-6), "{:?}", r.rows);
    }

    #[test]
    fn rows_are_replicate_by_n() {
        let d = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 };
        let r = mean_fluctuation_experiment(&d, &[128, 512, 2048], 0.1, 0.05, 3, 7).unwrap();
        assert_eq!(r.rows.len(), 9);
        assert!(r.rows.iter().all(|row| row.statistic > 0.0));
        let again = mean_fluctuation_experiment(&d, &[128, 512, 2048], 0.1, 0.05, 3, 7).unwrap();
        assert_eq!(r, again);
        assert!(r.trend_as.is_some());
    }

    #[test]
    fn regime_errors_propagate() {
        let d = EnvDistribution::Beta { alpha: 1.5, beta: 1.0 };
        assert!(matches!(
            variance_fluctuation_experiment(&d, &[64, 128], 0.1, 1, 1),
            Err(Error::Regime(_))
        ));
    }
}
