//! Seeded Monte Carlo under the quenched law.
//!
//! Sample `i` of a batch draws from its own ChaCha8 stream keyed by
//! `(seed, kind)`, so batches are identical regardless of thread count.
//! A step from `x` goes right when a uniform 64-bit word is below
//! `ω_x · 2^64`.

use crate::envmodel::{EnvDistribution, EnvironmentWindow};
use crate::error::{Error, Result};
use crate::exactdist::LatticeCdf;
use crate::qmoments::{fmt_f64, mu_table, var_recursion, VarFault};
use crate::rng::{derive_seed, Domain, StreamFactory};
use crate::stats::{mean_and_se, pairwise_sum, wilson_interval, Z95};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Default per-sample step budget.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleKind {
    HittingTime { k: i64 },
    Position { n: u64 },
}

/// A batch of i.i.d. samples under `P_ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimBatch {
    pub kind: SampleKind,
    pub env_seed: u64,
    pub seed: u64,
    pub cap: u64,
    /// Sample values; [`SimBatch::TRUNCATED`] marks a sample that hit the cap.
    pub samples: Vec<i64>,
    /// Running maxima, for position batches.
    pub maxima: Option<Vec<i64>>,
    pub truncated_count: usize,
}

impl SimBatch {
    /// Stands in for `+∞` when a sample exhausted its step budget.
    pub const TRUNCATED: i64 = i64::MAX;

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples that completed within the cap.
    pub fn finite(&self) -> impl Iterator<Item = i64> + '_ {
        self.samples.iter().copied().filter(|&s| s != Self::TRUNCATED)
    }

    /// Mean and standard error over completed samples.
    pub fn mean_and_se(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.finite().map(|s| s as f64).collect();
        mean_and_se(&xs)
    }

    /// CSV with columns `sample_index, value` (`inf` for truncated samples).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sample_index", "value"])?;
        for (i, &s) in self.samples.iter().enumerate() {
            let v = if s == Self::TRUNCATED {
                "inf".to_string()
            } else {
                s.to_string()
            };
            w.write_record(&[i.to_string(), v])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Step thresholds `⌊ω_x 2^64⌋` over the window, with lazy lookup outside.
struct Thresholds<'a> {
    env: &'a EnvironmentWindow,
    left: i64,
    values: Vec<u64>,
}

fn threshold(w: f64) -> u64 {
    // Saturates to u64::MAX for w within 2^-64 of 1.
    (w * 18_446_744_073_709_551_616.0) as u64
}

impl<'a> Thresholds<'a> {
    fn new(env: &'a EnvironmentWindow) -> Self {
        Self {
            env,
            left: env.left_index(),
            values: env.omegas().iter().map(|&w| threshold(w)).collect(),
        }
    }

    #[inline]
    fn at(&self, x: i64) -> u64 {
        let i = x - self.left;
        if i >= 0 && (i as usize) < self.values.len() {
            self.values[i as usize]
        } else {
            threshold(self.env.omega(x))
        }
    }
}

#[inline]
fn step<R: RngCore>(rng: &mut R, t: &Thresholds, x: i64) -> i64 {
    if rng.next_u64() < t.at(x) {
        x + 1
    } else {
        x - 1
    }
}

/// `n_samples` draws of `T_k` from 0, each with at most `cap` steps.
pub fn simulate_hitting_time(
    env: &EnvironmentWindow,
    k: i64,
    n_samples: usize,
    seed: u64,
    cap: u64,
) -> Result<SimBatch> {
    if k < 1 || k > env.right_index() {
        return Err(Error::range(format!("target {k} outside [1, {}]", env.right_index())));
    }
    let thresholds = Thresholds::new(env);
    let factory = StreamFactory::new(seed, Domain::HittingSample);
    let samples: Vec<i64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = factory.stream(i);
            let mut x = 0i64;
            let mut t = 0u64;
            while x < k {
                if t == cap {
                    return SimBatch::TRUNCATED;
                }
                x = step(&mut rng, &thresholds, x);
                t += 1;
            }
            t as i64
        })
        .collect();
    let truncated_count = samples.iter().filter(|&&s| s == SimBatch::TRUNCATED).count();
    Ok(SimBatch {
        kind: SampleKind::HittingTime { k },
        env_seed: env.seed(),
        seed,
        cap,
        samples,
        maxima: None,
        truncated_count,
    })
}

fn position_paths(env: &EnvironmentWindow, n: u64, n_samples: usize, seed: u64, domain: Domain) -> Vec<(i64, i64)> {
    let thresholds = Thresholds::new(env);
    let factory = StreamFactory::new(seed, domain);
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = factory.stream(i);
            let (mut x, mut best) = (0i64, 0i64);
            for _ in 0..n {
                x = step(&mut rng, &thresholds, x);
                best = best.max(x);
            }
            (x, best)
        })
        .collect()
}

/// `n_samples` draws of `X_n` (and the running maximum `X_n*`).
pub fn simulate_position(env: &EnvironmentWindow, n: u64, n_samples: usize, seed: u64) -> Result<SimBatch> {
    let paths = position_paths(env, n, n_samples, seed, Domain::PositionSample);
    let (samples, maxima) = paths.into_iter().unzip();
    Ok(SimBatch {
        kind: SampleKind::Position { n },
        env_seed: env.seed(),
        seed,
        cap: n,
        samples,
        maxima: Some(maxima),
        truncated_count: 0,
    })
}

/// Estimate of `P_ω(X_n* - X_n ≥ B log n)` for one `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktrackEstimate {
    pub b: f64,
    /// `B log n`.
    pub threshold: f64,
    pub hits: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Backtracking frequencies for every `B` in `b_grid`, from one shared set
/// of paths, with Wilson 95% intervals.
pub fn backtrack_probability(
    env: &EnvironmentWindow,
    n: u64,
    b_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<BacktrackEstimate>> {
    if b_grid.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::param("backtracking constants must be positive"));
    }
    if n < 2 {
        return Err(Error::param("backtracking needs n ≥ 2"));
    }
    let paths = position_paths(env, n, n_samples, seed, Domain::BacktrackSample);
    let log_n = (n as f64).ln();
    Ok(b_grid
        .iter()
        .map(|&b| {
            let threshold = b * log_n;
            let hits = paths.iter().filter(|(x, m)| (m - x) as f64 >= threshold).count() as u64;
            let trials = paths.len() as u64;
            let (ci_lo, ci_hi) = wilson_interval(hits, trials, Z95);
            BacktrackEstimate {
                b,
                threshold,
                hits,
                trials,
                estimate: hits as f64 / trials.max(1) as f64,
                ci_lo,
                ci_hi,
            }
        })
        .collect())
}

/// Plug-in estimate of the averaged CLT variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sigma0Estimate {
    pub estimate: f64,
    pub se: f64,
    /// `E[V₀]`.
    pub mean_var: f64,
    /// `Var(μ₀)`.
    pub var_mu: f64,
    /// `Cov(μ₀, μ_k)` for `k = 1 ..= K`.
    pub covariances: Vec<f64>,
    pub n_envs: usize,
    pub cutoff: usize,
}

const SIGMA0_BATCHES: usize = 20;
const SIGMA0_TRUNCATION: i64 = 64;

struct Sigma0Sums {
    count: f64,
    v: f64,
    mu: f64,
    mu2: f64,
    pairs: Vec<(f64, f64, f64, f64)>,
}

/// `E[V₀] + Var(μ₀) + 2 Σ_{k=1}^{K} Cov(μ₀, μ_k)` estimated from `n_envs`
/// independent environments, each contributing overlapping pairs
/// `(μ_j, μ_{j+k})` along a block of `4 (K + 1)` sites.
pub fn annealed_sigma0_estimate(
    dist: &EnvDistribution,
    n_envs: usize,
    cutoff: usize,
    seed: u64,
) -> Result<Sigma0Estimate> {
    dist.validate()?;
    if !(dist.moment_rp(2.0) < 1.0) || dist.log_rho_mean() >= 0.0 {
        return Err(Error::regime(format!("law {dist} has kappa <= 2")));
    }
    if n_envs < SIGMA0_BATCHES {
        return Err(Error::param(format!("need at least {SIGMA0_BATCHES} environments")));
    }
    let block = 4 * (cutoff as i64 + 1);
    let per_env: Vec<Sigma0Sums> = (0..n_envs as u64)
        .into_par_iter()
        .map(|e| -> Result<Sigma0Sums> {
            let env_seed = derive_seed(seed, Domain::Replicate, e);
            let env = EnvironmentWindow::sample(*dist, -SIGMA0_TRUNCATION, block - 1, env_seed)?;
            let mu = mu_table(&env, -SIGMA0_TRUNCATION)?;
            let var = var_recursion(&env, -SIGMA0_TRUNCATION, &mu, VarFault::None)?;
            let mut s = Sigma0Sums {
                count: block as f64,
                v: 0.0,
                mu: 0.0,
                mu2: 0.0,
                pairs: vec![(0.0, 0.0, 0.0, 0.0); cutoff],
            };
            for j in 0..block {
                let m = mu.at(j);
                s.v += var.at(j);
                s.mu += m;
                s.mu2 += m * m;
            }
            for (lag, acc) in s.pairs.iter_mut().enumerate() {
                let k = lag as i64 + 1;
                for j in 0..block - k {
                    let (a, b) = (mu.at(j), mu.at(j + k));
                    acc.0 += a;
                    acc.1 += b;
                    acc.2 += a * b;
                    acc.3 += 1.0;
                }
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;

    let combine = |group: &[Sigma0Sums]| -> (f64, f64, f64, Vec<f64>) {
        let count: f64 = group.iter().map(|s| s.count).sum();
        let mean_v = pairwise_sum(&group.iter().map(|s| s.v).collect::<Vec<_>>()) / count;
        let mean_mu = pairwise_sum(&group.iter().map(|s| s.mu).collect::<Vec<_>>()) / count;
        let mean_mu2 = pairwise_sum(&group.iter().map(|s| s.mu2).collect::<Vec<_>>()) / count;
        let var_mu = mean_mu2 - mean_mu * mean_mu;
        let covs: Vec<f64> = (0..cutoff)
            .map(|lag| {
                let (mut a, mut b, mut ab, mut c) = (0.0, 0.0, 0.0, 0.0);
                for s in group {
                    let p = s.pairs[lag];
                    a += p.0;
                    b += p.1;
                    ab += p.2;
                    c += p.3;
                }
                ab / c - (a / c) * (b / c)
            })
            .collect();
        let est = mean_v + var_mu + 2.0 * covs.iter().sum::<f64>();
        (est, mean_v, var_mu, covs)
    };

    let (estimate, mean_var, var_mu, covariances) = combine(&per_env);
    let chunk = n_envs / SIGMA0_BATCHES;
    let batch_estimates: Vec<f64> = per_env
        .chunks(chunk)
        .take(SIGMA0_BATCHES)
        .map(|g| combine(g).0)
        .collect();
    let (_, batch_se) = mean_and_se(&batch_estimates);
    // Batch spread describes one batch of size n_envs / B; rescale to all envs.
    let se = batch_se * (chunk as f64 * SIGMA0_BATCHES as f64 / n_envs as f64).sqrt();
    Ok(Sigma0Estimate {
        estimate,
        se,
        mean_var,
        var_mu,
        covariances,
        n_envs,
        cutoff,
    })
}

/// Sup distance between an empirical CDF and a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfDistance {
    pub distance: f64,
    pub n: usize,
}

impl EcdfDistance {
    /// DKW half-width at confidence `1 - delta`.
    pub fn dkw_band(&self, delta: f64) -> f64 {
        crate::stats::dkw_epsilon(self.n, delta)
    }

    pub fn within_dkw(&self, delta: f64) -> bool {
        self.distance <= self.dkw_band(delta)
    }
}

/// `sup_x |F_N(x) - F(x)|` for a continuous reference `F`, evaluating both
/// one-sided limits of the ECDF at every sample atom.
pub fn ecdf_distance<F: Fn(f64) -> f64>(samples: &[f64], reference: F) -> Result<EcdfDistance> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let c = v[i];
        let mut j = i;
        while j < v.len() && v[j] == c {
            j += 1;
        }
        let f = reference(c);
        best = best.max((i as f64 / n - f).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    Ok(EcdfDistance {
        distance: best.min(1.0),
        n: v.len(),
    })
}

/// `sup_x |F_N(x) - F(x)|` against a lattice law. Both functions are
/// right-continuous steps, so comparing right values at the union of their
/// jump points gives the exact supremum. Truncated samples count as `+∞`.
pub fn ecdf_distance_lattice(samples: &[i64], law: &LatticeCdf) -> Result<EcdfDistance> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples".into()));
    }
    let mut v = samples.to_vec();
    v.sort_unstable();
    let n = v.len() as f64;
    let mut points: Vec<i64> = (0..law.len()).map(|i| law.value(i)).collect();
    points.extend(v.iter().copied().filter(|&s| s != SimBatch::TRUNCATED));
    points.sort_unstable();
    points.dedup();
    let mut best: f64 = 0.0;
    let mut below = 0usize;
    for &x in &points {
        while below < v.len() && v[below] <= x {
            below += 1;
        }
        best = best.max((below as f64 / n - law.cdf_at(x)).abs());
    }
    // Far right: the law's uncaptured mass against truncated samples.
    let reference_total = law.cdf.last().copied().unwrap_or(0.0);
    best = best.max((below as f64 / n - reference_total).abs());
    Ok(EcdfDistance {
        distance: best.min(1.0),
        n: v.len(),
    })
}

/// One JSON row for an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub op: String,
    pub params: serde_json::Value,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub seed: u64,
}

impl EstimateRow {
    pub fn from_backtrack(e: &BacktrackEstimate, n: u64, env_seed: u64, seed: u64) -> Self {
        Self {
            op: "backtrack_probability".into(),
            params: serde_json::json!({ "n": n, "b": e.b, "env_seed": env_seed, "trials": e.trials }),
            estimate: e.estimate,
            se: None,
            ci_lo: Some(e.ci_lo),
            ci_hi: Some(e.ci_hi),
            seed,
        }
    }

    pub fn from_sigma0(e: &Sigma0Estimate, dist: &EnvDistribution, seed: u64) -> Self {
        Self {
            op: "annealed_sigma0_estimate".into(),
            params: serde_json::json!({
                "law": dist.to_string(),
                "n_envs": e.n_envs,
                "cutoff": e.cutoff,
                "covariances": e.covariances.iter().map(|c| fmt_f64(*c)).collect::<Vec<_>>(),
            }),
            estimate: e.estimate,
            se: Some(e.se),
            ci_lo: Some(e.estimate - Z95 * e.se),
            ci_hi: Some(e.estimate + Z95 * e.se),
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactdist::first_passage_cdf;
    use crate::qmoments::QuenchedMomentTable;
    use crate::stats::normal_cdf;

    fn beta5(seed: u64) -> EnvironmentWindow {
        EnvironmentWindow::sample(EnvDistribution::Beta { alpha: 5.0, beta: 1.0 }, -128, 200, seed).unwrap()
    }

    #[test]
    fn nearly_deterministic_walk() {
        let env = EnvironmentWindow::sample(EnvDistribution::Degenerate { p: 0.999 }, -64, 20, 0).unwrap();
        let b = simulate_hitting_time(&env, 10, 10_000, 1, DEFAULT_STEP_CAP).unwrap();
        let direct = b.samples.iter().filter(|&&s| s == 10).count();
        assert!(direct as f64 / 1e4 >= 0.98);
        assert!(b.samples.iter().all(|&s| s >= 10 && (s - 10) % 2 == 0));
    }

    #[test]
    fn deterministic_in_seed_and_thread_count() {
        let env = beta5(3);
        let a = simulate_hitting_time(&env, 20, 2000, 9, DEFAULT_STEP_CAP).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_hitting_time(&env, 20, 2000, 9, DEFAULT_STEP_CAP).unwrap());
        assert_eq!(a, b);
        let c = simulate_hitting_time(&env, 20, 2000, 10, DEFAULT_STEP_CAP).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn cap_is_recorded() {
        let env = beta5(3);
        let b = simulate_hitting_time(&env, 50, 100, 2, 49).unwrap();
        assert_eq!(b.truncated_count, 100);
        assert!(b.finite().next().is_none());
    }

    #[test]
    fn hitting_mean_matches_quenched_moments() {
        let env = beta5(4);
        let table = QuenchedMomentTable::build(&env, -64).unwrap();
        let b = simulate_hitting_time(&env, 50, 100_000, 5, DEFAULT_STEP_CAP).unwrap();
        let (mean, _) = b.mean_and_se();
        let exact = table.mean_tn(50).unwrap();
        let band = 4.0 * (table.var_tn(50).unwrap() / 1e5).sqrt();
        assert!((mean - exact).abs() < band, "{mean} vs {exact} ± {band}");
    }

    #[test]
    fn position_batches() {
        let env = beta5(6);
        let b = simulate_position(&env, 1, 40_000, 3).unwrap();
        let up = b.samples.iter().filter(|&&x| x == 1).count() as f64 / 4e4;
        let w = env.omega(0);
        assert!((up - w).abs() < 4.0 * (w * (1.0 - w) / 4e4).sqrt());
        let b = simulate_position(&env, 50, 1000, 3).unwrap();
        let maxima = b.maxima.as_ref().unwrap();
        assert!(maxima
            .iter()
            .zip(&b.samples)
            .all(|(&m, &x)| m <= 50 && m >= x && x.abs() <= 50));
    }

    #[test]
    fn backtracking_is_monotone_in_b() {
        let env = beta5(7);
        let est = backtrack_probability(&env, 400, &[0.2, 0.5, 1.0, 1e9], 5000, 1).unwrap();
        for w in est.windows(2) {
            assert!(w[1].hits <= w[0].hits);
        }
        assert_eq!(est[3].hits, 0);
        assert!(est[0].ci_lo <= est[0].estimate && est[0].estimate <= est[0].ci_hi);
    }

    #[test]
    fn ecdf_point_mass() {
        let d = ecdf_distance(&[0.7; 10], normal_cdf).unwrap();
        let phi = normal_cdf(0.7);
        assert!((d.distance - phi.max(1.0 - phi)).abs() < 1e-15);
        assert!(ecdf_distance(&[], normal_cdf).is_err());
    }

    #[test]
    fn ecdf_lattice_against_dp() {
        let env = beta5(8);
        let law = first_passage_cdf(&env, 20, 400, -64).unwrap();
        let b = simulate_hitting_time(&env, 20, 20_000, 11, DEFAULT_STEP_CAP).unwrap();
        let d = ecdf_distance_lattice(&b.samples, &law).unwrap();
        assert!(d.distance > 0.0 && d.distance < d.dkw_band(0.01));
        // Distance to itself, built from a perfect "sample" of the law, is tiny.
        let exact: Vec<i64> = vec![20; 10];
        let point = ecdf_distance_lattice(&exact, &law).unwrap();
        assert!((point.distance - (1.0 - law.cdf_at(20))).abs() < 1e-15);
    }

    #[test]
    fn sigma0_homogeneous_and_cutoff_zero() {
        let d = EnvDistribution::Degenerate { p: 2.0 / 3.0 };
        let e = annealed_sigma0_estimate(&d, 40, 5, 1).unwrap();
        assert!((e.estimate - 24.0).abs() < 1e-9);
        let b = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 };
        let zero = annealed_sigma0_estimate(&b, 40, 0, 1).unwrap();
        assert!((zero.estimate - (zero.mean_var + zero.var_mu)).abs() < 1e-12);
        assert!(matches!(
            annealed_sigma0_estimate(&EnvDistribution::Beta { alpha: 2.5, beta: 1.0 }, 40, 5, 1),
            Err(Error::Regime(_))
        ));
    }
}
