//! Experiment harness: convergence-rate fits, martingale identity checks,
//! fluctuation diagnostics and Berry–Esseen bound evaluation.

mod bound;
mod config;
mod fluctuation;
mod identities;
mod output;
mod transfer;
mod verify;

pub use bound::{
    berry_esseen_bound_eval, third_abs_central_moment, third_abs_central_moment_from_pmf, BoundReport, DEFAULT_A1,
};
pub use config::{parse_dyadic_range, ExperimentSection, NGrid, RateExperimentConfig, Target, Tolerances};
pub use fluctuation::{
    mean_fluctuation_experiment, variance_fluctuation_experiment, FluctuationResult, FluctuationRow, TrendSummary,
};
pub use identities::{
    martingale_identity_check, FluctuationPoint, IdentityResidual, MartingaleCheckReport, IDENTITY_TOL,
};
pub use output::{gnuplot_script, write_rows, ExperimentRow};
pub use transfer::{transfer_check, TransferPoint, TransferReport, TRANSFER_TOL};
pub use verify::{linspace, run_verify, CheckOutcome, VerifyPlan, VerifyReport};

use crate::envmodel::{EnvDistribution, EnvironmentWindow, RegimeTag};
use crate::error::{Error, Result};
use crate::exactdist::{
    certify_truncation, hitting_time_law, kolmogorov_distance_t, kolmogorov_distance_x, position_pmf, TScaling,
};
use crate::qmoments::{law_constants, truncation_control, LawConstants, QuenchedMomentTable};
use crate::rng::{derive_seed, Domain};
use crate::stats::{iqr, median, ols};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tolerance used when solving for κ.
pub const KAPPA_TOL: f64 = 1e-9;
const MAX_TRUNCATION: i64 = 1 << 20;
const INITIAL_LEFT_MARGIN: i64 = 256;

/// A sampled environment with certified truncation and its moment tables.
#[derive(Debug, Clone)]
pub struct PreparedEnv {
    pub env: EnvironmentWindow,
    pub table: QuenchedMomentTable,
    pub trunc_left: i64,
    /// Probability of reaching the reflecting site before `right`.
    pub ruin: f64,
}

/// Sample sites up to `right`, choose the truncation by
/// [`truncation_control`], then push it left until the walk reaches it
/// before `right` with probability below the certification tolerance.
pub fn prepare_environment(dist: &EnvDistribution, seed: u64, right: i64, trunc_tol: f64) -> Result<PreparedEnv> {
    let mut env = EnvironmentWindow::sample(*dist, -INITIAL_LEFT_MARGIN, right, seed)?;
    let mut l = truncation_control(&env, dist, trunc_tol)?;
    let ruin = loop {
        let (ok, p) = certify_truncation(&env, -l, right.max(1))?;
        if ok {
            break p;
        }
        if l >= MAX_TRUNCATION {
            return Err(Error::numeric(format!(
                "cannot certify a truncation site for seed {seed}: ruin probability {p:e} at L = {l}"
            )));
        }
        l *= 2;
    };
    if 2 * l > INITIAL_LEFT_MARGIN {
        env = env.resized(-2 * l, right)?;
    }
    let table = QuenchedMomentTable::build(&env, -l)?;
    Ok(PreparedEnv {
        env,
        table,
        trunc_left: -l,
        ruin,
    })
}

/// Rate exponent `r` with distance `≲ n^{-r}` from the theorem for `target`.
pub fn theory_rate(target: Target, kappa: f64) -> f64 {
    match target {
        Target::Fbar if kappa > 3.0 => 0.5,
        Target::Fbar => 1.5 - 3.0 / kappa,
        Target::F if kappa > 4.0 => 0.5,
        Target::F => 1.0 - 2.0 / kappa,
        Target::G if kappa >= 12.0 / 5.0 => 0.25,
        Target::G => 1.5 - 3.0 / kappa,
    }
}

/// How a rate experiment is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateCriterion {
    /// Median slope inside `[lo, hi]`.
    SlopeBand { lo: f64, hi: f64 },
    /// `d(n) ≤ C n^{-rate + slack}` with `C` fit at the smallest `n`, for
    /// all larger `n`, in at least `fraction` of the replicates.
    Envelope { rate: f64, slack: f64, fraction: f64 },
}

/// The criterion for `target` and κ: a two-sided band for the normalized
/// hitting time when κ > 3, a one-sided envelope otherwise.
pub fn criterion_for(target: Target, kappa: f64, tol: &Tolerances) -> RateCriterion {
    if target == Target::Fbar && kappa > 3.0 {
        RateCriterion::SlopeBand {
            lo: tol.slope_band[0],
            hi: tol.slope_band[1],
        }
    } else {
        RateCriterion::Envelope {
            rate: theory_rate(target, kappa),
            slack: tol.envelope_slack,
            fraction: tol.envelope_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub replicate: usize,
    pub env_seed: u64,
    pub n: u64,
    pub distance: f64,
    pub arg_sup: f64,
    pub tail_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFit {
    pub replicate: usize,
    pub env_seed: u64,
    pub trunc_left: i64,
    pub slope: f64,
    pub intercept: f64,
    /// Envelope constant `C` and whether every larger `n` stays below it.
    pub envelope_c: Option<f64>,
    pub envelope_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentResult {
    pub law: EnvDistribution,
    pub target: Target,
    #[serde(with = "crate::serde_ext::extended_real")]
    pub kappa: f64,
    pub tags: Vec<RegimeTag>,
    pub n_grid: Vec<u64>,
    pub master_seed: u64,
    pub rows: Vec<RateRow>,
    pub fits: Vec<ReplicateFit>,
    pub median_slope: f64,
    pub slope_iqr: f64,
    pub theory_rate: f64,
    pub criterion: RateCriterion,
    /// Fraction of replicates within the envelope (envelope criteria only).
    pub envelope_pass_fraction: Option<f64>,
    pub passed: bool,
}

impl RateExperimentResult {
    /// Rows `seed, n, statistic, normalized_statistic, distance, bound`:
    /// the statistic is the distance, normalized by `n^{-rate}`, and the
    /// bound is the envelope value where one applies.
    pub fn experiment_rows(&self) -> Vec<ExperimentRow> {
        self.rows
            .iter()
            .map(|r| {
                let fit = &self.fits[r.replicate];
                let bound = match (self.criterion, fit.envelope_c) {
                    (RateCriterion::Envelope { rate, slack, .. }, Some(c)) => {
                        Some(c * (r.n as f64).powf(-rate + slack))
                    }
                    _ => None,
                };
                ExperimentRow {
                    seed: r.env_seed,
                    n: r.n,
                    statistic: Some(r.distance),
                    normalized_statistic: Some(r.distance * (r.n as f64).powf(self.theory_rate)),
                    distance: Some(r.distance),
                    bound,
                }
            })
            .collect()
    }
}

/// Distance of `target` from Φ for one prepared environment at time `n`.
pub fn target_distance(
    prepared: &PreparedEnv,
    constants: &LawConstants,
    target: Target,
    n: u64,
    tail_tol: f64,
) -> Result<crate::exactdist::KolmogorovReport> {
    let PreparedEnv {
        env, table, trunc_left, ..
    } = prepared;
    match target {
        Target::Fbar | Target::F => {
            let law = hitting_time_law(env, table, n as i64, tail_tol)?;
            let scaling = if target == Target::Fbar {
                TScaling::Quenched
            } else {
                TScaling::Deterministic {
                    sigma2: constants.sigma2,
                }
            };
            kolmogorov_distance_t(&law, table, n, scaling)
        }
        Target::G => {
            let law = position_pmf(env, n, *trunc_left)?;
            kolmogorov_distance_x(&law, table, n, constants)
        }
    }
}

fn envelope(distances: &[(u64, f64)], rate: f64, slack: f64) -> (f64, bool) {
    let (n0, d0) = distances[0];
    let exponent = -rate + slack;
    let c = d0 / (n0 as f64).powf(exponent);
    let ok = distances[1..].iter().all(|&(n, d)| d <= c * (n as f64).powf(exponent));
    (c, ok)
}

/// Exact Kolmogorov distances over the replicate × n matrix, per-replicate
/// log-log OLS slopes, and the pass/fail verdict of the regime's criterion.
pub fn rate_experiment(config: &RateExperimentConfig) -> Result<RateExperimentResult> {
    config.validate()?;
    let dist = config.law;
    let kappa = dist.solve_kappa(KAPPA_TOL)?;
    if kappa <= 2.0 {
        return Err(Error::regime(format!("law {dist} has kappa = {kappa} <= 2")));
    }
    let constants = law_constants(&dist)?;
    let grid = config.experiment.n_grid.values()?;
    let n_max = *grid.last().unwrap();
    let tol = &config.tolerances;

    let per_replicate: Vec<(ReplicateFit, Vec<RateRow>)> = (0..config.experiment.n_envs)
        .into_par_iter()
        .map(|rep| -> Result<(ReplicateFit, Vec<RateRow>)> {
            let env_seed = derive_seed(config.experiment.master_seed, Domain::Replicate, rep as u64);
            let prepared = prepare_environment(&dist, env_seed, n_max as i64 + 1, tol.trunc)?;
            let rows = grid
                .iter()
                .map(|&n| -> Result<RateRow> {
                    let report = target_distance(&prepared, &constants, config.experiment.target, n, tol.tail_mass)?;
                    Ok(RateRow {
                        replicate: rep,
                        env_seed,
                        n,
                        distance: report.distance,
                        arg_sup: report.arg_sup,
                        tail_mass: report.tail_mass_bound,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.distance.ln()).collect();
            let fit = ols(&xs, &ys).ok_or_else(|| Error::numeric("degenerate slope fit"))?;
            Ok((
                ReplicateFit {
                    replicate: rep,
                    env_seed,
                    trunc_left: prepared.trunc_left,
                    slope: fit.slope,
                    intercept: fit.intercept,
                    envelope_c: None,
                    envelope_ok: None,
                },
                rows,
            ))
        })
        .collect::<Result<_>>()?;

    let criterion = criterion_for(config.experiment.target, kappa, tol);
    let mut fits = Vec::with_capacity(per_replicate.len());
    let mut rows = Vec::new();
    for (mut fit, reps) in per_replicate {
        if let RateCriterion::Envelope { rate, slack, .. } = criterion {
            let pts: Vec<(u64, f64)> = reps.iter().map(|r| (r.n, r.distance)).collect();
            let (c, ok) = envelope(&pts, rate, slack);
            fit.envelope_c = Some(c);
            fit.envelope_ok = Some(ok);
        }
        fits.push(fit);
        rows.extend(reps);
    }
    let slopes: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let median_slope = median(&slopes);
    let (passed, envelope_pass_fraction) = match criterion {
        RateCriterion::SlopeBand { lo, hi } => (median_slope >= lo && median_slope <= hi, None),
        RateCriterion::Envelope { fraction, .. } => {
            let ok = fits.iter().filter(|f| f.envelope_ok == Some(true)).count() as f64 / fits.len() as f64;
            (ok >= fraction, Some(ok))
        }
    };
    Ok(RateExperimentResult {
        law: dist,
        target: config.experiment.target,
        kappa,
        tags: crate::envmodel::classify_regime(kappa),
        n_grid: grid,
        master_seed: config.experiment.master_seed,
        rows,
        fits,
        median_slope,
        slope_iqr: iqr(&slopes),
        theory_rate: theory_rate(config.experiment.target, kappa),
        criterion,
        envelope_pass_fraction,
        passed,
    })
}
