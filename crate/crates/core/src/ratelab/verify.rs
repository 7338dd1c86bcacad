//! The property matrix behind `rwre verify`: moment-table self-checks,
//! martingale identities, the transfer identity, Berry–Esseen dominance and
//! DP-vs-Monte-Carlo agreement, each over several seeded environments.

use super::{
    berry_esseen_bound_eval, martingale_identity_check, prepare_environment, transfer_check, DEFAULT_A1, KAPPA_TOL,
};
use crate::envmodel::EnvDistribution;
use crate::error::{Error, Result};
use crate::exactdist::{hitting_time_law, HORIZON_TAIL_TOL};
use crate::mcsim::{ecdf_distance_lattice, simulate_hitting_time, DEFAULT_STEP_CAP};
use crate::qmoments::{law_constants, QuenchedMomentTable, VarFault, DEFAULT_TRUNC_TOL};
use crate::rng::{derive_seed, Domain};
use serde::{Deserialize, Serialize};

/// Sizes and seeds of the verify matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyPlan {
    pub laws: Vec<EnvDistribution>,
    pub n_envs: usize,
    pub master_seed: u64,
    /// Largest `n` for the martingale identities.
    pub identity_n: u64,
    pub transfer_n: u64,
    pub x_grid: Vec<f64>,
    pub bound_ns: Vec<u64>,
    pub a1: f64,
    /// Hitting levels for the DP-vs-MC comparison.
    pub mc_levels: Vec<i64>,
    pub mc_samples: usize,
    /// DKW confidence parameter `δ` (band at level `1 - δ`).
    pub dkw_delta: f64,
    #[serde(default)]
    pub fault: VarFault,
}

/// `n` points evenly spaced on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl VerifyPlan {
    pub fn full(laws: Vec<EnvDistribution>, master_seed: u64) -> Self {
        VerifyPlan {
            laws,
            n_envs: 10,
            master_seed,
            identity_n: 10_000,
            transfer_n: 2048,
            x_grid: linspace(-3.0, 3.0, 21),
            bound_ns: vec![256, 1024, 4096],
            a1: DEFAULT_A1,
            mc_levels: vec![20, 50],
            mc_samples: 100_000,
            dkw_delta: 0.01,
            fault: VarFault::None,
        }
    }

    /// Every check at `n = 256`, fewer environments and samples.
    pub fn quick(laws: Vec<EnvDistribution>, master_seed: u64) -> Self {
        VerifyPlan {
            n_envs: 2,
            identity_n: 256,
            transfer_n: 256,
            bound_ns: vec![256],
            mc_samples: 10_000,
            ..Self::full(laws, master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.laws.is_empty() {
            return Err(Error::Config("verify needs at least one law".into()));
        }
        if self.n_envs == 0 || self.mc_samples == 0 || self.x_grid.is_empty() {
            return Err(Error::Config("verify sizes must be positive".into()));
        }
        if self.identity_n == 0 || self.transfer_n == 0 || self.bound_ns.contains(&0) {
            return Err(Error::Config("verify sizes must be positive".into()));
        }
        if self.mc_levels.iter().any(|&k| k < 1) {
            return Err(Error::Config("hitting levels must be at least 1".into()));
        }
        for law in &self.laws {
            law.validate()?;
        }
        Ok(())
    }
}

/// Outcome of one check on one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub law: String,
    pub seed: u64,
    pub n: u64,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub plan: VerifyPlan,
    pub outcomes: Vec<CheckOutcome>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }
}

struct Recorder<'a> {
    law: String,
    seed: u64,
    out: &'a mut Vec<CheckOutcome>,
}

impl Recorder<'_> {
    fn push(&mut self, check: &str, n: u64, value: f64, tolerance: f64, passed: bool) {
        self.out.push(CheckOutcome {
            check: check.into(),
            law: self.law.clone(),
            seed: self.seed,
            n,
            value,
            tolerance,
            passed,
            message: None,
        });
    }

    fn fail(&mut self, check: &str, n: u64, err: &Error) {
        self.out.push(CheckOutcome {
            check: check.into(),
            law: self.law.clone(),
            seed: self.seed,
            n,
            value: f64::NAN,
            tolerance: f64::NAN,
            passed: false,
            message: Some(err.to_string()),
        });
    }
}

fn verify_env(plan: &VerifyPlan, dist: &EnvDistribution, seed: u64, out: &mut Vec<CheckOutcome>) -> Result<()> {
    let mut rec = Recorder {
        law: dist.to_string(),
        seed,
        out,
    };
    let right = plan
        .identity_n
        .max(plan.transfer_n)
        .max(plan.bound_ns.iter().copied().max().unwrap_or(1))
        .max(plan.mc_levels.iter().copied().max().unwrap_or(1) as u64) as i64
        + 1;
    let prepared = prepare_environment(dist, seed, right, DEFAULT_TRUNC_TOL)?;
    let (env, trunc) = (&prepared.env, prepared.trunc_left);
    let table = match QuenchedMomentTable::build_with_fault(env, trunc, plan.fault) {
        Ok(t) => {
            rec.push(
                "var_two_route",
                right as u64,
                0.0,
                crate::qmoments::VAR_TWO_ROUTE_TOL,
                true,
            );
            t
        }
        Err(e) => {
            rec.fail("var_two_route", right as u64, &e);
            return Ok(());
        }
    };
    let c = law_constants(dist)?;
    let kappa = dist.solve_kappa(KAPPA_TOL)?;

    let mut grid: Vec<u64> = [1, 16, 256, 1024, plan.identity_n]
        .into_iter()
        .filter(|&n| n <= plan.identity_n)
        .collect();
    grid.dedup();
    let ids = martingale_identity_check(&table, &c, kappa, &grid, 0.1)?;
    for (name, r) in [("identity_m", ids.m), ("identity_l", ids.l), ("identity_h", ids.h)] {
        rec.push(
            name,
            plan.identity_n,
            r.max_relative,
            super::identities::IDENTITY_TOL,
            r.holds(),
        );
    }

    let tr = transfer_check(env, &table, plan.transfer_n, &plan.x_grid, &c)?;
    rec.push(
        "transfer",
        plan.transfer_n,
        tr.max_residual,
        super::transfer::TRANSFER_TOL,
        tr.holds,
    );

    for &n in &plan.bound_ns {
        match berry_esseen_bound_eval(env, &table, n, plan.a1, HORIZON_TAIL_TOL) {
            Ok(b) => rec.push("berry_esseen", n, b.distance - b.bound, b.tail_mass, b.holds),
            Err(e) => rec.fail("berry_esseen", n, &e),
        }
    }

    for &k in &plan.mc_levels {
        let law = hitting_time_law(env, &table, k, 1e-12)?;
        let mc_seed = derive_seed(seed, Domain::HittingSample, k as u64);
        let batch = simulate_hitting_time(env, k, plan.mc_samples, mc_seed, DEFAULT_STEP_CAP)?;
        let d = ecdf_distance_lattice(&batch.samples, &law)?;
        let band = d.dkw_band(plan.dkw_delta);
        rec.push("dp_vs_mc", k as u64, d.distance, band, d.distance <= band);
    }
    Ok(())
}

/// Run the matrix. Errors inside a check become failed outcomes; only
/// configuration errors abort.
pub fn run_verify(plan: &VerifyPlan) -> Result<VerifyReport> {
    plan.validate()?;
    let mut outcomes = Vec::new();
    for (law_index, dist) in plan.laws.iter().enumerate() {
        let law_seed = derive_seed(plan.master_seed, Domain::EnvironmentSite, law_index as u64);
        for rep in 0..plan.n_envs {
            let seed = derive_seed(law_seed, Domain::Replicate, rep as u64);
            let before = outcomes.len();
            if let Err(e) = verify_env(plan, dist, seed, &mut outcomes) {
                if matches!(e, Error::Regime(_) | Error::Parameter(_) | Error::Config(_)) {
                    return Err(e);
                }
                let n = outcomes.get(before..).and_then(|s| s.last()).map_or(0, |o| o.n);
                Recorder {
                    law: dist.to_string(),
                    seed,
                    out: &mut outcomes,
                }
                .fail("environment", n, &e);
            }
        }
    }
    let passed = outcomes.iter().all(|o| o.passed);
    Ok(VerifyReport {
        plan: plan.clone(),
        outcomes,
        passed,
    })
}
