//! Quenched moments of crossing times.
//!
//! For the crossing time `τ` from `k` to `k + 1` in the environment seen
//! from `k`, the per-site moments satisfy the first-step recursions
//!
//! ```text
//! μ_k  = 1 + ρ_k + ρ_k μ_{k-1}
//! m2_k = (1+ρ)(1+2ρ) + 4ρ(1+ρ) μ_{k-1} + 2ρ² μ_{k-1}² + ρ m2_{k-1}
//! m3_k = 1 + ρ Σ_{k1,k2<3, k1+k2≤3} (3; k1,k2) E_{k-1}[τ^{k1}] E_k[τ^{k2}] + ρ m3_{k-1}
//! V_k  = ρ(1+ρ)(1 + μ_{k-1})² + ρ V_{k-1}
//! ```
//!
//! (with `ρ = ρ_k`). The left tail of the environment is cut by a reflecting
//! site at `trunc_left`, where the crossing time is exactly 1: `μ = m2 = m3 = 1`
//! and `V = 0`. Enlarging the truncation distance can only increase the
//! moments, and the change decays like the running product of `ρ`.

use crate::envmodel::{EnvDistribution, EnvironmentWindow};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Smallest truncation distance handed out by [`truncation_control`].
pub const MIN_TRUNCATION: i64 = 64;
/// Default truncation tolerance.
pub const DEFAULT_TRUNC_TOL: f64 = 1e-12;
/// Relative agreement required between the two routes to `V_k`.
pub const VAR_TWO_ROUTE_TOL: f64 = 1e-10;
const MAX_TRUNCATION: i64 = 1 << 22;

/// Values indexed by consecutive sites `first, first + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSeries {
    first: i64,
    values: Vec<f64>,
}

impl SiteSeries {
    pub fn new(first: i64, values: Vec<f64>) -> Self {
        Self { first, values }
    }

    pub fn first(&self) -> i64 {
        self.first
    }

    pub fn last(&self) -> i64 {
        self.first + self.values.len() as i64 - 1
    }

    pub fn get(&self, k: i64) -> Option<f64> {
        if k < self.first {
            return None;
        }
        self.values.get((k - self.first) as usize).copied()
    }

    /// Value at `k`; panics when `k` is outside the series.
    pub fn at(&self, k: i64) -> f64 {
        self.get(k)
            .unwrap_or_else(|| panic!("site {k} outside [{}, {}]", self.first, self.last()))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_range(env: &EnvironmentWindow, trunc_left: i64) -> Result<()> {
    if trunc_left > env.right_index() {
        return Err(Error::range(format!(
            "truncation site {trunc_left} lies right of the window end {}",
            env.right_index()
        )));
    }
    Ok(())
}

fn check_series(name: &str, s: &SiteSeries, trunc_left: i64, right: i64) -> Result<()> {
    if s.first() != trunc_left || s.last() < right {
        return Err(Error::range(format!(
            "{name} covers [{}, {}], need [{trunc_left}, {right}]",
            s.first(),
            s.last()
        )));
    }
    Ok(())
}

/// `μ_k` for `k = trunc_left ..= env.right_index()`.
///
/// Sites left of the cached window are drawn lazily from the environment's
/// per-site streams.
pub fn mu_table(env: &EnvironmentWindow, trunc_left: i64) -> Result<SiteSeries> {
    check_range(env, trunc_left)?;
    let right = env.right_index();
    let mut mu = Vec::with_capacity((right - trunc_left + 1) as usize);
    mu.push(1.0);
    for k in trunc_left + 1..=right {
        let r = env.rho(k);
        let prev = *mu.last().unwrap();
        mu.push(1.0 + r + r * prev);
    }
    Ok(SiteSeries::new(trunc_left, mu))
}

/// `E_{θ^kω}[τ₁²]` from the μ table.
pub fn m2_table(env: &EnvironmentWindow, trunc_left: i64, mu: &SiteSeries) -> Result<SiteSeries> {
    check_range(env, trunc_left)?;
    let right = env.right_index();
    check_series("mu", mu, trunc_left, right)?;
    let mut m2 = Vec::with_capacity(mu.len());
    m2.push(1.0);
    for k in trunc_left + 1..=right {
        let r = env.rho(k);
        let a1 = mu.at(k - 1);
        let a2 = *m2.last().unwrap();
        m2.push((1.0 + r) * (1.0 + 2.0 * r) + 4.0 * r * (1.0 + r) * a1 + 2.0 * r * r * a1 * a1 + r * a2);
    }
    Ok(SiteSeries::new(trunc_left, m2))
}

/// The inhomogeneous part of the third-moment recursion at site `k`:
/// everything except `ρ_k · m3_{k-1}`.
///
/// `a1, a2` are the first two moments one site to the left, `b1, b2` the
/// first two moments at `k` itself.
pub fn third_moment_source(r: f64, a1: f64, a2: f64, b1: f64, b2: f64) -> f64 {
    // multinomial(3; k1, k2, 3-k1-k2) over 0 <= k1, k2 < 3, k1 + k2 <= 3
    let sum = 1.0                // (0,0)
        + 3.0 * a1               // (1,0)
        + 3.0 * b1               // (0,1)
        + 3.0 * a2               // (2,0)
        + 3.0 * b2               // (0,2)
        + 6.0 * a1 * b1          // (1,1)
        + 3.0 * a2 * b1          // (2,1)
        + 3.0 * a1 * b2; // (1,2)
    1.0 + r * sum
}

/// `E_{θ^kω}[τ₁³]` from the μ and m2 tables.
pub fn m3_table(env: &EnvironmentWindow, trunc_left: i64, mu: &SiteSeries, m2: &SiteSeries) -> Result<SiteSeries> {
    check_range(env, trunc_left)?;
    let right = env.right_index();
    check_series("mu", mu, trunc_left, right)?;
    check_series("m2", m2, trunc_left, right)?;
    let mut m3 = Vec::with_capacity(mu.len());
    m3.push(1.0);
    for k in trunc_left + 1..=right {
        let r = env.rho(k);
        let src = third_moment_source(r, mu.at(k - 1), m2.at(k - 1), mu.at(k), m2.at(k));
        let prev = *m3.last().unwrap();
        m3.push(src + r * prev);
    }
    Ok(SiteSeries::new(trunc_left, m3))
}

/// Fault switch for the variance recursion, used to prove that the
/// two-route check catches a corrupted route.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarFault {
    #[default]
    None,
    /// Flip the sign of the `ρ_k V_{k-1}` term.
    FlipCarrySign,
}

/// `V_k` by the variance recursion alone.
pub fn var_recursion(env: &EnvironmentWindow, trunc_left: i64, mu: &SiteSeries, fault: VarFault) -> Result<SiteSeries> {
    check_range(env, trunc_left)?;
    let right = env.right_index();
    check_series("mu", mu, trunc_left, right)?;
    let carry = match fault {
        VarFault::None => 1.0,
        VarFault::FlipCarrySign => -1.0,
    };
    let mut v = Vec::with_capacity(mu.len());
    v.push(0.0);
    for k in trunc_left + 1..=right {
        let r = env.rho(k);
        let a = 1.0 + mu.at(k - 1);
        let prev = *v.last().unwrap();
        v.push(r * (1.0 + r) * a * a + carry * r * prev);
    }
    Ok(SiteSeries::new(trunc_left, v))
}

/// Largest disagreement `|V_rec - (m2 - μ²)| / m2`, relative to the
/// operands of the subtraction (`m2 ≥ V` always).
pub fn var_two_route_residual(mu: &SiteSeries, m2: &SiteSeries, var: &SiteSeries) -> (f64, i64) {
    let mut worst = (0.0, mu.first());
    for k in mu.first()..=mu.last() {
        let sub = m2.at(k) - mu.at(k) * mu.at(k);
        let rec = var.at(k);
        // Near-deterministic sites have V ≪ m2, where the subtraction keeps
        // only about ε·m2 absolute accuracy.
        let scale = m2.at(k).abs().max(rec.abs()).max(f64::MIN_POSITIVE);
        let rel = (rec - sub).abs() / scale;
        if rel > worst.0 {
            worst = (rel, k);
        }
    }
    worst
}

/// `V_k` by the recursion, cross-checked against `m2_k - μ_k²` at every site.
pub fn var_table(env: &EnvironmentWindow, trunc_left: i64, mu: &SiteSeries, m2: &SiteSeries) -> Result<SiteSeries> {
    var_table_with_fault(env, trunc_left, mu, m2, VarFault::None)
}

pub fn var_table_with_fault(
    env: &EnvironmentWindow,
    trunc_left: i64,
    mu: &SiteSeries,
    m2: &SiteSeries,
    fault: VarFault,
) -> Result<SiteSeries> {
    let var = var_recursion(env, trunc_left, mu, fault)?;
    check_series("m2", m2, trunc_left, env.right_index())?;
    let (worst, at) = var_two_route_residual(mu, m2, &var);
    if worst > VAR_TWO_ROUTE_TOL {
        return Err(Error::numeric(format!(
            "variance routes disagree at site {at}: relative residual {worst:e}"
        )));
    }
    Ok(var)
}

/// `E_ω[T_n]` and `Var_ω(T_n)` for `n = 0 ..= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSums {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl PrefixSums {
    pub fn n_max(&self) -> usize {
        self.mean.len() - 1
    }
}

fn running_sum(values: impl Iterator<Item = f64>, n_max: usize) -> Vec<f64> {
    // Neumaier-compensated running sum.
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(0.0);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in values.take(n_max) {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        out.push(sum + comp);
    }
    out
}

/// Cumulative sums `Σ_{k=0}^{n-1} μ_k` and `Σ_{k=0}^{n-1} V_k`.
pub fn prefix_sums(mu: &SiteSeries, var: &SiteSeries, n_max: usize) -> Result<PrefixSums> {
    let need = n_max as i64 - 1;
    for (name, s) in [("mu", mu), ("var", var)] {
        if n_max > 0 && (s.first() > 0 || s.last() < need) {
            return Err(Error::range(format!(
                "{name} covers [{}, {}], prefix sums up to n = {n_max} need [0, {need}]",
                s.first(),
                s.last()
            )));
        }
    }
    Ok(PrefixSums {
        mean: running_sum((0..n_max as i64).map(|k| mu.at(k)), n_max),
        var: running_sum((0..n_max as i64).map(|k| var.at(k)), n_max),
    })
}

/// All per-site tables for one environment plus their prefix sums.
#[derive(Debug, Clone)]
pub struct QuenchedMomentTable {
    seed: u64,
    trunc_left: i64,
    mu: SiteSeries,
    m2: SiteSeries,
    m3: SiteSeries,
    var: SiteSeries,
    prefix: PrefixSums,
    trunc_error_bound: f64,
}

impl QuenchedMomentTable {
    /// Build every table on `[trunc_left, env.right_index()]`, prefix sums
    /// up to `n = env.right_index() + 1`, and a truncation error bound from
    /// a recomputation with the truncation distance doubled.
    pub fn build(env: &EnvironmentWindow, trunc_left: i64) -> Result<Self> {
        Self::build_with_fault(env, trunc_left, VarFault::None)
    }

    pub fn build_with_fault(env: &EnvironmentWindow, trunc_left: i64, fault: VarFault) -> Result<Self> {
        if trunc_left > -1 {
            return Err(Error::range(format!(
                "truncation site {trunc_left} must lie left of site 0"
            )));
        }
        let (mu, m2, m3, var) = Self::tables(env, trunc_left, fault)?;
        let doubled = 2 * trunc_left;
        let (mu2, m22, m32, var2) = Self::tables(env, doubled, VarFault::None)?;
        let mut change: f64 = 0.0;
        for k in -1..=env.right_index() {
            for (a, b) in [(&mu, &mu2), (&m2, &m22), (&m3, &m32), (&var, &var2)] {
                change = change.max((a.at(k) - b.at(k)).abs());
            }
        }
        let n_max = (env.right_index() + 1).max(0) as usize;
        let prefix = prefix_sums(&mu, &var, n_max)?;
        Ok(Self {
            seed: env.seed(),
            trunc_left,
            mu,
            m2,
            m3,
            var,
            prefix,
            // Strictly above the observed change, with a floor at rounding level.
            trunc_error_bound: 2.0 * change + f64::MIN_POSITIVE,
        })
    }

    fn tables(
        env: &EnvironmentWindow,
        trunc_left: i64,
        fault: VarFault,
    ) -> Result<(SiteSeries, SiteSeries, SiteSeries, SiteSeries)> {
        let mu = mu_table(env, trunc_left)?;
        let m2 = m2_table(env, trunc_left, &mu)?;
        let m3 = m3_table(env, trunc_left, &mu, &m2)?;
        let var = var_table_with_fault(env, trunc_left, &mu, &m2, fault)?;
        Ok((mu, m2, m3, var))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trunc_left(&self) -> i64 {
        self.trunc_left
    }

    pub fn right(&self) -> i64 {
        self.mu.last()
    }

    pub fn mu(&self) -> &SiteSeries {
        &self.mu
    }

    pub fn m2(&self) -> &SiteSeries {
        &self.m2
    }

    pub fn m3(&self) -> &SiteSeries {
        &self.m3
    }

    pub fn var(&self) -> &SiteSeries {
        &self.var
    }

    pub fn prefix(&self) -> &PrefixSums {
        &self.prefix
    }

    pub fn trunc_error_bound(&self) -> f64 {
        self.trunc_error_bound
    }

    /// `E_ω[T_n]`.
    pub fn mean_tn(&self, n: usize) -> Result<f64> {
        self.prefix
            .mean
            .get(n)
            .copied()
            .ok_or_else(|| Error::range(format!("n = {n} beyond prefix range {}", self.prefix.n_max())))
    }

    /// `Var_ω(T_n)`.
    pub fn var_tn(&self, n: usize) -> Result<f64> {
        self.prefix
            .var
            .get(n)
            .copied()
            .ok_or_else(|| Error::range(format!("n = {n} beyond prefix range {}", self.prefix.n_max())))
    }

    /// CSV with columns `k, mu, m2, m3, var`.
    pub fn write_table_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "mu", "m2", "m3", "var"])?;
        for k in self.mu.first()..=self.mu.last() {
            w.write_record(&[
                k.to_string(),
                fmt_f64(self.mu.at(k)),
                fmt_f64(self.m2.at(k)),
                fmt_f64(self.m3.at(k)),
                fmt_f64(self.var.at(k)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `n, mean_Tn, var_Tn, Zn`; `Zn` is empty where
    /// `⌊n v⌋` falls outside the prefix range.
    pub fn write_prefix_csv<W: Write>(&self, out: W, speed: f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "mean_Tn", "var_Tn", "Zn"])?;
        for n in 0..=self.prefix.n_max() {
            let zn = centering_zn(self, n as u64, speed).map(fmt_f64).unwrap_or_default();
            w.write_record(&[
                n.to_string(),
                fmt_f64(self.prefix.mean[n]),
                fmt_f64(self.prefix.var[n]),
                zn,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

/// `⌊n v⌋`, guarded against `n · v` landing one ulp below an integer.
pub fn floor_nv(n: u64, speed: f64) -> u64 {
    let x = n as f64 * speed;
    (x * (1.0 + 4.0 * f64::EPSILON)).floor() as u64
}

/// `Z_n(ω) = v (E_ω[T_{⌊nv⌋}] - ⌊nv⌋ / v)`.
pub fn centering_zn(table: &QuenchedMomentTable, n: u64, speed: f64) -> Result<f64> {
    let m = floor_nv(n, speed);
    if m == 0 {
        return Ok(0.0);
    }
    let mean = table.mean_tn(m as usize)?;
    Ok(speed * (mean - m as f64 / speed))
}

/// Law-level constants that follow from `r₁` and `r₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawConstants {
    pub r1: f64,
    pub r2: f64,
    /// Asymptotic speed `v_P = (1 - r₁)/(1 + r₁)`.
    pub speed: f64,
    /// `1/v_P = E[μ₀]`.
    pub inv_speed: f64,
    /// `E[μ₀²]`.
    pub mu0_sq_mean: f64,
    /// `σ² = E[V₀]`.
    pub sigma2: f64,
}

impl LawConstants {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// `Var(μ₀) = E[μ₀²] - E[μ₀]²`.
    pub fn mu0_variance(&self) -> f64 {
        self.mu0_sq_mean - self.inv_speed * self.inv_speed
    }
}

/// Closed forms for `v_P`, `E[μ₀²]` and `σ²`; requires κ > 2.
pub fn law_constants(dist: &EnvDistribution) -> Result<LawConstants> {
    dist.validate()?;
    let r1 = dist.moment_rp(1.0);
    let r2 = dist.moment_rp(2.0);
    if !(r1 < 1.0 && r2 < 1.0) || dist.log_rho_mean() >= 0.0 {
        return Err(Error::regime(format!(
            "law {dist} has r1 = {r1}, r2 = {r2}: kappa <= 2, second moments diverge"
        )));
    }
    let inv_speed = (1.0 + r1) / (1.0 - r1);
    let mu0_sq_mean = (1.0 + 3.0 * r1 + 3.0 * r2 + r1 * r2) / ((1.0 - r1) * (1.0 - r2));
    let sigma2 = 4.0 * (1.0 + r1) * (r1 + r2) / ((1.0 - r2) * (1.0 - r1) * (1.0 - r1));
    Ok(LawConstants {
        r1,
        r2,
        speed: (1.0 - r1) / (1.0 + r1),
        inv_speed,
        mu0_sq_mean,
        sigma2,
    })
}

/// Truncation distance `L` (reflecting site at `-L`) such that doubling it
/// moves every table entry at sites `k ≥ -1` by less than `tol`, relative
/// to `max(1, |entry|)`. Starts at [`MIN_TRUNCATION`] and doubles.
pub fn truncation_control(env: &EnvironmentWindow, dist: &EnvDistribution, tol: f64) -> Result<i64> {
    if dist.log_rho_mean() >= 0.0 {
        return Err(Error::regime(format!("law {dist} is not transient to the right")));
    }
    let mut l = MIN_TRUNCATION;
    let mut current = QuenchedMomentTable::tables(env, -l, VarFault::None)?;
    loop {
        let wider = QuenchedMomentTable::tables(env, -2 * l, VarFault::None)?;
        let mut change: f64 = 0.0;
        for k in -1..=env.right_index() {
            for (a, b) in [
                (&current.0, &wider.0),
                (&current.1, &wider.1),
                (&current.2, &wider.2),
                (&current.3, &wider.3),
            ] {
                let (x, y) = (a.at(k), b.at(k));
                change = change.max((x - y).abs() / y.abs().max(1.0));
            }
        }
        if change < tol || 2 * l > MAX_TRUNCATION {
            return Ok(l);
        }
        l *= 2;
        current = wider;
    }
}
