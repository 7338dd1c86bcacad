//! Exact quenched laws on a truncated lattice.
//!
//! Hitting times, positions and running maxima are propagated forward on a
//! strip with a reflecting site at `trunc_left`. Everything the propagation
//! drops (mass past the horizon, pruned edge mass) is reported as
//! `tail_mass`, so the Kolmogorov distances computed here carry an explicit
//! error bound.

mod kolmogorov;
mod maxlaw;
mod ruin;
mod walker;

pub use kolmogorov::{
    kolmogorov_distance_t, kolmogorov_distance_x, lattice_sup_distance, write_report_rows, KolmogorovReport,
    Normalization, TScaling,
};
pub use maxlaw::{running_max_cdf, running_max_direct};
pub use ruin::{certify_truncation, ruin_probability, RUIN_CERT_TOL};
pub use walker::PRUNE_EPS;

use crate::envmodel::EnvironmentWindow;
use crate::error::{Error, Result};
use crate::qmoments::{fmt_f64, QuenchedMomentTable};
use serde::{Deserialize, Serialize};
use std::io::Write;
use walker::StripWalker;

/// Default tolerance on the mass a hitting-time law may leave uncaptured.
pub const HORIZON_TAIL_TOL: f64 = 1e-9;
/// Horizon never grows past this many steps.
pub const MAX_HORIZON: u64 = 1 << 32;
/// Negative round-off tolerated before a probability is treated as a bug.
pub const NEGATIVE_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    HittingTime,
    Position,
    RunningMax,
}

/// A law on the lattice `support_offset + span · i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeCdf {
    pub kind: LatticeKind,
    pub support_offset: i64,
    pub span: i64,
    pub probs: Vec<f64>,
    /// `cdf[i] = P(value ≤ support_offset + span · i)`.
    pub cdf: Vec<f64>,
    /// Mass not represented in `probs`: beyond the horizon or pruned.
    pub tail_mass: f64,
    /// For positions: mass turned back by the reflecting site. Zero otherwise.
    pub boundary_mass: f64,
}

impl LatticeCdf {
    fn from_probs(kind: LatticeKind, support_offset: i64, span: i64, probs: Vec<f64>, tail_mass: f64) -> Result<Self> {
        let mut probs = probs;
        clamp_negatives(&mut probs)?;
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            kind,
            support_offset,
            span,
            probs,
            cdf,
            tail_mass,
            boundary_mass: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Lattice value of atom `i`.
    pub fn value(&self, i: usize) -> i64 {
        self.support_offset + self.span * i as i64
    }

    /// Largest represented value.
    pub fn last_value(&self) -> i64 {
        self.value(self.probs.len().saturating_sub(1))
    }

    /// `P(value = v)`; zero off the lattice or outside the represented range.
    pub fn pmf_at(&self, v: i64) -> f64 {
        let d = v - self.support_offset;
        if d < 0 || d % self.span != 0 {
            return 0.0;
        }
        self.probs.get((d / self.span) as usize).copied().unwrap_or(0.0)
    }

    /// `P(value ≤ v)` as far as it is represented.
    pub fn cdf_at(&self, v: i64) -> f64 {
        if v < self.support_offset || self.probs.is_empty() {
            return 0.0;
        }
        let i = ((v - self.support_offset) / self.span) as usize;
        self.cdf[i.min(self.cdf.len() - 1)]
    }

    /// `Σ probs + tail_mass`.
    pub fn total_mass(&self) -> f64 {
        self.cdf.last().copied().unwrap_or(0.0) + self.tail_mass
    }

    /// `Σ v · P(v)` and `Σ v² · P(v)` over the represented atoms.
    pub fn moments(&self) -> (f64, f64) {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            let v = self.value(i) as f64;
            m1 += v * p;
            m2 += v * v * p;
        }
        (m1, m2)
    }

    /// CSV with columns `value, pmf, cdf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["value", "pmf", "cdf"])?;
        for i in 0..self.probs.len() {
            w.write_record(&[self.value(i).to_string(), fmt_f64(self.probs[i]), fmt_f64(self.cdf[i])])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn clamp_negatives(probs: &mut [f64]) -> Result<()> {
    for (i, p) in probs.iter_mut().enumerate() {
        if *p < 0.0 {
            if *p < -NEGATIVE_CLAMP {
                return Err(Error::numeric(format!("probability {p:e} at atom {i}")));
            }
            *p = 0.0;
        }
    }
    Ok(())
}

fn check_target(env: &EnvironmentWindow, start: i64, k: i64, trunc_left: i64) -> Result<()> {
    if k <= start {
        return Err(Error::range(format!("target {k} must lie right of the start {start}")));
    }
    if k > env.right_index() {
        return Err(Error::range(format!(
            "target {k} outside the window ending at {}",
            env.right_index()
        )));
    }
    if trunc_left > start {
        return Err(Error::range(format!(
            "truncation site {trunc_left} lies right of the start {start}"
        )));
    }
    Ok(())
}

fn hitting_law(w: &StripWalker) -> Result<LatticeCdf> {
    let tail = w.alive() + w.pruned();
    LatticeCdf::from_probs(
        LatticeKind::HittingTime,
        w.first_absorption() as i64,
        2,
        w.absorbed().to_vec(),
        tail,
    )
}

/// Law of `T_k` from 0 up to time `t_max`, with absorption at `k` and
/// reflection at `trunc_left`.
pub fn first_passage_cdf(env: &EnvironmentWindow, k: i64, t_max: u64, trunc_left: i64) -> Result<LatticeCdf> {
    check_target(env, 0, k, trunc_left)?;
    if t_max < k as u64 {
        return Err(Error::range(format!("horizon {t_max} shorter than the distance {k}")));
    }
    let mut w = StripWalker::new(env, 0, k, trunc_left);
    w.advance_to(t_max);
    hitting_law(&w)
}

/// Round `t` up to the parity of `k`.
fn parity_up(t: u64, k: u64) -> u64 {
    if (t + k).is_multiple_of(2) {
        t
    } else {
        t + 1
    }
}

/// Run a walker, doubling the horizon from `t0` until the uncaptured mass
/// drops below `tail_tol`.
fn run_until_tail(w: &mut StripWalker, t0: u64, parity: u64, tail_tol: f64) -> Result<()> {
    let mut t = parity_up(t0.max(1), parity);
    loop {
        w.advance_to(t);
        let tail = w.alive() + w.pruned();
        if tail < tail_tol {
            return Ok(());
        }
        if t >= MAX_HORIZON {
            return Err(Error::horizon(format!(
                "uncaptured mass {tail:e} after {t} steps exceeds {tail_tol:e}"
            )));
        }
        t = parity_up(2 * t, parity);
    }
}

/// Law of `T_k` with the horizon chosen automatically: start at
/// `⌈E_ω[T_k] + 12 √Var_ω(T_k)⌉` and double until the uncaptured mass is
/// below `tail_tol`. Truncation follows `table`.
pub fn hitting_time_law(
    env: &EnvironmentWindow,
    table: &QuenchedMomentTable,
    k: i64,
    tail_tol: f64,
) -> Result<LatticeCdf> {
    let trunc_left = table.trunc_left();
    check_target(env, 0, k, trunc_left)?;
    let mean = table.mean_tn(k as usize)?;
    let var = table.var_tn(k as usize)?;
    let t0 = (mean + 12.0 * var.sqrt()).ceil() as u64;
    let mut w = StripWalker::new(env, 0, k, trunc_left);
    run_until_tail(&mut w, t0.max(k as u64), k as u64, tail_tol)?;
    hitting_law(&w)
}

/// Law of the crossing time from `k` to `k + 1`, run until the uncaptured
/// mass is below `tail_tol`. Values are crossing durations (1, 3, 5, ...).
pub fn crossing_time_pmf(env: &EnvironmentWindow, k: i64, trunc_left: i64, tail_tol: f64) -> Result<LatticeCdf> {
    check_target(env, k, k + 1, trunc_left)?;
    let mut w = StripWalker::new(env, k, k + 1, trunc_left);
    run_until_tail(&mut w, 64, 1, tail_tol)?;
    hitting_law(&w)
}

/// `P(τ = 1), P(τ = 3), ...` for the crossing from `k` to `k + 1`, up to
/// duration `t_max`.
pub fn crossing_time_head(env: &EnvironmentWindow, k: i64, trunc_left: i64, t_max: u64) -> Result<LatticeCdf> {
    check_target(env, k, k + 1, trunc_left)?;
    let mut w = StripWalker::new(env, k, k + 1, trunc_left);
    w.advance_to(t_max.max(1));
    hitting_law(&w)
}

/// Exact law of `X_n` started at 0, with the reflecting site at
/// `trunc_left`. `boundary_mass` accumulates the mass the reflection turned
/// back; `tail_mass` is the pruned mass.
pub fn position_pmf(env: &EnvironmentWindow, n: u64, trunc_left: i64) -> Result<LatticeCdf> {
    if trunc_left > 0 {
        return Err(Error::range(format!("truncation site {trunc_left} lies right of 0")));
    }
    // No absorbing barrier within reach: X_n ≤ n.
    let mut w = StripWalker::new(env, 0, n as i64 + 1, trunc_left);
    w.advance_to(n);
    let lowest = (-(n as i64)).max(trunc_left);
    let offset = if (lowest + n as i64) % 2 == 0 {
        lowest
    } else {
        lowest + 1
    };
    let len = ((n as i64 - offset) / 2 + 1) as usize;
    let mut probs = vec![0.0; len];
    for (x, m) in w.occupied() {
        probs[((x - offset) / 2) as usize] = m;
    }
    let mut law = LatticeCdf::from_probs(LatticeKind::Position, offset, 2, probs, w.pruned())?;
    law.boundary_mass = w.reflected();
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::EnvDistribution;

    fn degenerate(p: f64, left: i64, right: i64) -> EnvironmentWindow {
        EnvironmentWindow::sample(EnvDistribution::Degenerate { p }, left, right, 0).unwrap()
    }

    fn beta5(seed: u64, left: i64, right: i64) -> EnvironmentWindow {
        EnvironmentWindow::sample(EnvDistribution::Beta { alpha: 5.0, beta: 1.0 }, left, right, seed).unwrap()
    }

    #[test]
    fn first_steps_by_path_enumeration() {
        let env = beta5(3, -64, 40);
        let law = first_passage_cdf(&env, 1, 3, -64).unwrap();
        let (w0, wm1) = (env.omega(0), env.omega(-1));
        assert_eq!(law.support_offset, 1);
        assert_eq!(law.span, 2);
        assert!((law.probs[0] - w0).abs() < 1e-15);
        assert!((law.probs[1] - (1.0 - w0) * wm1 * w0).abs() < 1e-15);
        let d = first_passage_cdf(&degenerate(2.0 / 3.0, -64, 10), 1, 3, -64).unwrap();
        assert!((d.probs[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.probs[1] - 4.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn conservation_and_moments() {
        let env = beta5(5, -128, 200);
        let table = QuenchedMomentTable::build(&env, -64).unwrap();
        let law = hitting_time_law(&env, &table, 50, 1e-12).unwrap();
        assert!((law.total_mass() - 1.0).abs() < 1e-12);
        assert!(law.tail_mass < 1e-12);
        let (m1, m2) = law.moments();
        let mean = table.mean_tn(50).unwrap();
        let var = table.var_tn(50).unwrap();
        assert!((m1 - mean).abs() < 1e-8 * mean, "{m1} vs {mean}");
        assert!((m2 - m1 * m1 - var).abs() < 1e-7 * var, "{} vs {var}", m2 - m1 * m1);
    }

    #[test]
    fn stochastic_monotonicity_in_target() {
        let env = beta5(9, -64, 100);
        let a = first_passage_cdf(&env, 30, 400, -64).unwrap();
        let b = first_passage_cdf(&env, 31, 400, -64).unwrap();
        for t in 0..=400 {
            assert!(b.cdf_at(t) <= a.cdf_at(t) + 1e-15);
        }
    }

    #[test]
    fn position_small_cases() {
        let env = beta5(2, -64, 10);
        let law = position_pmf(&env, 2, -64).unwrap();
        assert!((law.pmf_at(2) - env.omega(0) * env.omega(1)).abs() < 1e-15);
        assert!((law.pmf_at(-2) - (1.0 - env.omega(0)) * (1.0 - env.omega(-1))).abs() < 1e-15);
        assert_eq!(law.pmf_at(1), 0.0);
        let zero = position_pmf(&env, 0, -64).unwrap();
        assert_eq!(zero.support_offset, 0);
        assert_eq!(zero.probs, vec![1.0]);
    }

    #[test]
    fn position_matches_binomial_for_homogeneous_walk() {
        let p: f64 = 2.0 / 3.0;
        let n = 200u64;
        let env = degenerate(p, -256, 256);
        let law = position_pmf(&env, n, -256).unwrap();
        assert_eq!(law.boundary_mass, 0.0);
        for j in 0..=n {
            let x = 2 * j as i64 - n as i64;
            let ln_binom = statrs::function::factorial::ln_binomial(n, j);
            let exact = (ln_binom + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp();
            assert!((law.pmf_at(x) - exact).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn reflection_is_counted() {
        let env = degenerate(0.6, -3, 10);
        let law = position_pmf(&env, 10, -3).unwrap();
        assert!(law.boundary_mass > 0.0);
        assert!((law.total_mass() - 1.0).abs() < 1e-14);
        assert!(law.pmf_at(-5) == 0.0);
    }

    #[test]
    fn crossing_pmf_matches_catalan_law() {
        // Homogeneous crossing time: P(τ = 2j + 1) = C_j p^{j+1} q^j.
        let p: f64 = 2.0 / 3.0;
        let env = degenerate(p, -128, 10);
        let law = crossing_time_pmf(&env, 0, -128, 1e-14).unwrap();
        let mut catalan = 1.0;
        for j in 0..40usize {
            let exact = catalan * p.powi(j as i32 + 1) * (1.0 - p).powi(j as i32);
            assert!((law.probs[j] - exact).abs() < 1e-14 * exact.max(1e-300) + 1e-18);
            catalan = catalan * 2.0 * (2 * j + 1) as f64 / (j + 2) as f64;
        }
        let third: f64 = law
            .probs
            .iter()
            .enumerate()
            .map(|(i, p)| ((2 * i + 1) as f64).powi(3) * p)
            .sum();
        let table = QuenchedMomentTable::build(&env, -128).unwrap();
        assert!((third - table.m3().at(0)).abs() < 1e-9 * third, "{third}");
        assert!((third - 867.0).abs() < 1e-9 * 867.0);
    }

    #[test]
    fn horizon_errors() {
        let env = beta5(1, -64, 20);
        assert!(matches!(first_passage_cdf(&env, 10, 5, -64), Err(Error::Range(_))));
        assert!(matches!(first_passage_cdf(&env, 30, 100, -64), Err(Error::Range(_))));
        assert!(matches!(first_passage_cdf(&env, 0, 100, -64), Err(Error::Range(_))));
    }

    #[test]
    fn csv_export() {
        let env = degenerate(2.0 / 3.0, -64, 10);
        let law = first_passage_cdf(&env, 1, 3, -64).unwrap();
        let mut buf = Vec::new();
        law.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("value,pmf,cdf\n1,"));
        assert_eq!(text.lines().count(), 3);
    }
}
