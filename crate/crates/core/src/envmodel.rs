//! Environment laws, sampled environment windows, and the law-level
//! quantities `r_p = E[ρ₀^p]`, `E[log ρ₀]` and the tail exponent κ.

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_unit};
use crate::rng::{site_stream, Domain, StreamFactory};
use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};
use std::fmt;
use std::str::FromStr;

/// Relative tolerance for quadrature-backed law moments.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Law of a single environment site `ω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum EnvDistribution {
    /// `ω₀ = a` with probability `q`, `b` otherwise.
    TwoPoint {
        a: f64,
        b: f64,
        q: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    #[serde(rename = "uniform")]
    UniformInterval {
        lo: f64,
        hi: f64,
    },
    Degenerate {
        p: f64,
    },
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} = {v} must lie strictly inside (0, 1)")))
    }
}

fn odds(w: f64) -> f64 {
    (1.0 - w) / w
}

impl EnvDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EnvDistribution::TwoPoint { a, b, q } => {
                open_unit("a", a)?;
                open_unit("b", b)?;
                open_unit("q", q)
            }
            EnvDistribution::Beta { alpha, beta } => {
                if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 {
                    Ok(())
                } else {
                    Err(Error::param(format!(
                        "beta law needs positive finite parameters, got alpha={alpha}, beta={beta}"
                    )))
                }
            }
            EnvDistribution::UniformInterval { lo, hi } => {
                open_unit("lo", lo)?;
                open_unit("hi", hi)?;
                if lo < hi {
                    Ok(())
                } else {
                    Err(Error::param(format!("uniform law needs lo < hi, got [{lo}, {hi}]")))
                }
            }
            EnvDistribution::Degenerate { p } => open_unit("p", p),
        }
    }

    /// Draw one `ω` value.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            EnvDistribution::TwoPoint { a, b, q } => {
                if rng.random::<f64>() < q {
                    a
                } else {
                    b
                }
            }
            EnvDistribution::Beta { alpha, beta } => {
                let d = BetaDist::new(alpha, beta).expect("validated beta parameters");
                // Keep draws off the endpoints so that ρ stays finite and positive.
                d.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
            }
            EnvDistribution::UniformInterval { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            EnvDistribution::Degenerate { p } => p,
        }
    }

    /// Essential supremum of `ρ₀`.
    pub fn rho_ess_sup(&self) -> f64 {
        match *self {
            EnvDistribution::TwoPoint { a, b, .. } => odds(a).max(odds(b)),
            EnvDistribution::Beta { .. } => f64::INFINITY,
            EnvDistribution::UniformInterval { lo, .. } => odds(lo),
            EnvDistribution::Degenerate { p } => odds(p),
        }
    }

    /// `r_p = E[ρ₀^p]`, closed form where one exists, quadrature otherwise.
    /// Divergent moments are `+∞`.
    pub fn moment_rp(&self, p: f64) -> f64 {
        if p == 0.0 {
            return 1.0;
        }
        match *self {
            EnvDistribution::TwoPoint { a, b, q } => q * odds(a).powf(p) + (1.0 - q) * odds(b).powf(p),
            EnvDistribution::Beta { alpha, beta } => {
                if p >= alpha {
                    f64::INFINITY
                } else {
                    (ln_gamma(alpha - p) + ln_gamma(beta + p) - ln_gamma(alpha) - ln_gamma(beta)).exp()
                }
            }
            EnvDistribution::UniformInterval { .. } => self.moment_rp_quadrature(p),
            EnvDistribution::Degenerate { p: w } => odds(w).powf(p),
        }
    }

    /// `r_p` by adaptive quadrature against the law's density.
    ///
    /// Only the continuous laws have a density; atoms are summed exactly.
    pub fn moment_rp_quadrature(&self, p: f64) -> f64 {
        match *self {
            EnvDistribution::Beta { alpha, beta } => {
                if p >= alpha {
                    return f64::INFINITY;
                }
                let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
                integrate_unit(
                    |w, v| ((alpha - p - 1.0) * w.ln() + (beta + p - 1.0) * v.ln() - ln_b).exp(),
                    QUAD_REL_TOL * 0.01,
                )
                .value
            }
            EnvDistribution::UniformInterval { lo, hi } => {
                integrate(|w| odds(w).powf(p), lo, hi, QUAD_REL_TOL * 0.01).value / (hi - lo)
            }
            _ => self.moment_rp(p),
        }
    }

    /// `E[log ρ₀]`.
    pub fn log_rho_mean(&self) -> f64 {
        match *self {
            EnvDistribution::TwoPoint { a, b, q } => q * odds(a).ln() + (1.0 - q) * odds(b).ln(),
            EnvDistribution::Beta { alpha, beta } => digamma(beta) - digamma(alpha),
            EnvDistribution::UniformInterval { lo, hi } => {
                // d/dw [-(1-w) ln(1-w) - w ln w] = ln(1-w) - ln w
                let anti = |w: f64| -(1.0 - w) * (1.0 - w).ln() - w * w.ln();
                (anti(hi) - anti(lo)) / (hi - lo)
            }
            EnvDistribution::Degenerate { p } => odds(p).ln(),
        }
    }

    /// `E[log ρ₀]` by quadrature (continuous laws only; atoms summed exactly).
    pub fn log_rho_mean_quadrature(&self) -> f64 {
        match *self {
            EnvDistribution::Beta { alpha, beta } => {
                let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
                integrate_unit(
                    |w, v| {
                        let dens = ((alpha - 1.0) * w.ln() + (beta - 1.0) * v.ln() - ln_b).exp();
                        dens * (v.ln() - w.ln())
                    },
                    QUAD_REL_TOL * 0.01,
                )
                .value
            }
            EnvDistribution::UniformInterval { lo, hi } => {
                integrate(|w| odds(w).ln(), lo, hi, QUAD_REL_TOL * 0.01).value / (hi - lo)
            }
            _ => self.log_rho_mean(),
        }
    }

    /// κ = sup{p > 0 : r_p < 1} by bisection to absolute tolerance `tol`.
    ///
    /// Bracket policy: start at `[tol, 64]`, double the upper end while
    /// `r_upper < 1` up to `p = 512`, then report `+∞`. Laws with
    /// `ess sup ρ₀ < 1` return `+∞` directly.
    pub fn solve_kappa(&self, tol: f64) -> Result<f64> {
        self.validate()?;
        let drift = self.log_rho_mean();
        if drift >= 0.0 {
            return Err(Error::regime(format!(
                "E[log rho_0] = {drift} >= 0: walk is not transient to the right"
            )));
        }
        if self.rho_ess_sup() < 1.0 {
            return Ok(f64::INFINITY);
        }
        let tol = tol.max(1e-15);
        let mut lo = tol;
        if self.moment_rp(lo) >= 1.0 {
            // κ lies below the resolution of the bisection.
            return Ok(lo);
        }
        let mut hi = 64.0;
        while self.moment_rp(hi) < 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 512.0 {
                return Ok(f64::INFINITY);
            }
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.moment_rp(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Full regime report for the law.
    pub fn regime_report(&self, tol: f64) -> Result<RegimeReport> {
        let kappa = self.solve_kappa(tol)?;
        Ok(RegimeReport {
            kappa,
            r1: self.moment_rp(1.0),
            r2: self.moment_rp(2.0),
            log_rho_mean: self.log_rho_mean(),
            tags: classify_regime(kappa),
        })
    }
}

impl fmt::Display for EnvDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            EnvDistribution::TwoPoint { a, b, q } => write!(f, "two_point:{a},{b},{q}"),
            EnvDistribution::Beta { alpha, beta } => write!(f, "beta:{alpha},{beta}"),
            EnvDistribution::UniformInterval { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            EnvDistribution::Degenerate { p } => write!(f, "degenerate:{p}"),
        }
    }
}

/// Shorthand law syntax: `beta:7,1`, `degenerate:0.6667`, `two_point:0.75,0.4,0.9`,
/// `uniform:0.6,0.9`. Fractions such as `2/3` are accepted.
impl FromStr for EnvDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("law `{s}` must look like name:arg,arg")))?;
        let nums = args
            .split(',')
            .map(|a| parse_number(a.trim()))
            .collect::<Result<Vec<f64>>>()?;
        let want = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "law `{name}` takes {k} arguments, got {}",
                    nums.len()
                )))
            }
        };
        let dist = match name.trim().to_ascii_lowercase().as_str() {
            "beta" => {
                want(2)?;
                EnvDistribution::Beta {
                    alpha: nums[0],
                    beta: nums[1],
                }
            }
            "degenerate" => {
                want(1)?;
                EnvDistribution::Degenerate { p: nums[0] }
            }
            "two_point" | "twopoint" => {
                want(3)?;
                EnvDistribution::TwoPoint {
                    a: nums[0],
                    b: nums[1],
                    q: nums[2],
                }
            }
            "uniform" => {
                want(2)?;
                EnvDistribution::UniformInterval {
                    lo: nums[0],
                    hi: nums[1],
                }
            }
            other => return Err(Error::Config(format!("unknown law `{other}`"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let bad = || Error::Config(format!("cannot parse number `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n: f64 = n.trim().parse().map_err(|_| bad())?;
        let d: f64 = d.trim().parse().map_err(|_| bad())?;
        Ok(n / d)
    } else {
        s.parse().map_err(|_| bad())
    }
}

/// Rate-theorem applicability tags derived from κ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeTag {
    /// √n rate for the self-normalized hitting time (κ > 3).
    #[serde(rename = "BETn_fast")]
    BetnFast,
    /// n^{3/2-3/κ} rate for the self-normalized hitting time (2 < κ ≤ 3).
    #[serde(rename = "BETn_slow")]
    BetnSlow,
    /// n^{1/2} rate with deterministic scaling (κ > 4).
    #[serde(rename = "BETnds_fast")]
    BetndsFast,
    /// n^{1-2/κ} rate with deterministic scaling (2 < κ ≤ 4).
    #[serde(rename = "BETnds_slow")]
    BetndsSlow,
    /// Almost-sure n^{1/4-1/(2κ)} rate for the position (κ > 2).
    #[serde(rename = "BEXn_as")]
    BexnAs,
    /// In-probability n^{1/4} rate for the position (κ ≥ 12/5).
    #[serde(rename = "BEXn_ip_fast")]
    BexnIpFast,
    /// In-probability n^{3/2-3/κ} rate for the position (2 < κ < 12/5).
    #[serde(rename = "BEXn_ip_slow")]
    BexnIpSlow,
    /// κ ≤ 2: no rate statement applies.
    #[serde(rename = "none")]
    None,
}

/// Tags per the κ thresholds 2, 12/5, 3 and 4.
pub fn classify_regime(kappa: f64) -> Vec<RegimeTag> {
    if kappa.is_nan() || kappa <= 2.0 {
        return vec![RegimeTag::None];
    }
    let mut tags = Vec::with_capacity(4);
    tags.push(if kappa > 3.0 {
        RegimeTag::BetnFast
    } else {
        RegimeTag::BetnSlow
    });
    tags.push(if kappa > 4.0 {
        RegimeTag::BetndsFast
    } else {
        RegimeTag::BetndsSlow
    });
    tags.push(RegimeTag::BexnAs);
    tags.push(if kappa >= 12.0 / 5.0 {
        RegimeTag::BexnIpFast
    } else {
        RegimeTag::BexnIpSlow
    });
    tags
}

/// κ, the first two odds moments, the log-drift and the applicable tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    #[serde(with = "crate::serde_ext::extended_real")]
    pub kappa: f64,
    pub r1: f64,
    pub r2: f64,
    pub log_rho_mean: f64,
    pub tags: Vec<RegimeTag>,
}

/// A sampled finite slice `{ω_x : left_index ≤ x ≤ right_index}`.
///
/// Site `x` is drawn from its own counter-based stream keyed by
/// `(seed, x)`, so two windows sampled with the same law and seed agree on
/// their overlap and [`EnvironmentWindow::omega`] can evaluate sites outside
/// the cached slice.
#[derive(Debug, Clone)]
pub struct EnvironmentWindow {
    dist: EnvDistribution,
    seed: u64,
    left_index: i64,
    omega: Vec<f64>,
    rho: Vec<f64>,
}

impl EnvironmentWindow {
    /// Sample sites `left..=right`.
    pub fn sample(dist: EnvDistribution, left: i64, right: i64, seed: u64) -> Result<Self> {
        dist.validate()?;
        if left > right {
            return Err(Error::param(format!("empty window [{left}, {right}]")));
        }
        let factory = StreamFactory::new(seed, Domain::EnvironmentSite);
        let omega: Vec<f64> = (left..=right).map(|x| site_value(&dist, &factory, x)).collect();
        let rho = omega.iter().map(|&w| odds(w)).collect();
        Ok(Self {
            dist,
            seed,
            left_index: left,
            omega,
            rho,
        })
    }

    /// Build a window from explicit values; `seed` is recorded for provenance
    /// only and out-of-window lookups fall back to the law.
    pub fn from_values(dist: EnvDistribution, left: i64, values: Vec<f64>, seed: u64) -> Result<Self> {
        dist.validate()?;
        if values.is_empty() {
            return Err(Error::param("empty window"));
        }
        if let Some(w) = values.iter().find(|w| !(**w > 0.0 && **w < 1.0)) {
            return Err(Error::param(format!("site value {w} outside (0, 1)")));
        }
        let rho = values.iter().map(|&w| odds(w)).collect();
        Ok(Self {
            dist,
            seed,
            left_index: left,
            omega: values,
            rho,
        })
    }

    /// Re-sample over a (typically larger) range with the same law and seed.
    pub fn resized(&self, left: i64, right: i64) -> Result<Self> {
        Self::sample(self.dist, left, right, self.seed)
    }

    pub fn dist(&self) -> &EnvDistribution {
        &self.dist
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn left_index(&self) -> i64 {
        self.left_index
    }

    pub fn right_index(&self) -> i64 {
        self.left_index + self.omega.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn contains(&self, x: i64) -> bool {
        x >= self.left_index && x <= self.right_index()
    }

    /// `ω_x`; sites outside the cached window are drawn from their own stream.
    pub fn omega(&self, x: i64) -> f64 {
        if self.contains(x) {
            self.omega[(x - self.left_index) as usize]
        } else {
            site_value(&self.dist, &StreamFactory::new(self.seed, Domain::EnvironmentSite), x)
        }
    }

    /// `ρ_x = (1 - ω_x) / ω_x`.
    pub fn rho(&self, x: i64) -> f64 {
        if self.contains(x) {
            self.rho[(x - self.left_index) as usize]
        } else {
            odds(self.omega(x))
        }
    }

    /// Cached `ω` values, left to right.
    pub fn omegas(&self) -> &[f64] {
        &self.omega
    }

    /// Cached `ρ` values, left to right.
    pub fn rhos(&self) -> &[f64] {
        &self.rho
    }
}

fn site_value(dist: &EnvDistribution, factory: &StreamFactory, x: i64) -> f64 {
    if let EnvDistribution::Degenerate { p } = *dist {
        return p;
    }
    let mut rng = factory.stream(site_stream(x));
    dist.draw(&mut rng)
}

/// The `[env]` table of a TOML config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvSection {
    pub env: EnvDistribution,
}

/// Parse `[env] law = "beta" alpha = 5.0 beta = 1.0` style configs.
pub fn parse_env_toml(text: &str) -> Result<EnvDistribution> {
    let section: EnvSection = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    section.env.validate()?;
    Ok(section.env)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_POINT: EnvDistribution = EnvDistribution::TwoPoint {
        a: 0.75,
        b: 0.4,
        q: 0.9,
    };

    fn degenerate() -> EnvDistribution {
        EnvDistribution::Degenerate { p: 2.0 / 3.0 }
    }

    #[test]
    fn degenerate_window() {
        let w = EnvironmentWindow::sample(degenerate(), -2, 2, 1).unwrap();
        assert_eq!(w.len(), 5);
        for x in -2..=2 {
            assert_eq!(w.omega(x), 2.0 / 3.0);
            assert!((w.rho(x) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_extendable() {
        let d = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 };
        let a = EnvironmentWindow::sample(d, -10, 10, 99).unwrap();
        let b = EnvironmentWindow::sample(d, -10, 10, 99).unwrap();
        assert_eq!(a.omegas(), b.omegas());
        let c = EnvironmentWindow::sample(d, -20, 20, 99).unwrap();
        for x in -10..=10 {
            assert_eq!(a.omega(x).to_bits(), c.omega(x).to_bits());
        }
        // lazy lookups outside the window agree with a wider sample
        assert_eq!(a.omega(17).to_bits(), c.omega(17).to_bits());
        let other = EnvironmentWindow::sample(d, -10, 10, 100).unwrap();
        assert_ne!(a.omegas(), other.omegas());
    }

    #[test]
    fn two_point_site_frequency() {
        let n = 1_000_000;
        let w = EnvironmentWindow::sample(TWO_POINT, 0, n - 1, 5).unwrap();
        let frac = w.omegas().iter().filter(|&&x| x == 0.75).count() as f64 / n as f64;
        let band = 4.0 * (0.09f64 / n as f64).sqrt();
        assert!((frac - 0.9).abs() <= band, "frac = {frac}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        for d in [
            EnvDistribution::Degenerate { p: 1.0 },
            EnvDistribution::Degenerate { p: 0.0 },
            EnvDistribution::UniformInterval { lo: 0.7, hi: 0.6 },
            EnvDistribution::TwoPoint { a: 0.5, b: 0.5, q: 1.0 },
            EnvDistribution::Beta { alpha: -1.0, beta: 1.0 },
        ] {
            assert!(matches!(
                EnvironmentWindow::sample(d, 0, 1, 0),
                Err(Error::Parameter(_))
            ));
        }
        assert!(EnvironmentWindow::sample(degenerate(), 3, 2, 0).is_err());
    }

    #[test]
    fn moment_examples() {
        assert!((degenerate().moment_rp(1.0) - 0.5).abs() < 1e-15);
        let b = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 };
        assert!((b.moment_rp(1.0) - 0.25).abs() < 1e-13);
        assert!((b.moment_rp(2.0) - 1.0 / 6.0).abs() < 1e-13);
        assert_eq!(b.moment_rp(5.0), f64::INFINITY);
        for d in [
            degenerate(),
            b,
            TWO_POINT,
            EnvDistribution::UniformInterval { lo: 0.55, hi: 0.9 },
        ] {
            assert_eq!(d.moment_rp(0.0), 1.0);
        }
    }

    #[test]
    fn beta_moment_quadrature_agrees_with_closed_form() {
        for (alpha, beta) in [(5.0, 1.0), (3.2, 1.0), (2.5, 1.7)] {
            let d = EnvDistribution::Beta { alpha, beta };
            for p in [0.3, 1.0, 1.5, alpha - 0.6] {
                let exact = d.moment_rp(p);
                let quad = d.moment_rp_quadrature(p);
                assert!(
                    ((exact - quad) / exact).abs() < 1e-8,
                    "a={alpha} b={beta} p={p}: {exact} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn log_rho_examples() {
        assert!((degenerate().log_rho_mean() - 0.5f64.ln()).abs() < 1e-15);
        let expect = 0.9 * (1.0f64 / 3.0).ln() + 0.1 * 1.5f64.ln();
        assert!((TWO_POINT.log_rho_mean() - expect).abs() < 1e-14);
        assert!((TWO_POINT.log_rho_mean() + 0.948).abs() < 1e-3);
        let b = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 };
        assert!((b.log_rho_mean() + 25.0 / 12.0).abs() < 1e-10);
        assert!((b.log_rho_mean_quadrature() + 25.0 / 12.0).abs() < 1e-9);
        let u = EnvDistribution::UniformInterval { lo: 0.55, hi: 0.9 };
        assert!((u.log_rho_mean() - u.log_rho_mean_quadrature()).abs() < 1e-10);
    }

    #[test]
    fn kappa_examples() {
        let k5 = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 }
            .solve_kappa(1e-9)
            .unwrap();
        assert!((k5 - 4.0).abs() < 1e-8, "{k5}");
        let k6 = EnvDistribution::Beta { alpha: 6.0, beta: 1.0 }
            .solve_kappa(1e-9)
            .unwrap();
        assert!((k6 - 5.0).abs() < 1e-8);
        assert_eq!(degenerate().solve_kappa(1e-9).unwrap(), f64::INFINITY);
        let kt = TWO_POINT.solve_kappa(1e-9).unwrap();
        assert!(kt > 5.6 && kt < 5.7, "{kt}");
        let err = EnvDistribution::Degenerate { p: 0.4 }.solve_kappa(1e-9).unwrap_err();
        assert!(matches!(err, Error::Regime(_)));
    }

    #[test]
    fn regime_tags() {
        use RegimeTag::*;
        assert_eq!(classify_regime(6.0), vec![BetnFast, BetndsFast, BexnAs, BexnIpFast]);
        assert_eq!(classify_regime(2.2), vec![BetnSlow, BetndsSlow, BexnAs, BexnIpSlow]);
        assert_eq!(classify_regime(2.0), vec![None]);
        assert_eq!(
            classify_regime(f64::INFINITY),
            vec![BetnFast, BetndsFast, BexnAs, BexnIpFast]
        );
        assert_eq!(classify_regime(2.4)[3], BexnIpFast);
        assert_eq!(classify_regime(3.0)[0], BetnSlow);
        assert_eq!(classify_regime(4.0)[1], BetndsSlow);
    }

    #[test]
    fn report_serializes_infinite_kappa() {
        let r = degenerate().regime_report(1e-9).unwrap();
        let js = serde_json::to_value(&r).unwrap();
        assert_eq!(js["kappa"], "inf");
        let back: RegimeReport = serde_json::from_value(js).unwrap();
        assert_eq!(back.kappa, f64::INFINITY);
    }

    #[test]
    fn law_shorthand_and_toml() {
        let d: EnvDistribution = "beta:7,1".parse().unwrap();
        assert_eq!(d, EnvDistribution::Beta { alpha: 7.0, beta: 1.0 });
        let d: EnvDistribution = "degenerate:2/3".parse().unwrap();
        assert_eq!(d, degenerate());
        assert!("beta:7".parse::<EnvDistribution>().is_err());
        assert!("gamma:1,2".parse::<EnvDistribution>().is_err());
        let t = parse_env_toml("[env]\nlaw = \"beta\"\nalpha = 5.0\nbeta = 1.0\n").unwrap();
        assert_eq!(t, EnvDistribution::Beta { alpha: 5.0, beta: 1.0 });
        let t = parse_env_toml("[env]\nlaw = \"two_point\"\na = 0.75\nb = 0.4\nq = 0.9\n").unwrap();
        assert_eq!(t, TWO_POINT);
    }
}
