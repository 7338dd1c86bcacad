//! TOML configuration for rate experiments.

use crate::envmodel::EnvDistribution;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which normal approximation is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// `(T_n - E_ω T_n) / √Var_ω T_n`.
    Fbar,
    /// `(T_n - E_ω T_n) / (σ √n)`.
    F,
    /// `(X_n - n v + Z_n) / (σ v^{3/2} √n)`.
    G,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Fbar => "fbar",
            Target::F => "f",
            Target::G => "g",
        })
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fbar" => Ok(Target::Fbar),
            "f" => Ok(Target::F),
            "g" => Ok(Target::G),
            other => Err(Error::Config(format!(
                "unknown target {other:?}; expected fbar, f or g"
            ))),
        }
    }
}

/// The `n` grid: an explicit list or a dyadic range string `"128..16384"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NGrid {
    List(Vec<u64>),
    Dyadic(String),
}

/// Parse `"a..b"` into `a, 2a, 4a, ...` up to `b`; both ends must be powers
/// of two apart.
pub fn parse_dyadic_range(s: &str) -> Result<Vec<u64>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("n range {s:?} is not of the form a..b")))?;
    let parse = |t: &str| {
        t.trim()
            .trim_start_matches('=')
            .parse::<u64>()
            .map_err(|e| Error::Config(format!("n range {s:?}: {e}")))
    };
    let (lo, hi) = (parse(a)?, parse(b)?);
    if lo == 0 || hi < lo {
        return Err(Error::Config(format!("n range {s:?} is empty")));
    }
    let mut out = Vec::new();
    let mut n = lo;
    while n <= hi {
        out.push(n);
        n = n
            .checked_mul(2)
            .ok_or_else(|| Error::Config(format!("n range {s:?} overflows")))?;
    }
    if *out.last().unwrap() != hi {
        return Err(Error::Config(format!(
            "n range {s:?}: {hi} is not {lo} times a power of two"
        )));
    }
    Ok(out)
}

impl NGrid {
    /// Sorted, distinct, positive values; at least four of them.
    pub fn values(&self) -> Result<Vec<u64>> {
        let v = match self {
            NGrid::List(v) => v.clone(),
            NGrid::Dyadic(s) => parse_dyadic_range(s)?,
        };
        if v.len() < 4 {
            return Err(Error::Config(format!(
                "n grid needs at least 4 points, got {}",
                v.len()
            )));
        }
        if v[0] == 0 || v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n grid must be positive and strictly increasing".into()));
        }
        Ok(v)
    }
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_epsilon_prime() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub target: Target,
    pub n_grid: NGrid,
    pub n_envs: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_epsilon_prime")]
    pub epsilon_prime: f64,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest uncaptured mass accepted in an exact law.
    pub tail_mass: f64,
    /// Relative table change accepted when doubling the truncation.
    pub trunc: f64,
    /// Accepted band for the median slope in the √n regime.
    pub slope_band: [f64; 2],
    /// Slack added to the theory exponent in envelope checks.
    pub envelope_slack: f64,
    /// Fraction of replicates that must stay within the envelope.
    pub envelope_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tail_mass: 1e-9,
            trunc: 1e-12,
            slope_band: [-0.65, -0.35],
            envelope_slack: 0.1,
            envelope_fraction: 0.8,
        }
    }
}

/// Everything a rate experiment needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentConfig {
    #[serde(rename = "env")]
    pub law: EnvDistribution,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl RateExperimentConfig {
    pub fn new(law: EnvDistribution, target: Target, n_grid: NGrid, n_envs: usize, master_seed: u64) -> Self {
        RateExperimentConfig {
            law,
            experiment: ExperimentSection {
                target,
                n_grid,
                n_envs,
                epsilon: default_epsilon(),
                epsilon_prime: default_epsilon_prime(),
                master_seed,
            },
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RateExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        self.experiment.n_grid.values()?;
        let e = &self.experiment;
        if e.n_envs == 0 {
            return Err(Error::Config("n_envs must be at least 1".into()));
        }
        if !(e.epsilon > 0.0 && e.epsilon < 0.5) || !(e.epsilon_prime > 0.0 && e.epsilon_prime < 0.5) {
            return Err(Error::Config("epsilon and epsilon_prime must lie in (0, 1/2)".into()));
        }
        let t = &self.tolerances;
        let positive = [t.tail_mass, t.trunc, t.envelope_slack];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::Config("tolerances must be positive and finite".into()));
        }
        if !(t.slope_band[0] < t.slope_band[1]) {
            return Err(Error::Config("slope_band must be [lo, hi] with lo < hi".into()));
        }
        if !(t.envelope_fraction > 0.0 && t.envelope_fraction <= 1.0) {
            return Err(Error::Config("envelope_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}
