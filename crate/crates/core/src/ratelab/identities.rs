//! The three martingales built from the quenched moments, each computed two
//! ways: as sums of centred increments, and through their closed forms in
//! `E_ω[T_n]`, `Var_ω(T_n)` and boundary terms.

use crate::error::{Error, Result};
use crate::qmoments::{LawConstants, QuenchedMomentTable};
use serde::{Deserialize, Serialize};

/// Largest residual accepted between the two routes.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    /// Worst `|a - b| / max(1, Σ|X_k| + |E[X_k | F_{k-1}]|)` over the grid.
    pub max_relative: f64,
    pub at_n: u64,
}

impl IdentityResidual {
    pub fn holds(&self) -> bool {
        self.max_relative <= IDENTITY_TOL
    }
}

/// Running maxima of `|M|`, `|L|`, `|H|` up to `n` and their normalized
/// versions `W*_n / n^{1/(α∧2)+ε}` (α = κ for M, κ/2 for L and H).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationPoint {
    pub n: u64,
    pub m_star: f64,
    pub l_star: f64,
    pub h_star: f64,
    pub m_normalized: f64,
    pub l_normalized: f64,
    pub h_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheckReport {
    pub n_grid: Vec<u64>,
    pub m: IdentityResidual,
    pub l: IdentityResidual,
    pub h: IdentityResidual,
    pub fluctuations: Vec<FluctuationPoint>,
    pub epsilon: f64,
}

impl MartingaleCheckReport {
    pub fn all_hold(&self) -> bool {
        self.m.holds() && self.l.holds() && self.h.holds()
    }
}

fn normalizer(n: u64, alpha: f64, epsilon: f64) -> f64 {
    (n as f64).powf(1.0 / alpha.min(2.0) + epsilon)
}

fn record(res: &mut IdentityResidual, a: f64, b: f64, scale: f64, n: u64) {
    let r = (a - b).abs() / scale.max(1.0);
    if r > res.max_relative || r.is_nan() {
        *res = IdentityResidual {
            max_relative: r,
            at_n: n,
        };
    }
}

/// Compare the two routes for `M`, `L`, `H` at every `n` in `n_grid` and
/// track the normalized running maxima.
pub fn martingale_identity_check(
    table: &QuenchedMomentTable,
    constants: &LawConstants,
    kappa: f64,
    n_grid: &[u64],
    epsilon: f64,
) -> Result<MartingaleCheckReport> {
    let n_max = *n_grid.iter().max().ok_or_else(|| Error::Empty("empty n grid".into()))?;
    if n_max as usize > table.prefix().n_max() {
        return Err(Error::range(format!(
            "n = {n_max} beyond the moment table (prefix up to {})",
            table.prefix().n_max()
        )));
    }
    let LawConstants {
        r1,
        r2,
        inv_speed,
        mu0_sq_mean,
        sigma2,
        ..
    } = *constants;
    let s12 = r1 + r2;
    let (mu, var) = (table.mu(), table.var());
    let (mu_init, var_init) = (mu.at(-1), var.at(-1));
    let init_sq = mu_init * mu_init;

    let mut sums = [Neumaier::default(); 3];
    let mut scales = [0.0f64; 3];
    let mut sq_dev = Neumaier::default();
    let mut stars = [0.0f64; 3];
    let zero = IdentityResidual {
        max_relative: 0.0,
        at_n: 0,
    };
    let mut residuals = [zero; 3];
    let mut fluctuations = Vec::new();

    for k in 0..n_max as i64 {
        let (prev, prev_var) = (mu.at(k - 1), var.at(k - 1));
        let (cur, cur_var) = (mu.at(k), var.at(k));
        let cond_mu = 1.0 + r1 + r1 * prev;
        let cond_var = s12 * (1.0 + prev) * (1.0 + prev) + r1 * prev_var;
        let cond_sq = 1.0 + 2.0 * r1 + r2 + 2.0 * s12 * prev + r2 * prev * prev;
        sums[0].add(cur - cond_mu);
        sums[1].add(cur_var - cond_var);
        sums[2].add(cur * cur - cond_sq);
        scales[0] += cur.abs() + cond_mu.abs();
        scales[1] += cur_var.abs() + cond_var.abs();
        scales[2] += cur * cur + cond_sq.abs();
        sq_dev.add(cur * cur - mu0_sq_mean);
        for (s, v) in stars.iter_mut().zip(&sums) {
            *s = s.max(v.value().abs());
        }

        let n = (k + 1) as u64;
        if !n_grid.contains(&n) {
            continue;
        }
        let nf = n as f64;
        let mean_dev = table.mean_tn(n as usize)? - nf * inv_speed;
        let var_dev = table.var_tn(n as usize)? - sigma2 * nf;
        let s2 = sq_dev.value();
        let last_sq = cur * cur;
        let m_closed = (1.0 - r1) * mean_dev + r1 * (cur - mu_init);
        let h_closed = (1.0 - r2) * s2 - 2.0 * s12 * mean_dev + 2.0 * s12 * (cur - mu_init) + r2 * (last_sq - init_sq);
        let l_closed = (1.0 - r1) * var_dev - s12 * (2.0 * mean_dev + s2)
            + s12 * (2.0 * cur + last_sq - 2.0 * mu_init - init_sq)
            + r1 * (cur_var - var_init);
        record(&mut residuals[0], sums[0].value(), m_closed, scales[0], n);
        record(&mut residuals[1], sums[1].value(), l_closed, scales[1], n);
        record(&mut residuals[2], sums[2].value(), h_closed, scales[2], n);
        fluctuations.push(FluctuationPoint {
            n,
            m_star: stars[0],
            l_star: stars[1],
            h_star: stars[2],
            m_normalized: stars[0] / normalizer(n, kappa, epsilon),
            l_normalized: stars[1] / normalizer(n, kappa / 2.0, epsilon),
            h_normalized: stars[2] / normalizer(n, kappa / 2.0, epsilon),
        });
    }
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    Ok(MartingaleCheckReport {
        n_grid: grid,
        m: residuals[0],
        l: residuals[1],
        h: residuals[2],
        fluctuations,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::{EnvDistribution, EnvironmentWindow};
    use crate::qmoments::law_constants;

    fn check(dist: EnvDistribution, seed: u64) -> MartingaleCheckReport {
        let env = EnvironmentWindow::sample(dist, -256, 4200, seed).unwrap();
        let table = QuenchedMomentTable::build(&env, -128).unwrap();
        let c = law_constants(&dist).unwrap();
        let kappa = dist.solve_kappa(1e-9).unwrap();
        martingale_identity_check(&table, &c, kappa, &[1, 2, 10, 100, 1000, 4096], 0.1).unwrap()
    }

    #[test]
    fn identities_hold_for_beta_laws() {
        for (dist, seed) in [
            (EnvDistribution::Beta { alpha: 5.0, beta: 1.0 }, 1),
            (EnvDistribution::Beta { alpha: 3.2, beta: 1.0 }, 2),
            (
                EnvDistribution::TwoPoint {
                    a: 0.8,
                    b: 0.45,
                    q: 0.7,
                },
                3,
            ),
        ] {
            let r = check(dist, seed);
            assert!(r.all_hold(), "{dist}: {:?} {:?} {:?}", r.m, r.l, r.h);
            assert_eq!(r.fluctuations.len(), 6);
        }
    }

    #[test]
    fn homogeneous_martingales_vanish() {
        let r = check(EnvDistribution::Degenerate { p: 2.0 / 3.0 }, 0);
        let last = r.fluctuations.last().unwrap();
        // Only the reflection transient contributes.
        assert!(
            last.m_star < 1e-12 && last.h_star < 1e-9 && last.l_star < 1e-9,
            "{last:?}"
        );
    }

    #[test]
    fn boundary_term_sign_matters() {
        // Flipping the sign of the boundary term in the closed form of L
        // leaves an O(1) mismatch, which the residual detects.
        let dist = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 };
        let env = EnvironmentWindow::sample(dist, -256, 600, 9).unwrap();
        let table = QuenchedMomentTable::build(&env, -128).unwrap();
        let c = law_constants(&dist).unwrap();
        let s12 = c.r1 + c.r2;
        let (mu, var) = (table.mu(), table.var());
        let n = 500usize;
        let mean_dev = table.mean_tn(n).unwrap() - n as f64 * c.inv_speed;
        let var_dev = table.var_tn(n).unwrap() - c.sigma2 * n as f64;
        let s2: f64 = (0..n as i64).map(|k| mu.at(k).powi(2) - c.mu0_sq_mean).sum();
        let (cur, init) = (mu.at(n as i64 - 1), mu.at(-1));
        let boundary = s12 * (2.0 * cur + cur * cur - 2.0 * init - init * init);
        let rest = (1.0 - c.r1) * var_dev - s12 * (2.0 * mean_dev + s2) + c.r1 * (var.at(n as i64 - 1) - var.at(-1));
        let direct: f64 = (0..n as i64)
            .map(|k| {
                let p = mu.at(k - 1);
                var.at(k) - (s12 * (1.0 + p) * (1.0 + p) + c.r1 * var.at(k - 1))
            })
            .sum();
        assert!((direct - (rest + boundary)).abs() < 1e-8 * direct.abs().max(1.0) * n as f64);
        assert!((direct - (rest - boundary)).abs() > 1e-3);
    }

    #[test]
    fn grid_beyond_table_is_rejected() {
        let dist = EnvDistribution::Beta { alpha: 5.0, beta: 1.0 };
        let env = EnvironmentWindow::sample(dist, -256, 100, 1).unwrap();
        let table = QuenchedMomentTable::build(&env, -128).unwrap();
        let c = law_constants(&dist).unwrap();
        assert!(matches!(
            martingale_identity_check(&table, &c, 5.0, &[50, 5000], 0.1),
            Err(Error::Range(_))
        ));
    }
}
