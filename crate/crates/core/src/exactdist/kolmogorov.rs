//! Kolmogorov distances between lattice laws and the standard normal.

use super::{LatticeCdf, LatticeKind, HORIZON_TAIL_TOL};
use crate::error::{Error, Result};
use crate::qmoments::{centering_zn, fmt_f64, LawConstants, QuenchedMomentTable};
use crate::stats::normal_cdf;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    QuenchedScaling,
    DeterministicScaling,
    Position,
}

impl Normalization {
    pub fn as_str(&self) -> &'static str {
        match self {
            Normalization::QuenchedScaling => "quenched_scaling",
            Normalization::DeterministicScaling => "deterministic_scaling",
            Normalization::Position => "position",
        }
    }
}

/// Scale used for `T_n - E_ω[T_n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TScaling {
    /// `√Var_ω(T_n)`.
    Quenched,
    /// `σ √n`.
    Deterministic { sigma2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovReport {
    pub n: u64,
    pub distance: f64,
    /// Normalized abscissa where the supremum is attained.
    pub arg_sup: f64,
    pub normalization: Normalization,
    /// The distance is exact up to this much uncaptured mass.
    pub tail_mass_bound: f64,
}

/// `sup_x |F(x) - Φ(x)|` for the law of `(value - center) / scale`.
///
/// Both one-sided limits are evaluated at every atom, and the missing mass
/// beyond the last atom is compared with `Φ(+∞) = 1`. Returns the distance
/// and its normalized location.
pub fn lattice_sup_distance(law: &LatticeCdf, center: f64, scale: f64) -> (f64, f64) {
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut below = 0.0;
    for i in 0..law.len() {
        let z = (law.value(i) as f64 - center) / scale;
        let phi = normal_cdf(z);
        let at = law.cdf[i];
        let d = (below - phi).abs().max((at - phi).abs());
        if d > best.0 {
            best = (d, z);
        }
        below = at;
    }
    let beyond = (1.0 - below).abs();
    if beyond > best.0 {
        best = (beyond, f64::INFINITY);
    }
    best
}

/// Distance of the normalized quenched law of `T_n` from Φ.
pub fn kolmogorov_distance_t(
    law: &LatticeCdf,
    table: &QuenchedMomentTable,
    n: u64,
    scaling: TScaling,
) -> Result<KolmogorovReport> {
    if law.kind != LatticeKind::HittingTime || law.support_offset != n as i64 {
        return Err(Error::param(format!("law is not the hitting-time law of site {n}")));
    }
    if law.tail_mass > HORIZON_TAIL_TOL {
        return Err(Error::horizon(format!(
            "hitting-time law of site {n} leaves {:e} uncaptured; raise the horizon",
            law.tail_mass
        )));
    }
    let mean = table.mean_tn(n as usize)?;
    let (scale, normalization) = match scaling {
        TScaling::Quenched => (table.var_tn(n as usize)?.sqrt(), Normalization::QuenchedScaling),
        TScaling::Deterministic { sigma2 } => ((sigma2 * n as f64).sqrt(), Normalization::DeterministicScaling),
    };
    let (distance, arg_sup) = lattice_sup_distance(law, mean, scale);
    Ok(KolmogorovReport {
        n,
        distance,
        arg_sup,
        normalization,
        tail_mass_bound: law.tail_mass,
    })
}

/// Distance of `(X_n - n v + Z_n(ω)) / (σ v^{3/2} √n)` from Φ.
pub fn kolmogorov_distance_x(
    law: &LatticeCdf,
    table: &QuenchedMomentTable,
    n: u64,
    constants: &LawConstants,
) -> Result<KolmogorovReport> {
    if law.kind != LatticeKind::Position {
        return Err(Error::param("law is not a position law"));
    }
    let contamination = law.boundary_mass + law.tail_mass;
    if contamination > HORIZON_TAIL_TOL {
        return Err(Error::horizon(format!(
            "position law at time {n} has {contamination:e} boundary contamination; move the truncation left"
        )));
    }
    if n == 0 {
        // Point mass at the origin.
        return Ok(KolmogorovReport {
            n,
            distance: 0.5,
            arg_sup: 0.0,
            normalization: Normalization::Position,
            tail_mass_bound: contamination,
        });
    }
    let v = constants.speed;
    let zn = centering_zn(table, n, v)?;
    let center = n as f64 * v - zn;
    let scale = constants.sigma() * v.powf(1.5) * (n as f64).sqrt();
    let (distance, arg_sup) = lattice_sup_distance(law, center, scale);
    Ok(KolmogorovReport {
        n,
        distance,
        arg_sup,
        normalization: Normalization::Position,
        tail_mass_bound: contamination,
    })
}

/// Append rows `seed, n, normalization, distance, arg_sup, tail_mass`.
pub fn write_report_rows<W: Write>(out: W, seed: u64, reports: &[KolmogorovReport], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    if header {
        w.write_record(["seed", "n", "normalization", "distance", "arg_sup", "tail_mass"])?;
    }
    for r in reports {
        w.write_record(&[
            seed.to_string(),
            r.n.to_string(),
            r.normalization.as_str().to_string(),
            fmt_f64(r.distance),
            fmt_f64(r.arg_sup),
            fmt_f64(r.tail_mass_bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envmodel::{EnvDistribution, EnvironmentWindow};
    use crate::exactdist::{hitting_time_law, position_pmf};
    use crate::qmoments::law_constants;

    fn degenerate(left: i64, right: i64) -> EnvironmentWindow {
        EnvironmentWindow::sample(EnvDistribution::Degenerate { p: 2.0 / 3.0 }, left, right, 0).unwrap()
    }

    #[test]
    fn point_mass_distance() {
        let law = LatticeCdf::from_probs(LatticeKind::Position, 0, 2, vec![1.0], 0.0).unwrap();
        let (d, z) = lattice_sup_distance(&law, 0.0, 1.0);
        assert!((d - 0.5).abs() < 1e-15);
        assert_eq!(z, 0.0);
        let (d, _) = lattice_sup_distance(&law, -1.3, 1.0);
        assert!((d - normal_cdf(1.3)).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_scalings_coincide() {
        let env = degenerate(-64, 600);
        let table = QuenchedMomentTable::build(&env, -64).unwrap();
        let law = hitting_time_law(&env, &table, 512, 1e-12).unwrap();
        let q = kolmogorov_distance_t(&law, &table, 512, TScaling::Quenched).unwrap();
        let d = kolmogorov_distance_t(&law, &table, 512, TScaling::Deterministic { sigma2: 24.0 }).unwrap();
        assert!((q.distance - d.distance).abs() < 1e-12);
        assert!((q.arg_sup - d.arg_sup).abs() < 1e-9);
        assert!(q.distance > 0.0 && q.distance < 1.0);
    }

    #[test]
    fn position_distance_matches_binomial_oracle() {
        let p: f64 = 2.0 / 3.0;
        let consts = law_constants(&EnvDistribution::Degenerate { p }).unwrap();
        for n in [100u64, 400] {
            let env = degenerate(-(n as i64) - 8, n as i64 + 8);
            let table = QuenchedMomentTable::build(&env, -(n as i64) - 4).unwrap();
            let law = position_pmf(&env, n, -(n as i64) - 4).unwrap();
            let report = kolmogorov_distance_x(&law, &table, n, &consts).unwrap();
            // Direct sup of Bin(n, p) mapped to 2B - n against Φ.
            let mean = n as f64 * (2.0 * p - 1.0);
            let sd = (4.0 * n as f64 * p * (1.0 - p)).sqrt();
            let mut below = 0.0f64;
            let mut oracle = 0.0f64;
            for j in 0..=n {
                let pj = (statrs::function::factorial::ln_binomial(n, j)
                    + j as f64 * p.ln()
                    + (n - j) as f64 * (1.0 - p).ln())
                .exp();
                let phi = normal_cdf((2.0 * j as f64 - n as f64 - mean) / sd);
                oracle = oracle.max((below - phi).abs()).max((below + pj - phi).abs());
                below += pj;
            }
            assert!((report.distance - oracle).abs() < 1e-10, "n = {n}");
            assert!(report.distance <= 0.8 / (n as f64 * p * (1.0 - p)).sqrt());
        }
    }

    #[test]
    fn time_zero_position() {
        let env = degenerate(-64, 10);
        let table = QuenchedMomentTable::build(&env, -64).unwrap();
        let consts = law_constants(&EnvDistribution::Degenerate { p: 2.0 / 3.0 }).unwrap();
        let law = position_pmf(&env, 0, -64).unwrap();
        let r = kolmogorov_distance_x(&law, &table, 0, &consts).unwrap();
        assert_eq!(r.distance, 0.5);
    }

    #[test]
    fn short_horizon_is_rejected() {
        let env = degenerate(-64, 100);
        let table = QuenchedMomentTable::build(&env, -64).unwrap();
        let law = crate::exactdist::first_passage_cdf(&env, 50, 160, -64).unwrap();
        assert!(matches!(
            kolmogorov_distance_t(&law, &table, 50, TScaling::Quenched),
            Err(Error::Horizon(_))
        ));
    }

    #[test]
    fn report_rows() {
        let r = KolmogorovReport {
            n: 8,
            distance: 0.25,
            arg_sup: -0.5,
            normalization: Normalization::QuenchedScaling,
            tail_mass_bound: 0.0,
        };
        let mut buf = Vec::new();
        write_report_rows(&mut buf, 7, &[r], true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "seed,n,normalization,distance,arg_sup,tail_mass\n7,8,quenched_scaling,2.5e-1,-5e-1,0e0\n"
        );
    }
}
