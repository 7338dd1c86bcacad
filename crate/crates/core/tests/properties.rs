//! Randomized invariants across environments, laws and seeds.

use proptest::prelude::*;
use rwre_core::exactdist::{
    first_passage_cdf, hitting_time_law, kolmogorov_distance_t, position_pmf, running_max_cdf, running_max_direct,
    TScaling,
};
use rwre_core::mcsim::{simulate_hitting_time, simulate_position, DEFAULT_STEP_CAP};
use rwre_core::qmoments::{var_two_route_residual, DEFAULT_TRUNC_TOL, VAR_TWO_ROUTE_TOL};
use rwre_core::ratelab::{
    berry_esseen_bound_eval, martingale_identity_check, prepare_environment, rate_experiment, NGrid, DEFAULT_A1,
    IDENTITY_TOL,
};
use rwre_core::{
    classify_regime, law_constants, EnvDistribution, EnvironmentWindow, QuenchedMomentTable, RateExperimentConfig,
    RegimeTag, Target,
};

/// Laws with κ > 2, spanning finite and infinite κ.
fn law() -> impl Strategy<Value = EnvDistribution> {
    prop_oneof![
        (3.6f64..8.0).prop_map(|alpha| EnvDistribution::Beta { alpha, beta: 1.0 }),
        (0.35f64..0.45, 0.75f64..0.9, 0.02f64..0.1).prop_map(|(a, b, q)| EnvDistribution::TwoPoint { a, b, q }),
        (0.55f64..0.7, 0.05f64..0.25).prop_map(|(lo, w)| EnvDistribution::UniformInterval { lo, hi: lo + w }),
        (0.55f64..0.9).prop_map(|p| EnvDistribution::Degenerate { p }),
    ]
}

fn kappa(d: &EnvDistribution) -> f64 {
    d.solve_kappa(1e-9).unwrap()
}

fn fixture(d: &EnvDistribution, seed: u64, right: i64) -> (EnvironmentWindow, QuenchedMomentTable) {
    let p = prepare_environment(d, seed, right, DEFAULT_TRUNC_TOL).unwrap();
    (p.env, p.table)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn moment_curve_is_log_convex(d in law(), p in 0.0f64..2.0, q in 0.0f64..2.0) {
        let (rp, rq, rm) = (d.moment_rp(p), d.moment_rp(q), d.moment_rp((p + q) / 2.0));
        prop_assert!(rm <= (rp * rq).sqrt() * (1.0 + 1e-9), "r_mid={rm} r_p={rp} r_q={rq}");
    }

    #[test]
    fn moment_curve_crosses_one_at_kappa(d in law(), frac in 0.05f64..0.95) {
        prop_assert_eq!(d.moment_rp(0.0), 1.0);
        let k = kappa(&d);
        let inside = if k.is_finite() { frac * k } else { 10.0 * frac };
        prop_assert!(d.moment_rp(inside) < 1.0);
        if k.is_finite() {
            let beyond = k + 0.5 * frac;
            prop_assert!(d.moment_rp(beyond) > 1.0, "r({beyond}) for kappa {k}");
        }
    }

    #[test]
    fn tags_follow_kappa(k in 2.0f64..8.0) {
        let tags = classify_regime(k);
        if k <= 2.0 {
            prop_assert_eq!(tags, vec![RegimeTag::None]);
        } else {
            prop_assert_eq!(tags.contains(&RegimeTag::BetnFast), k > 3.0);
            prop_assert_eq!(tags.contains(&RegimeTag::BetndsFast), k > 4.0);
            prop_assert_eq!(tags.contains(&RegimeTag::BexnIpFast), k >= 2.4);
            prop_assert!(tags.contains(&RegimeTag::BexnAs));
        }
    }

    #[test]
    fn window_extension_agrees_on_overlap(d in law(), seed in any::<u64>()) {
        let small = EnvironmentWindow::sample(d, -10, 10, seed).unwrap();
        let big = EnvironmentWindow::sample(d, -20, 20, seed).unwrap();
        for x in -10..=10 {
            prop_assert_eq!(small.omega(x).to_bits(), big.omega(x).to_bits());
        }
    }

    #[test]
    fn law_constants_are_admissible(d in law()) {
        let c = law_constants(&d).unwrap();
        prop_assert!(c.speed > 0.0 && c.speed < 1.0);
        prop_assert!(c.sigma2 > 0.0);
        prop_assert!(c.mu0_sq_mean >= c.inv_speed * c.inv_speed * (1.0 - 1e-12));
    }

    #[test]
    fn variance_routes_agree(d in law(), seed in any::<u64>()) {
        let (_, table) = fixture(&d, seed, 513);
        let (res, _) = var_two_route_residual(table.mu(), table.m2(), table.var());
        prop_assert!(res <= VAR_TWO_ROUTE_TOL, "residual {res}");
    }

    #[test]
    fn moments_grow_with_the_reflection_depth(d in law(), seed in any::<u64>(), depth in 4i64..64) {
        let env = EnvironmentWindow::sample(d, -2 * depth, 64, seed).unwrap();
        let shallow = QuenchedMomentTable::build(&env, -depth).unwrap();
        let deep = QuenchedMomentTable::build(&env, -2 * depth).unwrap();
        for k in 0..=64 {
            for (a, b) in [
                (shallow.mu().at(k), deep.mu().at(k)),
                (shallow.m2().at(k), deep.m2().at(k)),
                (shallow.m3().at(k), deep.m3().at(k)),
            ] {
                prop_assert!(b >= a * (1.0 - 1e-12), "site {k}: {a} -> {b}");
            }
        }
    }

    #[test]
    fn martingale_identities_hold(d in law(), seed in any::<u64>()) {
        let (_, table) = fixture(&d, seed, 1025);
        let c = law_constants(&d).unwrap();
        let r = martingale_identity_check(&table, &c, kappa(&d), &[1, 7, 64, 333, 1024], 0.1).unwrap();
        for (name, res) in [("M", r.m), ("L", r.l), ("H", r.h)] {
            prop_assert!(res.max_relative <= IDENTITY_TOL, "{name}: {}", res.max_relative);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hitting_laws_conserve_mass_and_match_moments(d in law(), seed in any::<u64>(), k in 1i64..200) {
        let (env, table) = fixture(&d, seed, 257);
        let law = hitting_time_law(&env, &table, k, 1e-9).unwrap();
        let total: f64 = law.probs.iter().sum::<f64>() + law.tail_mass;
        prop_assert!((total - 1.0).abs() <= 1e-12, "mass {total}");
        prop_assert!(law.support_offset >= k && law.span == 2);
        let mean: f64 = law.probs.iter().enumerate().map(|(i, p)| law.value(i) as f64 * p).sum();
        let want = table.mean_tn(k as usize).unwrap();
        // The missing part is E[T; T > horizon] <= sqrt(E[T^2] * tail).
        let second = table.var_tn(k as usize).unwrap() + want * want;
        prop_assert!(mean <= want * (1.0 + 1e-12) + 1e-8, "{mean} vs {want}");
        prop_assert!(want - mean <= (second * law.tail_mass).sqrt() + 1e-8, "{mean} vs {want}");
        let r = kolmogorov_distance_t(&law, &table, k as u64, TScaling::Quenched);
        if let Ok(r) = r {
            prop_assert!((0.0..=1.0).contains(&r.distance));
        }
    }

    #[test]
    fn first_passage_is_stochastically_monotone(d in law(), seed in any::<u64>(), k in 1i64..60) {
        let (env, table) = fixture(&d, seed, 257);
        let t = 400;
        let a = first_passage_cdf(&env, k, t, table.trunc_left()).unwrap();
        let b = first_passage_cdf(&env, k + 1, t, table.trunc_left()).unwrap();
        for s in 0..=t as i64 {
            // cdfs are running sums, so allow the conservation round-off.
            prop_assert!(b.cdf_at(s) <= a.cdf_at(s) + 1e-12, "t = {s}");
        }
    }

    #[test]
    fn position_law_parity_and_support(d in law(), seed in any::<u64>(), n in 0u64..300) {
        let (env, table) = fixture(&d, seed, 301);
        let law = position_pmf(&env, n, table.trunc_left()).unwrap();
        let total: f64 = law.probs.iter().sum::<f64>() + law.tail_mass;
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for (i, &p) in law.probs.iter().enumerate() {
            let x = law.value(i);
            if p > 0.0 {
                prop_assert!(x.unsigned_abs() <= n);
                prop_assert_eq!((x - n as i64).rem_euclid(2), 0);
            }
        }
    }

    #[test]
    fn running_max_routes_agree(d in law(), seed in any::<u64>(), n in 1u64..120) {
        let (env, table) = fixture(&d, seed, 129);
        let via_hitting = running_max_cdf(&env, n, n as i64, table.trunc_left()).unwrap();
        let direct = running_max_direct(&env, n, table.trunc_left()).unwrap();
        for k in 1..=n as i64 {
            let a = via_hitting.cdf[(k - 1) as usize];
            let b = direct.cdf_at(k - 1);
            prop_assert!((a - b).abs() <= 1e-12, "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn simulations_respect_parity_and_bounds(d in law(), seed in any::<u64>(), k in 1i64..40) {
        let (env, _) = fixture(&d, seed, 65);
        let hits = simulate_hitting_time(&env, k, 200, seed ^ 1, DEFAULT_STEP_CAP).unwrap();
        for t in hits.finite() {
            prop_assert!(t >= k && (t - k) % 2 == 0);
        }
        let n = 2 * k as u64;
        let pos = simulate_position(&env, n, 200, seed ^ 2).unwrap();
        for x in pos.finite() {
            prop_assert!(x.unsigned_abs() <= n && (x - n as i64).rem_euclid(2) == 0);
        }
        let again = simulate_hitting_time(&env, k, 200, seed ^ 1, DEFAULT_STEP_CAP).unwrap();
        prop_assert_eq!(hits, again);
    }

    #[test]
    fn berry_esseen_bound_dominates(d in law(), seed in any::<u64>()) {
        let (env, table) = fixture(&d, seed, 257);
        let r = berry_esseen_bound_eval(&env, &table, 256, DEFAULT_A1, 1e-10).unwrap();
        prop_assert!(r.holds, "distance {} bound {} tail {}", r.distance, r.bound, r.tail_mass);
    }

    #[test]
    fn rate_config_round_trips(d in law(), n_envs in 1usize..50, seed in any::<u64>(), t in 0usize..3) {
        let target = [Target::Fbar, Target::F, Target::G][t];
        let cfg = RateExperimentConfig::new(d, target, NGrid::List(vec![64, 128, 256, 512]), n_envs, seed);
        let back = RateExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(cfg, back);
    }
}

fn fast_regime_config(n_envs: usize, seed: u64) -> RateExperimentConfig {
    let law = EnvDistribution::Beta { alpha: 7.0, beta: 1.0 };
    RateExperimentConfig::new(law, Target::Fbar, NGrid::Dyadic("128..=2048".into()), n_envs, seed)
}

#[test]
fn rate_fits_are_seed_deterministic() {
    let a = rate_experiment(&fast_regime_config(6, 42)).unwrap();
    let b = rate_experiment(&fast_regime_config(6, 42)).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    assert_eq!(a.median_slope.to_bits(), b.median_slope.to_bits());
    assert_eq!(a.fits, b.fits);
}

#[test]
fn doubling_replicates_moves_the_median_slope_within_the_iqr() {
    for seed in [1, 2, 3] {
        let base = rate_experiment(&fast_regime_config(10, seed)).unwrap();
        let doubled = rate_experiment(&fast_regime_config(20, seed)).unwrap();
        let moved = (doubled.median_slope - base.median_slope).abs();
        assert!(
            moved <= base.slope_iqr,
            "seed {seed}: moved {moved} with IQR {}",
            base.slope_iqr
        );
    }
}
