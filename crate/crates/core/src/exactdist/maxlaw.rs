//! Law of the running maximum `X_n* = max_{j ≤ n} X_j`.

use super::walker::PRUNE_EPS;
use super::{first_passage_cdf, LatticeCdf, LatticeKind};
use crate::envmodel::EnvironmentWindow;
use crate::error::{Error, Result};
use rayon::prelude::*;

/// `P_ω(X_n* < k)` for `k = 1 ..= k_max`, through `P_ω(X_n* < k) = P_ω(T_k > n)`.
///
/// Atom `m` of the result is `X_n* = m` for `m = 0 .. k_max - 1`, and
/// `cdf[m] = 1 - P_ω(T_{m+1} ≤ n)` taken straight from the hitting-time law.
/// The mass with `X_n* ≥ k_max` is reported as `tail_mass`.
pub fn running_max_cdf(env: &EnvironmentWindow, n: u64, k_max: i64, trunc_left: i64) -> Result<LatticeCdf> {
    if k_max < 1 {
        return Err(Error::param(format!("k_max = {k_max} must be at least 1")));
    }
    let survival: Vec<f64> = (1..=k_max)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            if k as u64 > n {
                return Ok(1.0);
            }
            let law = first_passage_cdf(env, k, n, trunc_left)?;
            Ok(1.0 - law.cdf_at(n as i64))
        })
        .collect::<Result<_>>()?;
    let mut probs = Vec::with_capacity(survival.len());
    let mut prev = 0.0;
    for &s in &survival {
        probs.push(s - prev);
        prev = s;
    }
    let mut law = LatticeCdf::from_probs(LatticeKind::RunningMax, 0, 1, probs, 1.0 - prev)?;
    law.cdf = survival;
    Ok(law)
}

/// The same law by direct propagation of `(running max, depth below it)`,
/// independent of the hitting-time route. Atoms `m = 0 ..= n`.
pub fn running_max_direct(env: &EnvironmentWindow, n: u64, trunc_left: i64) -> Result<LatticeCdf> {
    if trunc_left > 0 {
        return Err(Error::range(format!("truncation site {trunc_left} lies right of 0")));
    }
    if n as i64 > env.right_index() + 1 {
        return Err(Error::range(format!("time {n} reaches past the window")));
    }
    let n_us = n as usize;
    let omega = |x: i64| if x == trunc_left { 1.0 } else { env.omega(x) };
    let mut cur: Vec<Vec<f64>> = vec![Vec::new(); n_us + 2];
    let mut next: Vec<Vec<f64>> = vec![Vec::new(); n_us + 2];
    cur[0].push(1.0);
    let (mut mlo, mut mhi) = (0usize, 0usize);
    let mut pruned = 0.0;
    for _ in 0..n {
        for m in mlo..=mhi {
            let need = cur[m].len() + 1;
            if next[m].len() < need {
                next[m].resize(need, 0.0);
            }
        }
        if next[mhi + 1].is_empty() {
            next[mhi + 1].push(0.0);
        }
        for m in mlo..=mhi {
            let row = std::mem::take(&mut cur[m]);
            for (d, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let w = omega(m as i64 - d as i64);
                if d == 0 {
                    next[m + 1][0] += p * w;
                } else {
                    next[m][d - 1] += p * w;
                }
                if w < 1.0 {
                    next[m][d + 1] += p * (1.0 - w);
                }
            }
            let mut row = row;
            row.iter_mut().for_each(|x| *x = 0.0);
            cur[m] = row;
        }
        std::mem::swap(&mut cur, &mut next);
        mhi += 1;
        for row in &mut cur[mlo..=mhi] {
            while row.len() > 1 && *row.last().unwrap() < PRUNE_EPS {
                pruned += row.pop().unwrap();
            }
        }
        let row_mass = |row: &Vec<f64>| row.iter().sum::<f64>();
        while mlo < mhi && row_mass(&cur[mlo]) < PRUNE_EPS {
            pruned += row_mass(&cur[mlo]);
            cur[mlo].iter_mut().for_each(|x| *x = 0.0);
            mlo += 1;
        }
        while mhi > mlo && row_mass(&cur[mhi]) < PRUNE_EPS {
            pruned += row_mass(&cur[mhi]);
            cur[mhi].iter_mut().for_each(|x| *x = 0.0);
            mhi -= 1;
        }
    }
    let probs: Vec<f64> = (0..=n_us).map(|m| cur[m].iter().sum()).collect();
    LatticeCdf::from_probs(LatticeKind::RunningMax, 0, 1, probs, pruned)
}

/// Law of `X_n*` by brute-force path enumeration; only for tiny `n`.
#[cfg(test)]
pub(crate) fn running_max_enumerated(env: &EnvironmentWindow, n: u32) -> Vec<f64> {
    let mut probs = vec![0.0; n as usize + 1];
    for path in 0u64..(1u64 << n) {
        let (mut x, mut best, mut p) = (0i64, 0i64, 1.0);
        for j in 0..n {
            let w = env.omega(x);
            if path >> j & 1 == 1 {
                p *= w;
                x += 1;
            } else {
                p *= 1.0 - w;
                x -= 1;
            }
            best = best.max(x);
        }
        probs[best as usize] += p;
    }
    probs
}
