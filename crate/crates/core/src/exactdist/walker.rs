//! Forward propagation of the quenched walk on a finite strip.
//!
//! The strip holds sites `trunc_left ..= barrier - 1`. Site `trunc_left`
//! reflects (it steps right with probability 1) and `barrier` absorbs. At
//! time `t` only sites of one parity carry mass, so each step writes the
//! other parity in place and clears the entries it has consumed. Mass below
//! [`PRUNE_EPS`] at the edges of the live band is dropped and accounted for.

use crate::envmodel::EnvironmentWindow;

/// Edge entries below this are pruned from the live band.
pub const PRUNE_EPS: f64 = 1e-28;

#[derive(Debug, Clone)]
pub(crate) struct StripWalker {
    trunc_left: i64,
    start: i64,
    /// Padded arrays: index `i` is site `trunc_left + i - 1`; entries `0` and
    /// `len - 1` are permanently zero.
    right: Vec<f64>,
    left: Vec<f64>,
    mass: Vec<f64>,
    lo: usize,
    hi: usize,
    time: u64,
    /// Absorbed mass at times `first_absorption + 2j`.
    absorbed: Vec<f64>,
    pruned: f64,
    /// Mass the reflecting site pushed right that the untruncated walk
    /// would have moved left.
    reflected: f64,
    reflect_loss: f64,
}

impl StripWalker {
    /// Walker started at `start`, absorbed on reaching `barrier`.
    pub(crate) fn new(env: &EnvironmentWindow, start: i64, barrier: i64, trunc_left: i64) -> Self {
        debug_assert!(trunc_left <= start && start < barrier);
        let sites = (barrier - trunc_left) as usize;
        let mut right = vec![0.0; sites + 2];
        let mut left = vec![0.0; sites + 2];
        for i in 1..=sites {
            let w = env.omega(trunc_left + i as i64 - 1);
            right[i] = w;
            left[i] = 1.0 - w;
        }
        let reflect_loss = left[1];
        right[1] = 1.0;
        left[1] = 0.0;
        let mut mass = vec![0.0; sites + 2];
        let i0 = (start - trunc_left + 1) as usize;
        mass[i0] = 1.0;
        Self {
            trunc_left,
            start,
            right,
            left,
            mass,
            lo: i0,
            hi: i0,
            time: 0,
            absorbed: Vec::new(),
            pruned: 0.0,
            reflected: 0.0,
            reflect_loss,
        }
    }

    fn barrier_index(&self) -> usize {
        self.mass.len() - 2
    }

    /// One step of the walk.
    pub(crate) fn step(&mut self) {
        let top = self.barrier_index();
        // Entries off the live band are zero, so this is the absorbed flux.
        let flux = self.mass[top] * self.right[top];
        if self.lo == 1 {
            self.reflected += self.mass[1] * self.reflect_loss;
        }
        let ylo = if self.lo > 1 { self.lo - 1 } else { self.lo + 1 };
        let yhi = if self.hi < top { self.hi + 1 } else { self.hi - 1 };
        let (m, r, l) = (&mut self.mass, &self.right, &self.left);
        if ylo <= yhi {
            let mut y = ylo;
            while y <= yhi {
                m[y] = m[y - 1] * r[y - 1] + m[y + 1] * l[y + 1];
                m[y - 1] = 0.0;
                y += 2;
            }
            m[yhi + 1] = 0.0;
        } else {
            // Single live site at the reflecting edge that also borders the
            // barrier: everything is absorbed.
            m[self.lo] = 0.0;
        }
        self.time += 1;
        let first_hit = self.first_absorption();
        if self.time >= first_hit && (self.time - first_hit).is_multiple_of(2) {
            self.absorbed.push(flux);
        }
        if ylo > yhi {
            self.lo = 1;
            self.hi = 1;
            return;
        }
        self.lo = ylo;
        self.hi = yhi;
        self.prune();
    }

    fn prune(&mut self) {
        let m = &mut self.mass;
        while self.lo < self.hi && m[self.lo] < PRUNE_EPS {
            self.pruned += m[self.lo];
            m[self.lo] = 0.0;
            self.lo += 2;
        }
        while self.hi > self.lo && m[self.hi] < PRUNE_EPS {
            self.pruned += m[self.hi];
            m[self.hi] = 0.0;
            self.hi -= 2;
        }
    }

    pub(crate) fn advance_to(&mut self, t: u64) {
        while self.time < t {
            self.step();
        }
    }

    /// Mass still on the strip.
    pub(crate) fn alive(&self) -> f64 {
        let mut s = 0.0;
        let mut i = self.lo;
        while i <= self.hi {
            s += self.mass[i];
            i += 2;
        }
        s
    }

    pub(crate) fn pruned(&self) -> f64 {
        self.pruned
    }

    pub(crate) fn reflected(&self) -> f64 {
        self.reflected
    }

    /// First time absorption is possible.
    pub(crate) fn first_absorption(&self) -> u64 {
        (self.barrier_index() + 1 - (self.start - self.trunc_left + 1) as usize) as u64
    }

    pub(crate) fn absorbed(&self) -> &[f64] {
        &self.absorbed
    }

    /// Live sites and their masses.
    pub(crate) fn occupied(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        (self.lo..=self.hi)
            .step_by(2)
            .map(move |i| (self.trunc_left + i as i64 - 1, self.mass[i]))
    }
}
