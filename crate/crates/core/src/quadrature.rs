//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! [`integrate`] refines the worst subinterval until the summed error
//! estimate meets the requested relative tolerance. [`integrate_unit`]
//! handles integrands on `(0, 1)` with integrable endpoint singularities by
//! peeling off dyadic shells `[2^-(j+1), 2^-j]` toward each endpoint until
//! the geometric remainder of the shell contributions is negligible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Piece {
        a,
        b,
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

/// Integrate `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Quadrature {
    const MAX_PIECES: usize = 4000;
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    let mut evaluations = 15;
    while error > rel_tol * value.abs() && error > f64::MIN_POSITIVE && heap.len() < MAX_PIECES {
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Resum to shed the drift of the running updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Quadrature {
        value,
        error,
        evaluations,
    }
}

/// Integrate `f(w, 1 - w)` over `(0, 1)`.
///
/// The integrand receives both `w` and `1 - w` so that points near the upper
/// endpoint keep full relative precision in `1 - w`.
pub fn integrate_unit<F: Fn(f64, f64) -> f64>(f: F, rel_tol: f64) -> Quadrature {
    const MAX_SHELLS: i32 = 1000;
    let local = rel_tol * 0.1;
    let mut total = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;

    // Lower shells [2^-(j+1), 2^-j] and upper shells mirrored through 1/2.
    for upper in [false, true] {
        let mut prev: Option<f64> = None;
        for j in 1..=MAX_SHELLS {
            let hi = 0.5f64.powi(j);
            let lo = 0.5 * hi;
            let q = if upper {
                integrate(|s: f64| f(1.0 - s, s), lo, hi, local)
            } else {
                integrate(|w: f64| f(w, 1.0 - w), lo, hi, local)
            };
            total += q.value;
            error += q.error;
            evaluations += q.evaluations;
            let mag = q.value.abs();
            if let Some(p) = prev {
                let ratio = if p > 0.0 { mag / p } else { 0.0 };
                let remainder = if ratio < 1.0 {
                    mag * ratio / (1.0 - ratio)
                } else {
                    f64::INFINITY
                };
                if remainder <= 0.01 * rel_tol * total.abs() || lo < f64::MIN_POSITIVE * 4.0 {
                    break;
                }
            }
            prev = Some(mag);
        }
    }
    Quadrature {
        value: total,
        error,
        evaluations,
    }
}
