//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
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
        self.err.total_cmp(&other.err)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫ₐᵇ f` to `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<QuadResult> {
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, err: e });
    let (mut total, mut err) = (v, e);
    let mut evals = 15;
    while !(err <= abs_tol.max(rel_tol * total.abs())) {
        if heap.len() >= MAX_INTERVALS || !err.is_finite() || !total.is_finite() {
            return Err(Error::QuadratureFailure { estimate: total, tolerance: err });
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        evals += 30;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, err: e2 });
    }
    // Re-sum to shed the drift of the running updates.
    let value = heap.iter().map(|p| p.value).sum();
    let abs_err = heap.iter().map(|p| p.err).sum();
    if !f64::is_finite(value) {
        return Err(Error::QuadratureFailure { estimate: value, tolerance: abs_err });
    }
    Ok(QuadResult { value, abs_err, evals })
}

/// `∫ₐ^∞ f` through `x = a + s/(1−s)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64, abs_tol: f64) -> Result<QuadResult> {
    integrate(
        |s| {
            let d = 1.0 - s;
            let v = f(a + s / d) / (d * d);
            if v.is_finite() { v } else { 0.0 }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 0.0).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_half_line() {
        let r = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1e-13, 0.0).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand() {
        let r = integrate(|x| 1.0 / ((x - 0.3).powi(2) + 1e-6), 0.0, 1.0, 1e-12, 0.0).unwrap();
        let exact = 1e3 * ((0.7f64 / 1e-3).atan() + (0.3f64 / 1e-3).atan());
        assert!((r.value / exact - 1.0).abs() < 1e-11);
    }

    #[test]
    fn reports_failure() {
        let r = integrate(|x| 1.0 / x.abs().sqrt().powi(3), -1.0, 1.0, 1e-14, 0.0);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
