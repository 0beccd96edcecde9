//! Shape-preserving piecewise-cubic Hermite interpolation.
//!
//! Knots must be non-decreasing; zero-width intervals are tolerated and
//! simply never selected for interior queries. Slopes are either supplied
//! (and then passed through the Fritsch–Carlson limiter so that monotone data
//! stays monotone) or estimated with the Fritsch–Butland harmonic mean.

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    // normalised end slopes m * h / dy of each interval
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl MonotoneCubic {
    /// PCHIP interpolant through `(x, y)`.
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let slopes = pchip_slopes(x, y);
        Self::with_slopes(x, y, &slopes)
    }

    /// Hermite interpolant with given node slopes, limited to preserve
    /// monotonicity on every interval.
    pub fn with_slopes(x: &[f64], y: &[f64], slopes: &[f64]) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len() && y.len() == slopes.len());
        let n = x.len() - 1;
        let mut alpha = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for k in 0..n {
            let h = x[k + 1] - x[k];
            let dy = y[k + 1] - y[k];
            if h <= 0.0 || dy == 0.0 {
                continue;
            }
            let mut a = slopes[k] * h / dy;
            let mut b = slopes[k + 1] * h / dy;
            if !(a > 0.0) {
                a = 0.0;
            }
            if !(b > 0.0) {
                b = 0.0;
            }
            let r2 = a * a + b * b;
            if !r2.is_finite() {
                (a, b) = match (a.is_finite(), b.is_finite()) {
                    (false, false) => (3.0 / 2f64.sqrt(), 3.0 / 2f64.sqrt()),
                    (false, true) => (3.0, 0.0),
                    _ => (0.0, 3.0),
                };
            } else if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                a *= tau;
                b *= tau;
            }
            alpha[k] = a;
            beta[k] = b;
        }
        Self { x: x.to_vec(), y: y.to_vec(), alpha, beta }
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len() - 1;
        // first k with x[k+1] >= t, skipping zero-width intervals
        let k = self.x[1..].partition_point(|&xk| xk < t);
        k.min(n - 1)
    }

    fn eval_in(&self, k: usize, t: f64) -> (f64, f64) {
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let h = x1 - x0;
        if h <= 0.0 {
            return (y0, 0.0);
        }
        let u = ((t - x0) / h).clamp(0.0, 1.0);
        let dy = y1 - y0;
        let (a, b) = (self.alpha[k], self.beta[k]);
        let u2 = u * u;
        let u3 = u2 * u;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let d10 = 3.0 * u2 - 4.0 * u + 1.0;
        let d01 = -6.0 * u2 + 6.0 * u;
        let d11 = 3.0 * u2 - 2.0 * u;
        let value = y0 + dy * (h10 * a + h01 + h11 * b);
        let slope = dy / h * (d10 * a + d01 + d11 * b);
        (value, slope)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_in(self.interval(t), t).0
    }

    pub fn eval_with_slope(&self, t: f64) -> (f64, f64) {
        self.eval_in(self.interval(t), t)
    }

    /// Evaluates at ascending query points with a single forward sweep.
    pub fn eval_sorted(&self, ts: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let n = self.x.len() - 1;
        let mut k = 0;
        for &t in ts {
            while k < n - 1 && self.x[k + 1] < t {
                k += 1;
            }
            out.push(self.eval_in(k, t).0);
        }
    }
}

/// Fritsch–Butland slopes: zero at local extrema, weighted harmonic mean of
/// neighbouring secants elsewhere, shape-preserving three-point ends.
pub fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    if n == 2 {
        let s = (y[1] - y[0]) / (x[1] - x[0]);
        d[0] = s;
        d[1] = s;
        return d;
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1)
        .map(|k| if h[k] > 0.0 { (y[k + 1] - y[k]) / h[k] } else { 0.0 })
        .collect();
    for k in 1..n - 1 {
        let (d0, d1) = (del[k - 1], del[k]);
        if d0 * d1 <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    d[0] = end_slope(h[0], h[1], del[0], del[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    if h0 + h1 <= 0.0 {
        return 0.0;
    }
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_lines() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|&t| 2.0 * t + 1.0).collect();
        let p = MonotoneCubic::new(&x, &y);
        for (&xi, &yi) in x.iter().zip(&y) {
            assert!((p.eval(xi) - yi).abs() < 1e-14);
        }
        assert!((p.eval(0.37) - 1.74).abs() < 1e-14);
        assert!((p.eval_with_slope(0.55).1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_data_stays_monotone() {
        let x = [0.0, 0.1, 0.2, 0.6, 0.61, 1.0];
        let y = [0.0, 0.0, 0.5, 0.51, 0.9, 1.0];
        let p = MonotoneCubic::new(&x, &y);
        let mut prev = -1.0;
        for i in 0..=1000 {
            let v = p.eval(i as f64 / 1000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn limited_slopes_keep_monotone() {
        let x = [0.0, 0.5, 1.0];
        let y = [0.0, 0.1, 1.0];
        let p = MonotoneCubic::with_slopes(&x, &y, &[50.0, 50.0, 0.1]);
        let mut prev = -1.0;
        for i in 0..=1000 {
            let v = p.eval(i as f64 / 1000.0);
            assert!(v >= prev - 1e-15, "{v} < {prev}");
            prev = v;
        }
    }

    #[test]
    fn zero_width_interval_tolerated() {
        let x = [0.0, 0.5, 0.5, 1.0];
        let y = [0.0, 0.4, 0.6, 1.0];
        let p = MonotoneCubic::new(&x, &y);
        assert!(p.eval(0.25) > 0.0 && p.eval(0.25) < 0.4);
        assert!(p.eval(0.75) > 0.6 && p.eval(0.75) < 1.0);
    }

    #[test]
    fn sorted_sweep_matches_pointwise() {
        let x: Vec<f64> = (0..21).map(|i| (i as f64 / 20.0).powi(2)).collect();
        let y: Vec<f64> = x.iter().map(|t| (3.0 * t).sin()).collect();
        let p = MonotoneCubic::new(&x, &y);
        let q: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let mut out = Vec::new();
        p.eval_sorted(&q, &mut out);
        for (t, v) in q.iter().zip(&out) {
            assert_eq!(p.eval(*t), *v);
        }
    }
}
