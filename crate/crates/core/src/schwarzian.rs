//! Schwarzian derivatives, quasi-invariance densities and the inverse
//! Schwarzian problem on `[0, 1]`.

use crate::diffeo::{Diffeo, MobiusDiffeo, Reparam};
use crate::error::{Error, Result};
use crate::grid::{self, Dispersion, GridSpec, Path};
use crate::interp::MonotoneCubic;

/// Grid-backed `C³` map given by its nodal values, first two derivatives and
/// Schwarzian.
#[derive(Debug, Clone)]
pub struct GridMap {
    grid: GridSpec,
    f: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    sch: Vec<f64>,
    forward: MonotoneCubic,
    backward: MonotoneCubic,
    log_d1: MonotoneCubic,
    k: MonotoneCubic,
    sch_interp: MonotoneCubic,
}

impl GridMap {
    /// Builds `f` from `k = f″/f′`: `f′ = e^{∫₀ᵗ k} / Z`, `f = ∫₀ᵗ f′`.
    pub fn from_k(grid: GridSpec, k: Vec<f64>) -> Result<Self> {
        if grid.n_points() < 5 {
            return Err(Error::GridTooSmall(grid.n_points()));
        }
        if k.len() != grid.n_points() {
            return Err(Error::LengthMismatch { expected: grid.n_points(), got: k.len() });
        }
        let dt = grid.dt();
        let mut big_k = Vec::new();
        grid::cumulative_trapezoid(&k, dt, &mut big_k);
        let e: Vec<f64> = big_k.iter().map(|v| v.exp()).collect();
        let mut f = Vec::new();
        grid::cumulative_trapezoid(&e, dt, &mut f);
        let z = f[grid.last()];
        for v in f.iter_mut() {
            *v /= z;
        }
        f[grid.last()] = 1.0;
        let d1: Vec<f64> = e.iter().map(|v| v / z).collect();
        let d2: Vec<f64> = d1.iter().zip(&k).map(|(a, b)| a * b).collect();
        let dk = stencil_derivative(&k, dt);
        let sch: Vec<f64> = dk.iter().zip(&k).map(|(d, k)| d - 0.5 * k * k).collect();
        let ts = grid.times();
        let inv_d1: Vec<f64> = d1.iter().map(|v| 1.0 / v).collect();
        let log_d1: Vec<f64> = d1.iter().map(|v| v.ln()).collect();
        Ok(Self {
            forward: MonotoneCubic::with_slopes(&ts, &f, &d1),
            backward: MonotoneCubic::with_slopes(&f, &ts, &inv_d1),
            log_d1: MonotoneCubic::new(&ts, &log_d1),
            k: MonotoneCubic::new(&ts, &k),
            sch_interp: MonotoneCubic::new(&ts, &sch),
            grid,
            f,
            d1,
            d2,
            sch,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    pub fn d1_values(&self) -> &[f64] {
        &self.d1
    }

    pub fn d2_values(&self) -> &[f64] {
        &self.d2
    }

    /// Nodal Schwarzian from the fourth-order stencil on `f″/f′`.
    pub fn schwarzian_values(&self) -> &[f64] {
        &self.sch
    }
}

/// Centred fourth-order first derivative with one-sided closures.
pub fn stencil_derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    assert!(n >= 5, "stencil needs at least 5 nodes");
    let c = 1.0 / (12.0 * h);
    let mut d = vec![0.0; n];
    d[0] = c * (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]);
    d[1] = c * (-3.0 * y[0] - 10.0 * y[1] + 18.0 * y[2] - 6.0 * y[3] + y[4]);
    for i in 2..n - 2 {
        d[i] = c * (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]);
    }
    let m = n - 1;
    d[m] = c * (25.0 * y[m] - 48.0 * y[m - 1] + 36.0 * y[m - 2] - 16.0 * y[m - 3] + 3.0 * y[m - 4]);
    d[m - 1] = c * (3.0 * y[m] + 10.0 * y[m - 1] - 18.0 * y[m - 2] + 6.0 * y[m - 3] - y[m - 4]);
    d
}

/// Outer maps `g ∈ Diff³₊([0,1])` used for left translations.
#[derive(Debug, Clone)]
pub enum SmoothOuterMap {
    Identity,
    Mobius(MobiusDiffeo),
    /// `(e^{ct} − 1)/(e^c − 1)`, whose Schwarzian is the constant `−c²/2`.
    Exponential { c: f64 },
    Grid(Box<GridMap>),
}

impl SmoothOuterMap {
    pub fn mobius(beta: f64) -> Result<Self> {
        Ok(SmoothOuterMap::Mobius(MobiusDiffeo::new(beta)?))
    }

    pub fn exponential(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::DomainError(format!("exponent must be finite, got {c}")));
        }
        Ok(if c == 0.0 { SmoothOuterMap::Identity } else { SmoothOuterMap::Exponential { c } })
    }

    pub fn is_mobius(&self) -> bool {
        matches!(self, SmoothOuterMap::Identity | SmoothOuterMap::Mobius(_))
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            SmoothOuterMap::Identity => Some(0.0),
            SmoothOuterMap::Mobius(m) => Some(m.beta()),
            _ => None,
        }
    }

    pub fn d1(&self, t: f64) -> f64 {
        match self {
            SmoothOuterMap::Identity => 1.0,
            SmoothOuterMap::Mobius(m) => m.d1(t),
            SmoothOuterMap::Exponential { c } => c * (c * t).exp() / c.exp_m1(),
            SmoothOuterMap::Grid(g) => g.log_d1.eval(t).exp(),
        }
    }

    pub fn d2(&self, t: f64) -> f64 {
        self.k(t) * self.d1(t)
    }

    /// `f″/f′`.
    pub fn k(&self, t: f64) -> f64 {
        match self {
            SmoothOuterMap::Identity => 0.0,
            SmoothOuterMap::Mobius(m) => -2.0 * m.beta() / (m.beta() * t + 1.0),
            SmoothOuterMap::Exponential { c } => *c,
            SmoothOuterMap::Grid(g) => g.k.eval(t),
        }
    }
}

impl Reparam for SmoothOuterMap {
    fn value(&self, t: f64) -> f64 {
        match self {
            SmoothOuterMap::Identity => t,
            SmoothOuterMap::Mobius(m) => m.value(t),
            SmoothOuterMap::Exponential { c } => (c * t).exp_m1() / c.exp_m1(),
            SmoothOuterMap::Grid(g) => g.forward.eval(t),
        }
    }

    fn log_deriv(&self, t: f64) -> f64 {
        match self {
            SmoothOuterMap::Identity => 0.0,
            SmoothOuterMap::Mobius(m) => m.log_deriv(t),
            SmoothOuterMap::Exponential { c } => (c / c.exp_m1()).ln() + c * t,
            SmoothOuterMap::Grid(g) => g.log_d1.eval(t),
        }
    }

    fn inverse(&self, s: f64) -> f64 {
        match self {
            SmoothOuterMap::Identity => s,
            SmoothOuterMap::Mobius(m) => m.inverse(s),
            SmoothOuterMap::Exponential { c } => (s * c.exp_m1()).ln_1p() / c,
            SmoothOuterMap::Grid(g) => g.backward.eval(s),
        }
    }
}

/// `Sch{f, t} = (f″/f′)′ − ½ (f″/f′)²`.
pub fn schwarzian_of(f: &SmoothOuterMap, t: f64) -> f64 {
    match f {
        SmoothOuterMap::Identity => 0.0,
        SmoothOuterMap::Mobius(m) => {
            let b = m.beta();
            let d = b * t + 1.0;
            let k = -2.0 * b / d;
            2.0 * b * b / (d * d) - 0.5 * k * k
        }
        SmoothOuterMap::Exponential { c } => -0.5 * c * c,
        SmoothOuterMap::Grid(g) => g.sch_interp.eval(t),
    }
}

/// Möbius density from endpoint derivatives:
/// `exp{(2β/σ²)(−φ′(0) + φ′(1)/(β+1))}`.
pub fn p_mobius_endpoints(beta: f64, d0: f64, d1: f64, sigma: f64) -> f64 {
    (2.0 * beta / (sigma * sigma) * (-d0 + d1 / (beta + 1.0))).exp()
}

/// Density of the left translate by `g_β` with respect to `μ_σ`.
pub fn p_mobius(beta: f64, phi: &Diffeo, sigma: Dispersion) -> Result<f64> {
    MobiusDiffeo::new(beta)?;
    Ok(p_mobius_endpoints(beta, phi.deriv0(), phi.deriv1(), sigma.get()))
}

/// `ln p_g(φ)` for a general outer map.
pub fn log_radon_nikodym(g: &SmoothOuterMap, phi: &Diffeo, sigma: Dispersion) -> f64 {
    let s2 = sigma.get() * sigma.get();
    let (d0, d1) = (phi.deriv0(), phi.deriv1());
    let mut expo = (g.k(0.0) * d0 - g.k(1.0) * d1) / s2;
    if !g.is_mobius() {
        let w: Vec<f64> = phi
            .phi_values()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let d = phi.deriv_at(i);
                schwarzian_of(g, p) * d * d
            })
            .collect();
        expo += grid::trapezoid(&w, phi.grid().dt()) / s2;
    }
    expo - 0.5 * (g.log_deriv(0.0) + g.log_deriv(1.0))
}

/// `p_g(φ)`, the density of `μ_σ` translated by `g` with respect to `μ_σ`:
/// `E[F(g⁻¹∘φ)] = E[p_g(φ) F(φ)]`.
pub fn radon_nikodym(g: &SmoothOuterMap, phi: &Diffeo, sigma: Dispersion) -> f64 {
    log_radon_nikodym(g, phi, sigma).exp()
}

/// Iteration budget and stopping rule for [`schwarzian_inverse`].
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_BUDGET: usize = 64;

/// Solution of `Sch{f} = v` with the successive sup-norm differences of the
/// fixed-point iterates.
#[derive(Debug, Clone)]
pub struct SchwarzianSolution {
    pub map: SmoothOuterMap,
    pub u: Path,
    pub step_norms: Vec<f64>,
}

impl SchwarzianSolution {
    /// Ratios `‖u_{k+1} − u_k‖ / ‖u_k − u_{k−1}‖`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.step_norms.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn grid_map(&self) -> &GridMap {
        match &self.map {
            SmoothOuterMap::Grid(m) => m,
            _ => unreachable!("solver always returns a grid map"),
        }
    }
}

fn tail_integral(u: &[f64], dt: f64, out: &mut Vec<f64>) {
    let n = u.len();
    out.clear();
    out.resize(n, 0.0);
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + 0.5 * dt * (u[i] + u[i + 1]);
    }
}

/// Solves `Sch{f, ·} = v` for `‖v‖ ≤ 1/4`.
///
/// Iterates `u ↦ v + ½(∫ₜ¹ u)²` from `u = 0`, then sets `f″/f′ = −∫ₜ¹ u`, so
/// `f″(1) = 0` and `|f″(0)/f′(0)| ≤ 1/2`.
pub fn schwarzian_inverse(v: &Path) -> Result<SchwarzianSolution> {
    let norm = v.sup_norm();
    if norm > 0.25 {
        return Err(Error::NormTooLarge(norm));
    }
    let g = v.grid();
    let dt = g.dt();
    let mut u = vec![0.0; g.n_points()];
    let mut tail = Vec::new();
    let mut steps = Vec::new();
    for _ in 0..FIXED_POINT_BUDGET {
        tail_integral(&u, dt, &mut tail);
        let next: Vec<f64> =
            v.values().iter().zip(&tail).map(|(v, s)| v + 0.5 * s * s).collect();
        let step = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        u = next;
        steps.push(step);
        if step <= FIXED_POINT_TOL {
            tail_integral(&u, dt, &mut tail);
            let k: Vec<f64> = tail.iter().map(|s| -s).collect();
            let map = SmoothOuterMap::Grid(Box::new(GridMap::from_k(g, k)?));
            return Ok(SchwarzianSolution { map, u: Path::from_vec_unchecked(g, u), step_norms: steps });
        }
    }
    Err(Error::NoConvergence {
        iterations: FIXED_POINT_BUDGET,
        last_step: *steps.last().unwrap_or(&f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{compose, sample_mu};
    use crate::rng::RngStream;

    fn sigma(s: f64) -> Dispersion {
        Dispersion::new(s).unwrap()
    }

    #[test]
    fn mobius_annihilated() {
        for beta in [-0.5, 0.5, 1.0, 3.0] {
            let g = SmoothOuterMap::mobius(beta).unwrap();
            for i in 0..=64 {
                assert!(schwarzian_of(&g, i as f64 / 64.0).abs() < 1e-10);
            }
        }
        assert_eq!(schwarzian_of(&SmoothOuterMap::Identity, 0.3), 0.0);
    }

    #[test]
    fn exponential_map_schwarzian() {
        let f = SmoothOuterMap::exponential(1.0).unwrap();
        assert!((schwarzian_of(&f, 0.4) + 0.5).abs() < 1e-15);
        assert!((f.value(1.0) - 1.0).abs() < 1e-15);
        assert!((f.inverse(f.value(0.3)) - 0.3).abs() < 1e-15);
        assert!((f.d2(0.2) - f.d1(0.2)).abs() < 1e-15);
    }

    #[test]
    fn grid_map_matches_closed_form() {
        let grid = GridSpec::new(1025).unwrap();
        let m = GridMap::from_k(grid, vec![1.0; 1025]).unwrap();
        let f = SmoothOuterMap::exponential(1.0).unwrap();
        for (i, &v) in m.values().iter().enumerate() {
            assert!((v - f.value(grid.t(i))).abs() < 1e-6);
        }
        assert!(m.schwarzian_values().iter().all(|s| (s + 0.5).abs() < 1e-10));
    }

    #[test]
    fn identity_density_is_one() {
        let grid = GridSpec::new(129).unwrap();
        let phi = sample_mu(sigma(1.0), grid, RngStream::new(1, 0));
        assert!((radon_nikodym(&SmoothOuterMap::Identity, &phi, sigma(1.0)) - 1.0).abs() < 1e-15);
        assert_eq!(p_mobius(0.0, &phi, sigma(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn mobius_density_at_identity() {
        let id = Diffeo::identity(GridSpec::new(33).unwrap());
        let p = p_mobius(1.0, &id, sigma(1.0)).unwrap();
        assert!((p - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn general_density_reduces_to_mobius() {
        let grid = GridSpec::new(257).unwrap();
        for (seed, beta) in [(1, 0.5), (2, 1.0), (3, -0.4)] {
            let phi = sample_mu(sigma(0.8), grid, RngStream::new(seed, 0));
            let g = SmoothOuterMap::mobius(beta).unwrap();
            let a = radon_nikodym(&g, &phi, sigma(0.8));
            let b = p_mobius(beta, &phi, sigma(0.8)).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn mobius_cocycle() {
        let grid = GridSpec::new(257).unwrap();
        let phi = sample_mu(sigma(1.0), grid, RngStream::new(4, 4));
        let (b, bp) = (0.7, 1.5);
        let inner = MobiusDiffeo::new(bp).unwrap();
        let outer = MobiusDiffeo::new(b).unwrap();
        let both = outer.then_after(&inner);
        let lhs = p_mobius_endpoints(both.beta(), phi.deriv0(), phi.deriv1(), 1.0);
        let rhs = p_mobius_endpoints(b, (bp + 1.0) * phi.deriv0(), phi.deriv1() / (bp + 1.0), 1.0)
            * p_mobius_endpoints(bp, phi.deriv0(), phi.deriv1(), 1.0);
        assert!((lhs / rhs - 1.0).abs() < 1e-10);
        let psi = compose(&inner, &phi);
        let grid_rhs = p_mobius(b, &psi, sigma(1.0)).unwrap() * p_mobius(bp, &phi, sigma(1.0)).unwrap();
        assert!((lhs / grid_rhs - 1.0).abs() < 1e-4);
    }

    #[test]
    fn inverse_of_zero_is_identity() {
        let grid = GridSpec::new(65).unwrap();
        let sol = schwarzian_inverse(&Path::zeros(grid)).unwrap();
        assert!(sol.u.values().iter().all(|&v| v == 0.0));
        for i in 0..65 {
            assert!((sol.map.value(grid.t(i)) - grid.t(i)).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_constant_quarter() {
        let grid = GridSpec::new(2049).unwrap();
        let v = Path::from_fn(grid, |_| 0.25).unwrap();
        let sol = schwarzian_inverse(&v).unwrap();
        let SmoothOuterMap::Grid(m) = &sol.map else { panic!() };
        let resid = m.schwarzian_values().iter().map(|s| (s - 0.25).abs()).fold(0.0, f64::max);
        assert!(resid < 1e-6, "{resid}");
        assert!(m.d2_values()[2048].abs() < 1e-15);
        assert!(sol.map.k(0.0).abs() <= 0.5);
        assert!(sol.contraction_ratios().iter().all(|&r| r <= 0.5));
    }

    #[test]
    fn inverse_rejects_large_norm() {
        let grid = GridSpec::new(17).unwrap();
        let v = Path::from_fn(grid, |t| 0.3 * t).unwrap();
        assert!(matches!(schwarzian_inverse(&v), Err(Error::NormTooLarge(_))));
    }

    #[test]
    fn stencil_is_fourth_order_exact_on_quartics() {
        let h = 0.1;
        let y: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(4)).collect();
        let d = stencil_derivative(&y, h);
        for (i, v) in d.iter().enumerate() {
            assert!((v - 4.0 * (i as f64 * h).powi(3)).abs() < 1e-10);
        }
    }
}
