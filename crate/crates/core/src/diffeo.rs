//! Orientation-preserving diffeomorphisms of `[0, 1]` in log-derivative
//! coordinates.
//!
//! A [`Diffeo`] is stored through its chart `ξ(t) = ln φ′(t) − ln φ′(0)`; the
//! grid values of `φ` are the normalised running trapezoid integral of `e^ξ`.
//! Endpoint derivatives `φ′(0) = 1/N` and `φ′(1) = e^{ξ(1)}/N`, with
//! `N = ∫₀¹ e^ξ`, therefore come straight from stored fields.

use std::fmt;
use std::io::{Read, Write};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{self, Dispersion, GridSpec, Path};
use crate::interp::MonotoneCubic;
use crate::rng::RngStream;

/// A monotone reparametrisation of `[0, 1]` fixing both endpoints.
pub trait Reparam {
    fn value(&self, t: f64) -> f64;

    /// `ln φ′(t)`.
    fn log_deriv(&self, t: f64) -> f64;

    fn deriv(&self, t: f64) -> f64 {
        self.log_deriv(t).exp()
    }

    fn inverse(&self, s: f64) -> f64;

    /// `φ⁻¹` at every point of `ts` (ascending).
    fn inverse_on(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.inverse(t)).collect()
    }
}

/// The inverse map of a [`Reparam`], itself a [`Reparam`].
pub struct Inverse<'a, R: Reparam + ?Sized>(pub &'a R);

impl<R: Reparam + ?Sized> Reparam for Inverse<'_, R> {
    fn value(&self, t: f64) -> f64 {
        self.0.inverse(t)
    }

    fn log_deriv(&self, t: f64) -> f64 {
        -self.0.log_deriv(self.0.inverse(t))
    }

    fn inverse(&self, s: f64) -> f64 {
        self.0.value(s)
    }
}

/// The Möbius maps `g_β(t) = (β+1)t / (βt+1)`, `β > −1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusDiffeo {
    beta: f64,
}

impl MobiusDiffeo {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > -1.0 && beta.is_finite() {
            Ok(Self { beta })
        } else {
            Err(Error::DomainError(format!("Möbius index must exceed -1, got {beta}")))
        }
    }

    pub fn identity() -> Self {
        Self { beta: 0.0 }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn d1(&self, t: f64) -> f64 {
        let b = self.beta;
        (b + 1.0) / (b * t + 1.0).powi(2)
    }

    pub fn d2(&self, t: f64) -> f64 {
        let b = self.beta;
        -2.0 * b * (b + 1.0) / (b * t + 1.0).powi(3)
    }

    /// `g_β ∘ g_γ = g_{β+γ+βγ}`.
    pub fn then_after(&self, inner: &MobiusDiffeo) -> MobiusDiffeo {
        let (b, c) = (self.beta, inner.beta);
        MobiusDiffeo { beta: b + c + b * c }
    }

    /// `g_β⁻¹ = g_{−β/(β+1)}`.
    pub fn inverse_map(&self) -> MobiusDiffeo {
        MobiusDiffeo { beta: -self.beta / (self.beta + 1.0) }
    }

    /// Grid representation through the chart `ξ(t) = −2 ln(βt + 1)`.
    pub fn to_diffeo(&self, grid: GridSpec) -> Diffeo {
        let xi = (0..grid.n_points())
            .map(|i| -2.0 * (self.beta * grid.t(i)).ln_1p())
            .collect();
        Diffeo::from_xi_values(grid, xi)
    }
}

impl Reparam for MobiusDiffeo {
    fn value(&self, t: f64) -> f64 {
        let b = self.beta;
        (b + 1.0) * t / (b * t + 1.0)
    }

    fn log_deriv(&self, t: f64) -> f64 {
        (self.beta + 1.0).ln() - 2.0 * (self.beta * t).ln_1p()
    }

    fn deriv(&self, t: f64) -> f64 {
        self.d1(t)
    }

    fn inverse(&self, s: f64) -> f64 {
        let b = self.beta;
        s / (b + 1.0 - b * s)
    }
}

struct Interpolants {
    forward: MonotoneCubic,
    backward: MonotoneCubic,
    xi: MonotoneCubic,
}

/// Element of `Diff¹₊([0,1])` on a uniform grid.
#[derive(Clone)]
pub struct Diffeo {
    grid: GridSpec,
    xi: Vec<f64>,
    phi: Vec<f64>,
    log_norm: f64,
    cache: OnceLock<std::sync::Arc<Interpolants>>,
}

impl PartialEq for Diffeo {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.xi == other.xi && self.phi == other.phi
    }
}

impl fmt::Debug for Diffeo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffeo")
            .field("n_points", &self.grid.n_points())
            .field("deriv0", &self.deriv0())
            .field("deriv1", &self.deriv1())
            .finish()
    }
}

impl Diffeo {
    pub fn identity(grid: GridSpec) -> Self {
        Self::from_xi_values(grid, vec![0.0; grid.n_points()])
    }

    /// Builds `A⁻¹(ξ)` from raw chart values; `xi[0]` is forced to zero.
    pub(crate) fn from_xi_values(grid: GridSpec, mut xi: Vec<f64>) -> Self {
        xi[0] = 0.0;
        let dt = grid.dt();
        let top = xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut phi = Vec::with_capacity(xi.len());
        let mut acc = 0.0;
        let mut prev = (xi[0] - top).exp();
        phi.push(0.0);
        for &x in &xi[1..] {
            let e = (x - top).exp();
            acc += 0.5 * dt * (prev + e);
            phi.push(acc);
            prev = e;
        }
        let total = acc;
        for v in phi.iter_mut() {
            *v /= total;
        }
        let last = phi.len() - 1;
        phi[last] = 1.0;
        Self { grid, xi, phi, log_norm: total.ln() + top, cache: OnceLock::new() }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn xi_values(&self) -> &[f64] {
        &self.xi
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi
    }

    /// `∫₀¹ e^{ξ(τ)} dτ`.
    pub fn dlog_norm(&self) -> f64 {
        self.log_norm.exp()
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// `φ′(t_i)`.
    pub fn deriv_at(&self, i: usize) -> f64 {
        (self.xi[i] - self.log_norm).exp()
    }

    pub fn deriv0(&self) -> f64 {
        self.deriv_at(0)
    }

    pub fn deriv1(&self) -> f64 {
        self.deriv_at(self.grid.last())
    }

    pub fn derivs(&self) -> Vec<f64> {
        (0..self.xi.len()).map(|i| self.deriv_at(i)).collect()
    }

    pub fn min_deriv(&self) -> f64 {
        let m = self.xi.iter().copied().fold(f64::INFINITY, f64::min);
        (m - self.log_norm).exp()
    }

    fn interps(&self) -> &Interpolants {
        self.cache.get_or_init(|| {
            let ts = self.grid.times();
            let d = self.derivs();
            let inv_d: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
            std::sync::Arc::new(Interpolants {
                forward: MonotoneCubic::with_slopes(&ts, &self.phi, &d),
                backward: MonotoneCubic::with_slopes(&self.phi, &ts, &inv_d),
                xi: MonotoneCubic::new(&ts, &self.xi),
            })
        })
    }

    /// `ln φ′` at every point of `ss` (ascending).
    pub fn log_deriv_on(&self, ss: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(ss.len());
        self.interps().xi.eval_sorted(ss, &mut out);
        for v in out.iter_mut() {
            *v -= self.log_norm;
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "phi", "xi"])?;
        for i in 0..self.grid.n_points() {
            wr.write_record([
                self.grid.t(i).to_string(),
                self.phi[i].to_string(),
                self.xi[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Loads a `t,phi,xi` table and re-validates the chart invariants.
    pub fn read_csv<R: Read>(r: R) -> Result<Diffeo> {
        let cols = grid::read_grid_csv(r, &["t", "phi", "xi"])?;
        let grid = GridSpec::new(cols[0].len())?;
        let xi = Path::new(grid, cols[2].clone())?;
        if xi.first() != 0.0 {
            return Err(Error::InvalidDiffeo(format!("xi(0) = {} must be 0", xi.first())));
        }
        let d = a_inv(&xi)?;
        for (i, (&stored, &rebuilt)) in cols[1].iter().zip(d.phi_values()).enumerate() {
            if (stored - rebuilt).abs() > 1e-12 {
                return Err(Error::InvalidDiffeo(format!(
                    "phi at row {i} is {stored}, chart gives {rebuilt}"
                )));
            }
        }
        Ok(d)
    }
}

impl Reparam for Diffeo {
    fn value(&self, t: f64) -> f64 {
        self.interps().forward.eval(t)
    }

    fn log_deriv(&self, t: f64) -> f64 {
        self.interps().xi.eval(t) - self.log_norm
    }

    fn inverse(&self, s: f64) -> f64 {
        self.interps().backward.eval(s)
    }

    fn inverse_on(&self, ts: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(ts.len());
        self.interps().backward.eval_sorted(ts, &mut out);
        out
    }
}

/// `ξ = A(φ)`, `ξ(t) = ln φ′(t) − ln φ′(0)`.
pub fn a_map(phi: &Diffeo) -> Path {
    Path::from_vec_unchecked(phi.grid, phi.xi.clone())
}

/// `φ = A⁻¹(ξ)`, `φ(t) = ∫₀ᵗ e^ξ / ∫₀¹ e^ξ`.
pub fn a_inv(xi: &Path) -> Result<Diffeo> {
    if xi.first() != 0.0 {
        return Err(Error::InvalidDiffeo(format!("xi(0) = {} must be 0", xi.first())));
    }
    Ok(Diffeo::from_xi_values(xi.grid(), xi.values().to_vec()))
}

/// `g ∘ φ` on the grid of `φ`; the outer map enters only through
/// `ln g′(φ(t))`, so closed-form outer maps contribute no interpolation error.
pub fn compose<G: Reparam + ?Sized>(g: &G, phi: &Diffeo) -> Diffeo {
    let base = g.log_deriv(0.0);
    let xi = phi
        .phi
        .iter()
        .zip(&phi.xi)
        .map(|(&p, &x)| g.log_deriv(p) - base + x)
        .collect();
    Diffeo::from_xi_values(phi.grid, xi)
}

/// `φ⁻¹` on the same grid: `ξ_{φ⁻¹}(t) = −ξ_φ(φ⁻¹(t))`.
pub fn invert(phi: &Diffeo) -> Diffeo {
    let ts = phi.grid.times();
    let pre = phi.inverse_on(&ts);
    let interp = &phi.interps().xi;
    let mut xs = Vec::with_capacity(ts.len());
    interp.eval_sorted(&pre, &mut xs);
    let xi = xs.into_iter().map(|v| -v).collect();
    Diffeo::from_xi_values(phi.grid, xi)
}

/// A sample of `μ_σ`: `A⁻¹(ξ)` with `ξ ~ W⁰_σ`.
pub fn sample_mu(sigma: Dispersion, grid: GridSpec, rng: RngStream) -> Diffeo {
    let xi = grid::sample_w0(sigma, grid, rng);
    Diffeo::from_xi_values(grid, xi.into_values())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    #[test]
    fn identity_chart_is_zero() {
        let id = Diffeo::identity(grid(17));
        assert!(a_map(&id).values().iter().all(|&v| v == 0.0));
        for (i, &p) in id.phi_values().iter().enumerate() {
            assert!((p - grid(17).t(i)).abs() < 1e-15);
        }
        assert!((id.deriv0() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chart_round_trip_exact() {
        let g = grid(33);
        let xi = Path::from_fn(g, |t| (5.0 * t).sin() - 0.3 * t).unwrap();
        let xi = Path::new(g, { let mut v = xi.into_values(); v[0] = 0.0; v }).unwrap();
        let phi = a_inv(&xi).unwrap();
        assert_eq!(a_map(&phi), xi);
        let again = a_inv(&a_map(&phi)).unwrap();
        assert_eq!(again, phi);
    }

    #[test]
    fn a_inv_linear_chart() {
        let g = grid(1025);
        let xi = Path::from_fn(g, |t| t).unwrap();
        let phi = a_inv(&xi).unwrap();
        assert!((phi.phi_values()[512] - 0.377541).abs() < 1e-6);
        assert_eq!(phi.phi_values()[1024], 1.0);
        assert!(phi.phi_values().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn a_inv_rejects_offset_chart() {
        let g = grid(5);
        let xi = Path::from_fn(g, |t| t + 1.0).unwrap();
        assert!(matches!(a_inv(&xi), Err(Error::InvalidDiffeo(_))));
    }

    #[test]
    fn mobius_chart_and_endpoints() {
        let g = grid(257);
        let m = MobiusDiffeo::new(1.0).unwrap();
        let d = m.to_diffeo(g);
        for i in 0..g.n_points() {
            let t = g.t(i);
            assert!((d.xi_values()[i] + 2.0 * (t + 1.0).ln()).abs() < 1e-14);
        }
        assert!((d.deriv0() - 2.0).abs() < 1e-5);
        assert!((d.deriv1() - 0.5).abs() < 1e-5);
        assert!(MobiusDiffeo::new(-1.0).is_err());
    }

    #[test]
    fn mobius_group_laws() {
        let a = MobiusDiffeo::new(0.7).unwrap();
        let b = MobiusDiffeo::new(-0.4).unwrap();
        let ab = a.then_after(&b);
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            assert!((a.value(b.value(t)) - ab.value(t)).abs() < 1e-14);
            assert!((a.inverse_map().value(a.value(t)) - t).abs() < 1e-14);
            assert!((a.inverse(a.value(t)) - t).abs() < 1e-14);
        }
    }

    #[test]
    fn compose_with_identity_and_mobius() {
        let g = grid(513);
        let phi = sample_mu(Dispersion::new(0.8).unwrap(), g, RngStream::new(11, 0));
        let same = compose(&MobiusDiffeo::identity(), &phi);
        assert_eq!(same, phi);
        let beta = 1.5;
        let psi = compose(&MobiusDiffeo::new(beta).unwrap(), &phi);
        let r0 = psi.deriv0() / ((beta + 1.0) * phi.deriv0());
        let r1 = psi.deriv1() / (phi.deriv1() / (beta + 1.0));
        assert!((r0 - 1.0).abs() < 1e-4, "{r0}");
        assert!((r1 - 1.0).abs() < 1e-4, "{r1}");
    }

    #[test]
    fn compose_mobius_pair_is_mobius() {
        let g = grid(513);
        let (b1, b2) = (0.5, 2.0);
        let inner = MobiusDiffeo::new(b2).unwrap().to_diffeo(g);
        let outer = MobiusDiffeo::new(b1).unwrap();
        let c = compose(&outer, &inner);
        let expect = MobiusDiffeo::new(b1 + b2 + b1 * b2).unwrap();
        for i in 0..g.n_points() {
            assert!((c.phi_values()[i] - expect.value(g.t(i))).abs() < 1e-5);
        }
    }

    #[test]
    fn invert_identity_and_mobius() {
        let g = grid(257);
        assert_eq!(invert(&Diffeo::identity(g)).xi_values(), Diffeo::identity(g).xi_values());
        let m = MobiusDiffeo::new(2.0).unwrap();
        let inv = invert(&m.to_diffeo(g));
        let expect = m.inverse_map();
        for i in 0..g.n_points() {
            assert!((inv.phi_values()[i] - expect.value(g.t(i))).abs() < 1e-4);
        }
    }

    #[test]
    fn inverse_interpolation_converges_quadratically() {
        let err = |n: usize| {
            let g = grid(n);
            let xi = Path::from_fn(g, |t| 0.8 * (3.0 * t).sin() + 0.5 * t * t).unwrap();
            let phi = a_inv(&xi).unwrap();
            (0..n)
                .map(|i| (phi.inverse(phi.phi_values()[i]) - g.t(i)).abs())
                .fold(0.0, f64::max)
                .max((0..n - 1).map(|i| {
                    let t = (g.t(i) + g.t(i + 1)) / 2.0;
                    (phi.inverse(phi.value(t)) - t).abs()
                }).fold(0.0, f64::max))
        };
        let (e1, e2) = (err(65), err(257));
        assert!(e2 < 1e-6, "{e2}");
        assert!(e1 / e2.max(1e-16) > 8.0 || e2 < 1e-12, "{e1} {e2}");
    }

    #[test]
    fn compose_inverse_is_identity() {
        let g = grid(513);
        let phi = sample_mu(Dispersion::new(1.0).unwrap(), g, RngStream::new(5, 1));
        let back = compose(&invert(&phi), &phi);
        for i in 0..g.n_points() {
            assert!((back.phi_values()[i] - g.t(i)).abs() < 5e-3);
        }
    }

    #[test]
    fn csv_round_trip_and_revalidation() {
        let g = grid(65);
        let phi = sample_mu(Dispersion::new(1.0).unwrap(), g, RngStream::new(2, 9));
        let mut buf = Vec::new();
        phi.write_csv(&mut buf).unwrap();
        let back = Diffeo::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, phi);
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[10] = {
            let f: Vec<&str> = lines[10].split(',').collect();
            format!("{},{},{}", f[0], f[1].parse::<f64>().unwrap() + 1e-6, f[2])
        };
        assert!(matches!(
            Diffeo::read_csv(lines.join("\n").as_bytes()),
            Err(Error::InvalidDiffeo(_))
        ));
    }

    #[test]
    fn huge_chart_values_stay_finite() {
        let g = grid(129);
        let xi = Path::from_fn(g, |t| 900.0 * t).unwrap();
        let phi = a_inv(&xi).unwrap();
        assert!(phi.deriv1().is_finite() && phi.deriv0() >= 0.0);
        assert_eq!(phi.phi_values()[128], 1.0);
    }
}
