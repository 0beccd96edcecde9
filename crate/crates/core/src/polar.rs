//! Polar coordinates `x ↔ (ρ, φ)` of strictly positive paths.
//!
//! `1/ρ² = ∫₀¹ x⁻²`, `φ⁻¹(t) = ρ² ∫₀ᵗ x⁻²`, and back again
//! `x(t) = ρ √(φ′(φ⁻¹(t)))`.

use log::warn;

use crate::diffeo::{Diffeo, Reparam};
use crate::error::{Error, Result};
use crate::grid::{self, Path};
use crate::interp::MonotoneCubic;

/// `(ρ, φ) = B⁻¹(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarPair {
    rho: f64,
    phi: Diffeo,
}

impl PolarPair {
    pub fn new(rho: f64, phi: Diffeo) -> Result<Self> {
        if rho > 0.0 && rho.is_finite() {
            Ok(Self { rho, phi })
        } else {
            Err(Error::DomainError(format!("radial coordinate must be positive, got {rho}")))
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn phi(&self) -> &Diffeo {
        &self.phi
    }

    pub fn into_parts(self) -> (f64, Diffeo) {
        (self.rho, self.phi)
    }
}

fn check_positive(x: &Path) -> Result<()> {
    if let Some((index, &value)) = x.values().iter().enumerate().find(|(_, v)| **v <= 0.0) {
        return Err(Error::NonPositivePath { index, value });
    }
    Ok(())
}

/// `(∫₀¹ x⁻²)^{−1/2}` by the trapezoid rule.
pub fn rho_of(x: &Path) -> Result<f64> {
    check_positive(x)?;
    Ok(rho_unchecked(x.values(), x.grid().dt()))
}

pub(crate) fn rho_unchecked(x: &[f64], dt: f64) -> f64 {
    let inv: Vec<f64> = x.iter().map(|v| 1.0 / (v * v)).collect();
    grid::trapezoid(&inv, dt).powf(-0.5)
}

/// `B⁻¹`: splits a positive path into its orbit radius and a diffeomorphism.
pub fn decompose(x: &Path) -> Result<PolarPair> {
    check_positive(x)?;
    let g = x.grid();
    if x.min() < 1e-6 * x.max() {
        warn!("path dips to {:.3e} of its maximum; x^-2 quadrature is unreliable", x.min() / x.max());
    }
    let inv: Vec<f64> = x.values().iter().map(|v| 1.0 / (v * v)).collect();
    let mut u = Vec::new();
    grid::cumulative_trapezoid(&inv, g.dt(), &mut u);
    let total = u[g.last()];
    let rho = total.powf(-0.5);
    for v in u.iter_mut() {
        *v /= total;
    }
    u[g.last()] = 1.0;
    // φ is the inverse of u, with slope 1/u′ = x²/ρ² at the nodes.
    let slopes: Vec<f64> = x.values().iter().map(|v| v * v * total).collect();
    let ts = g.times();
    let forward = MonotoneCubic::with_slopes(&u, &ts, &slopes);
    let mut phi_t = Vec::with_capacity(ts.len());
    forward.eval_sorted(&ts, &mut phi_t);
    let mut xs = Vec::with_capacity(ts.len());
    x.interpolant().eval_sorted(&phi_t, &mut xs);
    let l0 = x.first().ln();
    let mut xi: Vec<f64> = xs.iter().map(|v| 2.0 * (v.ln() - l0)).collect();
    let last = g.last();
    xi[last] = 2.0 * (x.last().ln() - l0);
    PolarPair::new(rho, Diffeo::from_xi_values(g, xi))
}

/// `B`: the positive path `ρ √(φ′(φ⁻¹(t)))`.
pub fn reconstruct(p: &PolarPair) -> Path {
    let phi = &p.phi;
    let g = phi.grid();
    let pre = phi.inverse_on(&g.times());
    let ld = phi.log_deriv_on(&pre);
    let mut values: Vec<f64> = ld.iter().map(|l| p.rho * (0.5 * l).exp()).collect();
    values[0] = p.rho * phi.deriv0().sqrt();
    values[g.last()] = p.rho * phi.deriv1().sqrt();
    Path::from_vec_unchecked(g, values)
}
