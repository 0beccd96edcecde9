//! Closed forms for the scalar identities and independent quadrature routes
//! to each of them.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity};

fn domain(msg: String) -> Error {
    Error::DomainError(msg)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive, got {v}")))
    }
}

fn above_minus_one(beta: f64) -> Result<()> {
    if beta > -1.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("beta must exceed -1, got {beta}")))
    }
}

/// `a` with `a² = β²/(2(β+1))`.
pub fn a_of_beta(beta: f64) -> Result<f64> {
    above_minus_one(beta)?;
    Ok(beta.abs() / (2.0 * (beta + 1.0)).sqrt())
}

/// `(1/(2√2))(1/a − 1/√(a²+2))`.
pub fn lemma1_rhs(a: f64) -> Result<f64> {
    positive("a", a)?;
    Ok((1.0 / a - 1.0 / (a * a + 2.0).sqrt()) / (2.0 * SQRT_2))
}

/// `∫ δ(x(1) − θx(0)) e^{−a²x(0)²/σ²} w_σ(dx)` in closed form:
/// `(1/(2√2))(A^{−1/2} − (A+2θ)^{−1/2})` with `A = a² + (θ−1)²/2`.
pub fn theorem2_lhs_closed(a: f64, theta: f64) -> Result<f64> {
    positive("a", a)?;
    positive("theta", theta)?;
    let big_a = a * a + 0.5 * (theta - 1.0).powi(2);
    Ok((big_a.powf(-0.5) - (big_a + 2.0 * theta).powf(-0.5)) / (2.0 * SQRT_2))
}

/// `J(β²/(2(β+1))) = ρ/(√(2π)σ) · exp{−ρ² ln²(β+1) / (2σ²)}`.
pub fn j_closed(beta: f64, rho: f64, sigma: f64) -> Result<f64> {
    above_minus_one(beta)?;
    positive("rho", rho)?;
    positive("sigma", sigma)?;
    let l = beta.ln_1p();
    Ok(rho / ((2.0 * PI).sqrt() * sigma) * (-rho * rho * l * l / (2.0 * sigma * sigma)).exp())
}

/// `√(2/π) (β+1) ln(β+1) / (σβ(β+2)) · exp{−ρ² ln²(β+1) / (2σ²)}`, with the
/// removable singularity at `β = 0` filled by its limit.
pub fn lemma4_rhs(beta: f64, rho: f64, sigma: f64) -> Result<f64> {
    above_minus_one(beta)?;
    positive("rho", rho)?;
    positive("sigma", sigma)?;
    let l = beta.ln_1p();
    let pref = if beta == 0.0 { 0.5 } else { (beta + 1.0) * (l / beta) / (beta + 2.0) };
    Ok((2.0 / PI).sqrt() * pref / sigma * (-rho * rho * l * l / (2.0 * sigma * sigma)).exp())
}

/// `∫₀^∞ lemma4_rhs(β, ρ, σ) e^{−σ²/(8ρ²)} dρ` in closed form.
///
/// For `β > 0` this is `√(β+1)/(β(β+2))`; for `−1 < β < 0` the Gaussian
/// integral picks up `|ln(β+1)|` and the value is `(β+1)^{3/2}/(|β|(β+2))`.
/// Both branches equal `lemma1_rhs(a)` with `a² = β²/(2(β+1))`.
pub fn i2_closed(beta: f64) -> Result<f64> {
    above_minus_one(beta)?;
    if beta == 0.0 {
        return Err(domain("I2 diverges at beta = 0".into()));
    }
    let s = (beta + 1.0).sqrt();
    Ok(if beta > 0.0 {
        s / (beta * (beta + 2.0))
    } else {
        s * (beta + 1.0) / (beta.abs() * (beta + 2.0))
    })
}

/// `(I_a, I_b, I_c)` in closed form.
pub fn gauss_integrals(a: f64, b: f64) -> Result<(f64, f64, f64)> {
    positive("a", a)?;
    positive("b", b)?;
    let ia = (2.0 * PI).sqrt() / b * (-a * b * b).exp();
    Ok((ia, ia / 2.0, ia / (2.0 * a)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FormulaId {
    Lemma1,
    Lemma3J,
    Lemma4,
    I2,
    Ia,
    Ib,
    Ic,
}

impl FormulaId {
    pub const ALL: [FormulaId; 7] = [
        FormulaId::Lemma1,
        FormulaId::Lemma3J,
        FormulaId::Lemma4,
        FormulaId::I2,
        FormulaId::Ia,
        FormulaId::Ib,
        FormulaId::Ic,
    ];
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FormulaId::Lemma1 => "lemma1",
            FormulaId::Lemma3J => "lemma3_j",
            FormulaId::Lemma4 => "lemma4",
            FormulaId::I2 => "i2",
            FormulaId::Ia => "ia",
            FormulaId::Ib => "ib",
            FormulaId::Ic => "ic",
        };
        f.write_str(s)
    }
}

/// Parameters shared by the formulas; each formula reads only its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormulaParams {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl Default for FormulaParams {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, beta: 1.0, rho: 1.0, sigma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormValue {
    pub value: f64,
    pub formula_id: FormulaId,
    pub params: FormulaParams,
}

pub fn closed_form(id: FormulaId, p: &FormulaParams) -> Result<ClosedFormValue> {
    let value = match id {
        FormulaId::Lemma1 => lemma1_rhs(p.a)?,
        FormulaId::Lemma3J => j_closed(p.beta, p.rho, p.sigma)?,
        FormulaId::Lemma4 => lemma4_rhs(p.beta, p.rho, p.sigma)?,
        FormulaId::I2 => i2_closed(p.beta)?,
        FormulaId::Ia => gauss_integrals(p.a, p.b)?.0,
        FormulaId::Ib => gauss_integrals(p.a, p.b)?.1,
        FormulaId::Ic => gauss_integrals(p.a, p.b)?.2,
    };
    Ok(ClosedFormValue { value, formula_id: id, params: *p })
}

const QUAD_REL: f64 = 1e-13;
const ORACLE_REL: f64 = 1e-8;

fn normal_pdf(x: f64, s: f64) -> f64 {
    (-0.5 * (x / s).powi(2)).exp() / ((2.0 * PI).sqrt() * s)
}

/// Richardson extrapolation of `g(h)` whose error expands in even powers of `h`.
fn richardson(g: impl Fn(f64) -> Result<f64>, h0: f64, levels: usize) -> Result<(f64, f64)> {
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut row = vec![g(h0 / f64::powi(2.0, k as i32))?];
        for j in 1..=k {
            let f = f64::powi(4.0, j as i32);
            let v = row[j - 1] + (row[j - 1] - table[k - 1][j - 1]) / (f - 1.0);
            row.push(v);
        }
        table.push(row);
    }
    let best = table[levels - 1][levels - 1];
    let prev = table[levels - 2][levels - 2];
    Ok((best, (best - prev).abs()))
}

/// `J` through the one-dimensional endpoint law: the δ is replaced by a
/// Gaussian mollifier of width `ε`, the smoothed integral is computed by
/// quadrature in `y = e^{ξ(1)/2}` and `ε → 0` by extrapolation.
fn j_quadrature(beta: f64, rho: f64, sigma: f64) -> Result<f64> {
    above_minus_one(beta)?;
    positive("rho", rho)?;
    positive("sigma", sigma)?;
    let c = 1.0 / (beta + 1.0);
    let s = 2.0 * sigma / rho;
    let smoothed = |eps: f64| -> Result<f64> {
        let r = integrate(
            |y| normal_pdf(y - c, eps) * normal_pdf(2.0 * y.ln(), s) * 2.0 / y,
            0.5 * c,
            1.5 * c,
            QUAD_REL,
            0.0,
        )?;
        Ok(r.value * c)
    };
    let (v, err) = richardson(smoothed, 0.04 * c, 5)?;
    if err > 1e-10 * v.abs() {
        return Err(Error::QuadratureFailure { estimate: v, tolerance: err });
    }
    Ok(v)
}

/// `lemma4_rhs` as `−(σ²/ρ³) dJ/dα`, differentiating the quadrature `J`
/// along `α(β) = β²/(2(β+1))`.
fn lemma4_quadrature(beta: f64, rho: f64, sigma: f64) -> Result<f64> {
    above_minus_one(beta)?;
    if beta == 0.0 {
        return Err(domain("the derivative route needs beta != 0".into()));
    }
    let h0 = 0.02f64.min(0.25 * (beta + 1.0)).min(0.5 * beta.abs());
    let central = |h: f64| -> Result<f64> {
        Ok((j_quadrature(beta + h, rho, sigma)? - j_quadrature(beta - h, rho, sigma)?) / (2.0 * h))
    };
    let (dj_dbeta, _) = richardson(central, h0, 4)?;
    let dalpha = beta * (beta + 2.0) / (2.0 * (beta + 1.0).powi(2));
    Ok(-sigma * sigma / rho.powi(3) * dj_dbeta / dalpha)
}

/// Independent numerical value of each closed form, to `10⁻⁸` relative.
pub fn quadrature_oracle(id: FormulaId, p: &FormulaParams) -> Result<f64> {
    let value = match id {
        FormulaId::Lemma1 => {
            positive("a", p.a)?;
            positive("sigma", p.sigma)?;
            let (a, s) = (p.a, p.sigma);
            integrate_to_infinity(
                |q| {
                    let u = q * q / (s * s);
                    normal_pdf(0.0, s) * (-(-2.0 * u).exp_m1()) * (-a * a * u).exp()
                },
                0.0,
                QUAD_REL,
                0.0,
            )?
            .value
        }
        FormulaId::Lemma3J => j_quadrature(p.beta, p.rho, p.sigma)?,
        FormulaId::Lemma4 => lemma4_quadrature(p.beta, p.rho, p.sigma)?,
        FormulaId::I2 => {
            lemma4_rhs(p.beta, 1.0, p.sigma)?;
            let s = p.sigma;
            integrate_to_infinity(
                |r| {
                    if r == 0.0 {
                        return 0.0;
                    }
                    lemma4_rhs(p.beta, r, s).unwrap_or(0.0) * (-s * s / (8.0 * r * r)).exp()
                },
                0.0,
                QUAD_REL,
                0.0,
            )?
            .value
        }
        FormulaId::Ia | FormulaId::Ib | FormulaId::Ic => {
            positive("a", p.a)?;
            positive("b", p.b)?;
            let (a, b) = (p.a, p.b);
            let pre = |r: f64| match id {
                FormulaId::Ia => 1.0 / (r * r) + a,
                FormulaId::Ib => 1.0 / (r * r),
                _ => 1.0,
            };
            integrate_to_infinity(
                |r| {
                    if r == 0.0 {
                        return 0.0;
                    }
                    pre(r) * (-0.5 * b * b * (1.0 / (r * r) + a * a * r * r)).exp()
                },
                0.0,
                QUAD_REL,
                0.0,
            )?
            .value
        }
    };
    if !value.is_finite() {
        return Err(Error::QuadratureFailure { estimate: value, tolerance: ORACLE_REL });
    }
    Ok(value)
}

/// Outcome of comparing one closed form against its quadrature route.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleCheck {
    pub closed: ClosedFormValue,
    pub quadrature: f64,
    pub rel_err: f64,
}

impl OracleCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.rel_err <= tol
    }
}

pub fn check_oracle(id: FormulaId, p: &FormulaParams) -> Result<OracleCheck> {
    let closed = closed_form(id, p)?;
    let quadrature = quadrature_oracle(id, p)?;
    let rel_err = (quadrature - closed.value).abs() / closed.value.abs();
    Ok(OracleCheck { closed, quadrature, rel_err })
}

/// The oracle suite run by `verify --check oracles`.
pub fn standard_oracle_grid() -> Vec<(FormulaId, FormulaParams)> {
    let mut out = Vec::new();
    let d = FormulaParams::default();
    for a in [0.5, 1.0, 2.0] {
        out.push((FormulaId::Lemma1, FormulaParams { a, ..d }));
    }
    for (beta, rho) in [(1.0, 1.0), (0.5, 2.0), (-0.5, 1.0)] {
        out.push((FormulaId::Lemma3J, FormulaParams { beta, rho, ..d }));
        out.push((FormulaId::Lemma4, FormulaParams { beta, rho, ..d }));
    }
    for beta in [-0.5, 0.5, 1.0, 2.0, 5.0] {
        out.push((FormulaId::I2, FormulaParams { beta, ..d }));
    }
    for id in [FormulaId::Ia, FormulaId::Ib, FormulaId::Ic] {
        for a in [0.25, 0.5, 1.0, 2.0, 4.0] {
            for b in [0.25, 0.5, 1.0, 2.0, 4.0] {
                out.push((id, FormulaParams { a, b, ..d }));
            }
        }
    }
    out
}
