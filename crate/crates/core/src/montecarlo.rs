//! Monte Carlo estimators for the path-space identities.
//!
//! Every δ constraint is removed exactly: endpoint constraints on `w_σ` paths
//! become a transition-density factor times a Brownian bridge, and
//! constraints on `φ′(1)/φ′(0)` become the Gaussian law of `ξ(1)` times a
//! bridge for `ξ`. Lebesgue-distributed starts and the radial `dρ` are
//! handled by importance sampling.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffeo::{self, Diffeo, Inverse, MobiusDiffeo};
use crate::error::{Error, Result};
use crate::grid::{self, Dispersion, GridSpec};
use crate::oracles;
use crate::polar::{self, PolarPair};
use crate::schwarzian::{self, SmoothOuterMap};
use crate::stats::{combined_z, run_chunked, run_chunked_vec, MCEstimate, Moments};

pub(crate) const TAG_LEMMA1: u64 = 1;
pub(crate) const TAG_J: u64 = 2;
pub(crate) const TAG_LEMMA4: u64 = 3;
pub(crate) const TAG_I2: u64 = 4;
pub(crate) const TAG_T1_LHS: u64 = 5;
pub(crate) const TAG_T1_RHS: u64 = 6;
pub(crate) const TAG_T2_LHS: u64 = 7;
pub(crate) const TAG_T2_RHS: u64 = 8;
pub(crate) const TAG_T3: u64 = 9;

/// Minimum Kish effective sample size, as a fraction of `n`.
pub const MIN_ESS_FRACTION: f64 = 0.01;

/// Importance proposal on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    /// The estimator's documented default.
    #[default]
    Auto,
    HalfNormal { scale: f64 },
    HalfCauchy { scale: f64 },
    LogNormal { median: f64, log_sd: f64 },
    LogCauchy { median: f64, log_scale: f64 },
    /// Bounded support; always rejected.
    Uniform { lo: f64, hi: f64 },
}

impl Proposal {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Proposal::Auto => true,
            Proposal::HalfNormal { scale } | Proposal::HalfCauchy { scale } => scale > 0.0,
            Proposal::LogNormal { median, log_sd } => median > 0.0 && log_sd > 0.0,
            Proposal::LogCauchy { median, log_scale } => median > 0.0 && log_scale > 0.0,
            Proposal::Uniform { lo, hi } => {
                return Err(Error::ProposalMismatch(format!(
                    "uniform on [{lo}, {hi}] does not cover (0, inf)"
                )))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DomainError(format!("invalid proposal parameters {self:?}")))
        }
    }

    /// Rejects proposals whose support misses part of `(0, ∞)`.
    pub fn sample_check(&self) -> Result<()> {
        if *self == Proposal::Auto {
            return Err(Error::DomainError("proposal must be resolved before sampling".into()));
        }
        self.validate()
    }

    fn resolve(self, auto: Proposal) -> Result<Proposal> {
        self.validate()?;
        Ok(if self == Proposal::Auto { auto } else { self })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Proposal::HalfNormal { scale } => {
                let z: f64 = StandardNormal.sample(rng);
                scale * z.abs()
            }
            Proposal::HalfCauchy { scale } => {
                let u: f64 = rng.random();
                scale * (PI * 0.5 * u).tan()
            }
            Proposal::LogNormal { median, log_sd } => {
                let z: f64 = StandardNormal.sample(rng);
                median * (log_sd * z).exp()
            }
            Proposal::LogCauchy { median, log_scale } => {
                let u: f64 = rng.random();
                median * (log_scale * (PI * (u - 0.5)).tan()).exp()
            }
            Proposal::Auto | Proposal::Uniform { .. } => unreachable!("proposal not resolved"),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match *self {
            Proposal::HalfNormal { scale } => 2.0 * normal_pdf(x, scale),
            Proposal::HalfCauchy { scale } => 2.0 / (PI * scale * (1.0 + (x / scale).powi(2))),
            Proposal::LogNormal { median, log_sd } => normal_pdf((x / median).ln(), log_sd) / x,
            Proposal::LogCauchy { median, log_scale } => {
                let u = (x / median).ln() / log_scale;
                1.0 / (PI * log_scale * x * (1.0 + u * u))
            }
            Proposal::Auto | Proposal::Uniform { .. } => unreachable!("proposal not resolved"),
        }
    }
}

/// How positivity of `w_σ` paths is enforced between grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    /// Indicator that every grid value is positive.
    GridIndicator,
    /// Exact survival probability of the continuous path given its grid
    /// values: a product of per-interval bridge survival factors.
    #[default]
    BridgeCorrected,
    /// `1 − e^{−2q₀q₁/σ²}` without sampling interior nodes; only valid for
    /// functionals of the endpoints.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub sigma: f64,
    pub a: f64,
    pub beta: f64,
    pub theta: f64,
    pub kappa: f64,
    pub n_samples: usize,
    pub n_points: usize,
    pub seed: u64,
    pub rho_proposal: Proposal,
    pub q0_proposal: Proposal,
    pub positivity: Positivity,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            a: 1.0,
            beta: 1.0,
            theta: 4.0,
            kappa: 0.125,
            n_samples: 200_000,
            n_points: grid::DEFAULT_POINTS,
            seed: 7,
            rho_proposal: Proposal::Auto,
            q0_proposal: Proposal::Auto,
            positivity: Positivity::BridgeCorrected,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        Dispersion::new(self.sigma)?;
        GridSpec::new(self.n_points)?;
        for (name, v) in [("a", self.a), ("theta", self.theta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::DomainError(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta > -1.0) {
            return Err(Error::DomainError(format!("beta must exceed -1, got {}", self.beta)));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::DomainError(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        if self.n_samples < 2 {
            return Err(Error::DomainError("need at least two samples".into()));
        }
        self.rho_proposal.validate()?;
        self.q0_proposal.validate()
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.n_points).expect("validated grid")
    }

    /// `α = β²/(2(β+1))`.
    pub fn alpha(&self) -> f64 {
        self.beta * self.beta / (2.0 * (self.beta + 1.0))
    }

    /// Half-normal matched to `e^{−a²q²/σ²}`.
    pub fn q0(&self) -> Result<Proposal> {
        self.q0_proposal.resolve(Proposal::HalfNormal { scale: self.sigma / (self.a * 2f64.sqrt()) })
    }

    /// Log-normal at the saddle of `e^{−κσ²/ρ²} e^{−a²ρ²/σ²}`.
    pub fn rho(&self) -> Result<Proposal> {
        let k = if self.kappa > 0.0 { self.kappa } else { 0.125 };
        let median = self.sigma * k.powf(0.25) / self.a.sqrt();
        self.rho_proposal.resolve(Proposal::LogNormal { median, log_sd: 0.75 })
    }
}

pub(crate) fn normal_pdf(x: f64, s: f64) -> f64 {
    (-0.5 * (x / s).powi(2)).exp() / ((2.0 * PI).sqrt() * s)
}

/// Bounded test functionals of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathFunctional {
    One,
    /// `1{x(1/2) < threshold}`.
    BelowAtHalf { threshold: f64 },
    /// `exp(−∫₀¹ x²)`.
    ExpNegSquareIntegral,
    /// `exp(−x(1)²)`.
    ExpNegEndSquare,
}

impl PathFunctional {
    pub fn eval(&self, x: &[f64], dt: f64) -> f64 {
        match *self {
            PathFunctional::One => 1.0,
            PathFunctional::BelowAtHalf { threshold } => {
                let m = (x.len() - 1) / 2;
                let v = if (x.len() - 1).is_multiple_of(2) { x[m] } else { 0.5 * (x[m] + x[m + 1]) };
                if v < threshold { 1.0 } else { 0.0 }
            }
            PathFunctional::ExpNegSquareIntegral => {
                let sq: f64 = x[1..x.len() - 1].iter().map(|v| v * v).sum::<f64>()
                    + 0.5 * (x[0] * x[0] + x[x.len() - 1].powi(2));
                (-sq * dt).exp()
            }
            PathFunctional::ExpNegEndSquare => (-x[x.len() - 1].powi(2)).exp(),
        }
    }

    fn needs_path(&self) -> bool {
        !matches!(self, PathFunctional::One)
    }
}

impl fmt::Display for PathFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFunctional::One => write!(f, "one"),
            PathFunctional::BelowAtHalf { threshold } => write!(f, "below_at_half({threshold})"),
            PathFunctional::ExpNegSquareIntegral => write!(f, "exp_neg_square_integral"),
            PathFunctional::ExpNegEndSquare => write!(f, "exp_neg_end_square"),
        }
    }
}

/// The three functionals used for the two-sided polar comparison.
pub fn standard_path_functionals() -> [PathFunctional; 3] {
    [
        PathFunctional::One,
        PathFunctional::BelowAtHalf { threshold: 1.0 },
        PathFunctional::ExpNegSquareIntegral,
    ]
}

/// Bounded test functionals of a diffeomorphism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffeoFunctional {
    One,
    /// `exp(−φ′(0))`.
    ExpNegDeriv0,
    /// `exp(−φ′(1))`.
    ExpNegDeriv1,
    /// `φ(1/2)`.
    PhiAtHalf,
}

impl DiffeoFunctional {
    pub fn eval(&self, phi: &Diffeo) -> f64 {
        match self {
            DiffeoFunctional::One => 1.0,
            DiffeoFunctional::ExpNegDeriv0 => (-phi.deriv0()).exp(),
            DiffeoFunctional::ExpNegDeriv1 => (-phi.deriv1()).exp(),
            DiffeoFunctional::PhiAtHalf => {
                use crate::diffeo::Reparam;
                phi.value(0.5)
            }
        }
    }
}

impl fmt::Display for DiffeoFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiffeoFunctional::One => "one",
            DiffeoFunctional::ExpNegDeriv0 => "exp_neg_deriv0",
            DiffeoFunctional::ExpNegDeriv1 => "exp_neg_deriv1",
            DiffeoFunctional::PhiAtHalf => "phi_at_half",
        };
        f.write_str(s)
    }
}

#[derive(Default)]
struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Survival weight of the path in `x` under `mode`.
fn survival(mode: Positivity, x: &[f64], sigma: f64, dt: f64) -> f64 {
    match mode {
        Positivity::GridIndicator => {
            if x.iter().all(|&v| v > 0.0) { 1.0 } else { 0.0 }
        }
        Positivity::BridgeCorrected | Positivity::ClosedForm => grid::bridge_survival(x, sigma, dt),
    }
}

fn endpoint_survival(q0: f64, q1: f64, sigma: f64) -> f64 {
    if q0 <= 0.0 || q1 <= 0.0 {
        0.0
    } else {
        -(-2.0 * q0 * q1 / (sigma * sigma)).exp_m1()
    }
}

/// `∫ δ(x(1) − θx(0)) e^{−a²x(0)²/σ²} w_σ(dx)` with `θ = cfg.theta` forced to
/// one for the plain damped identity; also the left side of the conditioned one.
fn endpoint_lhs(cfg: &EstimatorConfig, theta: f64, tag: u64, target: f64) -> Result<MCEstimate> {
    cfg.validate()?;
    let prop = cfg.q0()?;
    let g = cfg.grid();
    let (s, a, dt) = (cfg.sigma, cfg.a, g.dt());
    let mode = cfg.positivity;
    let [m] = run_chunked::<1, Scratch, _>(cfg.n_samples, cfg.seed, tag, |rng, sc| {
        let q0 = prop.sample(rng);
        let q1 = theta * q0;
        let w = normal_pdf(q1 - q0, s) * (-a * a * q0 * q0 / (s * s)).exp() / prop.pdf(q0);
        let surv = match mode {
            Positivity::ClosedForm => endpoint_survival(q0, q1, s),
            _ => {
                grid::fill_bridge(s, g, q0, q1, rng, &mut sc.a);
                survival(mode, &sc.a, s, dt)
            }
        };
        [w * surv]
    });
    Ok(MCEstimate::from_moments(&m, Some(target)))
}

/// Damped endpoint identity, left side; target `lemma1_rhs(a)`.
pub fn estimate_lemma1(cfg: &EstimatorConfig) -> Result<MCEstimate> {
    endpoint_lhs(cfg, 1.0, TAG_LEMMA1, oracles::lemma1_rhs(cfg.a)?)
}

/// Draws a `ξ` bridge `0 → end` with dispersion `s` into `buf` and returns
/// `N = ∫ e^ξ`.
fn xi_bridge_norm<R: Rng + ?Sized>(s: f64, g: GridSpec, end: f64, rng: &mut R, buf: &mut Vec<f64>) -> f64 {
    grid::fill_bridge(s, g, 0.0, end, rng, buf);
    let dt = g.dt();
    let n = buf.len();
    let inner: f64 = buf[1..n - 1].iter().map(|v| v.exp()).sum();
    dt * (inner + 0.5 * (buf[0].exp() + buf[n - 1].exp()))
}

/// `J(α)` at `α = β²/(2(β+1))`: `2 p_s(0) E[exp(−αρ²φ′(0)/σ²)]` over
/// `ξ` bridges `0 → 0` with `s = 2σ/ρ`.
pub fn estimate_j(cfg: &EstimatorConfig, rho: f64) -> Result<MCEstimate> {
    cfg.validate()?;
    let target = oracles::j_closed(cfg.beta, rho, cfg.sigma)?;
    let g = cfg.grid();
    let (sig, alpha) = (cfg.sigma, cfg.alpha());
    let s = 2.0 * sig / rho;
    let c = 2.0 * normal_pdf(0.0, s);
    let [m] = run_chunked::<1, Scratch, _>(cfg.n_samples, cfg.seed, TAG_J, |rng, sc| {
        let n = xi_bridge_norm(s, g, 0.0, rng, &mut sc.a);
        [c * (-alpha * rho * rho / (sig * sig * n)).exp()]
    });
    Ok(MCEstimate::from_moments(&m, Some(target)))
}

fn lemma4_integrand(n: f64, rho: f64, sig: f64, alpha: f64) -> f64 {
    (-alpha * rho * rho / (sig * sig * n)).exp() / (n * (2.0 * PI).sqrt() * sig)
}

/// Derivative-weighted bridge expectation: `(1/(√(2π)σ)) E[φ′(0) exp(−αρ²φ′(0)/σ²)]` over the
/// same bridges as [`estimate_j`].
pub fn estimate_lemma4(cfg: &EstimatorConfig, rho: f64) -> Result<MCEstimate> {
    cfg.validate()?;
    let target = oracles::lemma4_rhs(cfg.beta, rho, cfg.sigma)?;
    let g = cfg.grid();
    let (sig, alpha) = (cfg.sigma, cfg.alpha());
    let s = 2.0 * sig / rho;
    let [m] = run_chunked::<1, Scratch, _>(cfg.n_samples, cfg.seed, TAG_LEMMA4, |rng, sc| {
        let n = xi_bridge_norm(s, g, 0.0, rng, &mut sc.a);
        [lemma4_integrand(n, rho, sig, alpha)]
    });
    Ok(MCEstimate::from_moments(&m, Some(target)))
}

/// `I₂`: the derivative-weighted integrand integrated against `e^{−σ²/(8ρ²)} dρ` with
/// `ρ` importance-sampled.
pub fn estimate_i2(cfg: &EstimatorConfig) -> Result<MCEstimate> {
    cfg.validate()?;
    let target = oracles::i2_closed(cfg.beta)?;
    let g = cfg.grid();
    let (sig, alpha) = (cfg.sigma, cfg.alpha());
    let l = cfg.beta.ln_1p().abs().max(1e-3);
    let prop = cfg
        .rho_proposal
        .resolve(Proposal::LogNormal { median: sig / (2.0 * l).sqrt(), log_sd: 0.75 })?;
    let [m] = run_chunked::<1, Scratch, _>(cfg.n_samples, cfg.seed, TAG_I2, |rng, sc| {
        let rho = prop.sample(rng);
        let n = xi_bridge_norm(2.0 * sig / rho, g, 0.0, rng, &mut sc.a);
        let w = (-sig * sig / (8.0 * rho * rho)).exp() / prop.pdf(rho);
        [w * lemma4_integrand(n, rho, sig, alpha)]
    });
    Ok(MCEstimate::from_moments(&m, Some(target)))
}

/// Two estimates of the same quantity from independent samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSided {
    pub lhs: MCEstimate,
    pub rhs: MCEstimate,
    /// `(lhs − rhs)/√(se_l² + se_r²)`.
    pub z: f64,
}

impl TwoSided {
    pub fn new(lhs: MCEstimate, rhs: MCEstimate) -> Self {
        Self { lhs, rhs, z: combined_z(&lhs, &rhs) }
    }

    pub fn agrees(&self, k: f64) -> bool {
        self.z.abs() <= k
    }
}

/// Left side of the polar identity:
/// `∫ F(x) e^{−a²x(0)²/σ²} w_σ(dx)` for each functional.
pub fn theorem1_lhs(cfg: &EstimatorConfig, fs: &[PathFunctional]) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    if cfg.positivity == Positivity::ClosedForm {
        return Err(Error::DomainError(
            "closed-form survival only applies to endpoint functionals".into(),
        ));
    }
    let prop = cfg.q0()?;
    let g = cfg.grid();
    let (s, a, dt, mode) = (cfg.sigma, cfg.a, g.dt(), cfg.positivity);
    let ms = run_chunked_vec(cfg.n_samples, cfg.seed, TAG_T1_LHS, fs.len(), |rng, sc: &mut Scratch, out| {
        let q0 = prop.sample(rng);
        grid::fill_brownian(s, g, q0, rng, &mut sc.a);
        let w = (-a * a * q0 * q0 / (s * s)).exp() / prop.pdf(q0) * survival(mode, &sc.a, s, dt);
        for (o, f) in out.iter_mut().zip(fs) {
            *o = if w == 0.0 { 0.0 } else { w * f.eval(&sc.a, dt) };
        }
    });
    Ok(ms.iter().map(|m| MCEstimate::from_moments(m, None)).collect())
}

/// Right side for several exponent constants sharing one sample stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhsScan {
    pub kappas: Vec<f64>,
    /// `estimates[j][k]`: constant `j`, functional `k`.
    pub estimates: Vec<Vec<MCEstimate>>,
    pub ess: Vec<f64>,
}

/// Right side of the polar identity:
/// `∫₀^∞ ∫ F(x_{ρ,φ}) e^{−a²ρ²φ′(0)/σ²} e^{−κσ²/ρ²} (φ′(0)φ′(1))^{3/4} μ_{2σ/ρ}(dφ) dρ`.
pub fn theorem1_rhs(cfg: &EstimatorConfig, fs: &[PathFunctional], kappas: &[f64]) -> Result<RhsScan> {
    cfg.validate()?;
    let prop = cfg.rho()?;
    let g = cfg.grid();
    let (sig, a, dt) = (cfg.sigma, cfg.a, g.dt());
    let nf = fs.len();
    let width = nf + 1;
    let need_path = fs.iter().any(|f| f.needs_path());
    let ms = run_chunked_vec(cfg.n_samples, cfg.seed, TAG_T1_RHS, kappas.len() * width, |rng, sc: &mut Scratch, out| {
        let rho = prop.sample(rng);
        grid::fill_brownian(2.0 * sig / rho, g, 0.0, rng, &mut sc.a);
        let phi = Diffeo::from_xi_values(g, std::mem::take(&mut sc.a));
        let (d0, d1) = (phi.deriv0(), phi.deriv1());
        let base = (-a * a * rho * rho * d0 / (sig * sig)).exp() * (d0 * d1).powf(0.75) / prop.pdf(rho);
        let x = if need_path && base > 0.0 {
            Some(polar::reconstruct(&PolarPair::new(rho, phi.clone()).expect("positive radius")))
        } else {
            None
        };
        for (j, &k) in kappas.iter().enumerate() {
            let w = base * (-k * sig * sig / (rho * rho)).exp();
            let row = &mut out[j * width..(j + 1) * width];
            for (o, f) in row.iter_mut().zip(fs) {
                *o = match (&x, w > 0.0) {
                    (Some(x), true) => w * f.eval(x.values(), dt),
                    (None, true) => w * f.eval(&[1.0, 1.0, 1.0], dt),
                    _ => 0.0,
                };
            }
            row[nf] = w;
        }
        sc.a = phi.xi_values().to_vec();
    });
    let mut estimates = Vec::new();
    let mut ess = Vec::new();
    for j in 0..kappas.len() {
        let row = &ms[j * width..(j + 1) * width];
        estimates.push(row[..nf].iter().map(|m| MCEstimate::from_moments(m, None)).collect());
        ess.push(row[nf].effective_sample_size());
    }
    Ok(RhsScan { kappas: kappas.to_vec(), estimates, ess })
}

fn check_ess(ess: f64, n: usize) -> Result<()> {
    if ess < MIN_ESS_FRACTION * n as f64 {
        Err(Error::DegenerateWeights { ess, n })
    } else {
        Ok(())
    }
}

/// Two-sided polar check for one functional at `cfg.kappa`.
pub fn verify_theorem1(cfg: &EstimatorConfig, f: PathFunctional) -> Result<TwoSided> {
    let lhs = theorem1_lhs(cfg, &[f])?;
    let rhs = theorem1_rhs(cfg, &[f], &[cfg.kappa])?;
    check_ess(rhs.ess[0], cfg.n_samples)?;
    Ok(TwoSided::new(lhs[0], rhs.estimates[0][0]))
}

/// Outcome of sweeping the radial exponent constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaScan {
    pub functionals: Vec<PathFunctional>,
    pub lhs: Vec<MCEstimate>,
    pub rhs: RhsScan,
    /// `z[j][k]`: constant `j`, functional `k`.
    pub z: Vec<Vec<f64>>,
    /// The unique constant that agrees on every functional, if any.
    pub selected: Option<f64>,
}

impl KappaScan {
    pub fn agreeing(&self, k: f64) -> Vec<f64> {
        self.rhs
            .kappas
            .iter()
            .zip(&self.z)
            .filter(|(_, zs)| zs.iter().all(|z| z.abs() <= k))
            .map(|(&kappa, _)| kappa)
            .collect()
    }
}

/// Runs the left side once and the right side for every constant in `kappas`.
pub fn kappa_scan(cfg: &EstimatorConfig, fs: &[PathFunctional], kappas: &[f64]) -> Result<KappaScan> {
    let lhs = theorem1_lhs(cfg, fs)?;
    let rhs = theorem1_rhs(cfg, fs, kappas)?;
    for &e in &rhs.ess {
        check_ess(e, cfg.n_samples)?;
    }
    let z: Vec<Vec<f64>> = rhs.estimates.iter().map(|row| row.iter().zip(&lhs).map(|(r, l)| combined_z(l, r)).collect()).collect();
    let mut scan = KappaScan { functionals: fs.to_vec(), lhs, rhs, z, selected: None };
    let agree = scan.agreeing(3.0);
    if agree.len() == 1 {
        scan.selected = Some(agree[0]);
    }
    Ok(scan)
}

/// Endpoint-conditioned polar identity with `θ = cfg.theta`: left side by endpoint conditioning, right
/// side by conditioning `ξ(1) = 2 ln θ`.
pub fn verify_theorem2(cfg: &EstimatorConfig) -> Result<TwoSided> {
    cfg.validate()?;
    let theta = cfg.theta;
    let target = oracles::theorem2_lhs_closed(cfg.a, theta)?;
    let lhs = endpoint_lhs(cfg, theta, TAG_T2_LHS, target)?;
    let prop = cfg.rho()?;
    let g = cfg.grid();
    let (sig, a, kappa) = (cfg.sigma, cfg.a, cfg.kappa);
    let end = 2.0 * theta.ln();
    let [m, w] = run_chunked::<2, Scratch, _>(cfg.n_samples, cfg.seed, TAG_T2_RHS, |rng, sc| {
        let rho = prop.sample(rng);
        let s = 2.0 * sig / rho;
        let n = xi_bridge_norm(s, g, end, rng, &mut sc.a);
        let d0 = 1.0 / n;
        let w = 2.0 * theta.sqrt() / rho * normal_pdf(end, s) * (-kappa * sig * sig / (rho * rho)).exp()
            / prop.pdf(rho);
        [w * d0 * (-a * a * rho * rho * d0 / (sig * sig)).exp(), w]
    });
    check_ess(w.effective_sample_size(), cfg.n_samples)?;
    Ok(TwoSided::new(lhs, MCEstimate::from_moments(&m, Some(target))))
}

/// Quasi-invariance comparison on one sample stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem3Result {
    /// `E[F(g⁻¹∘φ)]`.
    pub pullback: MCEstimate,
    /// `E[p_g(φ) F(φ)]`.
    pub weighted: MCEstimate,
    /// `E[p_g(φ)]`, target 1.
    pub mass: MCEstimate,
    /// Paired difference `F(g⁻¹∘φ) − p_g(φ)F(φ)`, target 0.
    pub difference: MCEstimate,
}

impl Theorem3Result {
    pub fn agrees(&self, k: f64) -> bool {
        self.difference.within(k)
    }
}

/// [`verify_theorem3_with`] for the Möbius map `g_β`, `β = cfg.beta`.
pub fn verify_theorem3(cfg: &EstimatorConfig, f: DiffeoFunctional) -> Result<Theorem3Result> {
    verify_theorem3_with(cfg, &SmoothOuterMap::mobius(cfg.beta)?, f)
}

/// Compares `E[F(g⁻¹∘φ)]` with `E[p_g(φ)F(φ)]` for `φ ~ μ_σ`.
pub fn verify_theorem3_with(cfg: &EstimatorConfig, g: &SmoothOuterMap, f: DiffeoFunctional) -> Result<Theorem3Result> {
    cfg.validate()?;
    let grid = cfg.grid();
    let sigma = Dispersion::new(cfg.sigma)?;
    let mobius_inv = match g {
        SmoothOuterMap::Mobius(m) => Some(m.inverse_map()),
        SmoothOuterMap::Identity => Some(MobiusDiffeo::identity()),
        _ => None,
    };
    let [pb, wt, diff, mass] = run_chunked::<4, Scratch, _>(cfg.n_samples, cfg.seed, TAG_T3, |rng, sc| {
        grid::fill_brownian(sigma.get(), grid, 0.0, rng, &mut sc.b);
        let phi = Diffeo::from_xi_values(grid, sc.b.clone());
        let psi = match &mobius_inv {
            Some(m) => diffeo::compose(m, &phi),
            None => diffeo::compose(&Inverse(g), &phi),
        };
        let p = schwarzian::radon_nikodym(g, &phi, sigma);
        let (x, y) = (f.eval(&psi), p * f.eval(&phi));
        [x, y, x - y, p]
    });
    let est = |m: &Moments| MCEstimate::from_moments(m, None);
    Ok(Theorem3Result {
        pullback: est(&pb),
        weighted: est(&wt),
        mass: MCEstimate::from_moments(&mass, Some(1.0)),
        difference: MCEstimate::from_moments(&diff, Some(0.0)),
    })
}
