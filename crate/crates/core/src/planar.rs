//! Nonvanishing complex paths in the coordinates `(r, φ, α, η)`:
//! `z(t) = r √(φ′(φ⁻¹(t))) · exp(2πiα + iη(φ⁻¹(t)))`.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::diffeo::{Diffeo, Reparam};
use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, Path};
use crate::montecarlo::{EstimatorConfig, Proposal, TwoSided, MIN_ESS_FRACTION};
use crate::polar::{self, PolarPair};
use crate::stats::{run_chunked_vec, MCEstimate};

pub(crate) const TAG_T4_LHS: u64 = 10;
pub(crate) const TAG_T4_RHS: u64 = 11;

/// Default guard on principal phase increments between neighbouring nodes.
pub const DEFAULT_MAX_INCREMENT: f64 = 0.9 * PI;

/// Modulus below which a path counts as vanishing, relative to its maximum.
const VANISH_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPath {
    re: Path,
    im: Path,
}

impl ComplexPath {
    pub fn new(re: Path, im: Path) -> Result<Self> {
        if re.grid() != im.grid() {
            return Err(Error::LengthMismatch { expected: re.grid().n_points(), got: im.grid().n_points() });
        }
        Ok(Self { re, im })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let zs: Vec<Complex64> = grid.times().into_iter().map(f).collect();
        Self::from_values(grid, &zs)
    }

    pub fn from_values(grid: GridSpec, zs: &[Complex64]) -> Result<Self> {
        Self::new(
            Path::new(grid, zs.iter().map(|z| z.re).collect())?,
            Path::new(grid, zs.iter().map(|z| z.im).collect())?,
        )
    }

    pub fn grid(&self) -> GridSpec {
        self.re.grid()
    }

    pub fn re(&self) -> &Path {
        &self.re
    }

    pub fn im(&self) -> &Path {
        &self.im
    }

    pub fn at(&self, i: usize) -> Complex64 {
        Complex64::new(self.re.values()[i], self.im.values()[i])
    }

    pub fn values(&self) -> Vec<Complex64> {
        (0..self.grid().n_points()).map(|i| self.at(i)).collect()
    }

    pub fn modulus(&self) -> Path {
        let v = (0..self.grid().n_points()).map(|i| self.at(i).norm()).collect();
        Path::from_vec_unchecked(self.grid(), v)
    }

    /// `∫₀¹ |z|⁻²`.
    pub fn inverse_square_integral(&self) -> f64 {
        let v: Vec<f64> = (0..self.grid().n_points()).map(|i| 1.0 / self.at(i).norm_sqr()).collect();
        grid::trapezoid(&v, self.grid().dt())
    }

    pub fn sup_distance(&self, other: &ComplexPath) -> f64 {
        (0..self.grid().n_points()).map(|i| (self.at(i) - other.at(i)).norm()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "re", "im"])?;
        for i in 0..self.grid().n_points() {
            let z = self.at(i);
            wr.write_record([self.grid().t(i).to_string(), z.re.to_string(), z.im.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<ComplexPath> {
        let cols = grid::read_grid_csv(r, &["t", "re", "im"])?;
        let grid = GridSpec::new(cols[0].len())?;
        Self::new(Path::new(grid, cols[1].clone())?, Path::new(grid, cols[2].clone())?)
    }
}

/// `(r, φ, α, η)` with `α ∈ [0, 1)` and `η(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarTuple2D {
    r: f64,
    phi: Diffeo,
    alpha: f64,
    eta: Path,
}

impl PolarTuple2D {
    pub fn new(r: f64, phi: Diffeo, alpha: f64, eta: Path) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::DomainError(format!("r must be positive, got {r}")));
        }
        if eta.first() != 0.0 {
            return Err(Error::DomainError(format!("eta(0) = {} must be 0", eta.first())));
        }
        if eta.grid() != phi.grid() {
            return Err(Error::LengthMismatch { expected: phi.grid().n_points(), got: eta.grid().n_points() });
        }
        Ok(Self { r, phi, alpha: alpha.rem_euclid(1.0), eta })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> &Diffeo {
        &self.phi
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> &Path {
        &self.eta
    }
}

/// `L`: coordinates to path.
pub fn l_map(p: &PolarTuple2D) -> ComplexPath {
    let g = p.phi.grid();
    let modulus = polar::reconstruct(&PolarPair::new(p.r, p.phi.clone()).expect("validated radius"));
    let pre = p.phi.inverse_on(&g.times());
    let mut eta = Vec::with_capacity(pre.len());
    p.eta.interpolant().eval_sorted(&pre, &mut eta);
    eta[0] = 0.0;
    eta[g.last()] = p.eta.last();
    let zs: Vec<Complex64> = modulus
        .values()
        .iter()
        .zip(&eta)
        .map(|(&m, &e)| Complex64::from_polar(m, TAU * p.alpha + e))
        .collect();
    ComplexPath::from_values(g, &zs).expect("finite path")
}

/// Continuous argument along the grid with `θ(0) = 0`, built from principal
/// increments no larger than `max_increment`.
pub fn unwrapped_argument(z: &ComplexPath, max_increment: f64) -> Result<Vec<f64>> {
    let n = z.grid().n_points();
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let d = (z.at(i + 1) / z.at(i)).arg();
        if d.abs() >= max_increment {
            return Err(Error::BranchJump { index: i, increment: d });
        }
        acc += d;
        out.push(acc);
    }
    Ok(out)
}

/// `L⁻¹` with the default increment guard.
pub fn l_inv(z: &ComplexPath) -> Result<PolarTuple2D> {
    l_inv_with(z, DEFAULT_MAX_INCREMENT)
}

/// `L⁻¹`: `(r, φ)` from the modulus, `α` from `arg z(0)`, and
/// `η(τ) = θ(φ(τ))` for the unwrapped argument `θ`.
pub fn l_inv_with(z: &ComplexPath, max_increment: f64) -> Result<PolarTuple2D> {
    let m = z.modulus();
    let top = m.max();
    if let Some((index, &modulus)) =
        m.values().iter().enumerate().find(|(_, &v)| !(v > VANISH_RATIO * top))
    {
        return Err(Error::VanishingPath { index, modulus });
    }
    let theta = unwrapped_argument(z, max_increment)?;
    let (r, phi) = polar::decompose(&m)?.into_parts();
    let g = z.grid();
    let th = Path::from_vec_unchecked(g, theta);
    let mut eta = Vec::with_capacity(g.n_points());
    th.interpolant().eval_sorted(phi.phi_values(), &mut eta);
    eta[0] = 0.0;
    eta[g.last()] = th.last();
    let alpha = (z.at(0).arg() / TAU).rem_euclid(1.0);
    PolarTuple2D::new(r, phi, alpha, Path::from_vec_unchecked(g, eta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedComplexPath {
    pub path: ComplexPath,
    pub weight: f64,
}

fn fill_complex_brownian<R: Rng + ?Sized>(
    sigma: f64,
    g: GridSpec,
    z0: Complex64,
    rng: &mut R,
    re: &mut Vec<f64>,
    im: &mut Vec<f64>,
) {
    grid::fill_brownian(sigma, g, z0.re, rng, re);
    grid::fill_brownian(sigma, g, z0.im, rng, im);
}

/// Start point `z(0) = q e^{iθ}` with `q` from `prop` and `θ` uniform; the
/// returned weight is the Lebesgue density over the proposal density.
fn sample_start<R: Rng + ?Sized>(prop: &Proposal, rng: &mut R) -> (Complex64, f64) {
    let q = prop.sample(rng);
    let th: f64 = rng.random::<f64>() * TAU;
    (Complex64::from_polar(q, th), TAU * q / prop.pdf(q))
}

/// A draw of `w^C_σ = W_σ ⊗ W_σ` with importance-sampled start.
pub fn sample_wc<R: Rng + ?Sized>(sigma: f64, g: GridSpec, q0: &Proposal, rng: &mut R) -> WeightedComplexPath {
    let (z0, w) = sample_start(q0, rng);
    let (mut re, mut im) = (Vec::new(), Vec::new());
    fill_complex_brownian(sigma, g, z0, rng, &mut re, &mut im);
    WeightedComplexPath {
        path: ComplexPath::new(Path::from_vec_unchecked(g, re), Path::from_vec_unchecked(g, im)).expect("same grid"),
        weight: w,
    }
}

/// Radial weight of the candidate measure
/// `L_α · r · e^{−κσ²/r²} · φ′(0)φ′(1) μ_{2σ/r}(dφ) W⁰_{σ/r}(dη) dr dα`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarsigmaWeight {
    pub radial_kappa: f64,
    /// Total length assigned to the `α` circle.
    pub alpha_length: f64,
}

impl VarsigmaWeight {
    /// The nominal weight: `κ = 1/4`, unit circle.
    pub const NOMINAL: VarsigmaWeight = VarsigmaWeight { radial_kappa: 0.25, alpha_length: 1.0 };
    /// The weight obtained by writing `d²z(0)` in polar form: no radial
    /// exponential and a circle of length `2π`.
    pub const DERIVED: VarsigmaWeight = VarsigmaWeight { radial_kappa: 0.0, alpha_length: TAU };

    /// The sweep over the two open normalisation questions.
    pub fn sweep() -> [VarsigmaWeight; 4] {
        [
            VarsigmaWeight { radial_kappa: 0.25, alpha_length: 1.0 },
            VarsigmaWeight { radial_kappa: 0.125, alpha_length: 1.0 },
            VarsigmaWeight { radial_kappa: 0.25, alpha_length: TAU },
            VarsigmaWeight { radial_kappa: 0.125, alpha_length: TAU },
        ]
    }

    fn factor(&self, sigma: f64, r: f64) -> f64 {
        self.alpha_length * r * (-self.radial_kappa * sigma * sigma / (r * r)).exp()
    }
}

/// Default radial proposal for the planar sampler.
pub fn default_r_proposal(sigma: f64) -> Proposal {
    Proposal::LogNormal { median: 0.8 * sigma.sqrt(), log_sd: 0.6 }
}

/// A draw of the candidate measure with weight `w`.
pub fn sample_varsigma<R: Rng + ?Sized>(
    sigma: f64,
    g: GridSpec,
    r_prop: &Proposal,
    w: VarsigmaWeight,
    rng: &mut R,
) -> WeightedComplexPath {
    let (tuple, rr) = draw_tuple(sigma, g, r_prop, rng);
    let weight = rr.structural * w.factor(sigma, tuple.r);
    WeightedComplexPath { path: l_map(&tuple), weight }
}

struct RadialDraw {
    /// `φ′(0)φ′(1)` over the proposal density of `r`.
    structural: f64,
}

fn draw_tuple<R: Rng + ?Sized>(sigma: f64, g: GridSpec, r_prop: &Proposal, rng: &mut R) -> (PolarTuple2D, RadialDraw) {
    let r = r_prop.sample(rng);
    let mut xi = Vec::new();
    grid::fill_brownian(2.0 * sigma / r, g, 0.0, rng, &mut xi);
    let phi = Diffeo::from_xi_values(g, xi);
    let mut eta = Vec::new();
    grid::fill_brownian(sigma / r, g, 0.0, rng, &mut eta);
    let alpha: f64 = rng.random();
    let structural = phi.deriv0() * phi.deriv1() / r_prop.pdf(r);
    let tuple = PolarTuple2D::new(r, phi, alpha, Path::from_vec_unchecked(g, eta)).expect("valid draw");
    (tuple, RadialDraw { structural })
}

/// Orbit damping `e^{−c∫|z|⁻²}` shared by the planar functionals.
pub const ORBIT_DAMPING: f64 = 0.25;

/// Bounded functionals of a complex path, each carrying
/// `e^{−|z(0)|²} e^{−c∫|z|⁻²}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexFunctional {
    Mass,
    /// Times `cos(arg z(1) − arg z(0))`.
    PhaseCos,
    /// Times `e^{−∫|z|²}`; depends on the modulus only.
    ModulusSquareIntegral,
}

impl ComplexFunctional {
    pub const ALL: [ComplexFunctional; 3] =
        [ComplexFunctional::Mass, ComplexFunctional::PhaseCos, ComplexFunctional::ModulusSquareIntegral];

    pub fn eval(&self, z: &ComplexPath) -> f64 {
        let z0 = z.at(0);
        let damp = (-z0.norm_sqr() - ORBIT_DAMPING * z.inverse_square_integral()).exp();
        let g = match self {
            ComplexFunctional::Mass => 1.0,
            ComplexFunctional::PhaseCos => {
                let z1 = z.at(z.grid().last());
                (z1 * z0.conj()).re / (z1.norm() * z0.norm())
            }
            ComplexFunctional::ModulusSquareIntegral => {
                let sq: Vec<f64> = (0..z.grid().n_points()).map(|i| z.at(i).norm_sqr()).collect();
                (-grid::trapezoid(&sq, z.grid().dt())).exp()
            }
        };
        damp * g
    }
}

impl std::fmt::Display for ComplexFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ComplexFunctional::Mass => "mass",
            ComplexFunctional::PhaseCos => "phase_cos",
            ComplexFunctional::ModulusSquareIntegral => "modulus_square_integral",
        })
    }
}

fn planar_q0(cfg: &EstimatorConfig) -> Result<Proposal> {
    match cfg.q0_proposal {
        Proposal::Auto => Ok(Proposal::HalfNormal { scale: 0.5f64.sqrt() }),
        p => {
            p.sample_check()?;
            Ok(p)
        }
    }
}

fn planar_r(cfg: &EstimatorConfig) -> Result<Proposal> {
    match cfg.rho_proposal {
        Proposal::Auto => Ok(default_r_proposal(cfg.sigma)),
        p => {
            p.sample_check()?;
            Ok(p)
        }
    }
}

/// `E_{w^C}[F]` for each functional.
pub fn theorem4_lhs(cfg: &EstimatorConfig, fs: &[ComplexFunctional]) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    let prop = planar_q0(cfg)?;
    let g = cfg.grid();
    let sigma = cfg.sigma;
    let ms = run_chunked_vec(cfg.n_samples, cfg.seed, TAG_T4_LHS, fs.len(), |rng, _: &mut (), out| {
        let s = sample_wc(sigma, g, &prop, rng);
        for (o, f) in out.iter_mut().zip(fs) {
            *o = s.weight * f.eval(&s.path);
        }
    });
    Ok(ms.iter().map(|m| MCEstimate::from_moments(m, None)).collect())
}

/// Candidate-measure side for several weights sharing one sample stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarsigmaScan {
    pub weights: Vec<VarsigmaWeight>,
    /// `estimates[j][k]`: weight `j`, functional `k`.
    pub estimates: Vec<Vec<MCEstimate>>,
    /// Kish effective sample size of `w·F` per weight and functional.
    pub ess: Vec<Vec<f64>>,
}

pub fn theorem4_rhs(cfg: &EstimatorConfig, fs: &[ComplexFunctional], ws: &[VarsigmaWeight]) -> Result<VarsigmaScan> {
    cfg.validate()?;
    let prop = planar_r(cfg)?;
    let g = cfg.grid();
    let sigma = cfg.sigma;
    let nf = fs.len();
    let ms = run_chunked_vec(cfg.n_samples, cfg.seed, TAG_T4_RHS, ws.len() * nf * 2, |rng, _: &mut (), out| {
        let (tuple, rr) = draw_tuple(sigma, g, &prop, rng);
        let z = l_map(&tuple);
        let vals: Vec<f64> = fs.iter().map(|f| f.eval(&z)).collect();
        for (j, w) in ws.iter().enumerate() {
            let weight = rr.structural * w.factor(sigma, tuple.r);
            for (k, v) in vals.iter().enumerate() {
                let x = weight * v;
                out[2 * (j * nf + k)] = x;
                out[2 * (j * nf + k) + 1] = x.abs();
            }
        }
    });
    let mut estimates = Vec::new();
    let mut ess = Vec::new();
    for j in 0..ws.len() {
        estimates.push((0..nf).map(|k| MCEstimate::from_moments(&ms[2 * (j * nf + k)], None)).collect());
        ess.push((0..nf).map(|k| ms[2 * (j * nf + k) + 1].effective_sample_size()).collect());
    }
    Ok(VarsigmaScan { weights: ws.to_vec(), estimates, ess })
}

/// Two-sided comparison of one functional under one candidate weight.
pub fn verify_theorem4(cfg: &EstimatorConfig, f: ComplexFunctional, w: VarsigmaWeight) -> Result<TwoSided> {
    let lhs = theorem4_lhs(cfg, &[f])?;
    let rhs = theorem4_rhs(cfg, &[f], &[w])?;
    let ess = rhs.ess[0][0];
    if ess < MIN_ESS_FRACTION * cfg.n_samples as f64 {
        return Err(Error::DegenerateWeights { ess, n: cfg.n_samples });
    }
    Ok(TwoSided::new(lhs[0], rhs.estimates[0][0]))
}

/// Left side once, candidate side for every weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem4Sweep {
    pub functionals: Vec<ComplexFunctional>,
    pub lhs: Vec<MCEstimate>,
    pub rhs: VarsigmaScan,
    pub z: Vec<Vec<f64>>,
}

impl Theorem4Sweep {
    /// Weights that agree on every functional within `k` combined SE.
    pub fn agreeing(&self, k: f64) -> Vec<VarsigmaWeight> {
        self.rhs
            .weights
            .iter()
            .zip(&self.z)
            .filter(|(_, zs)| zs.iter().all(|z| z.abs() <= k))
            .map(|(w, _)| *w)
            .collect()
    }
}

pub fn theorem4_sweep(cfg: &EstimatorConfig, fs: &[ComplexFunctional], ws: &[VarsigmaWeight]) -> Result<Theorem4Sweep> {
    let lhs = theorem4_lhs(cfg, fs)?;
    let rhs = theorem4_rhs(cfg, fs, ws)?;
    let z = rhs
        .estimates
        .iter()
        .map(|row| row.iter().zip(&lhs).map(|(r, l)| crate::stats::combined_z(l, r)).collect())
        .collect();
    Ok(Theorem4Sweep { functionals: fs.to_vec(), lhs, rhs, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::sample_mu;
    use crate::grid::Dispersion;
    use crate::rng::RngStream;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n).unwrap()
    }

    #[test]
    fn trivial_tuples() {
        let g = grid(33);
        let one = PolarTuple2D::new(1.0, Diffeo::identity(g), 0.0, Path::zeros(g)).unwrap();
        let z = l_map(&one);
        assert!(z.values().iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let half = PolarTuple2D::new(1.0, Diffeo::identity(g), 0.5, Path::zeros(g)).unwrap();
        assert!(l_map(&half).values().iter().all(|v| (v + 1.0).norm() < 1e-15));
        assert_eq!(PolarTuple2D::new(1.0, Diffeo::identity(g), 1.25, Path::zeros(g)).unwrap().alpha(), 0.25);
    }

    #[test]
    fn modulus_factorises() {
        let g = grid(257);
        let phi = sample_mu(Dispersion::new(1.0).unwrap(), g, RngStream::new(1, 2));
        let eta = grid::sample_w0(Dispersion::new(0.7).unwrap(), g, RngStream::new(1, 3));
        let p = PolarTuple2D::new(1.7, phi.clone(), 0.3, eta).unwrap();
        let m = polar::reconstruct(&PolarPair::new(1.7, phi).unwrap());
        let z = l_map(&p);
        for (a, b) in z.modulus().values().iter().zip(m.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_and_loop_inverse() {
        let g = grid(129);
        let c = ComplexPath::from_fn(g, |_| Complex64::new(2.5, 0.0)).unwrap();
        let p = l_inv(&c).unwrap();
        assert!((p.r() - 2.5).abs() < 1e-14 && p.alpha() == 0.0);
        assert!(p.eta().values().iter().all(|&v| v.abs() < 1e-15));
        let lp = ComplexPath::from_fn(g, |t| Complex64::from_polar(1.0, TAU * t)).unwrap();
        let q = l_inv(&lp).unwrap();
        assert!((q.r() - 1.0).abs() < 1e-12);
        for i in 0..129 {
            assert!((q.eta().values()[i] - TAU * g.t(i)).abs() < 1e-9);
            assert!((q.phi().phi_values()[i] - g.t(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_errors() {
        let g = grid(65);
        let z = ComplexPath::from_fn(g, |t| Complex64::new(t - 0.5, 0.0)).unwrap();
        assert!(matches!(l_inv(&z), Err(Error::VanishingPath { .. })));
        let fast = ComplexPath::from_fn(g, |t| Complex64::from_polar(1.0, 30.0 * TAU * t)).unwrap();
        assert!(matches!(l_inv(&fast), Err(Error::BranchJump { .. })));
    }

    #[test]
    fn round_trip_converges() {
        let err = |n: usize| {
            let g = grid(n);
            let z = ComplexPath::from_fn(g, |t| {
                Complex64::new(1.5 + (3.0 * t).sin(), 0.4 * (5.0 * t).cos()) * Complex64::from_polar(1.0, 2.0 * t)
            })
            .unwrap();
            l_map(&l_inv(&z).unwrap()).sup_distance(&z)
        };
        let (e1, e2) = (err(129), err(513));
        assert!(e2 < 1e-4 && e2 < e1 / 4.0, "{e1} {e2}");
    }

    #[test]
    fn csv_round_trip() {
        let g = grid(17);
        let z = ComplexPath::from_fn(g, |t| Complex64::new(t, 1.0 - t)).unwrap();
        let mut buf = Vec::new();
        z.write_csv(&mut buf).unwrap();
        assert_eq!(ComplexPath::read_csv(buf.as_slice()).unwrap(), z);
    }

    #[test]
    fn rotation_moves_alpha() {
        let g = grid(65);
        let z = ComplexPath::from_fn(g, |t| Complex64::new(1.0 + t, 0.3)).unwrap();
        let rot = Complex64::from_polar(1.0, TAU * 0.2);
        let zr = ComplexPath::from_values(g, &z.values().iter().map(|v| v * rot).collect::<Vec<_>>()).unwrap();
        let (p, q) = (l_inv(&z).unwrap(), l_inv(&zr).unwrap());
        assert!(((q.alpha() - p.alpha()).rem_euclid(1.0) - 0.2).abs() < 1e-12);
        for f in ComplexFunctional::ALL {
            assert!((f.eval(&z) - f.eval(&zr)).abs() < 1e-12);
        }
    }
}
