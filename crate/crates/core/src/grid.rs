//! Uniform grids on `[0, 1]`, sampled paths and Brownian samplers.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::diffeo::Reparam;
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::rng::RngStream;

pub const DEFAULT_POINTS: usize = 513;

/// Uniform grid `t_i = i / (n_points - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    n_points: usize,
}

impl GridSpec {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::GridTooSmall(n_points));
        }
        Ok(Self { n_points })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_steps(&self) -> usize {
        self.n_points - 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps() as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        if i == self.n_steps() {
            1.0
        } else {
            i as f64 / self.n_steps() as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.t(i)).collect()
    }

    pub fn last(&self) -> usize {
        self.n_points - 1
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_points: DEFAULT_POINTS }
    }
}

/// Wiener dispersion `σ > 0`: increments over `Δt` have variance `σ²Δt`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Dispersion(f64);

impl Dispersion {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self(sigma))
        } else {
            Err(Error::InvalidDispersion(sigma))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A real path sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::LengthMismatch { expected: grid.n_points(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, (0..grid.n_points()).map(|i| f(grid.t(i))).collect())
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.n_points()] }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Shape-preserving cubic interpolant through the grid values.
    pub fn interpolant(&self) -> MonotoneCubic {
        MonotoneCubic::new(&self.grid.times(), &self.values)
    }

    /// Value at an arbitrary `t`; exact on grid nodes.
    pub fn value_at(&self, t: f64) -> f64 {
        let s = t * self.grid.n_steps() as f64;
        let i = s.round();
        if (s - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.values.len() {
            return self.values[i as usize];
        }
        self.interpolant().eval(t)
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.dt())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Path> {
        Path::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            wr.write_record([self.grid.t(i).to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Path> {
        let cols = read_grid_csv(r, &["t", "value"])?;
        let grid = GridSpec::new(cols[0].len())?;
        Path::new(grid, cols[1].clone())
    }
}

/// Reads a CSV with the given header, checks the first column is the uniform
/// grid on `[0, 1]` to 1e-12 and returns the columns.
pub(crate) fn read_grid_csv<R: Read>(r: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::Reader::from_reader(r);
    let h = rd.headers()?.clone();
    let got: Vec<&str> = h.iter().map(str::trim).collect();
    if got != header {
        return Err(Error::MalformedCsv(format!("expected header {header:?}, found {got:?}")));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for rec in rd.records() {
        let rec = rec?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::MalformedCsv(format!("cannot parse {field:?} as a number"))
            })?;
            cols[c].push(v);
        }
    }
    let n = cols[0].len();
    if n < 3 {
        return Err(Error::GridTooSmall(n));
    }
    for (row, &t) in cols[0].iter().enumerate() {
        if (t - row as f64 / (n - 1) as f64).abs() > 1e-12 {
            return Err(Error::NonUniformGrid { row, t });
        }
    }
    Ok(cols)
}

/// Composite trapezoid rule with uniform spacing `dt`.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    dt * (0.5 * (values[0] + values[n - 1]) + inner)
}

/// Running trapezoid integral, `out[0] = 0`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
}

/// `∫₀¹ p(t) dt` by the composite trapezoid rule on the path grid.
pub fn integrate(p: &Path) -> f64 {
    p.integral()
}

/// Fills `buf` with a Brownian path started at `start`.
pub fn fill_brownian<R: Rng + ?Sized>(sigma: f64, grid: GridSpec, start: f64, rng: &mut R, buf: &mut Vec<f64>) {
    let step = sigma * grid.dt().sqrt();
    buf.clear();
    buf.reserve(grid.n_points());
    let mut x = start;
    buf.push(x);
    for _ in 0..grid.n_steps() {
        let z: f64 = rng.sample(StandardNormal);
        x += step * z;
        buf.push(x);
    }
}

/// Fills `buf` with a Brownian bridge from `start` to `end`.
pub fn fill_bridge<R: Rng + ?Sized>(
    sigma: f64,
    grid: GridSpec,
    start: f64,
    end: f64,
    rng: &mut R,
    buf: &mut Vec<f64>,
) {
    fill_brownian(sigma, grid, 0.0, rng, buf);
    let free_end = buf[grid.last()];
    let shift = end - start - free_end;
    for (i, v) in buf.iter_mut().enumerate() {
        *v += start + grid.t(i) * shift;
    }
    buf[0] = start;
    buf[grid.last()] = end;
}

/// Sample of `W⁰_σ`: Brownian motion pinned at `x(0) = 0`.
pub fn sample_w0(sigma: Dispersion, grid: GridSpec, rng: RngStream) -> Path {
    let mut buf = Vec::new();
    fill_brownian(sigma.get(), grid, 0.0, &mut rng.rng(), &mut buf);
    Path::from_vec_unchecked(grid, buf)
}

/// Brownian motion with dispersion `σ` conditioned on both endpoints.
pub fn sample_bridge(sigma: Dispersion, grid: GridSpec, start: f64, end: f64, rng: RngStream) -> Path {
    let mut buf = Vec::new();
    fill_bridge(sigma.get(), grid, start, end, &mut rng.rng(), &mut buf);
    Path::from_vec_unchecked(grid, buf)
}

/// Probability that a Brownian path with dispersion `sigma` through the grid
/// values `x` stays positive between every pair of neighbouring nodes.
///
/// Each interval is an independent bridge given its endpoints, with
/// survival `1 - exp(-2 x_i x_{i+1} / (σ² Δt))`. Zero if any node is `≤ 0`.
pub fn bridge_survival(x: &[f64], sigma: f64, dt: f64) -> f64 {
    let c = 2.0 / (sigma * sigma * dt);
    let mut log_p = 0.0;
    for w in x.windows(2) {
        if w[0] <= 0.0 || w[1] <= 0.0 {
            return 0.0;
        }
        log_p += (-(-c * w[0] * w[1]).exp()).ln_1p();
    }
    log_p.exp()
}

/// Group action `(φx)(t) = x(φ⁻¹(t)) / √((φ⁻¹)′(t)) = x(φ⁻¹(t)) √(φ′(φ⁻¹(t)))`.
pub fn act<R: Reparam + ?Sized>(phi: &R, x: &Path) -> Path {
    let grid = x.grid();
    let ts = grid.times();
    let pre = phi.inverse_on(&ts);
    let xi = x.interpolant();
    let mut xs = Vec::with_capacity(ts.len());
    xi.eval_sorted(&pre, &mut xs);
    let values = xs
        .iter()
        .zip(&pre)
        .map(|(&v, &s)| v * (0.5 * phi.log_deriv(s)).exp())
        .collect();
    Path::from_vec_unchecked(grid, values)
}
