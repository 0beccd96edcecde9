//! Streaming moments, Monte Carlo estimates and the deterministic chunked
//! parallel runner.
//!
//! Sample `i` always lives in chunk `i / CHUNK`, and every chunk draws from its
//! own [`RngStream`]. Chunk moments are merged in chunk order, so results do
//! not depend on how many worker threads executed the chunks.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::rng::RngStream;

pub const CHUNK: usize = 2048;

/// Welford accumulator; [`Moments::merge`] is Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64;
        self.n = n;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 { 0.0 } else { self.m2 / (self.n - 1) as f64 }
    }

    pub fn std_err(&self) -> f64 {
        if self.n < 2 { 0.0 } else { (self.variance() / self.n as f64).sqrt() }
    }

    /// Kish effective sample size when the pushed values are weights.
    pub fn effective_sample_size(&self) -> f64 {
        let n = self.n as f64;
        let pop_var = if self.n == 0 { 0.0 } else { self.m2 / n };
        let second = pop_var + self.mean * self.mean;
        if second == 0.0 { 0.0 } else { n * self.mean * self.mean / second }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub n: u64,
    pub target: Option<f64>,
    pub z_score: Option<f64>,
}

impl MCEstimate {
    pub fn from_moments(m: &Moments, target: Option<f64>) -> Self {
        let mut e = MCEstimate { mean: m.mean(), std_err: m.std_err(), n: m.n(), target: None, z_score: None };
        if let Some(t) = target {
            e = e.with_target(t);
        }
        e
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self.z_score = Some(z_score(self.mean - target, self.std_err));
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.mean *= c;
        self.std_err *= c.abs();
        if let Some(t) = self.target {
            self = self.with_target(t);
        }
        self
    }

    /// `|z| ≤ k`; estimates without a target pass trivially.
    pub fn within(&self, k: f64) -> bool {
        self.z_score.is_none_or(|z| z.abs() <= k)
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// `(mean_a − mean_b) / √(se_a² + se_b²)` for independent estimates.
pub fn combined_z(a: &MCEstimate, b: &MCEstimate) -> f64 {
    z_score(a.mean - b.mean, (a.std_err.powi(2) + b.std_err.powi(2)).sqrt())
}

/// Runs `n` samples of a `K`-output estimator over pre-assigned streams.
///
/// `f` receives the chunk's generator and a per-chunk scratch value.
pub fn run_chunked<const K: usize, S, F>(n: usize, seed: u64, tag: u64, f: F) -> [Moments; K]
where
    S: Default,
    F: Fn(&mut ChaCha8Rng, &mut S) -> [f64; K] + Sync,
{
    let v = run_chunked_vec(n, seed, tag, K, |r, s: &mut S, out| out.copy_from_slice(&f(r, s)));
    v.try_into().expect("runner returns K accumulators")
}

/// As [`run_chunked`] with a run-time output count; `f` fills `out`.
pub fn run_chunked_vec<S, F>(n: usize, seed: u64, tag: u64, k: usize, f: F) -> Vec<Moments>
where
    S: Default,
    F: Fn(&mut ChaCha8Rng, &mut S, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::chunk(seed, tag, c as u64).rng();
            let mut scratch = S::default();
            let mut acc = vec![Moments::default(); k];
            let mut out = vec![0.0; k];
            let len = CHUNK.min(n - c * CHUNK);
            for _ in 0..len {
                f(&mut rng, &mut scratch, &mut out);
                for (m, &v) in acc.iter_mut().zip(&out) {
                    m.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); k];
    for p in &parts {
        for (t, m) in total.iter_mut().zip(p) {
            t.merge(m);
        }
    }
    total
}
