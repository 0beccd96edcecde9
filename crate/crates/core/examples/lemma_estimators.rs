//! Bridge-conditioned estimators for the scalar path integrals, each printed
//! next to its closed form.
//!
//! Usage: `cargo run --release --example lemma_estimators [n_samples]`

use std::time::Instant;

use wiener_polar::montecarlo::{self, EstimatorConfig};
use wiener_polar::MCEstimate;

fn show(label: &str, e: &MCEstimate, secs: f64) {
    println!(
        "{label:<28} {:>10.6} ± {:.6}   target {:>10.6}   z {:>6.2}   {secs:.1}s",
        e.mean,
        e.std_err,
        e.target.unwrap_or(f64::NAN),
        e.z_score.unwrap_or(f64::NAN)
    );
}

fn main() -> wiener_polar::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let base = EstimatorConfig { n_samples: n, ..Default::default() };

    for a in [0.5, 1.0, 2.0] {
        let t = Instant::now();
        let e = montecarlo::estimate_lemma1(&EstimatorConfig { a, ..base })?;
        show(&format!("lemma1 a={a}"), &e, t.elapsed().as_secs_f64());
    }
    for (beta, rho) in [(1.0, 1.0), (0.5, 2.0)] {
        let cfg = EstimatorConfig { beta, ..base };
        let t = Instant::now();
        let e = montecarlo::estimate_j(&cfg, rho)?;
        show(&format!("J beta={beta} rho={rho}"), &e, t.elapsed().as_secs_f64());
        let t = Instant::now();
        let e = montecarlo::estimate_lemma4(&cfg, rho)?;
        show(&format!("lemma4 beta={beta} rho={rho}"), &e, t.elapsed().as_secs_f64());
    }
    for beta in [1.0, -0.5] {
        let t = Instant::now();
        let e = montecarlo::estimate_i2(&EstimatorConfig { beta, ..base })?;
        show(&format!("I2 beta={beta}"), &e, t.elapsed().as_secs_f64());
    }
    Ok(())
}
