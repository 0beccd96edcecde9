//! Left translation of `μ_σ` by an outer map compared with reweighting by its
//! density, for Möbius maps and a map with constant non-zero Schwarzian.
//!
//! Usage: `cargo run --release --example quasi_invariance [n_samples]`

use wiener_polar::montecarlo::{self, DiffeoFunctional, EstimatorConfig};
use wiener_polar::schwarzian::SmoothOuterMap;

fn main() -> wiener_polar::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let cfg = EstimatorConfig { n_samples: n, ..Default::default() };
    let maps = [
        ("mobius beta=0.5", SmoothOuterMap::mobius(0.5)?),
        ("mobius beta=1", SmoothOuterMap::mobius(1.0)?),
        ("exponential c=1", SmoothOuterMap::exponential(1.0)?),
    ];
    for (name, g) in &maps {
        for f in [DiffeoFunctional::ExpNegDeriv0, DiffeoFunctional::PhiAtHalf] {
            let r = montecarlo::verify_theorem3_with(&cfg, g, f)?;
            println!(
                "{name:<16} {f:<15} pullback {:.5}  weighted {:.5}  paired z {:>6.2}   E[p] {:.4} ± {:.4}",
                r.pullback.mean,
                r.weighted.mean,
                r.difference.z_score.unwrap_or(f64::NAN),
                r.mass.mean,
                r.mass.std_err
            );
        }
    }
    Ok(())
}
