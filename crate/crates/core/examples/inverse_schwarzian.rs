//! Maps with prescribed Schwarzian derivative, found by fixed-point
//! iteration, and the quasi-invariance density they induce.
//!
//! Usage: `cargo run --release --example inverse_schwarzian`

use wiener_polar::diffeo::sample_mu;
use wiener_polar::grid::{Dispersion, GridSpec, Path};
use wiener_polar::schwarzian::{self, SmoothOuterMap};
use wiener_polar::{Reparam, RngStream};

type Target = (&'static str, fn(f64) -> f64);

fn main() -> wiener_polar::Result<()> {
    let g = GridSpec::new(2049)?;
    let targets: [Target; 3] = [
        ("v = 1/4", |_| 0.25),
        ("v = -t/5", |t| -0.2 * t),
        ("v = cos(9t)/5", |t| 0.2 * (9.0 * t).cos()),
    ];
    for (name, v) in &targets {
        let v = Path::from_fn(g, *v)?;
        let sol = schwarzian::schwarzian_inverse(&v)?;
        let m = sol.grid_map();
        let res = m.schwarzian_values().iter().zip(v.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let ratios = sol.contraction_ratios();
        println!(
            "{name:<14} {:>2} iterations  residual {res:.1e}  f''(0)/f'(0) {:+.4}  max ratio {:.3}  f(1/2) {:.5}",
            sol.step_norms.len(),
            m.d2_values()[0] / m.d1_values()[0],
            ratios.iter().copied().fold(0.0, f64::max),
            sol.map.value(0.5)
        );
    }
    match schwarzian::schwarzian_inverse(&Path::from_fn(g, |_| 0.3)?) {
        Err(e) => println!("v = 0.3 rejected: {e}"),
        Ok(_) => unreachable!(),
    }

    let sigma = Dispersion::new(1.0)?;
    let grid = GridSpec::new(513)?;
    for (name, map) in [("mobius 1", SmoothOuterMap::mobius(1.0)?), ("exp c=1", SmoothOuterMap::exponential(1.0)?)] {
        let p = (0..4)
            .map(|i| schwarzian::radon_nikodym(&map, &sample_mu(sigma, grid, RngStream::new(6, i)), sigma))
            .map(|p| format!("{p:.4}"))
            .collect::<Vec<_>>();
        println!("density of {name} at four draws: {}", p.join(" "));
    }
    Ok(())
}
