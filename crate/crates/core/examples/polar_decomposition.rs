//! A positive path split into orbit radius and diffeomorphism, rebuilt, and
//! moved along its orbit by the reparametrisation action.
//!
//! Usage: `cargo run --release --example polar_decomposition`

use wiener_polar::diffeo::MobiusDiffeo;
use wiener_polar::grid::{self, GridSpec, Path};
use wiener_polar::polar;

fn sup(a: &Path, b: &Path) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() -> wiener_polar::Result<()> {
    let f = |t: f64| 1.0 + 0.6 * (7.0 * t).sin().powi(2) + t;
    println!("{:>6} {:>12} {:>12}", "points", "rho", "round trip");
    for n in [65, 129, 257, 513, 1025, 2049] {
        let x = Path::from_fn(GridSpec::new(n)?, f)?;
        let p = polar::decompose(&x)?;
        println!("{n:>6} {:>12.9} {:>12.2e}", p.rho(), sup(&x, &polar::reconstruct(&p)));
    }

    let x = Path::from_fn(GridSpec::new(1025)?, f)?;
    let rho = polar::rho_of(&x)?;
    for beta in [-0.5, 1.0, 4.0] {
        let y = grid::act(&MobiusDiffeo::new(beta)?, &x);
        println!("g_{beta} . x: rho {:.9} (rel change {:.1e}), x(1) {:.4} -> {:.4}", polar::rho_of(&y)?, (polar::rho_of(&y)? - rho).abs() / rho, x.last(), y.last());
    }

    match polar::decompose(&Path::from_fn(GridSpec::new(33)?, |t| t - 0.5)?) {
        Err(e) => println!("sign change rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
