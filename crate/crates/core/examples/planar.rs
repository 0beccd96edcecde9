//! Complex Brownian paths against the candidate polar measure on
//! `(r, φ, α, η)`, swept over the open weight normalisations.
//!
//! Usage: `cargo run --release --example planar [n_samples]`

use wiener_polar::montecarlo::EstimatorConfig;
use wiener_polar::planar::{self, ComplexFunctional, VarsigmaWeight};

fn main() -> wiener_polar::Result<()> {
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let cfg = EstimatorConfig { n_samples: n, ..Default::default() };
    let mut ws = VarsigmaWeight::sweep().to_vec();
    ws.push(VarsigmaWeight::DERIVED);
    let s = planar::theorem4_sweep(&cfg, &ComplexFunctional::ALL, &ws)?;
    for (f, l) in s.functionals.iter().zip(&s.lhs) {
        println!("lhs {f:<24} {:.5} ± {:.5}", l.mean, l.std_err);
    }
    for (j, w) in ws.iter().enumerate() {
        print!("kappa {:<6} alpha length {:<7.4}", w.radial_kappa, w.alpha_length);
        for (k, e) in s.rhs.estimates[j].iter().enumerate() {
            print!("  {:.5} (z {:>7.2}, ess {:>6.0})", e.mean, s.z[j][k], s.rhs.ess[j][k]);
        }
        println!();
    }
    println!("agreeing within 3 SE: {:?}", s.agreeing(3.0));
    Ok(())
}
