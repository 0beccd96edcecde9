//! Brownian motion and bridges on the grid: moment checks, the exact
//! survival weight of a discretised path, and CSV output.
//!
//! Usage: `cargo run --release --example brownian_paths [n_paths]`

use std::f64::consts::TAU;

use wiener_polar::grid::{self, Dispersion, GridSpec};
use wiener_polar::quadrature;
use wiener_polar::RngStream;

fn main() -> wiener_polar::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let g = GridSpec::new(257)?;
    let sigma = Dispersion::new(0.8)?;
    let mid = g.last() / 2;

    let (mut s1, mut s2, mut b2) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let w = grid::sample_w0(sigma, g, RngStream::new(1, i));
        s1 += w.last();
        s2 += w.last() * w.last();
        let b = grid::sample_bridge(sigma, g, 0.0, 0.0, RngStream::new(2, i));
        b2 += b.values()[mid].powi(2);
    }
    let nf = n as f64;
    println!("W0:     mean x(1) {:+.4}  var x(1) {:.4} (expect {:.4})", s1 / nf, s2 / nf, sigma.get().powi(2));
    println!("bridge: var x(1/2) {:.4} (expect {:.4})", b2 / nf, sigma.get().powi(2) / 4.0);

    // Survival of the continuous path between grid values, from x0 = 1.
    let (mut hit, mut weight) = (0.0, 0.0);
    let mut buf = Vec::new();
    let mut rng = RngStream::new(3, 0).rng();
    for _ in 0..n {
        grid::fill_brownian(sigma.get(), g, 1.0, &mut rng, &mut buf);
        let on_grid = buf.iter().all(|&v| v > 0.0);
        hit += on_grid as u8 as f64;
        if on_grid {
            weight += grid::bridge_survival(&buf, sigma.get(), g.dt());
        }
    }
    // P(min_{[0,1]} x > 0) = 1 − 2Φ(−x0/σ)
    let c = 1.0 / sigma.get();
    let exact = quadrature::integrate(|z| (-0.5 * z * z).exp() / TAU.sqrt(), -c, c, 1e-12, 0.0)?.value;
    println!("positivity: grid indicator {:.4}  bridge corrected {:.4}  exact {:.4}", hit / nf, weight / nf, exact);

    let w = grid::sample_w0(sigma, GridSpec::new(9)?, RngStream::new(4, 0));
    let mut out = Vec::new();
    w.write_csv(&mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}

