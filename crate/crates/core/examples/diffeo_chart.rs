//! The logarithmic chart on diffeomorphisms of `[0, 1]`: a Brownian `ξ`
//! becomes a draw from `μ_σ`, and composition with Möbius maps stays
//! inside the chart.
//!
//! Usage: `cargo run --release --example diffeo_chart [sigma]`

use wiener_polar::diffeo::{self, MobiusDiffeo, Reparam};
use wiener_polar::grid::{self, Dispersion, GridSpec};
use wiener_polar::RngStream;

fn main() -> wiener_polar::Result<()> {
    let sigma: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let g = GridSpec::new(513)?;
    let xi = grid::sample_w0(Dispersion::new(sigma)?, g, RngStream::new(3, 0));
    let phi = diffeo::a_inv(&xi)?;
    println!("xi(1) = {:+.4}   phi'(0) = {:.4}   phi'(1) = {:.4}   min phi' = {:.4}", xi.last(), phi.deriv0(), phi.deriv1(), phi.min_deriv());
    for t in [0.25, 0.5, 0.75] {
        println!("phi({t}) = {:.5}   phi^-1(phi({t})) = {:.8}", phi.value(t), phi.inverse(phi.value(t)));
    }

    let back = diffeo::a_map(&phi);
    let err = back.values().iter().zip(xi.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("chart round trip: {err:.1e}");

    let inv = diffeo::invert(&phi);
    let id = diffeo::compose(&inv, &phi);
    let e = id.phi_values().iter().zip(g.times()).map(|(a, t)| (a - t).abs()).fold(0.0, f64::max);
    println!("phi^-1 o phi vs identity on the grid: {e:.1e}");

    let (b, c) = (MobiusDiffeo::new(1.0)?, MobiusDiffeo::new(-0.3)?);
    let bc = b.then_after(&c);
    let two_step = diffeo::compose(&b, &diffeo::compose(&c, &phi));
    let one_step = diffeo::compose(&bc, &phi);
    let e = two_step.phi_values().iter().zip(one_step.phi_values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("g_1 o g_-0.3 = g_{:.3}; composed in two steps vs one: {e:.1e}", bc.beta());

    let mut out = Vec::new();
    diffeo::a_inv(&grid::sample_w0(Dispersion::new(sigma)?, GridSpec::new(9)?, RngStream::new(3, 1)))?.write_csv(&mut out)?;
    print!("{}", String::from_utf8_lossy(&out));
    Ok(())
}
