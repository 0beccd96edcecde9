//! Closed forms next to independent quadrature, plus the chain linking the
//! damped endpoint integral to the radial integral.
//!
//! Usage: `cargo run --release --example closed_forms`

use wiener_polar::oracles::{self, FormulaId, FormulaParams};

fn main() -> wiener_polar::Result<()> {
    let d = FormulaParams::default();
    let cases = [
        (FormulaId::Lemma1, FormulaParams { a: 0.5, ..d }),
        (FormulaId::Lemma1, d),
        (FormulaId::Lemma3J, d),
        (FormulaId::Lemma3J, FormulaParams { beta: 0.5, rho: 2.0, ..d }),
        (FormulaId::Lemma4, d),
        (FormulaId::Lemma4, FormulaParams { beta: 0.5, rho: 2.0, ..d }),
        (FormulaId::I2, FormulaParams { beta: 2.0, ..d }),
        (FormulaId::Ia, FormulaParams { a: 2.0, b: 0.5, ..d }),
        (FormulaId::Ib, FormulaParams { a: 2.0, b: 0.5, ..d }),
        (FormulaId::Ic, FormulaParams { a: 2.0, b: 0.5, ..d }),
    ];
    println!("{:<9} {:>5} {:>5} {:>5} {:>5} {:>18} {:>18} {:>9}", "formula", "a", "b", "beta", "rho", "closed", "quadrature", "rel err");
    for (id, p) in cases {
        let c = oracles::check_oracle(id, &p)?;
        println!(
            "{:<9} {:>5} {:>5} {:>5} {:>5} {:>18.15} {:>18.15} {:>9.1e}",
            id.to_string(),
            p.a,
            p.b,
            p.beta,
            p.rho,
            c.closed.value,
            c.quadrature,
            c.rel_err
        );
    }
    println!();
    for beta in [-0.5, 0.5, 1.0, 2.0, 5.0] {
        let a = oracles::a_of_beta(beta)?;
        println!("beta {beta:>4}: a = {a:.6}  endpoint {:.15}  radial {:.15}", oracles::lemma1_rhs(a)?, oracles::i2_closed(beta)?);
    }
    println!("conditioned identity at a=1, theta=4: {:.7}", oracles::theorem2_lhs_closed(1.0, 4.0)?);
    Ok(())
}
