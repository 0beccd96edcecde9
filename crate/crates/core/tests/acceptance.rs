//! Acceptance criteria 1 to 10. Each test writes one `PASS`/`FAIL` line to
//! stderr (uncaptured) and then asserts.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wiener_polar::grid::{GridSpec, Path};
use wiener_polar::montecarlo::{self, DiffeoFunctional, EstimatorConfig};
use wiener_polar::oracles;
use wiener_polar::planar::{self, ComplexFunctional, VarsigmaWeight};
use wiener_polar::report::{self, CheckId, Report};
use wiener_polar::schwarzian;

const Z: f64 = 3.0;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut e = std::io::stderr().lock();
    let _ = writeln!(e, "{tag} criterion {n:>2} {name}: {detail}");
}

fn cfg() -> EstimatorConfig {
    EstimatorConfig::default()
}

#[test]
fn criterion_01_closed_form_chain() {
    let t = Instant::now();
    let chain = report::lemma1_i2_chain().unwrap();
    let worst = chain.iter().map(|c| c.3).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && secs < 1.0 && chain.len() == 5;
    verdict(1, "closed-form chain", pass, &format!("max rel err {worst:.2e}, {secs:.3}s"));
    assert!(pass);
}

#[test]
fn criterion_02_gaussian_oracles() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut gauss = 0;
    let mut i2 = 0;
    for (id, p) in oracles::standard_oracle_grid() {
        let c = oracles::check_oracle(id, &p).unwrap();
        worst = worst.max(c.rel_err);
        count += 1;
        match id {
            oracles::FormulaId::Ia | oracles::FormulaId::Ib | oracles::FormulaId::Ic => gauss += 1,
            oracles::FormulaId::I2 => i2 += 1,
            _ => {}
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-8 && secs < 10.0 && gauss == 75 && i2 > 0;
    verdict(2, "gaussian-integral oracles", pass, &format!("{count} checks, max rel err {worst:.2e}, {secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_03_endpoint_identity_mc() {
    let mut detail = Vec::new();
    let mut pass = true;
    for a in [0.5, 1.0, 2.0] {
        let e = montecarlo::estimate_lemma1(&EstimatorConfig { a, ..cfg() }).unwrap();
        let z = e.z_score.unwrap();
        pass &= z.abs() <= Z;
        detail.push(format!("a={a} z={z:.2}"));
    }
    verdict(3, "damped endpoint identity", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_04_bridge_conditioned_mc() {
    let mut detail = Vec::new();
    let mut pass = true;
    for (beta, rho) in [(1.0, 1.0), (0.5, 2.0)] {
        let c = EstimatorConfig { beta, ..cfg() };
        let j = montecarlo::estimate_j(&c, rho).unwrap();
        let l = montecarlo::estimate_lemma4(&c, rho).unwrap();
        let (zj, zl) = (j.z_score.unwrap(), l.z_score.unwrap());
        pass &= zj.abs() <= Z && zl.abs() <= Z;
        detail.push(format!("(beta,rho)=({beta},{rho}) zJ={zj:.2} zL={zl:.2}"));
    }
    verdict(4, "bridge-conditioned expectations", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_05_quasi_invariance() {
    let mut detail = Vec::new();
    let mut pass = true;
    for beta in [0.5, 1.0] {
        let c = EstimatorConfig { beta, ..cfg() };
        for f in [DiffeoFunctional::ExpNegDeriv0, DiffeoFunctional::PhiAtHalf] {
            let r = montecarlo::verify_theorem3(&c, f).unwrap();
            let zd = r.difference.z_score.unwrap();
            let zm = r.mass.z_score.unwrap();
            pass &= zd.abs() <= Z && zm.abs() <= Z;
            detail.push(format!("beta={beta} {f}: z={zd:.2} mass z={zm:.2}"));
        }
    }
    verdict(5, "quasi-invariance density", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_06_kappa_selection() {
    let fs = montecarlo::standard_path_functionals();
    let mut selected = Vec::new();
    let mut detail = Vec::new();
    for seed in [7, 11] {
        let c = EstimatorConfig { seed, n_points: 1025, ..cfg() };
        let s = montecarlo::kappa_scan(&c, &fs, &[0.125, 0.25]).unwrap();
        let zs: Vec<String> = s.z.iter().map(|row| format!("{:?}", row.iter().map(|z| (z * 100.0).round() / 100.0).collect::<Vec<_>>())).collect();
        detail.push(format!("seed {seed}: selected {:?}, z(1/8)={} z(1/4)={}", s.selected, zs[0], zs[1]));
        selected.push(s.selected);
    }
    let pass = selected[0].is_some() && selected.iter().all(|s| *s == selected[0]);
    verdict(6, "radial constant selection", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_07_round_trips() {
    let (e1, e2) = report::chart_round_trip_errors(7).unwrap();
    let (fwd, back) = report::polar_round_trip_errors().unwrap();
    let of = report::observed_order(&report::ORDER_GRIDS, &fwd);
    let ob = report::observed_order(&report::ORDER_GRIDS, &back);
    let mob = report::mobius_rho_error(7).unwrap();
    let pass = e1.max(e2) <= 1e-12 && of >= 1.0 && ob >= 1.0 && mob <= 1e-3;
    verdict(
        7,
        "coordinate round trips",
        pass,
        &format!("chart {:.1e}, polar orders {of:.2}/{ob:.2}, mobius rho rel err {mob:.1e}", e1.max(e2)),
    );
    assert!(pass);
}

/// Random smooth `v` with `‖v‖ ≤ 1/4`.
fn random_v(g: GridSpec, rng: &mut ChaCha8Rng) -> Path {
    let c: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..6.3))).collect();
    let raw = Path::from_fn(g, |t| c.iter().enumerate().map(|(k, (a, p))| a * ((k as f64) * 3.0 * t + p).cos()).sum()).unwrap();
    let scale = rng.random_range(0.02..0.25) / raw.sup_norm();
    raw.map(|v| v * scale).unwrap()
}

#[test]
fn criterion_08_inverse_schwarzian() {
    let g = GridSpec::new(2049).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut res, mut end, mut start, mut ratio) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let v = random_v(g, &mut rng);
        let sol = schwarzian::schwarzian_inverse(&v).unwrap();
        let m = sol.grid_map();
        let r = m.schwarzian_values().iter().zip(v.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        res = res.max(r);
        end = end.max(m.d2_values()[g.last()].abs());
        start = start.max((m.d2_values()[0] / m.d1_values()[0]).abs());
        for (q, w) in sol.contraction_ratios().iter().zip(&sol.step_norms) {
            if *w > 1e-13 {
                ratio = ratio.max(*q);
            }
        }
    }
    let pass = res <= 1e-6 && end <= 1e-12 && start <= 0.5 && ratio <= 0.5;
    verdict(
        8,
        "inverse schwarzian solver",
        pass,
        &format!("20 draws: residual {res:.1e}, |f''(1)| {end:.1e}, max |f''/f'(0)| {start:.3}, contraction {ratio:.3}"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_planar_two_sided() {
    let fs = ComplexFunctional::ALL;
    let mut ws = VarsigmaWeight::sweep().to_vec();
    ws.push(VarsigmaWeight::DERIVED);
    let s = planar::theorem4_sweep(&cfg(), &fs, &ws).unwrap();
    let swept = VarsigmaWeight::sweep();
    let agreeing: Vec<_> = s.agreeing(Z).into_iter().filter(|w| swept.contains(w)).collect();
    let fmt = |j: usize| s.z[j].iter().map(|z| format!("{z:.1}")).collect::<Vec<_>>().join("/");
    let nominal = fmt(0);
    let best = (0..swept.len()).min_by(|&a, &b| {
        let m = |j: usize| s.z[j].iter().fold(0.0f64, |m, z| m.max(z.abs()));
        m(a).total_cmp(&m(b))
    });
    let derived = fmt(ws.len() - 1);
    let pass = !agreeing.is_empty();
    verdict(
        9,
        "planar two-sided check",
        pass,
        &format!(
            "z nominal {nominal}; best swept kappa={} length={:.4} z {}; no radial term and length 2pi z {derived} (outside sweep)",
            best.map(|j| ws[j].radial_kappa).unwrap_or(f64::NAN),
            best.map(|j| ws[j].alpha_length).unwrap_or(f64::NAN),
            best.map(fmt).unwrap_or_default()
        ),
    );
    assert!(pass, "no weight in the stated sweep agrees on all functionals");
}

#[test]
fn criterion_10_worker_count_invariance() {
    let c = EstimatorConfig { n_samples: 20_000, ..cfg() };
    let checks = [
        CheckId::Lemma1,
        CheckId::J,
        CheckId::Lemma4,
        CheckId::Theorem1,
        CheckId::Theorem2,
        CheckId::Theorem3,
        CheckId::Theorem4,
    ];
    let run = |threads: usize| -> Report {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let mut r = pool.install(|| report::run_checks(&checks, &c, 1.0)).unwrap();
        r.entries.iter_mut().for_each(|e| e.wall_time_s = 0.0);
        r
    };
    let (a, b) = (run(1), run(4));
    let same = a.entries.len() == b.entries.len()
        && a.entries.iter().zip(&b.entries).all(|(x, y)| {
            x.mean.to_bits() == y.mean.to_bits() && x.std_err.to_bits() == y.std_err.to_bits()
        });
    let pass = same && a.to_json() == b.to_json();
    verdict(10, "worker-count invariance", pass, &format!("{} entries, 1 vs 4 threads", a.entries.len()));
    assert!(pass);
}
