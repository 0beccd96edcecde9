//! Named verification checks and the versioned JSON report they produce.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::diffeo::{self, Diffeo, MobiusDiffeo};
use crate::error::Result;
use crate::grid::{self, Dispersion, GridSpec, Path};
use crate::montecarlo::{self, DiffeoFunctional, EstimatorConfig};
use crate::oracles;
use crate::planar::{self, ComplexFunctional, ComplexPath, VarsigmaWeight};
use crate::polar::{self, PolarPair};
use crate::rng::RngStream;
use crate::stats::MCEstimate;

pub const SCHEMA_VERSION: u32 = 1;

/// Agreement threshold in combined standard errors.
pub const Z_THRESHOLD: f64 = 3.0;
/// Relative tolerance for closed form against quadrature.
pub const ORACLE_TOL: f64 = 1e-8;
/// Relative tolerance for closed form against closed form.
pub const CHAIN_TOL: f64 = 1e-12;
pub const MOBIUS_RHO_TOL: f64 = 1e-3;
/// Grid sizes for the observed convergence order of the polar round trip.
pub const ORDER_GRIDS: [usize; 4] = [129, 257, 513, 1025];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Lemma1,
    J,
    Lemma4,
    Theorem1,
    Theorem2,
    Theorem3,
    Theorem4,
    Oracles,
    Roundtrips,
}

impl CheckId {
    pub const ALL: [CheckId; 9] = [
        CheckId::Lemma1,
        CheckId::J,
        CheckId::Lemma4,
        CheckId::Theorem1,
        CheckId::Theorem2,
        CheckId::Theorem3,
        CheckId::Theorem4,
        CheckId::Oracles,
        CheckId::Roundtrips,
    ];

    pub fn is_deterministic(&self) -> bool {
        matches!(self, CheckId::Oracles | CheckId::Roundtrips)
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckId::Lemma1 => "lemma1",
            CheckId::J => "j",
            CheckId::Lemma4 => "lemma4",
            CheckId::Theorem1 => "theorem1",
            CheckId::Theorem2 => "theorem2",
            CheckId::Theorem3 => "theorem3",
            CheckId::Theorem4 => "theorem4",
            CheckId::Oracles => "oracles",
            CheckId::Roundtrips => "roundtrips",
        })
    }
}

/// How an entry counts towards the overall verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Monte Carlo estimate against a closed-form target.
    Estimate,
    /// Two independent estimators of the same quantity.
    TwoSided,
    /// Deterministic value against a reference and tolerance.
    Deterministic,
    /// Diagnostic alternative; recorded but never gating.
    Scan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEntry {
    pub check_id: String,
    pub role: Role,
    pub params: BTreeMap<String, Value>,
    pub mean: f64,
    pub std_err: f64,
    pub n: u64,
    pub target: Option<f64>,
    pub z_score: Option<f64>,
    pub kappa_selected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<MCEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<MCEstimate>,
    pub passed: bool,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl ReportEntry {
    fn estimate(id: String, params: BTreeMap<String, Value>, e: MCEstimate, seed: u64) -> Self {
        Self {
            check_id: id,
            role: Role::Estimate,
            params,
            mean: e.mean,
            std_err: e.std_err,
            n: e.n,
            target: e.target,
            z_score: e.z_score,
            kappa_selected: None,
            lhs: None,
            rhs: None,
            passed: e.within(Z_THRESHOLD),
            wall_time_s: 0.0,
            seed,
        }
    }

    fn two_sided(id: String, params: BTreeMap<String, Value>, lhs: MCEstimate, rhs: MCEstimate, z: f64, seed: u64) -> Self {
        Self {
            check_id: id,
            role: Role::TwoSided,
            params,
            mean: rhs.mean,
            std_err: rhs.std_err,
            n: rhs.n,
            target: Some(lhs.mean),
            z_score: Some(z),
            kappa_selected: None,
            lhs: Some(lhs),
            rhs: Some(rhs),
            passed: z.abs() <= Z_THRESHOLD,
            wall_time_s: 0.0,
            seed,
        }
    }

    fn deterministic(id: String, params: BTreeMap<String, Value>, value: f64, target: f64, passed: bool, seed: u64) -> Self {
        Self {
            check_id: id,
            role: Role::Deterministic,
            params,
            mean: value,
            std_err: 0.0,
            n: 0,
            target: Some(target),
            z_score: None,
            kappa_selected: None,
            lhs: None,
            rhs: None,
            passed,
            wall_time_s: 0.0,
            seed,
        }
    }

    fn scan(mut self) -> Self {
        self.role = Role::Scan;
        self
    }

    pub fn gating(&self) -> bool {
        self.role != Role::Scan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub entries: Vec<ReportEntry>,
}

impl Default for Report {
    fn default() -> Self {
        Self { schema_version: SCHEMA_VERSION, entries: Vec::new() }
    }
}

impl Report {
    pub fn passed(&self) -> bool {
        self.entries.iter().filter(|e| e.gating()).all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| e.gating() && !e.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn params(cfg: &EstimatorConfig, extra: &[(&str, Value)]) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    m.insert("sigma".into(), json!(cfg.sigma));
    m.insert("n_points".into(), json!(cfg.n_points));
    for (k, v) in extra {
        m.insert((*k).into(), v.clone());
    }
    m
}

/// Runs one check and appends its entries to `report`.
///
/// `rho` is the fixed radius used by the bridge-conditioned checks.
pub fn run_check(report: &mut Report, id: CheckId, cfg: &EstimatorConfig, rho: f64) -> Result<()> {
    let start = Instant::now();
    let first = report.entries.len();
    let seed = cfg.seed;
    let out = &mut report.entries;
    match id {
        CheckId::Lemma1 => {
            let e = montecarlo::estimate_lemma1(cfg)?;
            out.push(ReportEntry::estimate("lemma1".into(), params(cfg, &[("a", json!(cfg.a))]), e, seed));
        }
        CheckId::J => {
            let e = montecarlo::estimate_j(cfg, rho)?;
            let p = params(cfg, &[("beta", json!(cfg.beta)), ("rho", json!(rho))]);
            out.push(ReportEntry::estimate("j".into(), p, e, seed));
        }
        CheckId::Lemma4 => {
            let e = montecarlo::estimate_lemma4(cfg, rho)?;
            let p = params(cfg, &[("beta", json!(cfg.beta)), ("rho", json!(rho))]);
            out.push(ReportEntry::estimate("lemma4".into(), p, e, seed));
        }
        CheckId::Theorem1 => theorem1(out, cfg)?,
        CheckId::Theorem2 => {
            let r = montecarlo::verify_theorem2(cfg)?;
            let p = params(cfg, &[("a", json!(cfg.a)), ("theta", json!(cfg.theta)), ("kappa", json!(cfg.kappa))]);
            let mut e = ReportEntry::two_sided("theorem2".into(), p, r.lhs, r.rhs, r.z, seed);
            e.target = r.lhs.target;
            out.push(e);
        }
        CheckId::Theorem3 => theorem3(out, cfg)?,
        CheckId::Theorem4 => theorem4(out, cfg)?,
        CheckId::Oracles => oracle_entries(out, seed)?,
        CheckId::Roundtrips => roundtrip_entries(out, seed)?,
    }
    let wall = start.elapsed().as_secs_f64();
    for e in &mut report.entries[first..] {
        e.wall_time_s = wall;
    }
    Ok(())
}

/// Runs every check in order.
pub fn run_checks(ids: &[CheckId], cfg: &EstimatorConfig, rho: f64) -> Result<Report> {
    let mut r = Report::default();
    for &id in ids {
        log::info!("running {id}");
        run_check(&mut r, id, cfg, rho)?;
    }
    Ok(r)
}

/// The two constants in dispute plus whatever the config asks for.
fn kappa_candidates(cfg: &EstimatorConfig) -> Vec<f64> {
    let mut ks = vec![0.125, 0.25];
    if !ks.contains(&cfg.kappa) {
        ks.push(cfg.kappa);
    }
    ks
}

fn theorem1(out: &mut Vec<ReportEntry>, cfg: &EstimatorConfig) -> Result<()> {
    let fs = montecarlo::standard_path_functionals();
    let ks = kappa_candidates(cfg);
    let scan = montecarlo::kappa_scan(cfg, &fs, &ks)?;
    for (j, &k) in ks.iter().enumerate() {
        for (i, f) in fs.iter().enumerate() {
            let p = params(cfg, &[("a", json!(cfg.a)), ("kappa", json!(k)), ("functional", json!(f.to_string()))]);
            let id = format!("theorem1/{f}/kappa={k}");
            let mut e = ReportEntry::two_sided(id, p, scan.lhs[i], scan.rhs.estimates[j][i], scan.z[j][i], cfg.seed);
            e.kappa_selected = scan.selected;
            out.push(if k == cfg.kappa { e } else { e.scan() });
        }
    }
    let agreeing = scan.agreeing(Z_THRESHOLD);
    let p = params(cfg, &[("a", json!(cfg.a)), ("candidates", json!(ks)), ("agreeing", json!(agreeing))]);
    let mut e = ReportEntry::deterministic(
        "theorem1/kappa_selection".into(),
        p,
        agreeing.len() as f64,
        1.0,
        scan.selected.is_some(),
        cfg.seed,
    );
    e.kappa_selected = scan.selected;
    out.push(e);
    Ok(())
}

fn theorem3(out: &mut Vec<ReportEntry>, cfg: &EstimatorConfig) -> Result<()> {
    let fs = [DiffeoFunctional::ExpNegDeriv0, DiffeoFunctional::PhiAtHalf];
    for (i, f) in fs.iter().enumerate() {
        let r = montecarlo::verify_theorem3(cfg, *f)?;
        let p = params(cfg, &[("beta", json!(cfg.beta)), ("functional", json!(f.to_string()))]);
        let z = r.difference.z_score.unwrap_or(f64::NAN);
        let mut e = ReportEntry::two_sided(format!("theorem3/{f}"), p, r.pullback, r.weighted, z, cfg.seed);
        // paired difference: its own standard error, not the independent one
        e.std_err = r.difference.std_err;
        out.push(e);
        if i == 0 {
            let p = params(cfg, &[("beta", json!(cfg.beta))]);
            out.push(ReportEntry::estimate("theorem3/mass".into(), p, r.mass, cfg.seed));
        }
    }
    Ok(())
}

fn weight_label(w: &VarsigmaWeight) -> String {
    format!("kappa={},alpha_length={:.4}", w.radial_kappa, w.alpha_length)
}

fn theorem4(out: &mut Vec<ReportEntry>, cfg: &EstimatorConfig) -> Result<()> {
    let fs = ComplexFunctional::ALL;
    let mut ws = VarsigmaWeight::sweep().to_vec();
    ws.push(VarsigmaWeight::DERIVED);
    let s = planar::theorem4_sweep(cfg, &fs, &ws)?;
    for (j, w) in ws.iter().enumerate() {
        for (i, f) in fs.iter().enumerate() {
            let p = params(
                cfg,
                &[
                    ("radial_kappa", json!(w.radial_kappa)),
                    ("alpha_length", json!(w.alpha_length)),
                    ("functional", json!(f.to_string())),
                ],
            );
            let id = format!("theorem4/{f}/{}", weight_label(w));
            let e = ReportEntry::two_sided(id, p, s.lhs[i], s.rhs.estimates[j][i], s.z[j][i], cfg.seed);
            out.push(if *w == VarsigmaWeight::NOMINAL { e } else { e.scan() });
        }
    }
    Ok(())
}

fn oracle_entries(out: &mut Vec<ReportEntry>, seed: u64) -> Result<()> {
    for (id, p) in oracles::standard_oracle_grid() {
        let c = oracles::check_oracle(id, &p)?;
        let mut m = BTreeMap::new();
        for (k, v) in [("a", p.a), ("b", p.b), ("beta", p.beta), ("rho", p.rho), ("sigma", p.sigma)] {
            m.insert(k.to_string(), json!(v));
        }
        m.insert("rel_err".into(), json!(c.rel_err));
        m.insert("tolerance".into(), json!(ORACLE_TOL));
        out.push(ReportEntry::deterministic(
            format!("oracles/{id}"),
            m,
            c.quadrature,
            c.closed.value,
            c.passed(ORACLE_TOL),
            seed,
        ));
    }
    for (beta, lhs, rhs, rel) in lemma1_i2_chain()? {
        let mut m = BTreeMap::new();
        m.insert("beta".into(), json!(beta));
        m.insert("rel_err".into(), json!(rel));
        m.insert("tolerance".into(), json!(CHAIN_TOL));
        out.push(ReportEntry::deterministic("oracles/lemma1_i2_chain".into(), m, lhs, rhs, rel <= CHAIN_TOL, seed));
    }
    Ok(())
}

/// `(β, lemma1_rhs(a(β)), i2_closed(β), relative error)` on the standard β set.
pub fn lemma1_i2_chain() -> Result<Vec<(f64, f64, f64, f64)>> {
    [-0.5, 0.5, 1.0, 2.0, 5.0]
        .into_iter()
        .map(|beta| {
            let l = oracles::lemma1_rhs(oracles::a_of_beta(beta)?)?;
            let r = oracles::i2_closed(beta)?;
            Ok((beta, l, r, (l - r).abs() / r.abs()))
        })
        .collect()
}

/// Least-squares slope of `−ln err` against `ln(n − 1)`.
pub fn observed_order(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| ((n - 1) as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| -e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn smooth_path(g: GridSpec) -> Path {
    Path::from_fn(g, |t| 1.2 + 0.5 * (5.0 * t).sin() + 0.3 * t * t).expect("finite")
}

fn smooth_diffeo(g: GridSpec) -> Diffeo {
    let xi = Path::from_fn(g, |t| 0.8 * (4.0 * t).sin() - 0.5 * t * t).expect("finite");
    diffeo::a_inv(&xi).expect("xi(0) = 0")
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sup errors of `B⁻¹∘B` on a smooth path and of `B∘B⁻¹` on a smooth pair,
/// one per grid in [`ORDER_GRIDS`].
pub fn polar_round_trip_errors() -> Result<(Vec<f64>, Vec<f64>)> {
    let mut fwd = Vec::new();
    let mut back = Vec::new();
    for n in ORDER_GRIDS {
        let g = GridSpec::new(n)?;
        let x = smooth_path(g);
        let y = polar::reconstruct(&polar::decompose(&x)?);
        fwd.push(sup_diff(x.values(), y.values()));
        let phi = smooth_diffeo(g);
        let rho = 1.3;
        let q = polar::decompose(&polar::reconstruct(&PolarPair::new(rho, phi.clone())?))?;
        back.push(((q.rho() - rho).abs() / rho).max(sup_diff(q.phi().phi_values(), phi.phi_values())));
    }
    Ok((fwd, back))
}

/// `max_β |ρ(g_β·x) − ρ(x)| / ρ(x)` for a positive random path on 1025 points.
pub fn mobius_rho_error(seed: u64) -> Result<f64> {
    let g = GridSpec::new(1025)?;
    let w = grid::sample_w0(Dispersion::new(0.3)?, g, RngStream::new(seed, 0));
    let x = w.map(|v| 1.0 + v.abs())?;
    let rx = polar::rho_of(&x)?;
    let mut worst: f64 = 0.0;
    for beta in [-0.5, 0.5, 1.0, 2.0] {
        let y = grid::act(&MobiusDiffeo::new(beta)?, &x);
        worst = worst.max((polar::rho_of(&y)? - rx).abs() / rx);
    }
    Ok(worst)
}

/// `(‖A⁻¹A φ − φ‖, ‖A A⁻¹ ξ − ξ‖)` for a sampled `φ` on 513 points.
pub fn chart_round_trip_errors(seed: u64) -> Result<(f64, f64)> {
    let g = GridSpec::new(grid::DEFAULT_POINTS)?;
    let phi = diffeo::sample_mu(Dispersion::new(1.0)?, g, RngStream::new(seed, 1));
    let back = diffeo::a_inv(&diffeo::a_map(&phi))?;
    let e1 = sup_diff(back.phi_values(), phi.phi_values()).max(sup_diff(back.xi_values(), phi.xi_values()));
    let xi = grid::sample_w0(Dispersion::new(1.0)?, g, RngStream::new(seed, 2));
    let e2 = sup_diff(diffeo::a_map(&diffeo::a_inv(&xi)?).values(), xi.values());
    Ok((e1, e2))
}

fn roundtrip_entries(out: &mut Vec<ReportEntry>, seed: u64) -> Result<()> {
    let tol = |t: f64| {
        let mut m = BTreeMap::new();
        m.insert("tolerance".to_string(), json!(t));
        m
    };
    let (e1, e2) = chart_round_trip_errors(seed)?;
    out.push(ReportEntry::deterministic("roundtrips/chart".into(), tol(1e-12), e1.max(e2), 0.0, e1.max(e2) <= 1e-12, seed));

    let (fwd, back) = polar_round_trip_errors()?;
    for (name, errs) in [("roundtrips/polar_path", fwd), ("roundtrips/polar_pair", back)] {
        let order = observed_order(&ORDER_GRIDS, &errs);
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
        let mut m = BTreeMap::new();
        m.insert("n_points".into(), json!(ORDER_GRIDS));
        m.insert("sup_errors".into(), json!(errs));
        m.insert("min_order".into(), json!(1.0));
        out.push(ReportEntry::deterministic(name.into(), m, order, 1.0, decreasing && order >= 1.0, seed));
    }

    let e = mobius_rho_error(seed)?;
    out.push(ReportEntry::deterministic("roundtrips/mobius_rho".into(), tol(MOBIUS_RHO_TOL), e, 0.0, e <= MOBIUS_RHO_TOL, seed));

    let g = GridSpec::new(grid::DEFAULT_POINTS)?;
    let z = ComplexPath::from_fn(g, |t| {
        num_complex::Complex64::new(1.5 + (3.0 * t).sin(), 0.4 * (5.0 * t).cos()) * num_complex::Complex64::from_polar(1.0, 2.0 * t)
    })?;
    let e = planar::l_map(&planar::l_inv(&z)?).sup_distance(&z);
    out.push(ReportEntry::deterministic("roundtrips/planar".into(), tol(1e-4), e, 0.0, e <= 1e-4, seed));
    Ok(())
}
