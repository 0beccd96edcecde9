//! Command-line front end shared by the `wpolar` binary and its tests.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diffeo::{self, Diffeo};
use crate::error::Error;
use crate::grid::{self, Dispersion, GridSpec, Path};
use crate::montecarlo::EstimatorConfig;
use crate::planar::{self, ComplexPath};
use crate::polar::{self, PolarPair};
use crate::report::{self, CheckId, Report};
use crate::rng::RngStream;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Stream tag for `sample`, disjoint from the estimator tags.
const TAG_SAMPLE: u64 = 64;

#[derive(Debug, Parser)]
#[command(name = "wpolar", version, about = "Polar coordinates on Wiener space: sample, decompose, reconstruct, verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run verification checks and write report.json
    Verify {
        /// Checks to run; repeat or comma-separate. All checks when omitted
        #[arg(long = "check", value_enum, value_delimiter = ',')]
        checks: Vec<CheckId>,
        #[command(flatten)]
        params: Params,
    },
    /// Split a positive path CSV (t,x) into rho and a diffeomorphism CSV
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Rebuild a path from a diffeomorphism CSV (t,phi,xi) and a radius
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        params: Params,
    },
    /// Write independent samples as one file per draw
    Sample {
        #[arg(long, value_enum, default_value_t = SampleKind::Brownian)]
        kind: SampleKind,
        /// Number of draws
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Start value for brownian and bridge paths
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        start: f64,
        /// End value for bridge paths
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        end: f64,
        #[command(flatten)]
        params: Params,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleKind {
    /// Brownian motion from --start
    Brownian,
    /// Brownian bridge from --start to --end
    Bridge,
    /// Diffeomorphism from the sigma measure
    Mu,
    /// Complex path drawn from the polar coordinates, alpha uniform
    Planar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    /// RNG seed [default: 7]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo samples per estimator [default: 200000]
    #[arg(long = "n")]
    pub n_samples: Option<usize>,
    /// Grid points on [0,1], including both ends [default: 513]
    #[arg(long)]
    pub n_points: Option<usize>,
    /// Dispersion sigma [default: 1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Damping a in exp(-a^2 x(0)^2 / sigma^2) [default: 1]
    #[arg(long)]
    pub a: Option<f64>,
    /// Moebius parameter beta > -1 [default: 1]
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Endpoint ratio theta for the conditioned identity [default: 4]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Radial exponent constant kappa [default: 0.125]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Radius: fixed for the bridge-conditioned checks, or of the reconstructed path [default: 1]
    #[arg(long)]
    pub rho: Option<f64>,
    /// Worker threads; changes wall time only [default: all cores]
    #[arg(long)]
    pub workers: Option<usize>,
    /// TOML file with any of the fields above
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts [default: .]
    #[arg(long, env = "WPOLAR_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    /// Artifact format [default: json]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub checks: Option<Vec<CheckId>>,
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
    pub n_points: Option<usize>,
    pub sigma: Option<f64>,
    pub a: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Sample,
    Decompose,
    Reconstruct,
    Verify,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: CommandKind,
    pub check_ids: Vec<CheckId>,
    pub estimator: EstimatorConfig,
    pub rho: f64,
    pub workers: Option<usize>,
    pub output_dir: PathBuf,
    pub format: Format,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Verify(_) => EXIT_VERIFY,
        }
    }
}

/// Errors raised while reading or writing artifacts.
fn io_err(ctx: &FsPath, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", ctx.display()))
}

/// Errors raised by a computation: bad input data is an I/O problem, the rest
/// is a failed verification.
fn run_err(e: Error) -> CliError {
    match e {
        Error::Io(_) | Error::Csv(_) => CliError::Io(e.to_string()),
        _ => CliError::Verify(e.to_string()),
    }
}

impl RunConfig {
    pub fn resolve(command: CommandKind, checks: Vec<CheckId>, p: &Params) -> Result<Self, CliError> {
        let file = match &p.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                toml::from_str::<FileConfig>(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let d = EstimatorConfig::default();
        let estimator = EstimatorConfig {
            seed: p.seed.or(file.seed).unwrap_or(d.seed),
            n_samples: p.n_samples.or(file.n_samples).unwrap_or(d.n_samples),
            n_points: p.n_points.or(file.n_points).unwrap_or(d.n_points),
            sigma: p.sigma.or(file.sigma).unwrap_or(d.sigma),
            a: p.a.or(file.a).unwrap_or(d.a),
            beta: p.beta.or(file.beta).unwrap_or(d.beta),
            theta: p.theta.or(file.theta).unwrap_or(d.theta),
            kappa: p.kappa.or(file.kappa).unwrap_or(d.kappa),
            ..d
        };
        estimator.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let rho = p.rho.or(file.rho).unwrap_or(1.0);
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(CliError::Usage(format!("rho must be positive, got {rho}")));
        }
        let workers = p.workers.or(file.workers);
        if workers == Some(0) {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        let check_ids = if !checks.is_empty() {
            checks
        } else {
            file.checks.unwrap_or_else(|| CheckId::ALL.to_vec())
        };
        Ok(Self {
            command,
            check_ids,
            estimator,
            rho,
            workers,
            output_dir: p.output_dir.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from(".")),
            format: p.format.or(file.format).unwrap_or_default(),
        })
    }

    fn out(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.output_dir).map_err(|e| io_err(&self.output_dir, e))?;
        Ok(self.output_dir.join(name))
    }

    fn grid(&self) -> GridSpec {
        self.estimator.grid()
    }
}

fn create(path: &FsPath) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn open(path: &FsPath) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

fn write_json(path: &FsPath, v: &impl Serialize) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| io_err(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

/// Reads input data; malformed contents count as I/O errors.
fn read_input<T>(path: &FsPath, f: impl FnOnce(BufReader<File>) -> crate::Result<T>) -> Result<T, CliError> {
    f(open(path)?).map_err(|e| io_err(path, e))
}

fn write_report_csv(path: &FsPath, r: &Report) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let row = |w: &mut csv::Writer<_>, rec: &[String]| w.write_record(rec).map_err(|e| io_err(path, e));
    row(&mut w, &["check_id", "role", "mean", "std_err", "n", "target", "z_score", "kappa_selected", "passed", "wall_time_s", "seed"].map(String::from))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in &r.entries {
        row(
            &mut w,
            &[
                e.check_id.clone(),
                serde_json::to_value(e.role).expect("role").as_str().unwrap_or_default().to_string(),
                e.mean.to_string(),
                e.std_err.to_string(),
                e.n.to_string(),
                opt(e.target),
                opt(e.z_score),
                opt(e.kappa_selected),
                e.passed.to_string(),
                e.wall_time_s.to_string(),
                e.seed.to_string(),
            ],
        )?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let r = report::run_checks(&cfg.check_ids, &cfg.estimator, cfg.rho).map_err(run_err)?;
    write_json(&cfg.out("report.json")?, &r)?;
    if cfg.format == Format::Csv {
        write_report_csv(&cfg.out("report.csv")?, &r)?;
    }
    for e in &r.entries {
        let tag = match (e.gating(), e.passed) {
            (false, _) => "SCAN",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        let z = e.z_score.map(|z| format!("{z:.2}")).unwrap_or_else(|| "-".into());
        let t = e.target.map(|t| format!("{t:.7}")).unwrap_or_else(|| "-".into());
        println!("{tag} {:<48} {:.7} ± {:.2e}  target {t}  z {z}", e.check_id, e.mean, e.std_err);
    }
    let failed = r.failures().count();
    if failed > 0 {
        return Err(CliError::Verify(format!("{failed} check entries failed")));
    }
    Ok(())
}

fn decompose(cfg: &RunConfig, input: &FsPath) -> Result<(), CliError> {
    let x = read_input(input, Path::read_csv)?;
    let pair = polar::decompose(&x).map_err(|e| io_err(input, e))?;
    let rho = pair.rho();
    match cfg.format {
        Format::Csv => {
            pair.phi().write_csv(create(&cfg.out("phi.csv")?)?).map_err(run_err)?;
            let mut w = create(&cfg.out("rho.txt")?)?;
            writeln!(w, "{rho}").map_err(|e| io_err(&cfg.output_dir, e))?;
        }
        Format::Json => write_json(
            &cfg.out("decomposition.json")?,
            &json!({
                "rho": rho,
                "t": pair.phi().grid().times(),
                "phi": pair.phi().phi_values(),
                "xi": pair.phi().xi_values(),
            }),
        )?,
    }
    println!("rho {rho}");
    Ok(())
}

fn reconstruct(cfg: &RunConfig, input: &FsPath, rho: f64) -> Result<(), CliError> {
    let phi = read_input(input, Diffeo::read_csv)?;
    let pair = PolarPair::new(rho, phi).map_err(|e| CliError::Usage(e.to_string()))?;
    let x = polar::reconstruct(&pair);
    match cfg.format {
        Format::Csv => x.write_csv(create(&cfg.out("path.csv")?)?).map_err(run_err),
        Format::Json => write_json(&cfg.out("path.json")?, &json!({ "t": x.grid().times(), "x": x.values() })),
    }
}

fn sample(cfg: &RunConfig, kind: SampleKind, count: usize, start: f64, end: f64) -> Result<(), CliError> {
    let g = cfg.grid();
    let e = &cfg.estimator;
    let sigma = Dispersion::new(e.sigma).map_err(|e| CliError::Usage(e.to_string()))?;
    for i in 0..count {
        let stream = RngStream::new(e.seed, (TAG_SAMPLE << 40) | i as u64);
        let stem = format!("sample_{i:04}");
        let name = |ext: &str| format!("{stem}.{ext}");
        match kind {
            SampleKind::Brownian | SampleKind::Bridge => {
                let x = if kind == SampleKind::Brownian {
                    grid::sample_w0(sigma, g, stream).map(|v| v + start).map_err(run_err)?
                } else {
                    grid::sample_bridge(sigma, g, start, end, stream)
                };
                match cfg.format {
                    Format::Csv => x.write_csv(create(&cfg.out(&name("csv"))?)?).map_err(run_err)?,
                    Format::Json => write_json(&cfg.out(&name("json"))?, &json!({ "t": g.times(), "x": x.values() }))?,
                }
            }
            SampleKind::Mu => {
                let phi = diffeo::sample_mu(sigma, g, stream);
                match cfg.format {
                    Format::Csv => phi.write_csv(create(&cfg.out(&name("csv"))?)?).map_err(run_err)?,
                    Format::Json => write_json(
                        &cfg.out(&name("json"))?,
                        &json!({ "t": g.times(), "phi": phi.phi_values(), "xi": phi.xi_values() }),
                    )?,
                }
            }
            SampleKind::Planar => {
                let mut rng = stream.rng();
                let s = planar::sample_varsigma(
                    e.sigma,
                    g,
                    &planar::default_r_proposal(e.sigma),
                    planar::VarsigmaWeight::DERIVED,
                    &mut rng,
                );
                write_planar(cfg, &name, &s.path, s.weight)?;
            }
        }
    }
    println!("wrote {count} samples to {}", cfg.output_dir.display());
    Ok(())
}

fn write_planar(cfg: &RunConfig, name: &dyn Fn(&str) -> String, z: &ComplexPath, weight: f64) -> Result<(), CliError> {
    match cfg.format {
        Format::Csv => z.write_csv(create(&cfg.out(&name("csv"))?)?).map_err(run_err),
        Format::Json => write_json(
            &cfg.out(&name("json"))?,
            &json!({ "t": z.grid().times(), "re": z.re().values(), "im": z.im().values(), "weight": weight }),
        ),
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (kind, checks, params) = match &cli.command {
        Command::Verify { checks, params } => (CommandKind::Verify, checks.clone(), params),
        Command::Decompose { params, .. } => (CommandKind::Decompose, vec![], params),
        Command::Reconstruct { params, .. } => (CommandKind::Reconstruct, vec![], params),
        Command::Sample { params, .. } => (CommandKind::Sample, vec![], params),
    };
    let cfg = RunConfig::resolve(kind, checks, params)?;
    let body = || match &cli.command {
        Command::Verify { .. } => verify(&cfg),
        Command::Decompose { input, .. } => decompose(&cfg, input),
        Command::Reconstruct { input, .. } => reconstruct(&cfg, input, cfg.rho),
        Command::Sample { kind, count, start, end, .. } => sample(&cfg, *kind, *count, *start, *end),
    };
    match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(body),
        None => body(),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("wpolar: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "seed = 11\nsigma = 2.0\nchecks = [\"lemma1\"]\n").unwrap();
        let p = Params { config: Some(path), sigma: Some(0.5), ..Default::default() };
        let c = RunConfig::resolve(CommandKind::Verify, vec![], &p).unwrap();
        assert_eq!(c.estimator.seed, 11);
        assert_eq!(c.estimator.sigma, 0.5);
        assert_eq!(c.check_ids, vec![CheckId::Lemma1]);
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let p = Params { sigma: Some(-1.0), ..Default::default() };
        assert_eq!(RunConfig::resolve(CommandKind::Verify, vec![], &p).unwrap_err().exit_code(), EXIT_USAGE);
        assert_eq!(run(["wpolar", "verify", "--check", "nonsense"]), EXIT_USAGE);
        assert_eq!(run(["wpolar"]), EXIT_USAGE);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "sigmaa = 2.0\n").unwrap();
        let p = Params { config: Some(path), ..Default::default() };
        assert_eq!(RunConfig::resolve(CommandKind::Verify, vec![], &p).unwrap_err().exit_code(), EXIT_USAGE);
    }

    #[test]
    fn missing_input_is_io() {
        assert_eq!(run(["wpolar", "decompose", "--in", "/nonexistent/x.csv"]), EXIT_IO);
    }
}
