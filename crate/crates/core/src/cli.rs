//! Command-line front end: configuration, experiment dispatch and output.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connection::{DerivativeEngine, Directions, FdScheme};
use crate::diagonal::DiagonalModel;
use crate::error::Error;
use crate::exterior::{Family, GradedElement};
use crate::flagspace::{sample_coords, FlagType};
use crate::hodge::{harmonic_project, MetricData};
use crate::kernels::Kernels;
use crate::linalg::{self, c, CMat, C64, ONE, ZERO};
use crate::quadrature::{Domain, QuadMethod, QuadratureSpec};
use crate::solver::{
    disk_test_form, forms_distance, forms_norm, manufactured_p1, principal, sample_points, term_values, vanishing_experiment,
    ExperimentReport, FormTag, RecordContext, SampleRecord, Solver, TestForm,
};
use crate::weights::{check_axioms, BundleDescriptor, Weight};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Run(Error::Unsupported(_)) => 2,
            CliError::Run(_) => 1,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "flagkop", version, about = "Koppelman kernels on flag manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// |η| near and away from the diagonal, and the rank of E.
    VerifyDiagonal,
    /// The kernel P as a Chern form, and its fibre integral.
    ChernForm,
    /// Every term of the Koppelman formula at sample points.
    KoppelmanCheck,
    /// Solves ∂̄u = φ for manufactured right-hand sides.
    DbarSolve,
    /// Harmonic projection on P¹.
    HarmonicProject,
    /// Twisted ∂̄-problems with values in powers of a line bundle.
    Vanishing,
    /// Small examples with exactly known answers.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyDiagonal => "verify-diagonal",
            Command::ChernForm => "chern-form",
            Command::KoppelmanCheck => "koppelman-check",
            Command::DbarSolve => "dbar-solve",
            Command::HarmonicProject => "harmonic-project",
            Command::Vanishing => "vanishing",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormChoice {
    #[default]
    All,
    One,
    Omega,
    Dbar,
}

/// Command-line values; each one overrides the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Flag type "d1,..,dk:N".
    #[arg(long, global = true)]
    pub flag: Option<String>,
    /// Bundle, e.g. "H:1", "L:1^-2" or "H:1*L:2^3".
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub bundle: Option<String>,
    #[arg(long, global = true)]
    pub fd_scheme: Option<FdScheme>,
    #[arg(long, global = true)]
    pub fd_step: Option<f64>,
    #[arg(long, global = true)]
    pub quad: Option<QuadMethod>,
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Monte Carlo samples; point pairs for verify-diagonal.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub shell_factor: Option<f64>,
    #[arg(long, global = true)]
    pub shell_tol: Option<f64>,
    /// Number of evaluation points z.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub form: Option<FormChoice>,
    /// "x", "disk" or "disk:re,im,radius".
    #[arg(long, global = true)]
    pub domain: Option<String>,
    #[arg(long, global = true)]
    pub level: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub power: Option<i32>,
    /// CSV destination; standard output when absent.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// JSON summary destination.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Record wall-clock times (makes output nondeterministic).
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FdConfig {
    pub scheme: FdScheme,
    pub step: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        let e = DerivativeEngine::default();
        FdConfig { scheme: e.scheme, step: e.step }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub timings: bool,
}

/// Effective settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub flag: String,
    pub bundle: String,
    pub seed: u64,
    pub points: usize,
    pub pairs: usize,
    pub tolerance: Option<f64>,
    pub form: FormChoice,
    pub domain: String,
    pub level: usize,
    pub power: i32,
    pub fd: FdConfig,
    pub quadrature: QuadratureSpec,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            flag: "1,2:2".into(),
            bundle: "O".into(),
            seed: 0,
            points: 10,
            pairs: 1000,
            tolerance: None,
            form: FormChoice::All,
            domain: "x".into(),
            level: 1,
            power: 0,
            fd: FdConfig::default(),
            quadrature: QuadratureSpec::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, command: Command, o: &Overrides) {
        if let Some(v) = &o.flag {
            self.flag = v.clone();
        }
        if let Some(v) = &o.bundle {
            self.bundle = v.clone();
        }
        if let Some(v) = o.fd_scheme {
            self.fd.scheme = v;
        }
        if let Some(v) = o.fd_step {
            self.fd.step = v;
        }
        if let Some(v) = o.quad {
            self.quadrature.method = v;
        }
        if let Some(v) = o.order {
            self.quadrature.order = v;
        }
        if let Some(v) = o.samples {
            if command == Command::VerifyDiagonal {
                self.pairs = v;
            } else {
                self.quadrature.samples = v;
            }
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.shell_factor {
            self.quadrature.shell_factor = v;
        }
        if let Some(v) = o.shell_tol {
            self.quadrature.shell_tol = v;
        }
        if let Some(v) = o.points {
            self.points = v;
        }
        if let Some(v) = o.tolerance {
            self.tolerance = Some(v);
        }
        if let Some(v) = o.form {
            self.form = v;
        }
        if let Some(v) = &o.domain {
            self.domain = v.clone();
        }
        if let Some(v) = o.level {
            self.level = v;
        }
        if let Some(v) = o.power {
            self.power = v;
        }
        if let Some(v) = &o.output {
            self.output.csv = Some(v.clone());
        }
        if let Some(v) = &o.json {
            self.output.json = Some(v.clone());
        }
        self.output.timings |= o.timings;
        self.quadrature.seed = self.seed;
    }

    pub fn flag_type(&self) -> Result<FlagType, CliError> {
        self.flag.parse().map_err(config_err)
    }

    pub fn bundle_descriptor(&self) -> Result<BundleDescriptor, CliError> {
        self.bundle.parse().map_err(config_err)
    }

    pub fn engine(&self) -> Result<DerivativeEngine, CliError> {
        DerivativeEngine::new(self.fd.step, self.fd.scheme).map_err(config_err)
    }

    pub fn domain(&self) -> Result<Domain, CliError> {
        parse_domain(&self.domain)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.flag_type()?;
        self.bundle_descriptor()?;
        self.engine()?;
        self.domain()?;
        self.quadrature.validate().map_err(config_err)?;
        if self.points == 0 || self.pairs == 0 {
            return Err(CliError::Config("points and pairs must be positive".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(CliError::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        Ok(())
    }

    fn tolerance_or(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    fn context(&self, command: Command, tolerance: f64) -> RecordContext {
        RecordContext {
            instance: self.flag.clone(),
            command: command.name().into(),
            bundle: self.bundle.clone(),
            seed: self.seed,
            tolerance,
        }
    }
}

pub fn parse_domain(s: &str) -> Result<Domain, CliError> {
    match s.trim() {
        "x" | "X" => Ok(Domain::Whole),
        "disk" => Ok(Domain::Disk { center: ZERO, radius: 1.0 }),
        other => {
            let body = other.strip_prefix("disk:").ok_or_else(|| CliError::Config(format!("unknown domain '{other}'")))?;
            let v: Vec<f64> = body
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Config(format!("domain '{other}': {e}")))?;
            match v[..] {
                [re, im, radius] if radius > 0.0 => Ok(Domain::Disk { center: c(re, im), radius }),
                _ => Err(CliError::Config(format!("domain '{other}' must be disk:re,im,radius with radius > 0"))),
            }
        }
    }
}

/// Parses arguments, runs the command and writes output; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            if report.passed() {
                0
            } else {
                eprintln!("tolerance failure: {} of {} records failed", report.records.iter().filter(|r| !r.passed).count(), report.records.len());
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs the command of `cli` and writes its CSV and JSON output.
pub fn execute(cli: &Cli) -> Result<ExperimentReport, CliError> {
    let mut config = match &cli.overrides.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(cli.command, &cli.overrides);
    config.validate()?;
    let mut report = run_command(cli.command, &config)?;
    if !config.output.timings {
        for r in &mut report.records {
            r.runtime_ms = 0;
        }
    }
    write_outputs(cli.command, &config, &report)?;
    Ok(report)
}

pub fn run_command(command: Command, config: &RunConfig) -> Result<ExperimentReport, CliError> {
    match command {
        Command::VerifyDiagonal => verify_diagonal(config),
        Command::ChernForm => chern_form(config),
        Command::KoppelmanCheck => koppelman_check(config),
        Command::DbarSolve => dbar_solve(config),
        Command::HarmonicProject => harmonic_check(config),
        Command::Vanishing => vanishing(config),
        Command::Selftest => selftest(config),
    }
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    instance: &'a str,
    command: &'a str,
    bundle: &'a str,
    sample: usize,
    point: String,
    quantity: &'a str,
    value_re: f64,
    value_im: f64,
    residual: f64,
    error_estimate: f64,
    tolerance: f64,
    passed: bool,
    seed: u64,
    runtime_ms: u64,
}

fn format_point(p: &[[f64; 2]]) -> String {
    p.iter().map(|[re, im]| format!("{re}{im:+}i")).collect::<Vec<_>>().join(" ")
}

/// Versioned CSV with one row per record.
pub fn write_csv<W: Write>(mut out: W, report: &ExperimentReport) -> io::Result<()> {
    writeln!(out, "# flagkop results, schema version {SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    if report.records.is_empty() {
        w.write_record([
            "instance", "command", "bundle", "sample", "point", "quantity", "value_re", "value_im", "residual", "error_estimate", "tolerance",
            "passed", "seed", "runtime_ms",
        ])?;
    }
    for r in &report.records {
        w.serialize(CsvRow {
            instance: &r.instance,
            command: &r.command,
            bundle: &r.bundle,
            sample: r.sample,
            point: format_point(&r.point),
            quantity: &r.quantity,
            value_re: r.value[0],
            value_im: r.value[1],
            residual: r.residual,
            error_estimate: r.error_estimate,
            tolerance: r.tolerance,
            passed: r.passed,
            seed: r.seed,
            runtime_ms: r.runtime_ms,
        })?;
    }
    w.flush()
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub command: &'a str,
    pub instance: &'a str,
    pub bundle: &'a str,
    pub seed: u64,
    pub records: usize,
    pub failures: usize,
    pub passed: bool,
    pub max_residual: f64,
    pub max_error_estimate: f64,
    pub config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<&'a [SampleRecord]>,
}

pub fn summary<'a>(command: Command, config: &'a RunConfig, report: &'a ExperimentReport) -> Summary<'a> {
    Summary {
        schema_version: SCHEMA_VERSION,
        command: command.name(),
        instance: &config.flag,
        bundle: &config.bundle,
        seed: config.seed,
        records: report.records.len(),
        failures: report.records.iter().filter(|r| !r.passed).count(),
        passed: report.passed(),
        max_residual: report.max_residual(),
        max_error_estimate: report.records.iter().map(|r| r.error_estimate).fold(0.0, f64::max),
        config,
        samples: Some(&report.records),
    }
}

fn write_outputs(command: Command, config: &RunConfig, report: &ExperimentReport) -> Result<(), CliError> {
    let full = summary(command, config, report);
    let json = serde_json::to_string_pretty(&full).map_err(io::Error::from)?;
    match &config.output.csv {
        Some(path) => {
            write_csv(io::BufWriter::new(fs::File::create(path)?), report)?;
            let json_path = config.output.json.clone().unwrap_or_else(|| path.with_extension("json"));
            fs::write(json_path, json + "\n")?;
        }
        None => {
            write_csv(io::stdout().lock(), report)?;
            match &config.output.json {
                Some(path) => fs::write(path, json + "\n")?,
                None => {
                    let brief = Summary { samples: None, ..full };
                    eprintln!("{}", serde_json::to_string(&brief).map_err(io::Error::from)?);
                }
            }
        }
    }
    Ok(())
}

fn chart_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Diagonal vanishing, first-order vanishing along random directions, and
/// the rank of `E` from the nullity of `Φ`.
pub fn verify_diagonal(config: &RunConfig) -> Result<ExperimentReport, CliError> {
    let flag = config.flag_type()?;
    let n = flag.dimension();
    let model = DiagonalModel::big_cell(&flag);
    let tol = config.tolerance_or(1e-2);
    let ctx = config.context(Command::VerifyDiagonal, tol);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = ExperimentReport::default();
    let rank_checks = config.pairs.min(100);
    for k in 0..config.pairs {
        let t0 = Instant::now();
        let z = sample_coords(&flag, &mut rng);
        let zeta = sample_coords(&flag, &mut rng);
        let on_diag = model.eta_norm(&z, &z).map_err(Error::from)?;
        let norm = model.eta_norm(&z, &zeta).map_err(Error::from)?;
        let dist = chart_distance(&z, &zeta);
        let eps = 1e-5 * z.iter().map(|x| x.norm()).fold(1.0, f64::max);
        let towards = |t: f64| -> Vec<C64> { z.iter().zip(&zeta).map(|(a, b)| a + (b - a) * (t / dist)).collect() };
        let ratio = model.eta_norm(&z, &towards(eps)).map_err(Error::from)? / model.eta_norm(&z, &towards(2.0 * eps)).map_err(Error::from)?;
        let deviation = (ratio - 0.5).abs();
        let mut terms = term_values("eta_diag", &[GradedElement::scalar(n, c(on_diag, 0.0))]);
        terms.extend(term_values("distance", &[GradedElement::scalar(n, c(dist, 0.0))]));
        terms.extend(term_values("ratio", &[GradedElement::scalar(n, c(ratio, 0.0))]));
        let mut ok = on_diag < 1e-12 && norm > 0.0 && deviation <= tol;
        if k < rank_checks {
            let phi = model.phi_matrix(&z);
            let nullity = phi.ncols() - linalg::numerical_rank(&phi, 1e-10);
            terms.extend(term_values("nullity", &[GradedElement::scalar(n, c(nullity as f64, 0.0))]));
            ok &= nullity == n;
        }
        report.records.push(ctx.record(k, &z, "eta_norm", c(norm, 0.0), terms, deviation, 0.0, ok, t0));
    }
    Ok(report)
}

fn omega_p1(n: usize, fam: (Family, Family), w: C64) -> GradedElement {
    let g = &GradedElement::gen(n, fam.0, 1) * &GradedElement::gen(n, fam.1, 1);
    g.scale(c(0.0, 1.0 / (2.0 * std::f64::consts::PI)) / (1.0 + w.norm_sqr()).powi(2))
}

/// `P` against closed forms and the determinant route, and `∫_ζ P(z, ·) = 1`.
pub fn chern_form(config: &RunConfig) -> Result<ExperimentReport, CliError> {
    let flag = config.flag_type()?;
    let n = flag.dimension();
    let engine = config.engine()?;
    let kernels = Kernels::new(&flag, engine);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = ExperimentReport::default();
    let pairs = config.pairs.min(100);
    let p1 = flag.is_projective() && n == 1;
    let closed = config.context(Command::ChernForm, 1e-6);
    let det = config.context(Command::ChernForm, if n <= 2 && flag.is_projective() { 1e-8 } else { 1e-6 });
    for k in 0..pairs {
        let t0 = Instant::now();
        let z = sample_coords(&flag, &mut rng);
        let zeta = sample_coords(&flag, &mut rng);
        let p = kernels.kernel_p(&z, &zeta, Directions::BOTH).map_err(Error::from)?;
        let pv = p.scalar().clone();
        let mut point = z.clone();
        point.extend_from_slice(&zeta);
        if p1 {
            let expect = &omega_p1(1, (Family::Zhol, Family::Zanti), z[0]) + &omega_p1(1, (Family::Whol, Family::Wanti), zeta[0]);
            let rel = pv.distance(&expect) / expect.max_abs();
            let terms = term_values("p", std::slice::from_ref(&pv));
            report.records.push(closed.record(k, &point, "p_closed_form", principal(std::slice::from_ref(&pv)), terms, rel, 0.0, rel < closed.tolerance, t0));
        }
        let t1 = Instant::now();
        let d = kernels.p_det(&z, &zeta, Directions::BOTH).map_err(Error::from)?;
        let rel = pv.distance(&d) / d.max_abs();
        let terms = term_values("p_det", std::slice::from_ref(&d));
        report.records.push(det.record(k, &point, "p_det_vs_e_top", principal(&[d]), terms, rel, 0.0, rel < det.tolerance, t1));
    }
    let gauss_p1 = p1 && config.quadrature.method.resolve(n) == QuadMethod::Gauss;
    let tol = config.tolerance_or(if gauss_p1 { 1e-3 } else { 1e-2 });
    let ctx = config.context(Command::ChernForm, tol);
    let solver = Solver::new(&flag, engine, config.quadrature.clone());
    let one = TestForm::constant(n, ONE);
    let count = config.points.min(3);
    for (k, z) in sample_points(n, count, 1.0, config.seed).iter().enumerate() {
        let t0 = Instant::now();
        let est = solver.integrate_p(z, Domain::Whole, &one)?;
        let v = est.scalar();
        let residual = (v - ONE).norm();
        let terms = term_values("integral_p", &est.value);
        let bound = if config.quadrature.method.resolve(n) == QuadMethod::Mc { tol.max(3.0 * est.error) } else { tol };
        report.records.push(ctx.record(k, z, "integral_p", v, terms, residual, est.error, residual <= bound, t0));
    }
    Ok(report)
}

fn require_p1(flag: &FlagType, what: &str) -> Result<(), CliError> {
    if flag.is_projective() && flag.dimension() == 1 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} is available on P¹ (flag 1,2:2), not {flag}")))
    }
}

/// Evaluation points at distance at least `0.2` from the domain boundary.
fn interior_points(n: usize, count: usize, domain: Domain, seed: u64) -> Vec<Vec<C64>> {
    match domain {
        Domain::Whole => sample_points(n, count, 1.5, seed),
        Domain::Disk { center, radius } => sample_points(n, count, (radius - 0.2).max(radius / 2.0), seed)
            .into_iter()
            .map(|p| p.into_iter().map(|x| x + center).collect())
            .collect(),
    }
}

pub fn koppelman_check(config: &RunConfig) -> Result<ExperimentReport, CliError> {
    let flag = config.flag_type()?;
    require_p1(&flag, "koppelman-check")?;
    let engine = config.engine()?;
    let domain = config.domain()?;
    let solver = Solver::new(&flag, engine, config.quadrature.clone());
    let points = interior_points(1, config.points, domain, config.seed);
    let mut ctx = config.context(Command::KoppelmanCheck, config.tolerance_or(1e-2));
    let forms: Vec<(&str, TestForm)> = match domain {
        Domain::Disk { .. } => vec![("bump", disk_test_form())],
        Domain::Whole => {
            let all = [
                (FormChoice::One, "one", TestForm::constant(1, ONE)),
                (FormChoice::Omega, "omega", TestForm::fubini_study(1)),
                (FormChoice::Dbar, "dbar_psi", manufactured_p1(engine).1),
            ];
            all.into_iter()
                .filter(|(choice, _, _)| config.form == FormChoice::All || config.form == *choice)
                .map(|(_, name, f)| (name, f))
                .collect()
        }
    };
    let mut report = ExperimentReport::default();
    for (name, form) in forms {
        ctx.bundle = format!("{}:{name}", config.bundle);
        report.extend(crate::solver::koppelman_verify(&solver, &form, domain, &points, &ctx)?);
    }
    Ok(report)
}

/// `∂̄u = φ` for `φ = ∂̄ψ`: trivial bundle with `ψ = 1/(1+|b|²)`, or
/// `L:1^m` with a random smooth section.
pub fn dbar_solve(config: &RunConfig) -> Result<ExperimentReport, CliError> {
    let flag = config.flag_type()?;
    require_p1(&flag, "dbar-solve")?;
    let engine = config.engine()?;
    let bundle = config.bundle_descriptor()?;
    let tol = config.tolerance_or(1e-2);
    let ctx = config.context(Command::DbarSolve, tol);
    let points = sample_points(1, config.points, 1.5, config.seed);
    let weight = Weight::from_descriptor(&flag, &bundle).map_err(|e| CliError::Config(e.to_string()))?;
    let trivial = weight.rank() == 1 && bundle.factors.is_empty();
    let (psi, phi) = if trivial {
        let (psi, phi) = manufactured_p1(engine);
        (Some(psi), phi)
    } else {
        let power = match bundle.factors[..] {
            [crate::weights::BundleFactor::Line { level: 1, power }] => power,
            _ => return Err(CliError::Config(format!("dbar-solve supports the trivial bundle and L:1^m on P¹, not {bundle}"))),
        };
        (None, TestForm::random_p1_section(-power, config.seed).dbar(engine))
    };
    let solver = Solver::new(&flag, engine, config.quadrature.clone()).with_weight(weight);
    let closed = solver.closedness_residual(&phi, &points)?;
    if closed > 1e-6 {
        return Err(Error::Invalid(format!("right-hand side is not ∂̄-closed (residual {closed:.2e})")).into());
    }
    let mut report = ExperimentReport::default();
    let mut shifts = Vec::new();
    for (k, z) in points.iter().enumerate() {
        let t0 = Instant::now();
        let s = solver.solve_at(&phi, z)?;
        let mut terms = term_values("u", &s.u);
        terms.extend(term_values("dbar_u", &s.dbar_u));
        terms.extend(term_values("phi", &s.phi));
        terms.extend(term_values("p_term", &s.p_term));
        let p_norm = forms_norm(&s.p_term);
        report.records.push(ctx.record(k, z, "u", principal(&s.u), terms, s.solve_residual, s.error_estimate, s.solve_residual <= tol, t0));
        if let Some(psi) = &psi {
            let diff = s.u[0].coefficient(crate::exterior::Monomial::ONE) - psi.eval(z)?[0].coefficient(crate::exterior::Monomial::ONE);
            shifts.push((k, z.clone(), diff, s.error_estimate));
        } else {
            let pctx = config.context(Command::DbarSolve, 1e-3);
            report.records.push(pctx.record(k, z, "p_term", c(p_norm, 0.0), Vec::new(), p_norm, s.error_estimate, p_norm <= 1e-3, t0));
        }
    }
    if let Some(&(_, _, first, _)) = shifts.first() {
        let t0 = Instant::now();
        for (k, z, d, err) in &shifts {
            let spread = (d - first).norm();
            report.records.push(ctx.record(*k, z, "u_minus_psi", *d, Vec::new(), spread, *err, spread <= tol, t0));
        }
    }
    Ok(report)
}

/// A `(1,1)`-form `g(b) dz∧dz̄` with a Gaussian profile centred at `b0`.
fn bump_11(b0: C64, width: f64) -> TestForm {
    let field = Arc::new(move |b: &[C64]| {
        let g = (-(b[0] - b0).norm_sqr() / width).exp();
        Ok(vec![(&GradedElement::gen(1, Family::Zhol, 1) * &GradedElement::gen(1, Family::Zanti, 1)).scale(c(0.0, g))])
    });
    TestForm::new(1, (1, 1), "O", 1, FormTag::RandomBump, field)
}

/// `∂̄` of the `(1,0)`-form `b̄ e^{−|b|²} dz`.
fn exact_11(engine: DerivativeEngine) -> TestForm {
    let field = Arc::new(|b: &[C64]| Ok(vec![GradedElement::gen(1, Family::Zhol, 1).scale(b[0].conj() * (-b[0].norm_sqr()).exp())]));
    TestForm::new(1, (1, 0), "O", 1, FormTag::DbarOfPotential, field).dbar(engine)
}

/// Harmonic projector identities on `P¹`.
pub fn harmonic_check(config: &RunConfig) -> Result<ExperimentReport, CliError> {
    let flag = config.flag_type()?;
    require_p1(&flag, "harmonic-project")?;
    let engine = config.engine()?;
    let kernels = Kernels::new(&flag, engine);
    let spec = config.quadrature.clone();
    let tol = config.tolerance_or(1e-2);
    let ctx = config.context(Command::HarmonicProject, tol);
    let points = sample_points(1, config.points.min(4), 1.5, config.seed);
    let project = |form: &TestForm, spec: &QuadratureSpec, z: &[C64]| -> crate::error::Result<crate::quadrature::Estimate> {
        harmonic_project(&kernels, spec, z, |zeta| Ok(form.eval(zeta)?.remove(0)))
    };
    let omega = TestForm::fubini_study(1);
    let exact = exact_11(engine);
    let bumps = [bump_11(c(0.3, -0.2), 0.5), bump_11(c(-1.0, 0.5), 1.0), bump_11(c(0.2, 1.1), 2.0)];
    let mut report = ExperimentReport::default();
    let mut range = CMat::zeros(bumps.len(), points.len());
    for (k, z) in points.iter().enumerate() {
        let t0 = Instant::now();
        let pw = project(&omega, &spec, z)?;
        let w = omega.eval(z)?;
        let rel = forms_distance(&pw.value, &w) / forms_norm(&w);
        let terms = term_values("projection", &pw.value);
        report.records.push(ctx.record(k, z, "reproduce_omega", principal(&pw.value), terms, rel, pw.error, rel <= tol, t0));

        let t0 = Instant::now();
        let pe = project(&exact, &spec, z)?;
        let norm = forms_norm(&pe.value);
        let terms = term_values("projection", &pe.value);
        report.records.push(ctx.record(k, z, "annihilate_exact", principal(&pe.value), terms, norm, pe.error, norm <= tol, t0));

        for (j, b) in bumps.iter().enumerate() {
            range[(j, k)] = principal(&project(b, &spec, z)?.value);
        }
    }
    let t0 = Instant::now();
    let sv = range.clone().singular_values();
    let ratio = if sv[0] > 0.0 { sv.iter().skip(1).cloned().fold(0.0, f64::max) / sv[0] } else { 1.0 };
    let rank = linalg::numerical_rank(&range, tol);
    let terms = term_values("singular_values", &sv.iter().map(|s| GradedElement::scalar(1, c(*s, 0.0))).collect::<Vec<_>>());
    report.records.push(ctx.record(0, &[], "range_rank", c(rank as f64, 0.0), terms, ratio, 0.0, rank == 1, t0));

    let inner = spec.clone().with_order((spec.order / 2).max(8));
    let outer = inner.clone();
    let z = &points[0];
    let t0 = Instant::now();
    let once = project(&bumps[0], &spec, z)?;
    let first = TestForm::new(
        1,
        (1, 1),
        "O",
        1,
        FormTag::RandomBump,
        Arc::new({
            let kernels = kernels.clone();
            let bump = bumps[0].clone();
            let inner = inner.clone();
            move |zeta: &[C64]| Ok(harmonic_project(&kernels, &inner, zeta, |w| Ok(bump.eval(w)?.remove(0)))?.value)
        }),
    );
    let twice = project(&first, &outer, z)?;
    let rel = forms_distance(&twice.value, &once.value) / forms_norm(&once.value);
    let terms = term_values("projection_twice", &twice.value);
    report.records.push(ctx.record(0, z, "idempotence", principal(&twice.value), terms, rel, twice.error + once.error, rel <= tol, t0));
    Ok(report)
}

pub fn vanishing(config: &RunConfig) -> Result<ExperimentReport, CliError> {
    let flag = config.flag_type()?;
    require_p1(&flag, "vanishing")?;
    if config.level != 1 {
        return Err(CliError::Config(format!("vanishing on P¹ uses level 1, not {}", config.level)));
    }
    let engine = config.engine()?;
    let mut cfg = config.clone();
    cfg.bundle = format!("L:{}^{}", config.level, config.power);
    let ctx = cfg.context(Command::Vanishing, config.tolerance_or(1e-2));
    let points = sample_points(1, config.points, 1.5, config.seed);
    Ok(vanishing_experiment(&flag, config.level, config.power, engine, config.quadrature.clone(), &points, &ctx)?)
}

/// Examples whose answers are known exactly.
pub fn selftest(config: &RunConfig) -> Result<ExperimentReport, CliError> {
    let engine = config.engine()?;
    let p1: FlagType = "1,2:2".parse().map_err(config_err)?;
    let mut report = ExperimentReport::default();
    let mut check = |name: &str, value: C64, residual: f64, tol: f64| {
        let ctx = RecordContext { instance: p1.to_string(), command: "selftest".into(), bundle: "O".into(), seed: config.seed, tolerance: tol };
        let k = report.records.len();
        report.records.push(ctx.record(k, &[], name, value, Vec::new(), residual, 0.0, residual <= tol, Instant::now()));
    };

    let z = [c(0.3, -0.4)];
    let model = DiagonalModel::big_cell(&p1);
    let d = model.eta_norm(&z, &z).map_err(Error::from)?;
    check("eta_on_diagonal", c(d, 0.0), d, 1e-12);

    for s in ["1,2:2", "1,3:3", "2,4:4", "1,2,3:3"] {
        let f: FlagType = s.parse().map_err(config_err)?;
        let back = f.to_string();
        check(&format!("flag_roundtrip_{s}"), ZERO, if back == s { 0.0 } else { 1.0 }, 0.0);
    }
    for s in ["H:1", "L:1^-2", "H:1*L:2^3"] {
        let b: BundleDescriptor = s.parse().map_err(config_err)?;
        check(&format!("bundle_roundtrip_{s}"), ZERO, if b.to_string() == s { 0.0 } else { 1.0 }, 0.0);
    }

    let trivial = Weight::trivial();
    let axioms = check_axioms(&trivial, &model, &engine, &z, &[c(1.1, 0.2)]).map_err(Error::from)?;
    check("trivial_weight_axioms", ZERO, axioms.max_residual(), 1e-12);

    let constant = TestForm::constant(1, c(2.0, -1.0));
    let dc = forms_norm(&constant.dbar(engine).eval(&z)?);
    check("dbar_of_constant", ZERO, dc, 1e-12);

    let metric = MetricData::new(&p1)?;
    let star = metric.hodge_star(&z, &GradedElement::one(1))?;
    let vol = metric.volume_form(&z);
    check("star_of_one", ZERO, star.distance(&vol), 1e-14);

    let terms: Vec<C64> = [1.0, 1e100, 1.0, -1e100].iter().map(|x| c(*x, 0.0)).collect();
    let sum: crate::quadrature::CompensatedSum = terms.into_iter().collect();
    check("compensated_sum", sum.value(), (sum.value() - c(2.0, 0.0)).norm(), 0.0);

    let quad = config.quadrature.clone().with_order(config.quadrature.order.min(8));
    let solver = Solver::new(&p1, engine, quad);
    let zero = TestForm::new(1, (0, 1), "O", 1, FormTag::Invariant, Arc::new(|_: &[C64]| Ok(vec![GradedElement::zero(1)])));
    let u = solver.integrate_k(&z, Domain::Whole, &zero)?;
    check("solve_zero_form", principal(&u.value), forms_norm(&u.value), 0.0);
    Ok(report)
}
