//! Command-line front end: spec files in, JSON reports and CSV tables out.
//!
//! Exit codes: 0 when every check passes, 1 when any check fails, 2 on
//! malformed input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use convexdef::boundary::{
    default_fd_step, foot_point, hessian_delta_fd, hessian_delta_pair, sample_boundary,
    sample_collar,
};
use convexdef::convexify::{
    center_point, choose_k, min_eig_rows, normalize_r0, square_boost, try_full_convexify,
    Constants, ConvexifyConfig, SAFETY,
};
use convexdef::field::{Normalized, Raw};
use convexdef::spec::{corpus_source, DomainSpec, SpecSource, DEFAULT_SEED};
use convexdef::verify::{
    check_eikonal, check_full_convexity, check_geomseries, check_half_bound,
    check_log_convexity_equivalence, check_normal_annihilation, check_sigma_lemma,
    check_tangential_convexity, check_threshold_equivalence, Report,
};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or unusable input (exit 2).
    #[error("{0}")]
    Input(String),
    /// A computation failed after the input was accepted (exit 1).
    #[error("{0}")]
    Run(#[from] convexdef::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Run(_) | CliError::Io { .. } => 1,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub name: String,
    pub dim: usize,
    pub expr: String,
    pub region: RegionFile,
    pub seed_point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collar_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SpecFile {
    pub fn source(&self) -> SpecSource {
        SpecSource {
            name: self.name.clone(),
            dim: self.dim,
            expr: self.expr.clone(),
            lo: self.region.lo.clone(),
            hi: self.region.hi.clone(),
            seed_point: self.seed_point.clone(),
            collar_radius: self.collar_radius,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
        }
    }

    pub fn from_source(s: &SpecSource) -> Self {
        Self {
            name: s.name.clone(),
            dim: s.dim,
            expr: s.expr.clone(),
            region: RegionFile {
                lo: s.lo.clone(),
                hi: s.hi.clone(),
            },
            seed_point: s.seed_point.clone(),
            collar_radius: s.collar_radius,
            seed: Some(s.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub artifact_version: String,
    pub command: String,
    pub spec: SpecFile,
    pub checks: Vec<Report>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<Constants>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch_radius: Option<f64>,
}

impl ReportFile {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

/// Loads `builtin:<name>` or a JSON spec file and validates it, including
/// that the boundary meets the region.
pub fn load_spec(path: &str) -> Result<(SpecFile, DomainSpec), CliError> {
    let file = if let Some(name) = path.strip_prefix("builtin:") {
        let src = corpus_source(name).ok_or_else(|| input(format!("unknown built-in spec `{name}`")))?;
        SpecFile::from_source(&src)
    } else {
        let text = fs::read_to_string(path).map_err(|e| input(format!("{path}: {e}")))?;
        serde_json::from_str::<SpecFile>(&text).map_err(|e| input(format!("{path}: {e}")))?
    };
    let spec = DomainSpec::from_source(&file.source()).map_err(|e| input(format!("{path}: {e}")))?;
    sample_boundary(&spec, 1, spec.seed)
        .map_err(|e| input(format!("{path}: {e}")))?;
    Ok((file, spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Boundary,
    Full,
    Delta,
    Log,
    All,
}

#[derive(Debug, Parser)]
#[command(name = "convexdef", version, about = "Convex defining functions: construct and verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a verification suite on a domain spec.
    Check(CheckArgs),
    /// Build a convex defining function near a boundary point.
    Convexify(ConvexifyArgs),
    /// Tabulate the signed distance and its Hessian.
    Distance(DistanceArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct CheckArgs {
    /// Spec file path or `builtin:<name>`.
    pub spec: String,
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Overrides the spec seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ConvexifyArgs {
    pub spec: String,
    /// Comma-separated point projected onto the boundary; defaults to the
    /// spec seed point.
    #[arg(long)]
    pub center: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "emit-csv")]
    pub emit_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct DistanceArgs {
    pub spec: String,
    /// CSV of points, one per row (an optional header row is skipped).
    #[arg(long, conflicts_with = "grid")]
    pub points: Option<PathBuf>,
    /// Grid resolution per axis over the spec region, e.g. "21,21".
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Output of a command: exit code plus the artifacts it produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub report: Option<ReportFile>,
    pub csv: Option<String>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_point(s: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| input(format!("bad point `{s}`: {e}")))?;
    if v.len() != dim || v.iter().any(|x| !x.is_finite()) {
        return Err(input(format!("point `{s}` must have {dim} finite coordinates")));
    }
    Ok(v)
}

/// Round-trippable float formatting for CSV.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn run_suite(spec: &DomainSpec, suite: Suite, n: usize, seed: u64) -> Result<Vec<Report>, CliError> {
    let w = spec.collar_radius;
    let mut out = Vec::new();
    let want = |s: Suite| suite == s || suite == Suite::All;
    if want(Suite::Boundary) {
        let b = sample_boundary(spec, n, seed)?;
        out.push(check_tangential_convexity(spec, &b));
        let r0 = normalize_r0(spec, &b)?;
        let k = choose_k(spec, &b, SAFETY)?;
        let r1 = square_boost(spec, &r0, k, &b)?;
        out.push(check_sigma_lemma(r1.transformed.as_ref(), &b));
        out.extend(r0.reports);
        out.extend(r1.reports);
    }
    if want(Suite::Full) {
        let pts = sample_collar(spec, n, seed, -w, w)?;
        out.push(check_full_convexity(&Raw(spec.clone()), &pts));
    }
    if want(Suite::Delta) {
        let pts = sample_collar(spec, n, seed, -w, w)?;
        out.push(check_geomseries(spec, &pts));
        out.push(check_eikonal(spec, &pts));
        out.push(check_normal_annihilation(spec, &pts));
        let ext = sample_collar(spec, n, seed.wrapping_add(1), 0.01 * w, w)?;
        out.push(check_half_bound(spec, &ext, seed));
    }
    if want(Suite::Log) {
        let interior = sample_collar(spec, n, seed, -w, -0.01 * w)?;
        out.push(check_log_convexity_equivalence(spec, &interior));
        let holdout = sample_collar(spec, n, seed.wrapping_add(2), -0.9 * w, -0.01 * w)?;
        out.push(check_threshold_equivalence(&Normalized(spec.clone()), &interior, &holdout));
    }
    Ok(out)
}

pub fn cmd_check(args: &CheckArgs) -> Result<Outcome, CliError> {
    let (file, spec) = load_spec(&args.spec)?;
    if args.samples == 0 {
        return Err(input("--samples must be at least 1"));
    }
    let seed = args.seed.unwrap_or(spec.seed);
    let checks = run_suite(&spec, args.suite, args.samples, seed)?;
    for c in &checks {
        eprintln!(
            "{:<28} {} worst={:e} n={} ({:.1} ms)",
            c.check_name,
            if c.pass { "pass" } else { "FAIL" },
            c.worst_value,
            c.samples,
            c.runtime_ms
        );
    }
    let report = ReportFile {
        artifact_version: ARTIFACT_VERSION.into(),
        command: "check".into(),
        spec: file,
        checks,
        constants: None,
        patch_radius: None,
    };
    if let Some(p) = &args.out {
        write_file(p, &report.to_json())?;
    }
    Ok(Outcome {
        code: if report.passed() { 0 } else { 1 },
        report: Some(report),
        csv: None,
    })
}

pub fn cmd_convexify(args: &ConvexifyArgs) -> Result<Outcome, CliError> {
    let (file, spec) = load_spec(&args.spec)?;
    let c = match &args.center {
        Some(s) => parse_point(s, spec.dim)?,
        None => spec.seed_point.clone(),
    };
    let center = center_point(&spec, &c).map_err(|e| input(format!("center {c:?}: {e}")))?;
    let config = ConvexifyConfig {
        seed: spec.seed,
        ..Default::default()
    };
    let attempt = try_full_convexify(&spec, &center, &config)?;
    let res = attempt.result;
    let csv = res.sigma.as_ref().map(|sigma| {
        let mut s = String::new();
        for i in 1..=spec.dim {
            let _ = write!(s, "x{i},");
        }
        s.push_str("min_eig_before,min_eig_after\n");
        for (x, b, a) in min_eig_rows(sigma.as_ref(), res.transformed.as_ref(), &res.samples) {
            for v in &x {
                s.push_str(&num(*v));
                s.push(',');
            }
            let _ = writeln!(s, "{},{}", num(b), num(a));
        }
        s
    });
    let constants = (res.constants != Constants::default()).then(|| res.constants.clone());
    let report = ReportFile {
        artifact_version: ARTIFACT_VERSION.into(),
        command: "convexify".into(),
        spec: file,
        checks: res.reports,
        constants,
        patch_radius: res.patch_radius,
    };
    if let Some(p) = &args.out {
        write_file(p, &report.to_json())?;
    }
    if let (Some(p), Some(c)) = (&args.emit_csv, &csv) {
        write_file(p, c)?;
    }
    Ok(Outcome {
        code: if attempt.verified { 0 } else { 1 },
        report: Some(report),
        csv,
    })
}

fn read_points(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_point(line, dim) {
            Ok(p) => pts.push(p),
            Err(_) if i == 0 => continue, // header
            Err(e) => return Err(input(format!("{}:{}: {e}", path.display(), i + 1))),
        }
    }
    Ok(pts)
}

fn grid_points(spec: &DomainSpec, s: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let counts = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| input(format!("bad grid `{s}`: {e}")))?;
    if counts.len() != spec.dim {
        return Err(input(format!("grid `{s}` must have {} counts", spec.dim)));
    }
    let mut pts = vec![Vec::new()];
    for (axis, &m) in counts.iter().enumerate() {
        let (lo, hi) = (spec.region.lo[axis], spec.region.hi[axis]);
        let mut next = Vec::new();
        for p in &pts {
            for k in 0..m {
                let t = if m == 1 { 0.5 } else { k as f64 / (m - 1) as f64 };
                let mut q: Vec<f64> = p.clone();
                q.push(lo + t * (hi - lo));
                next.push(q);
            }
        }
        pts = next;
    }
    Ok(pts)
}

/// One CSV row of the distance table.
pub fn distance_row(spec: &DomainSpec, x: &[f64]) -> String {
    let mut s: String = x.iter().map(|v| num(*v) + ",").collect();
    let n = spec.dim;
    let row = foot_point(spec, x).and_then(|fp| {
        let (hs, _, _) = hessian_delta_pair(spec, x)?;
        let lam = hs.min_eigenvalue()?;
        let hf = hessian_delta_fd(spec, x, default_fd_step(x))?;
        let res = hf.sub(&hs).frobenius_norm() / (1.0 + hs.frobenius_norm());
        Ok((fp, lam, res))
    });
    match row {
        Ok((fp, lam, res)) => {
            s.push_str(&num(fp.delta));
            for g in &fp.normal {
                s.push(',');
                s.push_str(&num(*g));
            }
            let _ = write!(s, ",{},{},ok", num(lam), num(res));
        }
        Err(_) => {
            s.push_str(&",".repeat(n + 3));
            s.push_str("unreachable");
        }
    }
    s
}

pub fn cmd_distance(args: &DistanceArgs) -> Result<Outcome, CliError> {
    let (_, spec) = load_spec(&args.spec)?;
    let pts = match (&args.points, &args.grid) {
        (Some(p), None) => read_points(p, spec.dim)?,
        (None, Some(g)) => grid_points(&spec, g)?,
        _ => return Err(input("exactly one of --points or --grid is required")),
    };
    if pts.is_empty() {
        return Err(input("no points to evaluate"));
    }
    let n = spec.dim;
    let mut csv: String = (1..=n).map(|i| format!("x{i},")).collect();
    csv.push_str("delta,");
    for i in 1..=n {
        let _ = write!(csv, "grad{i},");
    }
    csv.push_str("min_eig_series,residual_fd,status\n");
    for x in &pts {
        csv.push_str(&distance_row(&spec, x));
        csv.push('\n');
    }
    match &args.out {
        Some(p) => write_file(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(Outcome {
        code: 0,
        report: None,
        csv: Some(csv),
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let res = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Convexify(a) => cmd_convexify(a),
        Command::Distance(a) => cmd_distance(a),
    };
    match res {
        Ok(o) => {
            if o.code != 0 {
                eprintln!("verification failed");
            }
            o.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
