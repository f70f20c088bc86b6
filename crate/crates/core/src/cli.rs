//! Command-line front end: sweeps, tradeoff curves, oracle verification and
//! meter moments, written as deterministic CSV.
//!
//! Settings resolve as flags, then a `key = value` config file, then the
//! per-command defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::edr::{self, EdrError, EdrPoint};
use crate::faraday::{self, FaradayError, MeasurementConfig, MeterSetup};
use crate::meter::{self, MeterError};
use crate::psa::{self, PsaConfig, PsaError};
use crate::relations::{self, BoundsRecord, RelationsError};
use crate::tolerances;

pub const THREADS_ENV: &str = "FARADAY_EDR_THREADS";

pub const CSV_HEADER: &str = "model,g,chi,alpha2,r,eps2_numeric,eps2_analytic,eta2_numeric,eta2_analytic,hak,ozawa_lhs,bo_lhs,bot_lhs,flags";

pub const MOMENTS_HEADER: &str = "model,alpha2,r,cutoff,norm_deficit,\
s0_mean,s0_mean_analytic,s0_var,s0_var_analytic,s0_var_gap,\
sx_mean,sx_mean_analytic,sx_var,sx_var_analytic,sx_var_gap,\
sy_mean,sy_mean_analytic,sy_var,sy_var_analytic,sy_var_gap,\
sz_mean,sz_mean_analytic,sz_var,sz_var_analytic,sz_var_gap";

const SINGULAR: &str = "SINGULAR";
const NA: &str = "NA";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Resource(String),
    #[error("verification failed: {0}")]
    Verify(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Resource(_) | CliError::Io(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

impl From<MeterError> for CliError {
    fn from(e: MeterError) -> Self {
        match e {
            MeterError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Resource(e.to_string()),
        }
    }
}

impl From<FaradayError> for CliError {
    fn from(e: FaradayError) -> Self {
        match e {
            FaradayError::Meter(m) => m.into(),
            FaradayError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Resource(e.to_string()),
        }
    }
}

impl From<EdrError> for CliError {
    fn from(e: EdrError) -> Self {
        match e {
            EdrError::Faraday(f) => f.into(),
            _ => CliError::Resource(e.to_string()),
        }
    }
}

impl From<RelationsError> for CliError {
    fn from(e: RelationsError) -> Self {
        match e {
            RelationsError::Edr(e) => e.into(),
            RelationsError::Psa(PsaError::QuadratureNonConvergence { .. }) => CliError::Resource(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PsaError> for CliError {
    fn from(e: PsaError) -> Self {
        match e {
            PsaError::QuadratureNonConvergence { .. } => CliError::Resource(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "faraday-edr", version, about = "Error and disturbance of Faraday spin measurements")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// ε², η² and bounds over a grid of interaction strengths g.
    SweepG(SweepArgs),
    /// Phase-space or weak-interaction model over a grid of χ.
    SweepChi(SweepArgs),
    /// Error–disturbance pairs with the HAK and tight BO frontiers, plus a plot script.
    Tradeoff(SweepArgs),
    /// Numeric-versus-closed-form oracle suites.
    Verify(VerifyArgs),
    /// Stokes means and variances of the meter state against closed forms.
    Moments(MomentsArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct SweepArgs {
    /// exact-coherent, exact-squeezed, psa or wia
    #[arg(long)]
    pub model: Option<String>,
    /// First grid value; accepts pi, pi/2, pi/4, k*pi/m
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    /// Last grid value, inclusive
    #[arg(long, allow_hyphen_values = true)]
    pub stop: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Mean photon number |α|²
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// Squeezing magnitude (positive: amplitude squeezing)
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    /// Allowed norm loss of the truncated meter state
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// CSV path; standard output when absent
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Flat `key = value` file with defaults for the flags above
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct VerifyArgs {
    /// Restrict the agreement suite to one |α|²
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// Force the photon-number cutoff of the agreement suite
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub tail_tol: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct MomentsArgs {
    /// exact-coherent or exact-squeezed
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated |α|² values
    #[arg(long)]
    pub alpha2: Option<String>,
    /// Comma-separated squeezing values
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<String>,
    #[arg(long)]
    pub tail_tol: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    ExactCoherent,
    ExactSqueezed,
    Psa,
    Wia,
}

impl Model {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "exact-coherent" => Ok(Model::ExactCoherent),
            "exact-squeezed" => Ok(Model::ExactSqueezed),
            "psa" => Ok(Model::Psa),
            "wia" => Ok(Model::Wia),
            other => Err(CliError::Usage(format!("unknown model '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::ExactCoherent => "exact-coherent",
            Model::ExactSqueezed => "exact-squeezed",
            Model::Psa => "psa",
            Model::Wia => "wia",
        }
    }

    fn is_exact(self) -> bool {
        matches!(self, Model::ExactCoherent | Model::ExactSqueezed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    G,
    Chi,
    Tradeoff,
}

/// Fully resolved sweep settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRequest {
    pub kind: SweepKind,
    pub model: Model,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    /// Always set for exact models; optional for χ sweeps, where it only
    /// fills the g column.
    pub alpha2: Option<f64>,
    pub r: f64,
    pub tail_tol: f64,
    pub output: Option<PathBuf>,
}

impl SweepRequest {
    pub fn grid(&self) -> Vec<f64> {
        relations::linspace(self.start, self.stop, self.steps)
    }
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

fn load_config(path: Option<&Path>, allowed: &[&str]) -> Result<Vec<(String, String)>, CliError> {
    let Some(path) = path else {
        return Ok(Vec::new());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let entries = parse_config(&text)?;
    for (k, _) in &entries {
        if !allowed.contains(&k.as_str()) {
            return Err(CliError::Usage(format!("unknown config key '{k}'")));
        }
    }
    Ok(entries)
}

fn lookup<'a>(entries: &'a [(String, String)], key: &str) -> Option<&'a str> {
    entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse '{s}' as a number")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("{key}: value must be finite")))
    }
}

/// Parses a real number or a multiple of π written as `pi`, `pi/2`, `3pi/4`,
/// `3*pi/4`, `-pi/2`.
pub fn parse_angle(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let Some(pos) = t.find("pi") else {
        return parse_f64("angle", t);
    };
    let bad = || CliError::Usage(format!("cannot parse angle '{s}'"));
    let head = t[..pos].trim().trim_end_matches('*').trim();
    let tail = t[pos + 2..].trim();
    let coeff = match head {
        "" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let denom = if tail.is_empty() {
        1.0
    } else {
        let d = tail.strip_prefix('/').ok_or_else(bad)?;
        d.trim().parse::<f64>().map_err(|_| bad())?
    };
    if denom == 0.0 || !coeff.is_finite() || !denom.is_finite() {
        return Err(bad());
    }
    Ok(coeff * std::f64::consts::PI / denom)
}

fn validate_tail_tol(tail_tol: f64) -> Result<(), CliError> {
    if tail_tol > 0.0 && tail_tol <= tolerances::MAX_TAIL_TOL {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "tail-tol must lie in (0, {:e}], got {tail_tol:e}",
            tolerances::MAX_TAIL_TOL
        )))
    }
}

const SWEEP_KEYS: &[&str] = &["model", "start", "stop", "steps", "alpha2", "r", "tail_tol", "output"];

/// Merges flags, config file and defaults, and checks model/command
/// compatibility.
pub fn resolve_sweep(kind: SweepKind, args: &SweepArgs) -> Result<SweepRequest, CliError> {
    let cfg = load_config(args.config.as_deref(), SWEEP_KEYS)?;
    let pick = |flag: &Option<String>, key: &str| flag.clone().or_else(|| lookup(&cfg, key).map(str::to_string));

    let default_model = match kind {
        SweepKind::G | SweepKind::Tradeoff => Model::ExactCoherent,
        SweepKind::Chi => Model::Psa,
    };
    let model = match pick(&args.model, "model") {
        Some(m) => Model::parse(&m)?,
        None => default_model,
    };
    let compatible = match kind {
        SweepKind::G => model.is_exact(),
        SweepKind::Chi => !model.is_exact(),
        SweepKind::Tradeoff => model != Model::ExactSqueezed,
    };
    if !compatible {
        let cmd = match kind {
            SweepKind::G => "sweep-g",
            SweepKind::Chi => "sweep-chi",
            SweepKind::Tradeoff => "tradeoff",
        };
        return Err(CliError::Usage(format!("model {} is not available for {cmd}", model.name())));
    }

    let (d_start, d_stop, d_steps) = if model.is_exact() {
        (0.02, std::f64::consts::PI, 120)
    } else {
        (0.05, 2.0, 100)
    };
    let start = pick(&args.start, "start").map(|s| parse_angle(&s)).transpose()?.unwrap_or(d_start);
    let stop = pick(&args.stop, "stop").map(|s| parse_angle(&s)).transpose()?.unwrap_or(d_stop);
    let steps = match args.steps {
        Some(n) => n,
        None => match lookup(&cfg, "steps") {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Usage(format!("steps: cannot parse '{s}'")))?,
            None => d_steps,
        },
    };
    if steps < 2 {
        return Err(CliError::Usage("steps must be at least 2".into()));
    }
    if start >= stop {
        return Err(CliError::Usage(format!("start ({start}) must be below stop ({stop})")));
    }

    let alpha2 = match args.alpha2 {
        Some(a) => Some(a),
        None => lookup(&cfg, "alpha2").map(|s| parse_f64("alpha2", s)).transpose()?,
    };
    let alpha2 = if model.is_exact() { Some(alpha2.unwrap_or(6.0)) } else { alpha2 };
    if let Some(a) = alpha2 {
        if !(a.is_finite() && a >= 0.0) {
            return Err(CliError::Usage(format!("alpha2 must be non-negative, got {a}")));
        }
        if model.is_exact() && a == 0.0 {
            return Err(CliError::Usage("alpha2 = 0 leaves nothing to calibrate against".into()));
        }
    }
    let r = match args.r {
        Some(r) => r,
        None => lookup(&cfg, "r").map(|s| parse_f64("r", s)).transpose()?.unwrap_or(0.0),
    };
    if model == Model::ExactCoherent && r != 0.0 {
        return Err(CliError::Usage("exact-coherent takes r = 0; use exact-squeezed".into()));
    }
    if model == Model::Wia && r != 0.0 {
        log::info!("r only sets σ for the g column of wia rows");
    }
    if !model.is_exact() && start < 0.0 {
        return Err(CliError::Usage("χ grid must be non-negative".into()));
    }
    let tail_tol = match args.tail_tol {
        Some(t) => t,
        None => lookup(&cfg, "tail_tol")
            .map(|s| parse_f64("tail_tol", s))
            .transpose()?
            .unwrap_or(tolerances::DEFAULT_TAIL_TOL),
    };
    validate_tail_tol(tail_tol)?;
    let output = args
        .output
        .clone()
        .or_else(|| lookup(&cfg, "output").map(PathBuf::from));
    Ok(SweepRequest {
        kind,
        model,
        start,
        stop,
        steps,
        alpha2,
        r,
        tail_tol,
        output,
    })
}

/// Scientific notation with 12 significant digits, independent of locale.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // no negative zero in the output
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

fn fmt_opt(x: Option<f64>, missing: &str) -> String {
    x.map(fmt_num).unwrap_or_else(|| missing.to_string())
}

/// One CSV line. `None` fields print as the row's missing-value token.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub model: String,
    pub g: Option<f64>,
    pub chi: Option<f64>,
    pub alpha2: Option<f64>,
    pub r: Option<f64>,
    pub eps2_numeric: Field,
    pub eps2_analytic: Field,
    pub eta2_numeric: Field,
    pub eta2_analytic: Field,
    pub bounds: Option<BoundsRecord>,
    /// Token for the four bound columns when `bounds` is `None`.
    pub bounds_missing: &'static str,
    pub flags: Vec<&'static str>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Field {
    Value(f64),
    Singular,
    NotApplicable,
}

impl Field {
    fn render(self) -> String {
        match self {
            Field::Value(x) => fmt_num(x),
            Field::Singular => SINGULAR.into(),
            Field::NotApplicable => NA.into(),
        }
    }

    fn from_option(x: Option<f64>) -> Self {
        x.map(Field::Value).unwrap_or(Field::Singular)
    }
}

impl CsvRow {
    pub fn render(&self) -> String {
        let b = |f: fn(&BoundsRecord) -> f64| {
            self.bounds
                .as_ref()
                .map(|r| fmt_num(f(r)))
                .unwrap_or_else(|| self.bounds_missing.to_string())
        };
        [
            self.model.clone(),
            fmt_opt(self.g, NA),
            fmt_opt(self.chi, NA),
            fmt_opt(self.alpha2, NA),
            fmt_opt(self.r, NA),
            self.eps2_numeric.render(),
            self.eps2_analytic.render(),
            self.eta2_numeric.render(),
            self.eta2_analytic.render(),
            b(|r| r.hak),
            b(|r| r.ozawa_lhs),
            b(|r| r.bo_lhs),
            b(|r| r.bot_lhs),
            self.flags.join(";"),
        ]
        .join(",")
    }
}

fn exact_row(model: Model, p: &EdrPoint) -> Result<CsvRow, CliError> {
    let sigma = (-p.r).exp();
    let chi = p.g * p.alpha2.sqrt() / sigma;
    let bounds = match p.eps2 {
        Some(e) => Some(relations::evaluate_bounds(e, p.eta2, p.sigma_a, p.sigma_b, p.c_ab)?),
        None => None,
    };
    let mut flags = Vec::new();
    if p.eps2.is_none() {
        flags.push(SINGULAR);
    }
    if let Some(b) = &bounds {
        flags.extend(b.flags());
    }
    Ok(CsvRow {
        model: model.name().into(),
        g: Some(p.g),
        chi: Some(chi),
        alpha2: Some(p.alpha2),
        r: Some(p.r),
        eps2_numeric: Field::from_option(p.eps2),
        eps2_analytic: Field::from_option(p.eps2_analytic),
        eta2_numeric: Field::Value(p.eta2),
        eta2_analytic: Field::Value(p.eta2_analytic),
        bounds,
        bounds_missing: SINGULAR,
        flags,
    })
}

fn exact_rows(req: &SweepRequest, grid: &[f64]) -> Result<Vec<CsvRow>, CliError> {
    let alpha2 = req.alpha2.expect("exact models carry alpha2");
    let cfg = MeasurementConfig::new(grid[0], alpha2, req.r, req.tail_tol)?;
    log::info!("|α|² = {alpha2}, r = {}: cutoff {}", req.r, cfg.cutoff);
    let setup = MeterSetup::prepare(&cfg)?;
    edr::edr_sweep(&setup, grid)
        .into_iter()
        .map(|p| exact_row(req.model, &p?))
        .collect()
}

fn chi_row(req: &SweepRequest, chi: f64) -> Result<CsvRow, CliError> {
    let sigma = (-req.r).exp();
    let g = req.alpha2.filter(|&a| a > 0.0).map(|a| chi * sigma / a.sqrt());
    let model = match req.model {
        Model::Psa => relations::TradeoffModel::Psa,
        _ => relations::TradeoffModel::Wia,
    };
    let (eps2, eta2) = relations::model_pair(model, chi)?;
    let (eps2_numeric, eta2_numeric) = if req.model == Model::Psa {
        // Gauss–Hermite integration over the Gaussian meter, unit |α|
        let cfg = PsaConfig::new(chi * sigma, 1.0, sigma)?;
        let m = psa::gaussian_oracle(&cfg)?;
        let gain = cfg.g * cfg.alpha_mag;
        let e = (gain > 0.0).then(|| m.q2_mean / (4.0 * gain * gain));
        (Field::from_option(e), Field::Value(2.0 * (1.0 - m.cos_mean)))
    } else {
        (Field::NotApplicable, Field::NotApplicable)
    };
    let bounds = eps2.map(|e| relations::evaluate_unit(e, eta2)).transpose()?;
    let mut flags = Vec::new();
    if eps2.is_none() {
        flags.push(SINGULAR);
    }
    if req.model == Model::Wia && !psa::wia_is_valid(chi) {
        flags.push("WIA_OUT_OF_RANGE");
    }
    if let Some(b) = &bounds {
        flags.extend(b.flags());
    }
    Ok(CsvRow {
        model: req.model.name().into(),
        g,
        chi: Some(chi),
        alpha2: req.alpha2,
        r: Some(req.r),
        eps2_numeric,
        eps2_analytic: Field::from_option(eps2),
        eta2_numeric,
        eta2_analytic: Field::Value(eta2),
        bounds,
        bounds_missing: SINGULAR,
        flags,
    })
}

fn chi_rows(req: &SweepRequest, grid: &[f64]) -> Result<Vec<CsvRow>, CliError> {
    if req.model == Model::Wia && grid.iter().any(|&c| !psa::wia_is_valid(c)) {
        log::warn!(
            "weak-interaction forms requested beyond χ = {}; rows are flagged",
            tolerances::WIA_VALIDITY_CHI
        );
    }
    grid.par_iter().map(|&chi| chi_row(req, chi)).collect()
}

fn reference_row(label: &'static str, eps2: f64, eta2: f64) -> CsvRow {
    CsvRow {
        model: label.into(),
        g: None,
        chi: None,
        alpha2: None,
        r: None,
        eps2_numeric: Field::NotApplicable,
        eps2_analytic: Field::Value(eps2),
        eta2_numeric: Field::NotApplicable,
        eta2_analytic: Field::Value(eta2),
        bounds: None,
        bounds_missing: NA,
        flags: Vec::new(),
    }
}

/// Rows for a resolved request, in grid order.
pub fn sweep_rows(req: &SweepRequest) -> Result<Vec<CsvRow>, CliError> {
    let grid = req.grid();
    let mut rows = if req.model.is_exact() {
        exact_rows(req, &grid)?
    } else {
        chi_rows(req, &grid)?
    };
    if req.kind == SweepKind::Tradeoff {
        let eps2 = rows.iter().filter_map(|r| match (r.eps2_numeric, r.eps2_analytic) {
            (Field::Value(e), _) if req.model.is_exact() => Some(e),
            (_, Field::Value(e)) if !req.model.is_exact() => Some(e),
            _ => None,
        });
        let (hak, bot) = relations::reference_curves(eps2.collect::<Vec<_>>().into_iter(), req.steps);
        rows.extend(hak.into_iter().map(|(e, n)| reference_row("hak-bound", e, n)));
        rows.extend(bot.into_iter().map(|(e, n)| reference_row("bot-bound", e, n)));
    }
    Ok(rows)
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.render());
        out.push('\n');
    }
    out
}

/// Plot script path for a CSV path: `curve.csv` → `curve.plot.py`.
pub fn plot_script_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "tradeoff".into());
    csv.with_file_name(format!("{stem}.plot.py"))
}

pub fn plot_script(csv_name: &str, model: Model) -> String {
    let (x_exact, y_exact) = if model.is_exact() {
        ("eps2_numeric", "eta2_numeric")
    } else {
        ("eps2_analytic", "eta2_analytic")
    };
    format!(
        r#"# Error-disturbance tradeoff plot for {csv_name}
import csv
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = {{}}
with open(os.path.join(here, "{csv_name}"), newline="") as f:
    for row in csv.DictReader(f):
        model = row["model"]
        x_key, y_key = ("eps2_analytic", "eta2_analytic") if model.endswith("-bound") else ("{x_exact}", "{y_exact}")
        try:
            x, y = float(row[x_key]), float(row[y_key])
        except ValueError:
            continue
        series.setdefault(model, ([], []))
        series[model][0].append(x)
        series[model][1].append(y)

styles = {{"hak-bound": "k--", "bot-bound": "k:"}}
for name, (xs, ys) in series.items():
    plt.plot(xs, ys, styles.get(name, "-"), label=name)
plt.xscale("log")
plt.xlabel("square error")
plt.ylabel("square disturbance")
plt.ylim(0, 2.2)
plt.legend()
plt.savefig(os.path.join(here, "{csv_name}".rsplit(".", 1)[0] + ".png"), dpi=150)
"#
    )
}

fn emit(path: Option<&Path>, content: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| CliError::Resource(format!("cannot write {}: {e}", p.display()))),
        None => Ok(out.write_all(content.as_bytes())?),
    }
}

pub fn run_sweep(req: &SweepRequest, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = sweep_rows(req)?;
    let csv = render_csv(&rows);
    emit(req.output.as_deref(), &csv, out)?;
    if req.kind == SweepKind::Tradeoff {
        match &req.output {
            Some(path) => {
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "tradeoff.csv".into());
                let script = plot_script_path(path);
                fs::write(&script, plot_script(&name, req.model))
                    .map_err(|e| CliError::Resource(format!("cannot write {}: {e}", script.display())))?;
            }
            None => log::info!("no --output given; plot script not written"),
        }
    }
    Ok(())
}

/// One oracle suite outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub lines: Vec<String>,
    pub failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Settings for the verification run.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyRequest {
    pub alpha2: Vec<f64>,
    pub cutoff: Option<usize>,
    pub tail_tol: f64,
}

pub fn resolve_verify(args: &VerifyArgs) -> Result<VerifyRequest, CliError> {
    let cfg = load_config(args.config.as_deref(), &["alpha2", "cutoff", "tail_tol"])?;
    let alpha2 = match args.alpha2 {
        Some(a) => Some(a),
        None => lookup(&cfg, "alpha2").map(|s| parse_f64("alpha2", s)).transpose()?,
    };
    if let Some(a) = alpha2 {
        if !a.is_finite() || a <= 0.0 {
            return Err(CliError::Usage(format!("alpha2 must be positive, got {a}")));
        }
    }
    let cutoff = match args.cutoff {
        Some(c) => Some(c),
        None => lookup(&cfg, "cutoff")
            .map(|s| s.parse().map_err(|_| CliError::Usage(format!("cutoff: cannot parse '{s}'"))))
            .transpose()?,
    };
    if cutoff.is_some_and(|c| c > tolerances::CUTOFF_CEILING) {
        return Err(CliError::Usage(format!("cutoff above ceiling {}", tolerances::CUTOFF_CEILING)));
    }
    let tail_tol = match args.tail_tol {
        Some(t) => t,
        None => lookup(&cfg, "tail_tol")
            .map(|s| parse_f64("tail_tol", s))
            .transpose()?
            .unwrap_or(tolerances::DEFAULT_TAIL_TOL),
    };
    validate_tail_tol(tail_tol)?;
    Ok(VerifyRequest {
        alpha2: alpha2.map(|a| vec![a]).unwrap_or_else(|| vec![2.0, 6.0]),
        cutoff,
        tail_tol,
    })
}

fn rel_gap(x: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        x.abs()
    } else {
        (x - reference).abs() / reference.abs()
    }
}

fn suite_edr(req: &VerifyRequest) -> SuiteReport {
    let mut report = SuiteReport {
        name: "edr-agreement",
        lines: Vec::new(),
        failure: None,
    };
    // away from the singular points, where the relative gap is meaningful
    let grid: Vec<f64> = relations::linspace(0.05, std::f64::consts::PI - 0.05, 24)
        .into_iter()
        .filter(|g| (2.0 * g).sin().abs() > 1e-3)
        .collect();
    for &alpha2 in &req.alpha2 {
        let result = (|| -> Result<(f64, f64, usize), CliError> {
            let mut cfg = MeasurementConfig::new(grid[0], alpha2, 0.0, req.tail_tol)?;
            if let Some(c) = req.cutoff {
                cfg = cfg.with_cutoff(c);
            }
            let setup = MeterSetup::prepare(&cfg)?;
            let mut worst = (0.0f64, 0.0f64);
            for p in edr::edr_sweep(&setup, &grid) {
                let p = p?;
                worst.0 = worst.0.max(p.eps2_relative_gap().unwrap_or(0.0));
                worst.1 = worst.1.max(p.eta2_relative_gap());
            }
            Ok((worst.0, worst.1, cfg.cutoff))
        })();
        match result {
            Ok((e, n, cutoff)) => {
                report.lines.push(format!(
                    "|α|² = {alpha2}, cutoff {cutoff}: max relative error eps2 {e:.3e}, eta2 {n:.3e}"
                ));
                if e > tolerances::ORACLE_RELATIVE || n > tolerances::ORACLE_RELATIVE {
                    report.failure.get_or_insert(format!(
                        "simulated ε², η² depart from the closed forms at |α|² = {alpha2} (tolerance {:e})",
                        tolerances::ORACLE_RELATIVE
                    ));
                }
            }
            Err(e) => {
                report.failure.get_or_insert(format!("|α|² = {alpha2}: {e}"));
            }
        }
    }
    report
}

fn suite_bch() -> SuiteReport {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    let mut report = SuiteReport {
        name: "bch-spectral",
        lines: Vec::new(),
        failure: None,
    };
    let gs = [0.1, 0.5, FRAC_PI_4, 1.3, FRAC_PI_2, 2.5, PI];
    let cases: Vec<(f64, usize)> = [8usize, 16, 24]
        .iter()
        .flat_map(|&c| gs.iter().map(move |&g| (g, c)))
        .collect();
    let results: Vec<_> = cases
        .par_iter()
        .map(|&(g, c)| faraday::bch_residuals(g, c))
        .collect();
    let mut worst = (0.0f64, 0.0f64);
    for r in results {
        match r {
            Ok((sy, bx)) => {
                worst.0 = worst.0.max(sy);
                worst.1 = worst.1.max(bx);
            }
            Err(e) => {
                report.failure.get_or_insert(e.to_string());
            }
        }
    }
    report.lines.push(format!(
        "{} (g, cutoff) pairs: max entry error Sy {:.3e}, σx {:.3e}",
        cases.len(),
        worst.0,
        worst.1
    ));
    if worst.0 > tolerances::BCH_MAX_ENTRY || worst.1 > tolerances::BCH_MAX_ENTRY {
        report.failure.get_or_insert(format!(
            "Heisenberg operators depart from the closed forms (tolerance {:e})",
            tolerances::BCH_MAX_ENTRY
        ));
    }
    report
}

fn suite_stokes() -> SuiteReport {
    use crate::linalg::C64;
    let mut report = SuiteReport {
        name: "stokes-algebra",
        lines: Vec::new(),
        failure: None,
    };
    let mut worst = 0.0f64;
    let mut worst_s0 = 0.0f64;
    let mut herm = 0.0f64;
    for n in [4usize, 12, 24] {
        let s = meter::build_stokes(&meter::MeterBasis::new(n));
        let two_i = C64::new(0.0, 2.0);
        let pairs = [(&s.sx, &s.sy, &s.sz), (&s.sy, &s.sz, &s.sx), (&s.sz, &s.sx, &s.sy)];
        for (a, b, c) in pairs {
            let lhs = a.commutator(b).expect("same basis");
            worst = worst.max(lhs.max_abs_diff(&c.scale(two_i)).expect("same basis"));
        }
        for op in [&s.sx, &s.sy, &s.sz] {
            worst_s0 = worst_s0.max(s.s0.commutator(op).expect("same basis").max_abs());
            herm = herm.max(op.hermiticity_deviation());
        }
    }
    report.lines.push(format!(
        "cyclic commutators {worst:.3e}, [S0, Sk] {worst_s0:.3e}, hermiticity {herm:.3e}"
    ));
    if worst > tolerances::HERMITICITY || worst_s0 > 0.0 || herm > 0.0 {
        report.failure = Some("Stokes operators violate the angular-momentum algebra".into());
    }
    report
}

fn suite_squeezed(tail_tol: f64) -> SuiteReport {
    let mut report = SuiteReport {
        name: "squeezed-moments",
        lines: Vec::new(),
        failure: None,
    };
    const VAR_TOL: f64 = 1e-4;
    const MEAN_TOL: f64 = 1e-8;
    for (alpha2, r) in [(9.0, 0.3), (25.0, 0.2)] {
        match moments_row(alpha2, r, tail_tol) {
            Ok(m) => {
                let vz = rel_gap(m.numeric.sz.variance, m.predicted.sz.variance);
                let vy = rel_gap(m.numeric.sy.variance, m.predicted.sy.variance);
                let mx = (m.numeric.sx.mean - alpha2).abs();
                report.lines.push(format!(
                    "|α|² = {alpha2}, r = {r}: σ²(Sz) gap {vz:.3e}, σ²(Sy) gap {vy:.3e}, |⟨Sx⟩ − |α|²| {mx:.3e}"
                ));
                if vz > VAR_TOL || vy > VAR_TOL || mx > MEAN_TOL {
                    report
                        .failure
                        .get_or_insert(format!("squeezed moments off at |α|² = {alpha2}, r = {r}"));
                }
            }
            Err(e) => {
                report.failure.get_or_insert(e.to_string());
            }
        }
    }
    report
}

fn suite_quadrature() -> SuiteReport {
    let mut report = SuiteReport {
        name: "gaussian-quadrature",
        lines: Vec::new(),
        failure: None,
    };
    let sigmas = relations::linspace(0.5, 2.0, 10);
    let gains = relations::linspace(0.1, 2.0, 10);
    let mut worst = 0.0f64;
    let mut wia = 0.0f64;
    for &sigma in &sigmas {
        for &gain in &gains {
            let outcome = (|| -> Result<(f64, f64), PsaError> {
                let cfg = PsaConfig::new(gain, 1.0, sigma)?;
                let (e, n) = psa::quadrature_edr(&cfg)?;
                let chi = cfg.chi();
                let gap = rel_gap(e, psa::eps2_psa(chi)?).max(rel_gap(n, psa::eta2_psa(chi)?));
                let hak = relations::evaluate_unit(psa::eps2_wia(chi)?, psa::eta2_wia(chi)?)
                    .map(|b| b.hak)
                    .unwrap_or(f64::NAN);
                Ok((gap, (hak - 1.0).abs()))
            })();
            match outcome {
                Ok((gap, residual)) => {
                    worst = worst.max(gap);
                    wia = wia.max(residual);
                }
                Err(e) => {
                    report.failure.get_or_insert(e.to_string());
                }
            }
        }
    }
    report.lines.push(format!("10×10 (σ, g|α|) grid: max relative error {worst:.3e}"));
    report.lines.push(format!("weak-interaction |hak − 1| max {wia:.3e}"));
    if worst > tolerances::ORACLE_RELATIVE || wia > tolerances::ORACLE_RELATIVE {
        report.failure.get_or_insert(format!(
            "quadrature departs from the phase-space closed forms (tolerance {:e})",
            tolerances::ORACLE_RELATIVE
        ));
    }
    report
}

pub fn verify_suites(req: &VerifyRequest) -> Vec<SuiteReport> {
    vec![
        suite_edr(req),
        suite_bch(),
        suite_stokes(),
        suite_squeezed(req.tail_tol),
        suite_quadrature(),
    ]
}

pub fn run_verify(req: &VerifyRequest, out: &mut dyn Write) -> Result<(), CliError> {
    let reports = verify_suites(req);
    let mut text = String::new();
    for r in &reports {
        let _ = writeln!(text, "[{}] {}", if r.passed() { "pass" } else { "FAIL" }, r.name);
        for line in &r.lines {
            let _ = writeln!(text, "    {line}");
        }
        if let Some(f) = &r.failure {
            let _ = writeln!(text, "    failing invariant: {f}");
        }
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if failed.is_empty() {
        let _ = writeln!(text, "all {} suites pass", reports.len());
    } else {
        let _ = writeln!(text, "{} of {} suites failed", failed.len(), reports.len());
    }
    out.write_all(text.as_bytes())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}

/// Numeric and predicted Stokes moments for one meter state.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentsRow {
    pub alpha2: f64,
    pub r: f64,
    pub cutoff: usize,
    pub numeric: meter::StokesMoments,
    pub predicted: meter::StokesMoments,
}

pub fn moments_row(alpha2: f64, r: f64, tail_tol: f64) -> Result<MomentsRow, CliError> {
    let cfg = MeasurementConfig::new(0.0, alpha2, r, tail_tol)?;
    let basis = meter::MeterBasis::new(cfg.cutoff);
    let stokes = meter::build_stokes(&basis);
    let state = cfg.prepare_meter_state(&basis)?;
    Ok(MomentsRow {
        alpha2,
        r,
        cutoff: cfg.cutoff,
        numeric: meter::stokes_moments(&state, &stokes)?,
        predicted: meter::predicted_moments(alpha2, r),
    })
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').map(|x| parse_f64(key, x)).collect()
}

/// Resolved `moments` settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentsRequest {
    pub model: Model,
    pub alpha2: Vec<f64>,
    pub r: Vec<f64>,
    pub tail_tol: f64,
    pub output: Option<PathBuf>,
}

pub fn resolve_moments(args: &MomentsArgs) -> Result<MomentsRequest, CliError> {
    let cfg = load_config(args.config.as_deref(), &["model", "alpha2", "r", "tail_tol", "output"])?;
    let pick = |flag: &Option<String>, key: &str| flag.clone().or_else(|| lookup(&cfg, key).map(str::to_string));
    let model = match pick(&args.model, "model") {
        Some(m) => Model::parse(&m)?,
        None => Model::ExactCoherent,
    };
    if !model.is_exact() {
        return Err(CliError::Usage(format!("model {} is not available for moments", model.name())));
    }
    let alpha2 = parse_list("alpha2", &pick(&args.alpha2, "alpha2").unwrap_or_else(|| "6".into()))?;
    let r = parse_list("r", &pick(&args.r, "r").unwrap_or_else(|| "0".into()))?;
    if alpha2.iter().any(|&a| a < 0.0) {
        return Err(CliError::Usage("alpha2 must be non-negative".into()));
    }
    if model == Model::ExactCoherent && r.iter().any(|&x| x != 0.0) {
        return Err(CliError::Usage("exact-coherent takes r = 0; use exact-squeezed".into()));
    }
    let tail_tol = match args.tail_tol {
        Some(t) => t,
        None => lookup(&cfg, "tail_tol")
            .map(|s| parse_f64("tail_tol", s))
            .transpose()?
            .unwrap_or(tolerances::DEFAULT_TAIL_TOL),
    };
    validate_tail_tol(tail_tol)?;
    Ok(MomentsRequest {
        model,
        alpha2,
        r,
        tail_tol,
        output: args.output.clone().or_else(|| lookup(&cfg, "output").map(PathBuf::from)),
    })
}

pub fn render_moments(model: Model, rows: &[MomentsRow]) -> String {
    let mut out = String::from(MOMENTS_HEADER);
    out.push('\n');
    for m in rows {
        let mut fields = vec![
            model.name().to_string(),
            fmt_num(m.alpha2),
            fmt_num(m.r),
            m.cutoff.to_string(),
            fmt_num(m.numeric.norm_deficit),
        ];
        let pairs = [
            (m.numeric.s0, m.predicted.s0),
            (m.numeric.sx, m.predicted.sx),
            (m.numeric.sy, m.predicted.sy),
            (m.numeric.sz, m.predicted.sz),
        ];
        for (n, p) in pairs {
            fields.push(fmt_num(n.mean));
            fields.push(fmt_num(p.mean));
            fields.push(fmt_num(n.variance));
            fields.push(fmt_num(p.variance));
            fields.push(fmt_num(rel_gap(n.variance, p.variance)));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn run_moments(req: &MomentsRequest, out: &mut dyn Write) -> Result<(), CliError> {
    let cases: Vec<(f64, f64)> = req
        .alpha2
        .iter()
        .flat_map(|&a| req.r.iter().map(move |&r| (a, r)))
        .collect();
    let rows = cases
        .par_iter()
        .map(|&(a, r)| moments_row(a, r, req.tail_tol))
        .collect::<Result<Vec<_>, _>>()?;
    emit(req.output.as_deref(), &render_moments(req.model, &rows), out)
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::SweepG(a) => run_sweep(&resolve_sweep(SweepKind::G, a)?, out),
        Command::SweepChi(a) => run_sweep(&resolve_sweep(SweepKind::Chi, a)?, out),
        Command::Tradeoff(a) => run_sweep(&resolve_sweep(SweepKind::Tradeoff, a)?, out),
        Command::Verify(a) => run_verify(&resolve_verify(a)?, out),
        Command::Moments(a) => run_moments(&resolve_moments(a)?, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Caps the global worker pool from the environment, if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Resource(e.to_string()))
}
