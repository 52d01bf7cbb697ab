//! Command-line front end binding every module: plain-text configuration,
//! experiment orchestration, and CSV export of all computed data.
//!
//! Commands: `scan`, `homog`, `disp`, `landau`, `cont`, `ti`, `norms`,
//! `export`. Exit codes: 0 on success, 2 on usage or configuration errors,
//! 3 on numeric failures. The output directory comes from `--out`, falling
//! back to the `BENTHOS_OUT` environment variable, then the working
//! directory.
//!
//! Configuration is resolved per knob as: command-line flag, else
//! `key = value` entry in the `--config` file, else built-in default.
//! Unknown config keys are rejected. Every run writes the fully resolved
//! configuration to `<command>_config.txt` next to its outputs; rerunning
//! with `--config` pointing at that echo reproduces the outputs byte for
//! byte.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::continuation::{
    continue_branch, continue_restarted, continue_switched, homogeneous_start, switch_branch,
    write_branch_csv, write_branch_snapshots, Branch, ContinuationSettings, PointTag, Provenance,
};
use crate::homogeneous::{dispersion, homogeneous_states, plane_scan};
use crate::kinetics::ParameterSet;
use crate::landau::{coefficient_sweep, CubicVariant, EvalMode};
use crate::pde::{norms, read_field, sigma_profile, write_field, Domain, Field};
use crate::timestep::{
    classify_strips, integrate, perturb, write_layering_csv, IntegrationRun,
    StripClassifierOptions,
};
use crate::{Error, Result};

/// Environment variable naming the output root when `--out` is absent.
pub const OUT_ENV: &str = "BENTHOS_OUT";

/// Inclusive axis specification `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisSpec {
    /// Evenly spaced values including both endpoints; a single-point axis
    /// collapses onto `lo`.
    pub fn values(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.lo + i as f64 * step).collect()
    }
}

impl FromStr for AxisSpec {
    type Err = String;

    fn from_str(text: &str) -> std::result::Result<Self, String> {
        let bad = || format!("axis must be `lo:hi:n`, got `{text}`");
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !lo.is_finite() || !hi.is_finite() || hi < lo || n == 0 {
            return Err(bad());
        }
        Ok(AxisSpec { lo, hi, n })
    }
}

impl Display for AxisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
    }
}

/// Search bracket `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketSpec {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for BracketSpec {
    type Err = String;

    fn from_str(text: &str) -> std::result::Result<Self, String> {
        let bad = || format!("bracket must be `lo:hi`, got `{text}`");
        let (a, b) = text.split_once(':').ok_or_else(bad)?;
        let lo: f64 = a.trim().parse().map_err(|_| bad())?;
        let hi: f64 = b.trim().parse().map_err(|_| bad())?;
        if !lo.is_finite() || !hi.is_finite() || hi <= lo {
            return Err(bad());
        }
        Ok(BracketSpec { lo, hi })
    }
}

impl Display for BracketSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

/// Logistic rate profile `s0,rate,y0` along the last axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSpec {
    pub s0: f64,
    pub rate: f64,
    pub y0: f64,
}

impl FromStr for ProfileSpec {
    type Err = String;

    fn from_str(text: &str) -> std::result::Result<Self, String> {
        let bad = || format!("profile must be `s0,rate,y0`, got `{text}`");
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let vals: Vec<f64> = parts
            .iter()
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<std::result::Result<_, _>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        Ok(ProfileSpec {
            s0: vals[0],
            rate: vals[1],
            y0: vals[2],
        })
    }
}

impl Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.s0, self.rate, self.y0)
    }
}

/// Ascending comma-separated sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeList(pub Vec<f64>);

impl FromStr for TimeList {
    type Err = String;

    fn from_str(text: &str) -> std::result::Result<Self, String> {
        let bad = || format!("times must be comma-separated numbers, got `{text}`");
        let vals: Vec<f64> = text
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<std::result::Result<_, _>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        Ok(TimeList(vals))
    }
}

impl Display for TimeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let texts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&texts.join(","))
    }
}

/// Evaluation-rate convention for the amplitude coefficients.
#[derive(Debug, Clone, Copy, PartialEq, clap::ValueEnum)]
pub enum ModeArg {
    Classical,
    Uniform,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Classical => EvalMode::Classical,
            ModeArg::Uniform => EvalMode::Uniform,
        }
    }
}

impl FromStr for ModeArg {
    type Err = String;

    fn from_str(text: &str) -> std::result::Result<Self, String> {
        match text {
            "classical" => Ok(ModeArg::Classical),
            "uniform" => Ok(ModeArg::Uniform),
            other => Err(format!("mode must be `classical` or `uniform`, got `{other}`")),
        }
    }
}

impl Display for ModeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeArg::Classical => "classical",
            ModeArg::Uniform => "uniform",
        })
    }
}

/// Cubic self-interaction convention entering the hexagonal coefficient.
#[derive(Debug, Clone, Copy, PartialEq, clap::ValueEnum)]
pub enum VariantArg {
    Printed,
    Conjugated,
}

impl From<VariantArg> for CubicVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Printed => CubicVariant::AsPrinted,
            VariantArg::Conjugated => CubicVariant::Conjugated,
        }
    }
}

impl FromStr for VariantArg {
    type Err = String;

    fn from_str(text: &str) -> std::result::Result<Self, String> {
        match text {
            "printed" => Ok(VariantArg::Printed),
            "conjugated" => Ok(VariantArg::Conjugated),
            other => Err(format!(
                "variant must be `printed` or `conjugated`, got `{other}`"
            )),
        }
    }
}

impl Display for VariantArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantArg::Printed => "printed",
            VariantArg::Conjugated => "conjugated",
        })
    }
}

/// Every key a config file (and therefore a config echo) may contain.
const KNOWN_KEYS: &[&str] = &[
    "command",
    // model parameters
    "sigma",
    "gamma",
    "k",
    "v0",
    "eps",
    "m",
    "delta_u",
    "delta_v",
    // domain
    "lx",
    "nx",
    "ly",
    "ny",
    // axes and sweeps
    "sigma_range",
    "gamma_range",
    "k_range",
    "bracket",
    "mode",
    "variant",
    "root",
    // continuation
    "label",
    "direction",
    "ds0",
    "ds_min",
    "ds_max",
    "max_steps",
    "newton_tol",
    "max_newton_iter",
    "n_eigs",
    "eig_shift",
    "krylov_dim",
    "sigma_min",
    "sigma_max",
    "stop_on_homogeneous",
    "switch_index",
    "switch_sign",
    "switch_amplitude",
    "snapshot_every",
    "start_field",
    "prev_field",
    "prev_sigma",
    // time integration
    "dt",
    "t_final",
    "amplitude",
    "snapshots",
    "sigma_profile",
    "quiescence_tol",
    "quiescence_window",
    "strip_height",
    // shared
    "seed",
    "field",
];

/// Parsed `key = value` configuration file. Later entries override earlier
/// ones; `#` starts a comment.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    map: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidConfig(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("config line {}: expected `key = value`", i + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key `{key}` (line {})",
                    i + 1
                )));
            }
            map.insert(key.to_string(), value.to_string());
        }
        Ok(FileConfig { map })
    }

    /// Typed lookup; a present but unparseable value is a configuration
    /// error, not a silent default.
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(text) => text.parse().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("config key `{key}`: cannot parse `{text}`"))
            }),
        }
    }
}

/// Resolves each knob as flag, else file entry, else default, and records
/// the resolved value for the config echo.
struct Resolver<'a> {
    file: &'a FileConfig,
    echo: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    fn new(file: &'a FileConfig, command: &str) -> Result<Self> {
        if let Some(recorded) = file.map.get("command") {
            if recorded != command {
                return Err(Error::InvalidConfig(format!(
                    "config file was written by `{recorded}`, not `{command}`"
                )));
            }
        }
        let mut echo = BTreeMap::new();
        echo.insert("command".to_string(), command.to_string());
        Ok(Resolver { file, echo })
    }

    fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        let v = match flag {
            Some(v) => v,
            None => self.file.get(key)?.unwrap_or(default),
        };
        self.echo.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        let v = match flag {
            Some(v) => Some(v),
            None => self.file.get(key)?,
        };
        if let Some(v) = &v {
            self.echo.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    /// Writes the echo as sorted `key = value` lines.
    fn write_echo(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for (key, value) in &self.echo {
            writeln!(out, "{key} = {value}")?;
        }
        Ok(())
    }
}

/// Model-parameter overrides other than the two bifurcation parameters.
#[derive(Args, Debug, Clone, Copy, Default)]
struct BaseParamArgs {
    /// Half-saturation constant of the activity response.
    #[arg(long = "k", value_name = "K", allow_negative_numbers = true)]
    k: Option<f64>,
    /// Sea-water nutrient concentration.
    #[arg(long, allow_negative_numbers = true)]
    v0: Option<f64>,
    /// Bacteria inflow rate.
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    /// Bacteria mortality rate.
    #[arg(long = "mortality", value_name = "M", allow_negative_numbers = true)]
    m: Option<f64>,
    /// Bacteria diffusion coefficient before rescaling.
    #[arg(long, allow_negative_numbers = true)]
    delta_u: Option<f64>,
    /// Nutrient diffusion coefficient before rescaling.
    #[arg(long, allow_negative_numbers = true)]
    delta_v: Option<f64>,
}

/// Full parameter overrides including the bifurcation parameters.
#[derive(Args, Debug, Clone, Copy, Default)]
struct ParamArgs {
    /// Balancing rate sigma.
    #[arg(long, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Baseline activity fraction gamma.
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[command(flatten)]
    base: BaseParamArgs,
}

fn resolve_base_params(r: &mut Resolver, a: &BaseParamArgs, p: &mut ParameterSet) -> Result<()> {
    p.k = r.value("k", a.k, p.k)?;
    p.v0 = r.value("v0", a.v0, p.v0)?;
    p.eps = r.value("eps", a.eps, p.eps)?;
    p.m = r.value("m", a.m, p.m)?;
    p.delta_u = r.value("delta_u", a.delta_u, p.delta_u)?;
    p.delta_v = r.value("delta_v", a.delta_v, p.delta_v)?;
    Ok(())
}

/// Builds the parameter set from defaults, file entries, and flags, then
/// validates positivity of every physical parameter.
fn resolve_params(r: &mut Resolver, a: &ParamArgs) -> Result<ParameterSet> {
    let mut p = ParameterSet::standard(0.1, 0.25);
    p.sigma = r.value("sigma", a.sigma, p.sigma)?;
    p.gamma = r.value("gamma", a.gamma, p.gamma)?;
    resolve_base_params(r, &a.base, &mut p)?;
    validate_params(&p)?;
    Ok(p)
}

fn validate_params(p: &ParameterSet) -> Result<()> {
    let entries = [
        ("sigma", p.sigma),
        ("gamma", p.gamma),
        ("k", p.k),
        ("v0", p.v0),
        ("eps", p.eps),
        ("m", p.m),
        ("delta_u", p.delta_u),
        ("delta_v", p.delta_v),
    ];
    for (name, value) in entries {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "parameter `{name}` must be positive, got {value}"
            )));
        }
    }
    Ok(())
}

/// Grid specification; a one-dimensional domain when `ly`/`ny` are absent.
#[derive(Args, Debug, Clone, Copy, Default)]
struct DomainArgs {
    /// Domain length along x.
    #[arg(long, allow_negative_numbers = true)]
    lx: Option<f64>,
    /// Grid nodes along x.
    #[arg(long)]
    nx: Option<usize>,
    /// Domain length along y; omit for one-dimensional runs.
    #[arg(long, allow_negative_numbers = true)]
    ly: Option<f64>,
    /// Grid nodes along y.
    #[arg(long)]
    ny: Option<usize>,
}

fn resolve_domain(r: &mut Resolver, a: &DomainArgs) -> Result<Domain> {
    let lx = r.value("lx", a.lx, 100.0)?;
    let nx = r.value("nx", a.nx, 129)?;
    let ly = r.optional("ly", a.ly)?;
    let ny = r.optional("ny", a.ny)?;
    match (ly, ny) {
        (None, None) => Domain::line(0.0, lx, nx),
        (Some(ly), Some(ny)) => Domain::rectangle((0.0, lx), nx, (0.0, ly), ny),
        _ => Err(Error::InvalidConfig(
            "two-dimensional runs need both `ly` and `ny`".into(),
        )),
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "benthos",
    version,
    about = "Steady states, Turing analysis, and continuation for a benthic bacteria-nutrient model"
)]
struct Cli {
    /// Output directory (default: $BENTHOS_OUT, else the working directory).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Plain-text `key = value` config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Seed for all stochastic steps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify all homogeneous roots on a sigma-gamma raster.
    Scan(ScanArgs),
    /// Homogeneous roots and stability diagnostics at one parameter point.
    Homog(HomogArgs),
    /// Dispersion relation of one root over a wavenumber grid.
    Disp(DispArgs),
    /// Critical points and amplitude coefficients over a gamma sweep.
    Landau(LandauArgs),
    /// Pseudo-arclength continuation of steady states.
    Cont(ContArgs),
    /// Semi-implicit time integration.
    Ti(TiArgs),
    /// Domain-averaged norms of a saved field.
    Norms(NormsArgs),
    /// Re-emit a saved field as plot-ready CSV.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct ScanArgs {
    /// Sigma axis extents and resolution, `lo:hi:n`.
    #[arg(long, value_name = "LO:HI:N")]
    sigma: Option<AxisSpec>,
    /// Gamma axis extents and resolution, `lo:hi:n`.
    #[arg(long, value_name = "LO:HI:N")]
    gamma: Option<AxisSpec>,
    #[command(flatten)]
    base: BaseParamArgs,
}

#[derive(Args, Debug)]
struct HomogArgs {
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args, Debug)]
struct DispArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Root index (1..=3) whose dispersion relation is sampled.
    #[arg(long)]
    root: Option<u8>,
    /// Wavenumber grid, `lo:hi:n`.
    #[arg(long = "k-grid", value_name = "LO:HI:N")]
    k_grid: Option<AxisSpec>,
}

#[derive(Args, Debug)]
struct LandauArgs {
    /// Gamma sweep grid, `lo:hi:n`.
    #[arg(long, value_name = "LO:HI:N")]
    gamma: Option<AxisSpec>,
    /// Sigma bracket for the critical-point search, `lo:hi`.
    #[arg(long, value_name = "LO:HI")]
    bracket: Option<BracketSpec>,
    /// Evaluation-rate convention.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Cubic self-interaction convention.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[command(flatten)]
    base: BaseParamArgs,
}

#[derive(Args, Debug)]
struct ContArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    domain: DomainArgs,
    /// Homogeneous root index used as starting state.
    #[arg(long)]
    root: Option<u8>,
    /// Initial parameter direction, +1 or -1.
    #[arg(long, allow_negative_numbers = true)]
    direction: Option<f64>,
    /// Branch label used in output file names.
    #[arg(long)]
    label: Option<String>,
    /// Saved field to start from instead of a homogeneous root; `--sigma`
    /// must carry its rate.
    #[arg(long)]
    start_field: Option<String>,
    /// Saved predecessor point for restarts; the first step then follows
    /// the secant from it to `--start-field`.
    #[arg(long)]
    prev_field: Option<String>,
    /// Rate at the `--prev-field` point.
    #[arg(long, allow_negative_numbers = true)]
    prev_sigma: Option<f64>,
    /// Switch at the i-th (1-based) bifurcation of the computed branch and
    /// output the switched branch as well.
    #[arg(long)]
    switch_index: Option<usize>,
    /// Predictor sign for the switched branch, +1 or -1.
    #[arg(long, allow_negative_numbers = true)]
    switch_sign: Option<f64>,
    /// Predictor amplitude for the switched branch.
    #[arg(long, allow_negative_numbers = true)]
    switch_amplitude: Option<f64>,
    /// Write every i-th point as a field snapshot (0 disables).
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Initial arclength step.
    #[arg(long, allow_negative_numbers = true)]
    ds0: Option<f64>,
    /// Smallest arclength step before giving up.
    #[arg(long, allow_negative_numbers = true)]
    ds_min: Option<f64>,
    /// Largest arclength step.
    #[arg(long, allow_negative_numbers = true)]
    ds_max: Option<f64>,
    /// Maximum number of branch points.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Newton tolerance of the corrector (max norm).
    #[arg(long, allow_negative_numbers = true)]
    newton_tol: Option<f64>,
    /// Number of leading eigenpairs tracked along the branch.
    #[arg(long)]
    n_eigs: Option<usize>,
    /// Lower parameter bound terminating the branch.
    #[arg(long, allow_negative_numbers = true)]
    sigma_min: Option<f64>,
    /// Upper parameter bound terminating the branch.
    #[arg(long, allow_negative_numbers = true)]
    sigma_max: Option<f64>,
    /// Stop when a pattern branch rejoins the homogeneous branch.
    #[arg(long)]
    stop_on_homogeneous: Option<bool>,
}

#[derive(Args, Debug)]
struct TiArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    domain: DomainArgs,
    /// Homogeneous root index used as base state.
    #[arg(long)]
    root: Option<u8>,
    /// Saved field used as the initial condition instead of a perturbed root.
    #[arg(long)]
    start_field: Option<String>,
    /// Uniform perturbation amplitude applied to the base state.
    #[arg(long, allow_negative_numbers = true)]
    amplitude: Option<f64>,
    /// Logistic rate profile `s0,rate,y0` along the last axis.
    #[arg(long, value_name = "S0,RATE,Y0")]
    sigma_profile: Option<ProfileSpec>,
    /// Time step.
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    /// Integration horizon.
    #[arg(long, allow_negative_numbers = true)]
    t_final: Option<f64>,
    /// Comma-separated snapshot times.
    #[arg(long, value_name = "T1,T2,...")]
    snapshots: Option<TimeList>,
    /// Relative-change threshold declaring the run quiescent.
    #[arg(long, allow_negative_numbers = true)]
    quiescence_tol: Option<f64>,
    /// Window length between quiescence checks.
    #[arg(long, allow_negative_numbers = true)]
    quiescence_window: Option<f64>,
    /// Strip height for pattern classification of the final state.
    #[arg(long, allow_negative_numbers = true)]
    strip_height: Option<f64>,
}

#[derive(Args, Debug)]
struct NormsArgs {
    /// Saved field to evaluate.
    #[arg(long)]
    field: Option<String>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Saved field to re-emit as CSV.
    #[arg(long)]
    field: Option<String>,
}

/// Parses the arguments and executes the selected command. Help and version
/// requests print and succeed; parse failures surface as configuration
/// errors so the binary exits 2.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::InvalidConfig(e.to_string())),
    };
    dispatch(cli)
}

/// Entry point for the binary: runs and maps errors onto exit codes.
pub fn main_entry<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            exit_code(&e)
        }
    }
}

/// 2 for configuration and usage problems, 3 for numeric failures.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) => 2,
        _ => 3,
    }
}

fn out_root(flag: Option<&str>) -> PathBuf {
    match flag {
        Some(dir) => PathBuf::from(dir),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(Path::new(path))?,
        None => FileConfig::default(),
    };
    let out = out_root(cli.out.as_deref());
    std::fs::create_dir_all(&out)?;
    match &cli.command {
        Command::Scan(a) => cmd_scan(a, &file, &out),
        Command::Homog(a) => cmd_homog(a, &file, &out),
        Command::Disp(a) => cmd_disp(a, &file, &out),
        Command::Landau(a) => cmd_landau(a, &file, &out),
        Command::Cont(a) => cmd_cont(a, &file, &out, cli.seed),
        Command::Ti(a) => cmd_ti(a, &file, &out, cli.seed),
        Command::Norms(a) => cmd_norms(a, &file, &out),
        Command::Export(a) => cmd_export(a, &file, &out),
    }
}

fn open_field(path: &str) -> Result<Field> {
    let file = File::open(path).map_err(|e| {
        Error::InvalidConfig(format!("cannot open field file {path}: {e}"))
    })?;
    read_field(BufReader::new(file))
}

fn cmd_scan(a: &ScanArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let mut r = Resolver::new(file, "scan")?;
    let mut base = ParameterSet::standard(0.1, 0.25);
    resolve_base_params(&mut r, &a.base, &mut base)?;
    let saxis = r.value(
        "sigma_range",
        a.sigma,
        AxisSpec { lo: 0.0, hi: 0.25, n: 200 },
    )?;
    let gaxis = r.value(
        "gamma_range",
        a.gamma,
        AxisSpec { lo: 0.0, hi: 0.6, n: 200 },
    )?;

    let scan = plane_scan(&base, (saxis.lo, saxis.hi), (gaxis.lo, gaxis.hi), (saxis.n, gaxis.n))?;
    let csv = out.join("scan.csv");
    scan.write_csv(BufWriter::new(File::create(&csv)?))?;
    r.write_echo(&out.join("scan_config.txt"))?;
    println!(
        "wrote {} ({} x {} cells)",
        csv.display(),
        saxis.n,
        gaxis.n
    );
    Ok(())
}

fn cmd_homog(a: &HomogArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let mut r = Resolver::new(file, "homog")?;
    let p = resolve_params(&mut r, &a.params)?;
    let states = homogeneous_states(&p)?;

    let csv = out.join("homog.csv");
    let mut w = BufWriter::new(File::create(&csv)?);
    writeln!(w, "index,u,v,real,positive,class,b1,b2,b3,b4")?;
    for s in &states {
        let c = &s.stability;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            s.index, s.u, s.v, s.is_real, s.is_positive, c.kind, c.b1, c.b2, c.b3, c.b4
        )?;
    }
    drop(w);
    r.write_echo(&out.join("homog_config.txt"))?;

    for s in &states {
        println!(
            "root {}: u = {:.12}, v = {:.12}, {}{}",
            s.index,
            s.u,
            s.v,
            s.stability.kind,
            if s.is_real { "" } else { " (complex)" }
        );
    }
    println!("wrote {}", csv.display());
    Ok(())
}

fn cmd_disp(a: &DispArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let mut r = Resolver::new(file, "disp")?;
    let p = resolve_params(&mut r, &a.params)?;
    let root = r.value("root", a.root, 1u8)?;
    let kaxis = r.value(
        "k_range",
        a.k_grid,
        AxisSpec { lo: 0.0, hi: 0.6, n: 601 },
    )?;
    if !(1..=3).contains(&root) {
        return Err(Error::InvalidConfig(format!(
            "root index must be 1..=3, got {root}"
        )));
    }

    let states = homogeneous_states(&p)?;
    let state = states
        .iter()
        .find(|s| s.index == root && s.is_real)
        .ok_or_else(|| {
            Error::Numeric(format!(
                "root {root} is not real at sigma = {}, gamma = {}",
                p.sigma, p.gamma
            ))
        })?;

    let csv = out.join("disp.csv");
    let mut w = BufWriter::new(File::create(&csv)?);
    writeln!(w, "k,re_mu_plus,im_mu_plus,re_mu_minus,im_mu_minus")?;
    for k in kaxis.values() {
        let s = dispersion(state, &p, k)?;
        writeln!(
            w,
            "{},{},{},{},{}",
            s.k, s.mu_plus.re, s.mu_plus.im, s.mu_minus.re, s.mu_minus.im
        )?;
    }
    drop(w);
    r.write_echo(&out.join("disp_config.txt"))?;
    println!("wrote {} ({} wavenumbers)", csv.display(), kaxis.n);
    Ok(())
}

fn cmd_landau(a: &LandauArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let mut r = Resolver::new(file, "landau")?;
    let mut base = ParameterSet::standard(0.1, 0.25);
    resolve_base_params(&mut r, &a.base, &mut base)?;
    let gaxis = r.value(
        "gamma_range",
        a.gamma,
        AxisSpec { lo: 0.05, hi: 0.35, n: 31 },
    )?;
    let bracket = r.value("bracket", a.bracket, BracketSpec { lo: 0.08, hi: 0.3 })?;
    let mode = r.value("mode", a.mode, ModeArg::Classical)?;
    let variant = r.value("variant", a.variant, VariantArg::Printed)?;

    let csv = out.join("landau.csv");
    let mut w = BufWriter::new(File::create(&csv)?);
    writeln!(w, "gamma,sigma_c,k_c,c1,c2,c3,c4,c_f")?;
    let mut failures = 0usize;
    for gamma in gaxis.values() {
        match coefficient_sweep(
            &base,
            &[gamma],
            (bracket.lo, bracket.hi),
            mode.into(),
            variant.into(),
        ) {
            Ok(rows) => {
                let row = &rows[0];
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    row.gamma, row.sigma_c, row.k_c, row.c1, row.c2, row.c3, row.c4, row.c_f
                )?;
            }
            Err(_) => {
                failures += 1;
                writeln!(w, "{gamma},NA,NA,NA,NA,NA,NA,NA")?;
            }
        }
    }
    drop(w);
    r.write_echo(&out.join("landau_config.txt"))?;
    println!(
        "wrote {} ({} rows, {} without critical point)",
        csv.display(),
        gaxis.n,
        failures
    );
    Ok(())
}

fn resolve_settings(
    r: &mut Resolver,
    a: &ContArgs,
    seed: Option<u64>,
) -> Result<ContinuationSettings> {
    let d = ContinuationSettings::default();
    let sigma_min = r.value("sigma_min", a.sigma_min, d.sigma_bounds.0)?;
    let sigma_max = r.value("sigma_max", a.sigma_max, d.sigma_bounds.1)?;
    Ok(ContinuationSettings {
        newton_tol: r.value("newton_tol", a.newton_tol, d.newton_tol)?,
        ds0: r.value("ds0", a.ds0, d.ds0)?,
        ds_min: r.value("ds_min", a.ds_min, d.ds_min)?,
        ds_max: r.value("ds_max", a.ds_max, d.ds_max)?,
        max_steps: r.value("max_steps", a.max_steps, d.max_steps)?,
        n_eigs: r.value("n_eigs", a.n_eigs, d.n_eigs)?,
        seed: r.value("seed", seed, d.seed)?,
        sigma_bounds: (sigma_min, sigma_max),
        stop_on_homogeneous: r.value(
            "stop_on_homogeneous",
            a.stop_on_homogeneous,
            d.stop_on_homogeneous,
        )?,
        ..d
    })
}

fn report_branch(branch: &Branch, csv: &Path) {
    println!(
        "branch `{}`: {} points, terminated by {}; wrote {}",
        branch.label,
        branch.points.len(),
        branch.termination,
        csv.display()
    );
    for (i, pt) in branch
        .points
        .iter()
        .enumerate()
        .filter(|(_, pt)| pt.tag != PointTag::Regular)
    {
        println!("  point {i}: {} at sigma = {:.12}", pt.tag, pt.sigma);
    }
}

fn write_branch_outputs(
    branch: &Branch,
    out: &Path,
    every: usize,
) -> Result<PathBuf> {
    let csv = out.join(format!("{}.csv", branch.label));
    write_branch_csv(branch, BufWriter::new(File::create(&csv)?))?;
    write_branch_snapshots(branch, every, out, &branch.label)?;
    Ok(csv)
}

fn cmd_cont(a: &ContArgs, file: &FileConfig, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut r = Resolver::new(file, "cont")?;
    let p = resolve_params(&mut r, &a.params)?;
    let settings = resolve_settings(&mut r, a, seed)?;
    let root = r.value("root", a.root, 1u8)?;
    let direction = r.value("direction", a.direction, -1.0)?;
    let label = r.value("label", a.label.clone(), "branch".to_string())?;
    let every = r.value("snapshot_every", a.snapshot_every, 10usize)?;
    let start_field = r.optional("start_field", a.start_field.clone())?;
    let prev_field = r.optional("prev_field", a.prev_field.clone())?;
    let prev_sigma = r.optional("prev_sigma", a.prev_sigma)?;
    let switch_index = r.optional("switch_index", a.switch_index)?;
    let switch_sign = r.value("switch_sign", a.switch_sign, 1.0)?;
    let switch_amplitude = r.value("switch_amplitude", a.switch_amplitude, 0.02)?;

    let start = match &start_field {
        Some(path) => open_field(path)?,
        None => {
            let domain = resolve_domain(&mut r, &a.domain)?;
            homogeneous_start(&p, root, &domain)?
        }
    };

    let branch = match &prev_field {
        Some(path) => {
            let prev = open_field(path)?;
            let ps = prev_sigma.ok_or_else(|| {
                Error::InvalidConfig("`prev_field` needs `prev_sigma` as well".into())
            })?;
            continue_restarted(&prev, ps, &start, &p, &label, &settings)?
        }
        None => continue_branch(&start, &p, direction, &label, &settings)?,
    };
    let csv = write_branch_outputs(&branch, out, every)?;
    report_branch(&branch, &csv);

    if let Some(index) = switch_index {
        let bifs: Vec<_> = branch
            .points
            .iter()
            .filter(|pt| pt.tag == PointTag::Bifurcation)
            .collect();
        let bif = bifs.get(index.wrapping_sub(1)).copied().ok_or_else(|| {
            Error::Numeric(format!(
                "branch has {} bifurcation points, cannot switch at index {index}",
                bifs.len()
            ))
        })?;
        let mode = bif.crossing_mode.clone().ok_or_else(|| {
            Error::Numeric("bifurcation point carries no crossing mode".into())
        })?;
        let sw_label = format!("{label}_sw{index}");
        let start_pt = switch_branch(bif, &p, switch_sign, switch_amplitude, &settings)?;
        let mut switched = continue_switched(&start_pt, &mode, &p, &sw_label, &settings)?;
        switched.provenance = Some(Provenance {
            parent: label.clone(),
            bifurcation_index: index,
            sign: if switch_sign < 0.0 { -1 } else { 1 },
        });
        let sw_csv = write_branch_outputs(&switched, out, every)?;
        report_branch(&switched, &sw_csv);
    }

    r.write_echo(&out.join("cont_config.txt"))?;
    Ok(())
}

fn cmd_ti(a: &TiArgs, file: &FileConfig, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut r = Resolver::new(file, "ti")?;
    let mut p = resolve_params(&mut r, &a.params)?;
    let root = r.value("root", a.root, 1u8)?;
    let amplitude = r.value("amplitude", a.amplitude, 1e-3)?;
    let seed = r.value("seed", seed, 7u64)?;
    let dt = r.value("dt", a.dt, 0.1)?;
    let t_final = r.value("t_final", a.t_final, 1e4)?;
    let profile = r.optional("sigma_profile", a.sigma_profile)?;
    let snapshots = r.optional("snapshots", a.snapshots.clone())?;
    let quiescence_tol = r.value("quiescence_tol", a.quiescence_tol, 1e-7)?;
    let quiescence_window = r.value("quiescence_window", a.quiescence_window, 100.0)?;
    let strip_height = r.optional("strip_height", a.strip_height)?;
    let start_field = r.optional("start_field", a.start_field.clone())?;

    let base = match &start_field {
        Some(path) => open_field(path)?,
        None => {
            let domain = resolve_domain(&mut r, &a.domain)?;
            // under a rate profile the base state follows the deep-water
            // plateau s0
            if let Some(prof) = &profile {
                p = p.with_sigma(prof.s0);
            }
            let state = homogeneous_states(&p)?
                .into_iter()
                .find(|s| s.index == root && s.is_real)
                .ok_or_else(|| {
                    Error::Numeric(format!(
                        "root {root} is not real at sigma = {}, gamma = {}",
                        p.sigma, p.gamma
                    ))
                })?;
            let mut f = Field::constant(&domain, state.u, state.v);
            if let Some(prof) = &profile {
                f.sigma = Some(sigma_profile(&domain, prof.s0, prof.rate, prof.y0)?);
            }
            f
        }
    };
    let initial = perturb(&base, amplitude, seed)?;

    let mut run = IntegrationRun::new(initial, t_final);
    run.dt = dt;
    run.quiescence_tol = quiescence_tol;
    run.quiescence_window = quiescence_window;
    if let Some(times) = &snapshots {
        run.snapshots = times.0.clone();
    }
    let traj = integrate(&run, &p)?;

    for (i, (_, field)) in traj.snapshots.iter().enumerate() {
        let path = out.join(format!("ti_snap_{i:04}.dat"));
        write_field(field, BufWriter::new(File::create(&path)?))?;
    }
    let final_path = out.join("ti_final.dat");
    write_field(&traj.final_field, BufWriter::new(File::create(&final_path)?))?;

    let n = norms(&traj.final_field);
    let summary = out.join("ti_summary.csv");
    let mut w = BufWriter::new(File::create(&summary)?);
    writeln!(
        w,
        "t_final,quiescent,quiescent_since,relative_change,u_l1,u_l2,u_l8,v_l1,v_l2,v_l8"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{}",
        traj.final_time,
        traj.report.quiescent,
        traj.report.time,
        traj.report.relative_change,
        n.u.l1,
        n.u.l2,
        n.u.l8,
        n.v.l1,
        n.v.l2,
        n.v.l8
    )?;
    drop(w);

    if let Some(height) = strip_height {
        let reports = classify_strips(&traj.final_field, &StripClassifierOptions::new(height))?;
        let layering = out.join("layering.csv");
        write_layering_csv(&reports, BufWriter::new(File::create(&layering)?))?;
        for rep in &reports {
            println!("strip {} (y = {:.2}): {}", rep.index, rep.y_center, rep.label);
        }
        println!("wrote {}", layering.display());
    }

    r.write_echo(&out.join("ti_config.txt"))?;
    println!(
        "integrated to t = {} ({}, relative change {:.3e}); wrote {}",
        traj.final_time,
        if traj.report.quiescent {
            "quiescent"
        } else {
            "still moving"
        },
        traj.report.relative_change,
        final_path.display()
    );
    Ok(())
}

fn cmd_norms(a: &NormsArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let mut r = Resolver::new(file, "norms")?;
    let path = r
        .optional("field", a.field.clone())?
        .ok_or_else(|| Error::InvalidConfig("`norms` needs `--field <path>`".into()))?;
    let field = open_field(&path)?;
    let n = norms(&field);

    let csv = out.join("norms.csv");
    let mut w = BufWriter::new(File::create(&csv)?);
    writeln!(w, "u_l1,u_l2,u_l8,v_l1,v_l2,v_l8")?;
    writeln!(
        w,
        "{},{},{},{},{},{}",
        n.u.l1, n.u.l2, n.u.l8, n.v.l1, n.v.l2, n.v.l8
    )?;
    drop(w);
    r.write_echo(&out.join("norms_config.txt"))?;
    println!(
        "u: l1 = {:.12}, l2 = {:.12}, l8 = {:.12}",
        n.u.l1, n.u.l2, n.u.l8
    );
    println!(
        "v: l1 = {:.12}, l2 = {:.12}, l8 = {:.12}",
        n.v.l1, n.v.l2, n.v.l8
    );
    println!("wrote {}", csv.display());
    Ok(())
}

fn cmd_export(a: &ExportArgs, file: &FileConfig, out: &Path) -> Result<()> {
    let mut r = Resolver::new(file, "export")?;
    let path = r
        .optional("field", a.field.clone())?
        .ok_or_else(|| Error::InvalidConfig("`export` needs `--field <path>`".into()))?;
    let field = open_field(&path)?;

    let stem = Path::new(&path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("field");
    let csv = out.join(format!("{stem}.csv"));
    let mut w = BufWriter::new(File::create(&csv)?);
    let d = &field.domain;
    let with_sigma = field.sigma.is_some();
    match (d.dimension, with_sigma) {
        (1, false) => writeln!(w, "x,u,v")?,
        (1, true) => writeln!(w, "x,u,v,sigma")?,
        (_, false) => writeln!(w, "x,y,u,v")?,
        (_, true) => writeln!(w, "x,y,u,v,sigma")?,
    }
    for i in 0..d.nodes() {
        let (x, y) = d.coords(i);
        if d.dimension == 2 {
            write!(w, "{x},{y}")?;
        } else {
            write!(w, "{x}")?;
        }
        write!(w, ",{},{}", field.u[i], field.v[i])?;
        if let Some(s) = &field.sigma {
            write!(w, ",{}", s[i])?;
        }
        writeln!(w)?;
    }
    drop(w);
    r.write_echo(&out.join("export_config.txt"))?;
    println!("wrote {} ({} rows)", csv.display(), d.nodes());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, args: &[&str]) -> Result<()> {
        let mut full = vec!["benthos".to_string()];
        full.extend(args.iter().map(|s| s.to_string()));
        full.push("--out".to_string());
        full.push(dir.display().to_string());
        run(full)
    }

    fn read(dir: &Path, name: &str) -> String {
        std::fs::read_to_string(dir.join(name)).unwrap()
    }

    #[test]
    fn axis_spec_parses_and_rejects() {
        let a: AxisSpec = "0:0.25:200".parse().unwrap();
        assert_eq!(a, AxisSpec { lo: 0.0, hi: 0.25, n: 200 });
        assert_eq!(a.to_string().parse::<AxisSpec>().unwrap(), a);
        assert!("0:0.25".parse::<AxisSpec>().is_err());
        assert!("a:b:3".parse::<AxisSpec>().is_err());
        assert!("0:1:0".parse::<AxisSpec>().is_err());
        assert!("1:0:5".parse::<AxisSpec>().is_err());

        let single = AxisSpec { lo: 0.3, hi: 0.3, n: 1 };
        assert_eq!(single.values(), vec![0.3]);
        let grid = AxisSpec { lo: 0.0, hi: 1.0, n: 5 }.values();
        assert_eq!(grid, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn config_file_rejects_unknown_keys_and_garbage() {
        assert!(FileConfig::parse("sigma = 0.1\n# comment\n\ngamma = 0.3").is_ok());
        let err = FileConfig::parse("sigmaa = 0.1").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
        assert!(err.to_string().contains("sigmaa"));
        assert!(FileConfig::parse("just words").is_err());
        // present but unparseable values fail at typed lookup
        let cfg = FileConfig::parse("sigma = fast").unwrap();
        assert!(cfg.get::<f64>("sigma").is_err());
    }

    #[test]
    fn exit_codes_separate_usage_from_numerics() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::Numeric("x".into())), 3);
        assert_eq!(
            exit_code(&Error::BracketFailed { lo: 0.0, hi: 1.0 }),
            3
        );
        // malformed range through the real argument parser
        let err = run(["benthos", "scan", "--sigma", "0:0.25"]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        // help is not an error
        run(["benthos", "--help"]).unwrap();
    }

    #[test]
    fn scan_single_cell_is_single_line_and_rerun_identical() {
        let dir = tempfile::tempdir().unwrap();
        let args = ["scan", "--sigma", "0.1:0.1:1", "--gamma", "0.25:0.25:1"];
        run_in(dir.path(), &args).unwrap();
        let first = read(dir.path(), "scan.csv");
        let lines: Vec<&str> = first.lines().collect();
        assert_eq!(lines.len(), 2, "header plus exactly one row:\n{first}");
        assert_eq!(
            lines[0],
            "sigma,gamma,u1,v1,class1,u2,v2,class2,u3,v3,class3"
        );
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 11);
        assert_eq!(fields[0], "0.1");
        assert_eq!(fields[1], "0.25");
        let u1: f64 = fields[2].parse().unwrap();
        assert!((u1 - 1.0).abs() < 1e-9, "u1 = {u1}");

        run_in(dir.path(), &args).unwrap();
        assert_eq!(read(dir.path(), "scan.csv"), first);
    }

    #[test]
    fn flags_override_config_file_and_echo_reruns_are_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "sigma = 0.2\ngamma = 0.3\n").unwrap();

        let d1 = dir.path().join("d1");
        run_in(
            &d1,
            &["homog", "--config", cfg.to_str().unwrap(), "--sigma", "0.1"],
        )
        .unwrap();
        let echo = read(&d1, "homog_config.txt");
        // flag wins over file, file wins over default
        assert!(echo.contains("sigma = 0.1"), "{echo}");
        assert!(echo.contains("gamma = 0.3"), "{echo}");
        assert!(echo.contains("command = homog"), "{echo}");

        let d2 = dir.path().join("d2");
        let echo_path = d1.join("homog_config.txt");
        run_in(&d2, &["homog", "--config", echo_path.to_str().unwrap()]).unwrap();
        assert_eq!(read(&d1, "homog.csv"), read(&d2, "homog.csv"));
        assert_eq!(read(&d2, "homog_config.txt"), echo);
    }

    #[test]
    fn echo_from_other_command_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        run_in(dir.path(), &["homog", "--sigma", "0.1"]).unwrap();
        let echo = dir.path().join("homog_config.txt");
        let err = run_in(dir.path(), &["scan", "--config", echo.to_str().unwrap()])
            .unwrap_err();
        assert!(err.to_string().contains("homog"), "{err}");
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn homog_lists_all_three_roots_with_classes() {
        let dir = tempfile::tempdir().unwrap();
        run_in(dir.path(), &["homog", "--sigma", "0.1", "--gamma", "0.25"]).unwrap();
        let text = read(dir.path(), "homog.csv");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "index,u,v,real,positive,class,b1,b2,b3,b4");
        // root 1 sits at u = v = 1 and is Turing unstable here
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 10);
        assert_eq!(fields[0], "1");
        let u: f64 = fields[1].parse().unwrap();
        let v: f64 = fields[2].parse().unwrap();
        assert!((u - 1.0).abs() < 1e-9 && (v - 1.0).abs() < 1e-9, "{u}, {v}");
        assert_eq!(fields[3], "true");
        assert_eq!(fields[5], "turing_unstable");
    }

    #[test]
    fn disp_samples_requested_wavenumber_grid() {
        let dir = tempfile::tempdir().unwrap();
        run_in(
            dir.path(),
            &["disp", "--sigma", "0.1", "--gamma", "0.25", "--k-grid", "0:0.5:11"],
        )
        .unwrap();
        let text = read(dir.path(), "disp.csv");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0], "k,re_mu_plus,im_mu_plus,re_mu_minus,im_mu_minus");
        assert!(lines[1].starts_with("0,"));
        assert!(lines[11].starts_with("0.5,"));

        // below the cusp only one real root remains: requesting another is a
        // numeric error
        let err = run_in(
            dir.path(),
            &["disp", "--sigma", "0.05", "--gamma", "0.25", "--root", "2"],
        )
        .unwrap_err();
        assert_eq!(exit_code(&err), 3);
    }

    #[test]
    fn landau_sweep_marks_unbracketed_gammas_na() {
        let dir = tempfile::tempdir().unwrap();
        // bracket entirely above the Turing band: no critical point found
        run_in(
            dir.path(),
            &["landau", "--gamma", "0.25:0.25:1", "--bracket", "0.3:0.4"],
        )
        .unwrap();
        let text = read(dir.path(), "landau.csv");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "gamma,sigma_c,k_c,c1,c2,c3,c4,c_f");
        assert_eq!(lines[1], "0.25,NA,NA,NA,NA,NA,NA,NA");

        // a valid bracket fills the row with finite numbers
        run_in(
            dir.path(),
            &["landau", "--gamma", "0.25:0.25:1", "--bracket", "0.08:0.3"],
        )
        .unwrap();
        let text = read(dir.path(), "landau.csv");
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row.len(), 8);
        let sigma_c: f64 = row[1].parse().unwrap();
        assert!((sigma_c - 0.1253).abs() < 1e-3, "sigma_c = {sigma_c}");
    }

    #[test]
    fn parameters_must_be_positive() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_in(dir.path(), &["homog", "--sigma", "-0.1"]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("sigma"), "{err}");
        let err = run_in(dir.path(), &["homog", "--v0", "0"]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn ti_zero_amplitude_keeps_the_root_and_reruns_are_identical() {
        let dir = tempfile::tempdir().unwrap();
        let args = [
            "ti",
            "--sigma",
            "0.2",
            "--gamma",
            "0.25",
            "--lx",
            "10",
            "--nx",
            "6",
            "--amplitude",
            "0",
            "--dt",
            "0.5",
            "--t-final",
            "5",
            "--snapshots",
            "1,3",
        ];
        run_in(dir.path(), &args).unwrap();
        let summary = read(dir.path(), "ti_summary.csv");
        let finald = read(dir.path(), "ti_final.dat");
        // the unperturbed root is a fixed point: snapshots equal the final state
        assert_eq!(read(dir.path(), "ti_snap_0000.dat"), finald);
        assert_eq!(read(dir.path(), "ti_snap_0001.dat"), finald);

        run_in(dir.path(), &args).unwrap();
        assert_eq!(read(dir.path(), "ti_summary.csv"), summary);
        assert_eq!(read(dir.path(), "ti_final.dat"), finald);
    }

    #[test]
    fn ti_blow_up_reports_timestamp_as_numeric_failure() {
        let dir = tempfile::tempdir().unwrap();
        let err = run_in(
            dir.path(),
            &[
                "ti", "--sigma", "0.12", "--gamma", "0.25", "--lx", "10", "--nx", "6",
                "--amplitude", "0.5", "--dt", "1e6", "--t-final", "1e7",
            ],
        )
        .unwrap_err();
        assert_eq!(exit_code(&err), 3);
        assert!(err.to_string().contains("t = "), "{err}");
    }

    #[test]
    fn ti_profile_attaches_rate_table_and_layering_csv() {
        let dir = tempfile::tempdir().unwrap();
        run_in(
            dir.path(),
            &[
                "ti",
                "--gamma",
                "0.25",
                "--lx",
                "10",
                "--nx",
                "5",
                "--ly",
                "30",
                "--ny",
                "7",
                "--sigma-profile",
                "0.2,0.011,15",
                "--amplitude",
                "0",
                "--dt",
                "0.5",
                "--t-final",
                "2",
                "--strip-height",
                "10",
            ],
        )
        .unwrap();
        let echo = read(dir.path(), "ti_config.txt");
        assert!(echo.contains("sigma_profile = 0.2,0.011,15"), "{echo}");
        // five columns: x y u v sigma
        let finald = read(dir.path(), "ti_final.dat");
        let first_row = finald.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(first_row.split_whitespace().count(), 5);
        let layering = read(dir.path(), "layering.csv");
        assert_eq!(layering.lines().next().unwrap(), "strip_index,y_center,label");
        assert_eq!(layering.lines().count(), 4);
    }

    #[test]
    fn norms_and_export_round_trip_a_saved_field() {
        let dir = tempfile::tempdir().unwrap();
        let domain = Domain::line(0.0, 4.0, 5).unwrap();
        let field = Field::constant(&domain, 2.0, 0.5);
        let path = dir.path().join("state.dat");
        write_field(&field, BufWriter::new(File::create(&path).unwrap())).unwrap();

        run_in(dir.path(), &["norms", "--field", path.to_str().unwrap()]).unwrap();
        let text = read(dir.path(), "norms.csv");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "u_l1,u_l2,u_l8,v_l1,v_l2,v_l8");
        assert_eq!(lines[1], "2,2,2,0.5,0.5,0.5");

        run_in(dir.path(), &["export", "--field", path.to_str().unwrap()]).unwrap();
        let text = read(dir.path(), "state.csv");
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,u,v");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "0,2,0.5");

        // missing flag is a usage error
        let err = run_in(dir.path(), &["norms"]).unwrap_err();
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn cont_writes_branch_and_restart_reproduces_rows() {
        let dir = tempfile::tempdir().unwrap();
        // short homogeneous walk on a coarse line, constant step so a
        // restart retraces the same arclength positions
        let common = [
            "cont",
            "--gamma",
            "0.25",
            "--lx",
            "10",
            "--nx",
            "5",
            "--ds0",
            "0.01",
            "--ds-max",
            "0.01",
            "--newton-tol",
            "1e-12",
            "--snapshot-every",
            "1",
        ];
        let mut args = common.to_vec();
        args.extend(["--sigma", "0.2", "--max-steps", "6", "--label", "walk"]);
        run_in(dir.path(), &args).unwrap();
        let full = read(dir.path(), "walk.csv");
        let rows: Vec<&str> = full.lines().collect();
        assert_eq!(
            rows[0],
            "idx,sigma,u_l1,u_l2,u_l8,v_l1,v_l2,v_l8,n_unstable,tag"
        );
        assert_eq!(rows.len(), 7);

        // restart from the second point with the first as predecessor
        let sigma_of = |row: &str| row.split(',').nth(1).unwrap().to_string();
        let s0 = sigma_of(rows[1]);
        let s1 = sigma_of(rows[2]);
        let p0 = dir.path().join("walk_0000.dat");
        let p1 = dir.path().join("walk_0001.dat");
        let mut args = common.to_vec();
        args.extend([
            "--sigma",
            s1.as_str(),
            "--start-field",
            p1.to_str().unwrap(),
            "--prev-field",
            p0.to_str().unwrap(),
            "--prev-sigma",
            s0.as_str(),
            "--max-steps",
            "5",
            "--label",
            "resume",
        ]);
        run_in(dir.path(), &args).unwrap();
        let resumed = read(dir.path(), "resume.csv");
        let rrows: Vec<&str> = resumed.lines().collect();
        assert_eq!(rrows.len(), 6);
        for (orig, res) in rows[2..].iter().zip(&rrows[1..]) {
            let ov: Vec<f64> = orig
                .split(',')
                .take(8)
                .skip(1)
                .map(|t| t.parse().unwrap())
                .collect();
            let rv: Vec<f64> = res
                .split(',')
                .take(8)
                .skip(1)
                .map(|t| t.parse().unwrap())
                .collect();
            for (a, b) in ov.iter().zip(&rv) {
                assert!((a - b).abs() < 1e-10, "row {orig} vs {res}");
            }
        }
    }
}
