//! Experiment configuration documents.
//!
//! ```json
//! {
//!   "version": 1,
//!   "command": "verify",
//!   "spec_file": "planewave.json",
//!   "output_dir": "out",
//!   "seed": 7,
//!   "params": { "check": "envelope", "events": 100 }
//! }
//! ```
//!
//! `params` holds exactly the flags of the named subcommand; unknown keys are
//! rejected at every level.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::verify::GammaMode;

pub const CONFIG_VERSION: u32 = 1;

pub const DEFAULT_IDENTITY_TOL: f64 = 1e-10;
pub const DEFAULT_ORDER_TOL: f64 = 0.1;
pub const DEFAULT_SLOPE_TOL: f64 = 0.2;
pub const DEFAULT_DISPERSION_TOL: f64 = 0.01;

fn one() -> f64 {
    1.0
}

fn default_events() -> usize {
    100
}

fn default_report() -> PathBuf {
    PathBuf::from("report.json")
}

fn is_false(b: &bool) -> bool {
    !*b
}

pub(crate) fn parse_list<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    values.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_event(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_list::<4>(s)
}

fn parse_point(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_list::<3>(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxTag {
    Max,
}

/// Averaging half-width: a number, or `max` for the widest symmetric window
/// the samples allow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Window {
    Max(MaxTag),
    Half(f64),
}

impl Default for Window {
    fn default() -> Self {
        Window::Max(MaxTag::Max)
    }
}

fn parse_window(s: &str) -> std::result::Result<Window, String> {
    if s.eq_ignore_ascii_case("max") {
        Ok(Window::Max(MaxTag::Max))
    } else {
        s.parse::<f64>().map(Window::Half).map_err(|e| format!("`{s}`: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostParams {
    /// Speed of the moving frame along z, in units of c.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    /// Event as x,y,z,tau with tau = c·t.
    #[arg(long, value_parser = parse_event, allow_hyphen_values = true)]
    pub event: [f64; 4],
    /// Map from the moving frame back to the observer frame.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub inverse: bool,
    /// Speed of light, used with --seconds.
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "one")]
    pub c: f64,
    /// Read and print the fourth coordinate as time t in seconds instead of tau.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "is_false")]
    pub seconds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Events are observer-frame coordinates (x, y, z, tau).
    #[default]
    Observer,
    /// Events are moving-frame coordinates (x', y', z', tau').
    Fundamental,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    /// Event x,y,z,tau; repeat for several.
    #[arg(long = "event", value_parser = parse_event, allow_hyphen_values = true, required = true)]
    pub events: Vec<[f64; 4]>,
    /// Frame the events are given in.
    #[arg(long, value_enum, default_value_t = Frame::Observer)]
    #[serde(default)]
    pub frame: Frame,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    /// CSV of t,re,im rows with a header line (instead of synthesising from --spec).
    #[arg(long, conflicts_with = "point")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Moving-frame position x',y',z' at which the real field is sampled.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 3]>,
    /// Synthesised samples cover tau' in [-t_max, t_max].
    #[arg(long, default_value_t = 200.0)]
    #[serde(default = "SpectrumParams::default_t_max")]
    pub t_max: f64,
    #[arg(long, default_value_t = 20001)]
    #[serde(default = "SpectrumParams::default_samples")]
    pub samples: usize,
    /// Amplitude of a decaying exp(-tau'^2) term added to the synthesised signal.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    #[serde(default)]
    pub transient: f64,
    /// Probe frequencies; defaults to the frequencies of the field document.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub omegas: Vec<f64>,
    /// Averaging half-width T, or `max`.
    #[arg(long, value_parser = parse_window, default_value = "max")]
    #[serde(default)]
    pub window: Window,
}

impl SpectrumParams {
    fn default_t_max() -> f64 {
        200.0
    }

    fn default_samples() -> usize {
        20001
    }
}

/// Checks run by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// First partials of the envelope q(x,y,xi)·exp(i·omega·eta) against central differences; passes when every resolved entry converges at order 2 ± tol.
    #[value(alias = "eq8")]
    #[serde(alias = "eq8")]
    FirstDerivatives,
    /// Second partials of the envelope against central differences; passes when every resolved entry converges at order 2 ± tol.
    #[value(alias = "eq9")]
    #[serde(alias = "eq9")]
    SecondDerivatives,
    /// Envelope equation -i·gamma·d_tau + lap/(2·omega) - [lap q/(2·omega·q) + omega(gamma-1)^2/2], with omega taken from the mass block when present.
    #[value(alias = "eq10")]
    #[serde(alias = "eq10")]
    Envelope,
    /// Envelope equation in hbar, m, c with the separable potential u = lap q/q; see --gamma-mode.
    #[value(alias = "eq11")]
    #[serde(alias = "eq11")]
    Schrodinger,
    /// d_tau^2 - lap + [(lap q - beta^2 q_zz)/q + omega^2] for one harmonic, or + m_s with --mass-scalar.
    #[value(alias = "eq12")]
    #[serde(alias = "eq12")]
    KleinGordon,
    /// d_tau^2 - lap for a massless harmonic.
    Wave,
    /// (lap q - beta^2 q_zz)/q in the observer frame against lap' q'/q' in the moving frame.
    Scalar,
    /// Log-log slope of the dropped term m·c^2·(gamma-1)^2/2 over --betas; passes at 4 ± tol.
    #[value(alias = "beta4")]
    #[serde(alias = "beta4")]
    NeglectedTerm,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    #[arg(value_enum)]
    pub check: Check,
    /// Number of seeded sample events.
    #[arg(long, default_value_t = 100)]
    #[serde(default = "default_events")]
    pub events: usize,
    /// Coarsest stencil spacing; refinement uses h, h/2, h/4. Defaults to the profile length / 100.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Pass threshold; defaults to 1e-10 relative residual, 0.1 derivative order, 0.2 slope.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Harmonic component index.
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub component: usize,
    /// Constant mass scalar m_s for klein-gordon; wave uses 0.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_scalar: Option<f64>,
    /// Retain gamma (exact) or take gamma -> 1 (unity) in schrodinger.
    #[arg(long, value_enum, default_value_t = GammaModeArg::Exact)]
    #[serde(default)]
    pub gamma_mode: GammaModeArg,
    /// Speeds for neglected-term.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub betas: Vec<f64>,
    /// Report file, relative to the output directory.
    #[arg(long = "out", default_value = "report.json")]
    #[serde(default = "default_report")]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaModeArg {
    #[default]
    Exact,
    Unity,
}

impl From<GammaModeArg> for GammaMode {
    fn from(g: GammaModeArg) -> Self {
        match g {
            GammaModeArg::Exact => GammaMode::Exact,
            GammaModeArg::Unity => GammaMode::Unity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// Crank-Nicolson for -i·hbar·c·d_tau + (hbar^2/2m)·lap = U with gamma -> 1.
    Schrodinger,
    /// Leapfrog for d_tau^2 = lap - m_s.
    Kgf,
    /// Leapfrog with m_s = 0.
    Wave,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::Schrodinger => "schrodinger",
            Equation::Kgf => "kgf",
            Equation::Wave => "wave",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    #[arg(value_enum)]
    pub equation: Equation,
    /// Start from a snapshot file instead of the field document.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<PathBuf>,
    /// Points per axis.
    #[arg(long, default_value_t = 256)]
    #[serde(default = "EvolveParams::default_grid")]
    pub grid: usize,
    /// Domain length per axis; defaults to four periods of the field along z.
    #[arg(long = "L")]
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Spatial dimension, 1 or 3.
    #[arg(long, default_value_t = 1)]
    #[serde(default = "EvolveParams::default_dim")]
    pub dim: usize,
    /// Time step; defaults to a quarter of the spacing.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 100)]
    #[serde(default = "EvolveParams::default_steps")]
    pub steps: usize,
    /// Snapshot and trajectory interval in steps (0 = start and end only).
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub snap_every: usize,
    /// Mass scalar m_s; derived from the field document when omitted.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_scalar: Option<f64>,
    /// Harmonic component used as Schrödinger initial data.
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub component: usize,
    /// Wavenumbers for a dispersion measurement with single-mode initial data.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(default)]
    pub modes: Vec<f64>,
    /// Relative tolerance for measured against expected frequencies.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl EvolveParams {
    fn default_grid() -> usize {
        256
    }

    fn default_dim() -> usize {
        1
    }

    fn default_steps() -> usize {
        100
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitScanParams {
    /// Speeds at which the gamma -> 1 residual is evaluated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025, 0.0125, 0.0])]
    #[serde(default = "LimitScanParams::default_betas")]
    pub betas: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    #[serde(default = "default_events")]
    pub events: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub component: usize,
    /// Threshold on the residual at beta = 0.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl LimitScanParams {
    fn default_betas() -> Vec<f64> {
        vec![0.1, 0.05, 0.025, 0.0125, 0.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandParams {
    Boost(BoostParams),
    Field(FieldParams),
    Spectrum(SpectrumParams),
    Verify(VerifyParams),
    Evolve(EvolveParams),
    LimitScan(LimitScanParams),
}

impl CommandParams {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Boost(_) => "boost",
            Self::Field(_) => "field",
            Self::Spectrum(_) => "spectrum",
            Self::Verify(_) => "verify",
            Self::Evolve(_) => "evolve",
            Self::LimitScan(_) => "limit-scan",
        }
    }
}

/// One command invocation with its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct ExperimentConfig {
    pub spec_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub params: CommandParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec_file: Option<PathBuf>,
    #[serde(default = "RawConfig::default_output")]
    output_dir: PathBuf,
    #[serde(default)]
    seed: u64,
    params: serde_json::Value,
}

impl RawConfig {
    fn default_output() -> PathBuf {
        PathBuf::from(".")
    }
}

impl TryFrom<RawConfig> for ExperimentConfig {
    type Error = String;

    fn try_from(raw: RawConfig) -> std::result::Result<Self, String> {
        if raw.version != CONFIG_VERSION {
            return Err(format!("unsupported config version {} (expected {CONFIG_VERSION})", raw.version));
        }
        fn parse<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> std::result::Result<T, String> {
            serde_json::from_value(v).map_err(|e| format!("params: {e}"))
        }
        let params = match raw.command.as_str() {
            "boost" => CommandParams::Boost(parse(raw.params)?),
            "field" => CommandParams::Field(parse(raw.params)?),
            "spectrum" => CommandParams::Spectrum(parse(raw.params)?),
            "verify" => CommandParams::Verify(parse(raw.params)?),
            "evolve" => CommandParams::Evolve(parse(raw.params)?),
            "limit-scan" => CommandParams::LimitScan(parse(raw.params)?),
            other => return Err(format!("unknown command `{other}`")),
        };
        Ok(Self {
            spec_file: raw.spec_file,
            output_dir: raw.output_dir,
            seed: raw.seed,
            params,
        })
    }
}

impl From<ExperimentConfig> for RawConfig {
    fn from(c: ExperimentConfig) -> Self {
        let params = match &c.params {
            CommandParams::Boost(p) => serde_json::to_value(p),
            CommandParams::Field(p) => serde_json::to_value(p),
            CommandParams::Spectrum(p) => serde_json::to_value(p),
            CommandParams::Verify(p) => serde_json::to_value(p),
            CommandParams::Evolve(p) => serde_json::to_value(p),
            CommandParams::LimitScan(p) => serde_json::to_value(p),
        }
        .expect("parameter records serialise");
        RawConfig {
            version: CONFIG_VERSION,
            command: c.params.name().to_string(),
            spec_file: c.spec_file,
            output_dir: c.output_dir,
            seed: c.seed,
            params,
        }
    }
}

impl ExperimentConfig {
    pub fn new(params: CommandParams) -> Self {
        Self {
            spec_file: None,
            output_dir: PathBuf::from("."),
            seed: 0,
            params,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Read a config file, resolving its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.spec_file.as_mut() {
            fix(p);
        }
        fix(&mut cfg.output_dir);
        match &mut cfg.params {
            CommandParams::Spectrum(SpectrumParams { input: Some(p), .. }) => fix(p),
            CommandParams::Evolve(EvolveParams { init: Some(p), .. }) => fix(p),
            _ => {}
        }
        Ok(cfg)
    }
}
