//! Run configuration: TOML file, figure presets and command-line flags,
//! applied in that order.

use std::fmt;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use inopo::estimator::PsdConfig;
use inopo::stochastic::SimConfig;
use serde::{Deserialize, Serialize};

use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Pump steady state and its closed-form approximations.
    #[default]
    SteadySweep,
    /// Stability of the exact steady state over a (mu0, mu1) grid.
    StabilityMap,
    /// Linearised output spectra.
    LinearSpectra,
    /// Positive-P simulation of the output spectra.
    Simulate,
    /// Duan and EPR criteria against frequency.
    Criteria,
    /// Duan and EPR criteria at zero frequency against the quadrature angle.
    ThetaSweep,
    /// Pump, injection and output powers.
    Power,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SteadySweep => "steady-sweep",
            Command::StabilityMap => "stability-map",
            Command::LinearSpectra => "linear-spectra",
            Command::Simulate => "simulate",
            Command::Criteria => "criteria",
            Command::ThetaSweep => "theta-sweep",
            Command::Power => "power",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What `steady-sweep` tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Curve {
    /// Steady state against the `mu0` and `mu1` grids.
    #[default]
    FixedPoint,
    /// The fixed-point quintic, the injection line and the local
    /// approximation, against the `x` grid.
    Polynomial,
}

/// Source of the spectra behind `criteria` and `theta-sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Analytic,
    Simulated,
}

/// Steady state used by `power`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyChoice {
    /// Regime-appropriate closed form.
    #[default]
    Approximate,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub mu0: Grid,
    pub mu1: Grid,
    pub gamma_r: f64,
    pub g: f64,
    pub phi: f64,
    /// Frequencies for analytic spectra and criteria.
    pub omega: Grid,
    /// Quadrature angles, applied to both modes.
    pub theta: Grid,
    /// Abscissa for the polynomial curves.
    pub x: Grid,
    pub curve: Curve,
    pub method: Method,
    /// Jackknife blocks for simulated criteria.
    pub blocks: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            mu0: Grid::single(0.6),
            mu1: Grid::single(0.2),
            gamma_r: 1.0,
            g: 0.01,
            phi: 0.0,
            omega: "0:0.005:5".parse().unwrap(),
            theta: Grid::single(0.0),
            x: "0:0.005:3".parse().unwrap(),
            curve: Curve::FixedPoint,
            method: Method::Analytic,
            blocks: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Power {
    pub pth_mw: f64,
    pub w1_over_w0: f64,
    pub w2_over_w0: f64,
    pub steady_state: SteadyChoice,
}

impl Default for Power {
    fn default() -> Self {
        Self {
            pth_mw: 20.0,
            w1_over_w0: 0.5,
            w2_over_w0: 0.5,
            steady_state: SteadyChoice::Approximate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    /// Destination file; standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Fully resolved run configuration. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Command,
    /// Worker threads for simulations; all cores when absent.
    pub threads: Option<usize>,
    pub params: Params,
    pub power: Power,
    pub sim: SimConfig,
    pub psd: PsdConfig,
    pub output: Output,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::default(),
            threads: None,
            params: Params::default(),
            power: Power::default(),
            sim: SimConfig::default(),
            psd: PsdConfig {
                segment: 8192,
                omega_max: Some(5.0),
                ..PsdConfig::default()
            },
            output: Output::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    #[value(name = "1a")]
    F1a,
    #[value(name = "1b")]
    F1b,
    #[value(name = "2")]
    F2,
    #[value(name = "3")]
    F3,
    #[value(name = "4a")]
    F4a,
    #[value(name = "4b")]
    F4b,
    #[value(name = "5a")]
    F5a,
    #[value(name = "5b")]
    F5b,
    #[value(name = "6a")]
    F6a,
    #[value(name = "6b")]
    F6b,
    #[value(name = "7a")]
    F7a,
    #[value(name = "7b")]
    F7b,
    #[value(name = "7c")]
    F7c,
}

impl Figure {
    pub fn name(self) -> &'static str {
        use Figure::*;
        match self {
            F1a => "1a",
            F1b => "1b",
            F2 => "2",
            F3 => "3",
            F4a => "4a",
            F4b => "4b",
            F5a => "5a",
            F5b => "5b",
            F6a => "6a",
            F6b => "6b",
            F7a => "7a",
            F7b => "7b",
            F7c => "7c",
        }
    }
}

const THETA_SWEEP: &str = "0:0.01:3.14";

fn grid(s: &str) -> Grid {
    s.parse().expect("preset grids are valid")
}

impl RunConfig {
    /// Sets the command and parameters that reproduce one figure.
    pub fn apply_figure(&mut self, fig: Figure) {
        use Figure::*;
        let p = &mut self.params;
        let (command, mu0, mu1) = match fig {
            F1a => (Command::SteadySweep, "0:0.01:3", "0.2"),
            F1b => (Command::SteadySweep, "1", "0:0.005:0.5"),
            F2 => (Command::Simulate, "0.6", "0.2"),
            F3 => (Command::Simulate, "2", "0.2"),
            F4a | F4b => (Command::Criteria, "0.6", "0.2"),
            F5a | F5b => (Command::Criteria, "2", "0.2"),
            F6a | F6b => (Command::Criteria, "0.6", "0,0.1,0.2"),
            F7a => (Command::SteadySweep, "0.6", "0.2"),
            F7b => (Command::SteadySweep, "2", "0.2"),
            F7c => (Command::SteadySweep, "1", "0.2"),
        };
        self.command = command;
        p.mu0 = grid(mu0);
        p.mu1 = grid(mu1);
        p.theta = Grid::single(0.0);
        p.curve = Curve::FixedPoint;
        p.method = Method::Analytic;
        match fig {
            F4b | F5b => {
                self.command = Command::ThetaSweep;
                p.theta = grid(THETA_SWEEP);
            }
            _ => {}
        }
        if matches!(fig, F5a | F5b) {
            p.method = Method::Simulated;
        }
        if matches!(fig, F7a | F7b | F7c) {
            p.curve = Curve::Polynomial;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        for (name, v) in [("params.gamma_r", p.gamma_r), ("params.g", p.g)] {
            if !(v.is_finite() && v >= 0.0) {
                bail!("{name}: must be finite and >= 0, got {v}");
            }
        }
        if p.gamma_r == 0.0 {
            bail!("params.gamma_r: must be > 0");
        }
        if !p.phi.is_finite() {
            bail!("params.phi: must be finite");
        }
        for (name, g) in [("params.mu0", &p.mu0), ("params.mu1", &p.mu1)] {
            if g.values().iter().any(|&v| v < 0.0) {
                bail!("{name}: values must be >= 0");
            }
        }
        if p.omega.values().iter().any(|&v| v < 0.0) {
            bail!("params.omega: values must be >= 0");
        }
        if p.blocks < 2 {
            bail!("params.blocks: must be >= 2, got {}", p.blocks);
        }
        if self.threads == Some(0) {
            bail!("threads: must be >= 1");
        }
        let pw = &self.power;
        if !(pw.pth_mw.is_finite() && pw.pth_mw > 0.0) {
            bail!("power.pth_mw: must be > 0, got {}", pw.pth_mw);
        }
        inopo::model::check_frequency_ratios(pw.w1_over_w0, pw.w2_over_w0).context("power")?;
        self.sim.validate().context("sim")?;
        self.psd.validate().context("psd")?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

pub const CONFIG_BEGIN: &str = "# config begin";
pub const CONFIG_END: &str = "# config end";

/// Reads a config file: plain TOML, or a CSV output whose header echoes one.
pub fn read_config(text: &str) -> Result<RunConfig> {
    if let Some(start) = text.lines().position(|l| l.trim_end() == CONFIG_BEGIN) {
        let body: Vec<&str> = text
            .lines()
            .skip(start + 1)
            .take_while(|l| l.trim_end() != CONFIG_END)
            .map(|l| {
                l.strip_prefix("# ")
                    .or_else(|| l.strip_prefix('#'))
                    .unwrap_or(l)
            })
            .collect();
        return RunConfig::from_toml(&body.join("\n"));
    }
    RunConfig::from_toml(text)
}

/// Runs parameter sweeps, spectra and entanglement criteria for the
/// injected nondegenerate optical parametric oscillator.
#[derive(Debug, Parser)]
#[command(name = "inopo", version, allow_negative_numbers = true)]
pub struct Args {
    /// Analysis to run; overrides the file and any figure preset.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// TOML config, or a CSV output whose header echoes one.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset reproducing one figure's curves.
    #[arg(long, value_enum)]
    pub figure: Option<Figure>,
    /// Pump parameter: value, list a,b,c or range start:step:stop.
    #[arg(long)]
    pub mu0: Option<Grid>,
    /// Injection parameter: value, list or range.
    #[arg(long)]
    pub mu1: Option<Grid>,
    #[arg(long)]
    pub gamma_r: Option<f64>,
    /// Nonlinearity scale of the noise.
    #[arg(long)]
    pub g: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub omega: Option<Grid>,
    #[arg(long)]
    pub theta: Option<Grid>,
    #[arg(long)]
    pub x: Option<Grid>,
    #[arg(long, value_enum)]
    pub curve: Option<Curve>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub pth_mw: Option<f64>,
    #[arg(long)]
    pub w1_over_w0: Option<f64>,
    #[arg(long)]
    pub w2_over_w0: Option<f64>,
    #[arg(long, value_enum)]
    pub steady_state: Option<SteadyChoice>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_total: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Spectral segment length in samples.
    #[arg(long)]
    pub segment: Option<usize>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

macro_rules! set {
    ($($src:expr => $dst:expr),* $(,)?) => {
        $(if let Some(v) = $src.clone() { $dst = v; })*
    };
}

impl Args {
    /// File, then figure preset, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                read_config(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(fig) = self.figure {
            cfg.apply_figure(fig);
        }
        let p = &mut cfg.params;
        set! {
            self.command => cfg.command,
            self.mu0 => p.mu0,
            self.mu1 => p.mu1,
            self.gamma_r => p.gamma_r,
            self.g => p.g,
            self.phi => p.phi,
            self.omega => p.omega,
            self.theta => p.theta,
            self.x => p.x,
            self.curve => p.curve,
            self.method => p.method,
            self.blocks => p.blocks,
            self.pth_mw => cfg.power.pth_mw,
            self.w1_over_w0 => cfg.power.w1_over_w0,
            self.w2_over_w0 => cfg.power.w2_over_w0,
            self.steady_state => cfg.power.steady_state,
            self.dt => cfg.sim.dt,
            self.t_total => cfg.sim.t_total,
            self.burn_in => cfg.sim.burn_in,
            self.trajectories => cfg.sim.n_trajectories,
            self.seed => cfg.sim.seed,
            self.segment => cfg.psd.segment,
        }
        if self.omega_max.is_some() {
            cfg.psd.omega_max = self.omega_max;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if self.output.is_some() {
            cfg.output.path = self.output.clone();
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
