//! Effective experiment configuration: built-in defaults, then a key=value file, then flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use divfree::diagnostics::{CflForm, DEFAULT_PERTURB, DEFAULT_SEED};
use divfree::integrators::{ForcingMode, IntegratorKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CflArg {
    Std,
    Fourthirds,
    Search,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FModeArg {
    Next,
    Taylor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Rk2,
    Cn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Md,
    Both,
}

/// Flags shared by every subcommand. Unset flags fall back to the config file, then to
/// the defaults of the subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// Polynomial degree (1 or 2)
    #[arg(long)]
    pub k: Option<usize>,
    /// Cells per side of the mesh (h = 1/n)
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated cells per side, e.g. 8,16,32
    #[arg(long = "n-list", value_name = "LIST")]
    pub n_list: Option<String>,
    /// Time step, decimal or 1/m
    #[arg(long, value_name = "TAU")]
    pub tau: Option<String>,
    /// Comma-separated time steps, e.g. 1/12,1/16
    #[arg(long = "tau-list", value_name = "LIST")]
    pub tau_list: Option<String>,
    /// Time-step schedule
    #[arg(long, value_enum)]
    pub cfl: Option<CflArg>,
    /// CFL constant
    #[arg(long)]
    pub co: Option<f64>,
    /// Viscosity
    #[arg(long)]
    pub nu: Option<f64>,
    /// SIP penalty (default 10 k²)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Final time
    #[arg(long = "T", value_name = "T")]
    pub final_time: Option<f64>,
    /// Interior vertex perturbation as a fraction of h, in [0, 0.3]
    #[arg(long)]
    pub perturb: Option<f64>,
    /// Mesh perturbation seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Second-stage forcing
    #[arg(long = "f-mode", value_enum)]
    pub f_mode: Option<FModeArg>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    /// Output directory
    #[arg(long = "out-dir", value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Drop the forcing and record the discrete energy identity
    #[arg(long = "f-zero")]
    pub f_zero: bool,
    /// key=value configuration file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// Fully resolved parameters of one command.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub n: usize,
    pub n_list: Vec<usize>,
    pub tau: Option<f64>,
    pub tau_list: Vec<f64>,
    pub cfl: CflArg,
    pub co: f64,
    pub nu: f64,
    pub sigma: f64,
    pub final_time: f64,
    pub perturb: f64,
    pub seed: u64,
    pub f_mode: FModeArg,
    pub integrator: IntegratorArg,
    pub out_dir: PathBuf,
    pub format: FormatArg,
    pub f_zero: bool,
}

/// Subcommand-specific defaults.
pub struct Defaults {
    pub n_list: &'static [usize],
    pub cfl: CflArg,
}

/// Standard CFL constant.
pub const CO_STD: f64 = 0.5;
/// CFL-4/3 constant for k = 1.
pub const CO_FOUR_THIRDS: f64 = 1.0;
/// CFL-4/3 constant for k = 2.
pub const CO_FOUR_THIRDS_K2: f64 = 0.04;
pub const DEFAULT_N: usize = 8;
pub const DEFAULT_FINAL_TIME: f64 = 2.0;
/// Step sizes of the explicit/implicit comparison.
pub const COMPARE_TAUS: [usize; 7] = [12, 14, 16, 18, 20, 22, 24];

const KEYS: [&str; 17] = [
    "k", "n", "n_list", "tau", "tau_list", "cfl", "co", "nu", "sigma", "T", "perturb", "seed", "f_mode", "integrator", "out_dir", "format",
    "f_zero",
];

/// Parses `1/16`, `0.0625` or `6.25e-2`.
pub fn parse_tau(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().with_context(|| format!("bad time step {s:?}"))?;
            let b: f64 = b.trim().parse().with_context(|| format!("bad time step {s:?}"))?;
            a / b
        }
        None => s.parse().with_context(|| format!("bad time step {s:?}"))?,
    };
    if !(v > 0.0) || !v.is_finite() {
        bail!("time step must be a positive number, got {s:?}");
    }
    Ok(v)
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
    if items.is_empty() {
        bail!("empty list {s:?}");
    }
    items.into_iter().map(item).collect()
}

fn parse_n(s: &str) -> Result<usize> {
    let n: usize = s.parse().with_context(|| format!("bad mesh size {s:?}"))?;
    if n < 2 {
        bail!("meshes need at least 2 cells per side, got {n}");
    }
    Ok(n)
}

fn parse_enum<E: ValueEnum>(key: &str, s: &str) -> Result<E> {
    E::from_str(s, true).map_err(|_| anyhow!("invalid value {s:?} for {key}"))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("invalid boolean {s:?} for {key}"),
    }
}

/// Reads a flat `key = value` file; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<Flags> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
    parse_config_text(&text).with_context(|| format!("in config file {}", path.display()))
}

pub fn parse_config_text(text: &str) -> Result<Flags> {
    let mut f = Flags::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key=value", i + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let ctx = || format!("line {}: key {key}", i + 1);
        match key {
            "k" => f.k = Some(value.parse().with_context(ctx)?),
            "n" => f.n = Some(value.parse().with_context(ctx)?),
            "n_list" => f.n_list = Some(value.to_string()),
            "tau" => f.tau = Some(value.to_string()),
            "tau_list" => f.tau_list = Some(value.to_string()),
            "cfl" => f.cfl = Some(parse_enum(key, value)?),
            "co" => f.co = Some(value.parse().with_context(ctx)?),
            "nu" => f.nu = Some(value.parse().with_context(ctx)?),
            "sigma" => f.sigma = Some(value.parse().with_context(ctx)?),
            "T" => f.final_time = Some(value.parse().with_context(ctx)?),
            "perturb" => f.perturb = Some(value.parse().with_context(ctx)?),
            "seed" => f.seed = Some(value.parse().with_context(ctx)?),
            "f_mode" => f.f_mode = Some(parse_enum(key, value)?),
            "integrator" => f.integrator = Some(parse_enum(key, value)?),
            "out_dir" => f.out_dir = Some(PathBuf::from(value)),
            "format" => f.format = Some(parse_enum(key, value)?),
            "f_zero" => f.f_zero = parse_bool(key, value)?,
            _ => bail!("line {}: unknown key {key:?}; known keys: {}", i + 1, KEYS.join(", ")),
        }
    }
    Ok(f)
}

impl Flags {
    /// `self` where set, else `base`.
    fn over(self, base: Flags) -> Flags {
        Flags {
            k: self.k.or(base.k),
            n: self.n.or(base.n),
            n_list: self.n_list.or(base.n_list),
            tau: self.tau.or(base.tau),
            tau_list: self.tau_list.or(base.tau_list),
            cfl: self.cfl.or(base.cfl),
            co: self.co.or(base.co),
            nu: self.nu.or(base.nu),
            sigma: self.sigma.or(base.sigma),
            final_time: self.final_time.or(base.final_time),
            perturb: self.perturb.or(base.perturb),
            seed: self.seed.or(base.seed),
            f_mode: self.f_mode.or(base.f_mode),
            integrator: self.integrator.or(base.integrator),
            out_dir: self.out_dir.or(base.out_dir),
            format: self.format.or(base.format),
            f_zero: self.f_zero || base.f_zero,
            config: self.config,
        }
    }

    /// Merges the config file (if any) under the flags and fills defaults.
    pub fn resolve(self, defaults: &Defaults) -> Result<ExperimentConfig> {
        let merged = match &self.config {
            Some(path) => {
                let file = read_config_file(path)?;
                self.over(file)
            }
            None => self,
        };
        let k = merged.k.unwrap_or(1);
        if !(1..=2).contains(&k) {
            bail!("{}", divfree::Error::UnsupportedDegree(k));
        }
        let n = match merged.n {
            Some(n) => parse_n(&n.to_string())?,
            None => DEFAULT_N,
        };
        let n_list = match &merged.n_list {
            Some(s) => parse_list(s, parse_n)?,
            None => defaults.n_list.to_vec(),
        };
        let tau = merged.tau.as_deref().map(parse_tau).transpose()?;
        let tau_list = match &merged.tau_list {
            Some(s) => parse_list(s, parse_tau)?,
            None => COMPARE_TAUS.iter().map(|&m| 1.0 / m as f64).collect(),
        };
        let cfl = merged.cfl.unwrap_or(defaults.cfl);
        let co = merged.co.unwrap_or(match cfl {
            CflArg::Std => CO_STD,
            CflArg::Fourthirds if k == 2 => CO_FOUR_THIRDS_K2,
            _ => CO_FOUR_THIRDS,
        });
        if !(co > 0.0) {
            bail!("CFL constant must be > 0, got {co}");
        }
        let nu = merged.nu.unwrap_or(0.0);
        if !(nu >= 0.0) {
            bail!("viscosity must be >= 0, got {nu}");
        }
        let sigma = merged.sigma.unwrap_or((10 * k * k) as f64);
        if !(sigma > 0.0) {
            bail!("penalty sigma must be > 0, got {sigma}");
        }
        let final_time = merged.final_time.unwrap_or(DEFAULT_FINAL_TIME);
        if !(final_time > 0.0) || !final_time.is_finite() {
            bail!("final time must be > 0, got {final_time}");
        }
        let perturb = merged.perturb.unwrap_or(DEFAULT_PERTURB);
        if !(0.0..=0.3).contains(&perturb) {
            bail!("perturbation must lie in [0, 0.3], got {perturb}");
        }
        Ok(ExperimentConfig {
            k,
            n,
            n_list,
            tau,
            tau_list,
            cfl,
            co,
            nu,
            sigma,
            final_time,
            perturb,
            seed: merged.seed.unwrap_or(DEFAULT_SEED),
            f_mode: merged.f_mode.unwrap_or(FModeArg::Taylor),
            integrator: merged.integrator.unwrap_or(IntegratorArg::Rk2),
            out_dir: merged.out_dir.unwrap_or_else(|| PathBuf::from("results")),
            format: merged.format.unwrap_or(FormatArg::Both),
            f_zero: merged.f_zero,
        })
    }
}

fn enum_name<E: ValueEnum>(e: &E) -> String {
    e.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

impl ExperimentConfig {
    pub fn cfl_form(&self) -> CflForm {
        match self.cfl {
            CflArg::Std => CflForm::Standard,
            CflArg::Fourthirds => CflForm::FourThirds,
            CflArg::Search => CflForm::Search,
        }
    }

    pub fn forcing_mode(&self) -> ForcingMode {
        match self.f_mode {
            FModeArg::Next => ForcingMode::Next,
            FModeArg::Taylor => ForcingMode::Taylor,
        }
    }

    pub fn integrator_kind(&self) -> IntegratorKind {
        match self.integrator {
            IntegratorArg::Rk2 => IntegratorKind::ExplicitRk2,
            IntegratorArg::Cn => IntegratorKind::SemiImplicitCn,
        }
    }

    /// The effective configuration as `key = value` lines, readable by `--config`.
    pub fn echo(&self, command: &str) -> String {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let taus = self.tau_list.iter().map(|&t| format!("{t:?}")).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "# command = {command}");
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "n_list = {}", list(&self.n_list));
        if let Some(t) = self.tau {
            let _ = writeln!(s, "tau = {t:?}");
        }
        let _ = writeln!(s, "tau_list = {taus}");
        let _ = writeln!(s, "cfl = {}", enum_name(&self.cfl));
        let _ = writeln!(s, "co = {:?}", self.co);
        let _ = writeln!(s, "nu = {:?}", self.nu);
        let _ = writeln!(s, "sigma = {:?}", self.sigma);
        let _ = writeln!(s, "T = {:?}", self.final_time);
        let _ = writeln!(s, "perturb = {:?}", self.perturb);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "f_mode = {}", enum_name(&self.f_mode));
        let _ = writeln!(s, "integrator = {}", enum_name(&self.integrator));
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "format = {}", enum_name(&self.format));
        let _ = writeln!(s, "f_zero = {}", self.f_zero);
        s
    }
}
