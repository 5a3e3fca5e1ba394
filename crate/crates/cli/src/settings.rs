//! Layered configuration: built-in defaults, then a TOML file, then flags.

use std::fs;
use std::path::Path;

use aec_core::{AecConfig, IpMethod, ScenarioParams, SolverKind};
use clap::Args;
use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};

/// Canceller flags; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct AecFlags {
    /// TOML file with canceller parameters
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long)]
    pub solver: Option<SolverKind>,
    #[arg(long)]
    pub ip_method: Option<IpMethod>,
    /// Expansion order P
    #[arg(short = 'P', long)]
    pub order: Option<usize>,
    /// CTF length L in frames
    #[arg(short = 'L', long)]
    pub ctf_len: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub frame_len: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub fft_size: Option<usize>,
    /// EISS sweeps per frame
    #[arg(long)]
    pub sweeps: Option<usize>,
}

pub fn load_toml<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

impl AecFlags {
    pub fn resolve(&self) -> CliResult<AecConfig> {
        let mut c: AecConfig = load_toml(self.config.as_deref())?;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(solver, ip_method, order, ctf_len, alpha, beta, frame_len, hop, fft_size, sweeps);
        c.validate()?;
        Ok(c)
    }
}

/// Scenario flags for `simulate`.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioFlags {
    /// TOML file with scenario parameters
    #[arg(long)]
    pub scenario: Option<std::path::PathBuf>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub t60_ms: Option<f64>,
    #[arg(long)]
    pub rir_len: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub ser_db: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Echo only, no near-end talker
    #[arg(long)]
    pub single_talk: bool,
}

impl ScenarioFlags {
    pub fn resolve(&self) -> CliResult<ScenarioParams> {
        let mut p: ScenarioParams = load_toml(self.scenario.as_deref())?;
        if let Some(v) = self.duration {
            p.duration_s = v;
        }
        if let Some(v) = self.t60_ms {
            p.t60_ms = v;
        }
        if self.rir_len.is_some() {
            p.rir_len = self.rir_len;
        }
        if let Some(v) = self.ser_db {
            p.ser_db = v;
        }
        if let Some(v) = self.clip {
            p.clip_frac = v;
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        if self.single_talk {
            p.double_talk = false;
        }
        p.validate()?;
        Ok(p)
    }
}
