use serde::{Deserialize, Serialize};

use crate::error::{AecError, Result};

/// Which per-bin update rule drives the extraction filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Iterative projection: Hermitian solve against the weighted covariance.
    Ip,
    /// Element-wise iterative source steering: inverse-free coordinate sweep.
    Eiss,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Ip => "ip",
            SolverKind::Eiss => "eiss",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = AecError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ip" => Ok(SolverKind::Ip),
            "eiss" => Ok(SolverKind::Eiss),
            other => Err(AecError::Config(format!("unknown solver '{other}'"))),
        }
    }
}

/// How the IP update obtains `V^{-1} e_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IpMethod {
    /// Invert `V` every frame and take its first column.
    #[default]
    Inverse,
    /// Back-substitute `e_1` against the factorization only.
    Solve,
}

impl std::str::FromStr for IpMethod {
    type Err = AecError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inverse" => Ok(IpMethod::Inverse),
            "solve" => Ok(IpMethod::Solve),
            other => Err(AecError::Config(format!("unknown IP method '{other}'"))),
        }
    }
}

/// Full parameter set of the canceller.
///
/// Defaults: 1024-sample Hann frames with 75% overlap at 16 kHz, expansion
/// order 3, CTF length 5, forgetting factor 0.992, shape parameter 0.4,
/// covariance initialized to `1e-3 * I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AecConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    /// Nonlinear expansion order `P` (number of odd-power channels).
    pub order: usize,
    /// CTF filter length `L` in frames.
    pub ctf_len: usize,
    /// Forgetting factor of the covariance recursion.
    pub alpha: f64,
    /// Shape parameter of the generalized Gaussian source prior.
    pub beta: f64,
    /// Lower bound on the auxiliary norm before the weight `r^(beta-2)` is taken.
    pub r_floor: f64,
    /// Initial covariance is `v_init_scale * I`.
    pub v_init_scale: f64,
    pub solver: SolverKind,
    pub ip_method: IpMethod,
    /// EISS sweeps per frame. The online pipeline uses one.
    pub sweeps: usize,
}

pub const SAMPLE_RATE: u32 = 16_000;

impl Default for AecConfig {
    fn default() -> Self {
        Self {
            frame_len: 1024,
            hop: 256,
            fft_size: 1024,
            order: 3,
            ctf_len: 5,
            alpha: 0.992,
            beta: 0.4,
            r_floor: 1e-6,
            v_init_scale: 1e-3,
            solver: SolverKind::Eiss,
            ip_method: IpMethod::Inverse,
            sweeps: 1,
        }
    }
}

impl AecConfig {
    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    /// Number of one-sided frequency bins, `fft_size / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Length of the stacked observation and of the extraction filter, `P*L + 1`.
    pub fn dim(&self) -> usize {
        self.order * self.ctf_len + 1
    }

    /// Checks only the framing parameters; used by the STFT.
    pub fn validate_framing(&self) -> Result<()> {
        if self.frame_len == 0 || self.hop == 0 {
            return Err(AecError::Config("frame_len and hop must be positive".into()));
        }
        if self.frame_len != self.fft_size {
            return Err(AecError::Config(format!(
                "frame_len ({}) must equal fft_size ({})",
                self.frame_len, self.fft_size
            )));
        }
        if self.fft_size % 2 != 0 {
            return Err(AecError::Config(format!("fft_size ({}) must be even", self.fft_size)));
        }
        if self.hop > self.frame_len || self.frame_len % self.hop != 0 {
            return Err(AecError::Config(format!(
                "hop ({}) must divide frame_len ({})",
                self.hop, self.frame_len
            )));
        }
        if self.frame_len / self.hop < 2 {
            // Hann frames without overlap leave zeros in the window sum.
            return Err(AecError::Config("frames must overlap (hop < frame_len)".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_framing()?;
        if self.order == 0 {
            return Err(AecError::Config("expansion order must be at least 1".into()));
        }
        if self.ctf_len == 0 {
            return Err(AecError::Config("CTF length must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AecError::Config(format!("alpha ({}) must lie in (0, 1)", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(AecError::Config(format!("beta ({}) must be positive", self.beta)));
        }
        if !(self.r_floor > 0.0 && self.r_floor.is_finite()) {
            return Err(AecError::Config(format!("r_floor ({}) must be positive", self.r_floor)));
        }
        if !(self.v_init_scale > 0.0 && self.v_init_scale.is_finite()) {
            return Err(AecError::Config(format!(
                "v_init_scale ({}) must be positive",
                self.v_init_scale
            )));
        }
        if self.sweeps == 0 {
            return Err(AecError::Config("sweeps must be at least 1".into()));
        }
        Ok(())
    }
}
