//! Semi-blind nonlinear acoustic echo cancellation in the STFT domain.
//!
//! The microphone bin and `P` odd-power expansions of the far-end reference,
//! each delayed over `L` frames (convolutive transfer function), form a
//! stacked observation per bin. A near-end extraction filter `w` with
//! `w[0] = 1` is estimated online from a recursively weighted covariance,
//! using either iterative projection ([`solver_ip`]) or the inverse-free
//! element-wise source steering update ([`solver_eiss`]).

pub mod config;
pub mod error;
pub mod expansion;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod simulate;
pub mod solver_eiss;
pub mod solver_ip;
pub mod spectral;

pub use config::{AecConfig, IpMethod, SolverKind, SAMPLE_RATE};
pub use error::{AecError, Result};
pub use expansion::{expand_reference, stack_observation, ExpandedReference, StackedObservation};
pub use model::{ExtractionFilter, WeightedCovariance};
pub use pipeline::{replay_on_echo, run, AecState, FilterTrace, RunOutput};
pub use simulate::{Scenario, ScenarioParams};
pub use spectral::{Spectrogram, Stft};

pub use num_complex::Complex64;
