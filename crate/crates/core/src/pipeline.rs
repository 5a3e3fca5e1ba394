//! Streaming frame loop: stack, weight, update the covariance, run the
//! per-bin solver and extract the near-end estimate.

use std::io::{Read, Write};

use num_complex::{Complex32, Complex64};

use crate::config::{AecConfig, SolverKind};
use crate::error::{AecError, Result};
use crate::expansion::{check_shapes, expand_reference, stack_into};
use crate::model::{weight, ExtractionFilter, WeightedCovariance};
use crate::solver_eiss::{self, SweepMode};
use crate::solver_ip::{normalize_in_place, IpWorkspace};
use crate::spectral::{Spectrogram, Stft};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Per-frame, per-bin snapshots of the normalized extraction filters.
///
/// Stored as single-precision complex values, the same precision as the
/// on-disk trace format, so in-memory and file replays agree exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrace {
    bins: usize,
    dim: usize,
    frames: usize,
    data: Vec<Complex32>,
}

pub const TRACE_MAGIC: [u8; 4] = *b"AECT";
pub const TRACE_VERSION: u32 = 1;

impl FilterTrace {
    pub fn new(bins: usize, dim: usize) -> Self {
        Self {
            bins,
            dim,
            frames: 0,
            data: Vec::new(),
        }
    }

    /// A trace that holds `w = e_1` for every bin and frame (no cancellation).
    pub fn identity(bins: usize, dim: usize, frames: usize) -> Self {
        let mut t = Self::new(bins, dim);
        let e1 = ExtractionFilter::identity(dim);
        let snapshot: Vec<ExtractionFilter> = vec![e1; bins];
        for _ in 0..frames {
            t.push(&snapshot);
        }
        t
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    fn push(&mut self, filters: &[ExtractionFilter]) {
        debug_assert_eq!(filters.len(), self.bins);
        for w in filters {
            self.data
                .extend(w.as_slice().iter().map(|z| Complex32::new(z.re as f32, z.im as f32)));
        }
        self.frames += 1;
    }

    /// Filter of bin `bin` at frame `frame`, widened back to double precision.
    pub fn filter(&self, frame: usize, bin: usize) -> ExtractionFilter {
        let start = (frame * self.bins + bin) * self.dim;
        ExtractionFilter(
            self.data[start..start + self.dim]
                .iter()
                .map(|z| Complex64::new(z.re as f64, z.im as f64))
                .collect(),
        )
    }

    /// Little-endian binary encoding: magic `AECT`, `u32` version, `u32`
    /// bins, `u32` frames, `u32` filter length, then frame-major
    /// `(f32 re, f32 im)` pairs.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&TRACE_MAGIC)?;
        for v in [TRACE_VERSION, self.bins as u32, self.frames as u32, self.dim as u32] {
            out.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for z in &self.data {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 20];
        input
            .read_exact(&mut header)
            .map_err(|e| AecError::Structural(format!("trace header: {e}")))?;
        if header[..4] != TRACE_MAGIC {
            return Err(AecError::Structural("trace: bad magic".into()));
        }
        let word = |k: usize| u32::from_le_bytes(header[4 + 4 * k..8 + 4 * k].try_into().unwrap());
        if word(0) != TRACE_VERSION {
            return Err(AecError::Structural(format!("trace: unsupported version {}", word(0))));
        }
        let (bins, frames, dim) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let count = bins
            .checked_mul(frames)
            .and_then(|x| x.checked_mul(dim))
            .ok_or_else(|| AecError::Structural("trace: dimensions overflow".into()))?;
        let mut raw = Vec::new();
        input
            .read_to_end(&mut raw)
            .map_err(|e| AecError::Structural(format!("trace body: {e}")))?;
        if raw.len() != count * 8 {
            return Err(AecError::Structural(format!(
                "trace: expected {} payload bytes, found {}",
                count * 8,
                raw.len()
            )));
        }
        let data = raw
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes(c[..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self {
            bins,
            dim,
            frames,
            data,
        })
    }
}

/// Streaming state of one canceller instance.
pub struct AecState {
    config: AecConfig,
    covariances: Vec<WeightedCovariance>,
    filters: Vec<ExtractionFilter>,
    /// Reference spectra of the last `L` frames, newest first, per channel.
    history: Vec<Vec<Vec<Complex64>>>,
    frames_processed: usize,
    trace: Option<FilterTrace>,
    sweep_mode: SweepMode,
    // scratch
    stacked: Vec<Vec<Complex64>>,
    ip: IpWorkspace,
    backup: Vec<Complex64>,
    degraded: usize,
}

impl AecState {
    pub fn new(config: &AecConfig, record_trace: bool) -> Result<Self> {
        config.validate()?;
        let (bins, dim) = (config.bins(), config.dim());
        Ok(Self {
            config: config.clone(),
            covariances: vec![WeightedCovariance::scaled_identity(dim, config.v_init_scale); bins],
            filters: vec![ExtractionFilter::identity(dim); bins],
            history: vec![vec![vec![ZERO; bins]; config.ctf_len]; config.order],
            frames_processed: 0,
            trace: record_trace.then(|| FilterTrace::new(bins, dim)),
            sweep_mode: SweepMode::Sequential,
            stacked: vec![vec![ZERO; dim]; bins],
            ip: IpWorkspace::with_method(dim, config.ip_method),
            backup: Vec::with_capacity(dim),
            degraded: 0,
        })
    }

    /// Switches the EISS coefficient schedule (A/B experiments only).
    pub fn set_sweep_mode(&mut self, mode: SweepMode) {
        self.sweep_mode = mode;
    }

    pub fn config(&self) -> &AecConfig {
        &self.config
    }

    pub fn filters(&self) -> &[ExtractionFilter] {
        &self.filters
    }

    pub fn covariances(&self) -> &[WeightedCovariance] {
        &self.covariances
    }

    pub fn frames_processed(&self) -> usize {
        self.frames_processed
    }

    /// Bin-frame updates that fell back to the previous filter.
    pub fn degraded_updates(&self) -> usize {
        self.degraded
    }

    pub fn trace(&self) -> Option<&FilterTrace> {
        self.trace.as_ref()
    }

    pub fn take_trace(&mut self) -> Option<FilterTrace> {
        self.trace.take()
    }

    /// Processes one frame.
    ///
    /// `mic` holds `Y[i]` for every bin, `refs[p]` the spectrum of expansion
    /// channel `p` for this frame. Returns `S_hat[i] = w_i^H y_i` computed
    /// with the filters updated on this frame.
    pub fn process_frame(&mut self, mic: &[Complex64], refs: &[&[Complex64]]) -> Result<Vec<Complex64>> {
        let (bins, order, ctf_len) = (self.config.bins(), self.config.order, self.config.ctf_len);
        if mic.len() != bins || refs.len() != order || refs.iter().any(|r| r.len() != bins) {
            return Err(AecError::Structural(format!(
                "frame expects {bins} bins and {order} reference channels"
            )));
        }
        // (1) shift reference history and stack
        for (p, chan) in self.history.iter_mut().enumerate() {
            chan.rotate_right(1);
            chan[0].copy_from_slice(refs[p]);
        }
        for (i, y) in self.stacked.iter_mut().enumerate() {
            y[0] = mic[i];
            for (p, chan) in self.history.iter().enumerate() {
                for (l, past) in chan.iter().enumerate() {
                    y[1 + p * ctf_len + l] = past[i];
                }
            }
        }
        // (2) auxiliary norm from previous-frame filters, (3) shared weight
        let r = self
            .filters
            .iter()
            .zip(&self.stacked)
            .map(|(w, y)| w.apply(y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let phi = weight(r, self.config.beta, self.config.r_floor);
        // (4)-(6) per-bin covariance, solver, extraction
        let mut out = Vec::with_capacity(bins);
        for i in 0..bins {
            let y = &self.stacked[i];
            self.covariances[i].update(y, phi, self.config.alpha)?;
            let ok = match self.config.solver {
                SolverKind::Ip => ip_step(
                    &mut self.ip,
                    &self.covariances[i],
                    &mut self.filters[i].0,
                    &mut self.backup,
                ),
                SolverKind::Eiss => solver_eiss::update_in_place(
                    &mut self.filters[i].0,
                    &self.covariances[i],
                    self.config.sweeps,
                    self.sweep_mode,
                    &mut self.backup,
                )
                .is_ok(),
            };
            if !ok {
                self.degraded += 1;
            }
            out.push(self.filters[i].apply(y));
        }
        if let Some(trace) = self.trace.as_mut() {
            trace.push(&self.filters);
        }
        self.frames_processed += 1;
        Ok(out)
    }
}

/// IP solve plus normalization; on failure the previous filter is kept.
fn ip_step(ws: &mut IpWorkspace, v: &WeightedCovariance, w: &mut [Complex64], backup: &mut Vec<Complex64>) -> bool {
    backup.clear();
    backup.extend_from_slice(w);
    let ok = ws.solve_e1_regularized(v, w).is_ok() && normalize_in_place(w).is_ok();
    if !ok {
        w.copy_from_slice(backup);
    }
    ok
}

/// Result of a full offline run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub near_end: Vec<f64>,
    pub trace: Option<FilterTrace>,
    pub frames: usize,
    pub degraded_updates: usize,
}

/// Runs the canceller on already-analyzed spectrograms and returns the
/// near-end spectrogram estimate.
pub fn run_spectral(
    mic: &Spectrogram,
    refs: &[Spectrogram],
    config: &AecConfig,
    record_trace: bool,
) -> Result<(Spectrogram, AecState)> {
    config.validate()?;
    check_shapes(mic, refs)?;
    if refs.len() != config.order || mic.bins() != config.bins() {
        return Err(AecError::Structural(format!(
            "{} reference channels and {} bins, config expects {} and {}",
            refs.len(),
            mic.bins(),
            config.order,
            config.bins()
        )));
    }
    let mut state = AecState::new(config, record_trace)?;
    let mut out = mic.zeros_like();
    for j in 0..mic.frames() {
        let frame_refs: Vec<&[Complex64]> = refs.iter().map(|r| r.frame(j)).collect();
        let s = state.process_frame(mic.frame(j), &frame_refs)?;
        out.frame_mut(j).copy_from_slice(&s);
    }
    Ok((out, state))
}

/// Zero-pads the shorter of two signals to the longer length.
fn equalize(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len().max(b.len());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.resize(n, 0.0);
    b.resize(n, 0.0);
    (a, b)
}

/// Reference spectrograms of the odd-power expansion of `far_end`.
pub fn reference_spectrograms(stft: &Stft, far_end: &[f64], order: usize) -> Result<Vec<Spectrogram>> {
    Ok(expand_reference(far_end, order)?
        .channels()
        .iter()
        .map(|c| stft.analyze(c))
        .collect())
}

/// Expand, analyze, process every frame, synthesize.
///
/// The output has the length of the longer input.
pub fn run(mic: &[f64], far_end: &[f64], config: &AecConfig, record_trace: bool) -> Result<RunOutput> {
    config.validate()?;
    let (mic, far_end) = equalize(mic, far_end);
    let stft = Stft::new(config)?;
    let mic_spec = stft.analyze(&mic);
    let refs = reference_spectrograms(&stft, &far_end, config.order)?;
    let (est, mut state) = run_spectral(&mic_spec, &refs, config, record_trace)?;
    Ok(RunOutput {
        near_end: stft.synthesize(&est)?,
        trace: state.take_trace(),
        frames: mic_spec.frames(),
        degraded_updates: state.degraded_updates(),
    })
}

/// Applies recorded filters to a stacked echo-only observation without
/// adapting, in the STFT domain.
pub fn replay_spectral(
    trace: &FilterTrace,
    echo: &Spectrogram,
    refs: &[Spectrogram],
    ctf_len: usize,
) -> Result<Spectrogram> {
    check_shapes(echo, refs)?;
    let dim = refs.len() * ctf_len + 1;
    if trace.bins() != echo.bins() || trace.frames() != echo.frames() || trace.dim() != dim {
        return Err(AecError::Structural(format!(
            "trace is {} bins x {} frames x {}, signal needs {} x {} x {}",
            trace.bins(),
            trace.frames(),
            trace.dim(),
            echo.bins(),
            echo.frames(),
            dim
        )));
    }
    let mut out = echo.zeros_like();
    let mut y = vec![ZERO; dim];
    for j in 0..echo.frames() {
        for i in 0..echo.bins() {
            stack_into(&mut y, echo, refs, i, j, ctf_len);
            out.set(i, j, trace.filter(j, i).apply(&y));
        }
    }
    Ok(out)
}

/// Residual echo: the recorded filters applied to the echo component alone.
pub fn replay_on_echo(trace: &FilterTrace, echo_only: &[f64], far_end: &[f64], config: &AecConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if trace.dim() != config.dim() || trace.bins() != config.bins() {
        return Err(AecError::Structural(format!(
            "trace filter length {} / bins {} vs config {} / {}",
            trace.dim(),
            trace.bins(),
            config.dim(),
            config.bins()
        )));
    }
    let (echo, far_end) = equalize(echo_only, far_end);
    let stft = Stft::new(config)?;
    let echo_spec = stft.analyze(&echo);
    let refs = reference_spectrograms(&stft, &far_end, config.order)?;
    let residual = replay_spectral(trace, &echo_spec, &refs, config.ctf_len)?;
    stft.synthesize(&residual)
}
