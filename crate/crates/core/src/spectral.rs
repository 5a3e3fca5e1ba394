//! Hann-windowed STFT analysis and overlap-add synthesis.
//!
//! Scaling convention: the forward transform is unnormalized and the inverse
//! carries `1/fft_size`, so a frame's one-sided spectrum satisfies
//! `|X_0|^2 + 2 * sum_{0<k<N/2} |X_k|^2 + |X_{N/2}|^2 = N * sum_n (w_n x_n)^2`.
//!
//! Framing is causal: `frame_len - hop` zeros are prepended, so frame `j`
//! ends with original samples `[j*hop, (j+1)*hop)` and `J = ceil(len / hop)`.

use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::config::AecConfig;
use crate::error::{AecError, Result};

/// One-sided complex spectrogram, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<Complex64>,
    bins: usize,
    frames: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    /// Length of the time signal this spectrogram was computed from.
    pub signal_len: usize,
}

impl Spectrogram {
    /// A zero spectrogram with the framing of `config`.
    pub fn zeros(frames: usize, signal_len: usize, config: &AecConfig) -> Self {
        let bins = config.bins();
        Self {
            data: vec![Complex64::new(0.0, 0.0); bins * frames],
            bins,
            frames,
            frame_len: config.frame_len,
            hop: config.hop,
            fft_size: config.fft_size,
            signal_len,
        }
    }

    /// A zero spectrogram with the same shape and framing as `self`.
    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); self.data.len()],
            ..*self
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// `Y[i, j]` for bin `i` and frame `j`.
    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    #[inline]
    pub fn set(&mut self, bin: usize, frame: usize, value: Complex64) {
        self.data[frame * self.bins + bin] = value;
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, frame: usize) -> &mut [Complex64] {
        &mut self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.bins == other.bins
            && self.frames == other.frames
            && self.frame_len == other.frame_len
            && self.hop == other.hop
            && self.fft_size == other.fft_size
    }

    fn check_framing(&self, config: &AecConfig) -> Result<()> {
        if self.frame_len != config.frame_len
            || self.hop != config.hop
            || self.fft_size != config.fft_size
            || self.bins != config.bins()
        {
            return Err(AecError::Config(format!(
                "spectrogram framing ({}/{}/{}) does not match config ({}/{}/{})",
                self.frame_len, self.hop, self.fft_size, config.frame_len, config.hop, config.fft_size
            )));
        }
        Ok(())
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
        .collect()
}

/// Number of frames covering a signal of `len` samples.
pub fn frame_count(len: usize, hop: usize) -> usize {
    len.div_ceil(hop)
}

/// Reusable forward/inverse transforms for one framing.
pub struct Stft {
    config: AecConfig,
    window: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl Stft {
    pub fn new(config: &AecConfig) -> Result<Self> {
        config.validate_framing()?;
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Self {
            config: config.clone(),
            window: hann(config.frame_len),
            forward: planner.plan_fft_forward(config.fft_size),
            inverse: planner.plan_fft_inverse(config.fft_size),
        })
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn analyze(&self, signal: &[f64]) -> Spectrogram {
        let cfg = &self.config;
        let frames = frame_count(signal.len(), cfg.hop);
        let mut spec = Spectrogram::zeros(frames, signal.len(), cfg);
        let lead = cfg.frame_len - cfg.hop;
        let mut buf = self.forward.make_input_vec();
        let mut out = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        for j in 0..frames {
            for (k, slot) in buf.iter_mut().enumerate() {
                // padded index j*hop + k maps to original sample j*hop + k - lead
                let t = (j * cfg.hop + k) as isize - lead as isize;
                *slot = if t >= 0 && (t as usize) < signal.len() {
                    signal[t as usize] * self.window[k]
                } else {
                    0.0
                };
            }
            self.forward
                .process_with_scratch(&mut buf, &mut out, &mut scratch)
                .expect("buffer sizes come from the planner");
            spec.frame_mut(j).copy_from_slice(&out);
        }
        spec
    }

    pub fn synthesize(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        spec.check_framing(&self.config)?;
        let cfg = &self.config;
        let lead = cfg.frame_len - cfg.hop;
        let padded_len = spec.frames() * cfg.hop + lead;
        let mut acc = vec![0.0; padded_len];
        let mut wsum = vec![0.0; padded_len];
        let mut input = self.inverse.make_input_vec();
        let mut out = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();
        let scale = 1.0 / cfg.fft_size as f64;
        let last = input.len() - 1;
        for j in 0..spec.frames() {
            input.copy_from_slice(spec.frame(j));
            // c2r needs real DC and Nyquist bins
            input[0].im = 0.0;
            input[last].im = 0.0;
            self.inverse
                .process_with_scratch(&mut input, &mut out, &mut scratch)
                .expect("DC/Nyquist forced real");
            let start = j * cfg.hop;
            for k in 0..cfg.frame_len {
                acc[start + k] += out[k] * scale;
                wsum[start + k] += self.window[k];
            }
        }
        // Window sum is the COLA constant in the interior; only the trailing
        // partial-overlap region falls below it.
        let cola = self.window.iter().sum::<f64>() / cfg.hop as f64;
        let floor = 0.1 * cola;
        Ok((0..spec.signal_len)
            .map(|t| {
                let n = t + lead;
                if n < padded_len {
                    acc[n] / wsum[n].max(floor)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

/// One-shot analysis with a fresh plan.
pub fn analyze(signal: &[f64], config: &AecConfig) -> Result<Spectrogram> {
    Ok(Stft::new(config)?.analyze(signal))
}

/// One-shot synthesis with a fresh plan.
pub fn synthesize(spec: &Spectrogram, config: &AecConfig) -> Result<Vec<f64>> {
    Stft::new(config)?.synthesize(spec)
}

/// Number of trailing samples that are not fully overlapped and therefore
/// excluded from the perfect-reconstruction guarantee.
pub fn tail_len(config: &AecConfig) -> usize {
    config.frame_len - config.hop
}
