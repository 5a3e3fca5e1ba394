//! Odd-power expansion of the far-end reference and CTF stacking of the
//! per-bin observation vector.

use num_complex::Complex64;

use crate::error::{AecError, Result};
use crate::spectral::Spectrogram;

/// `P` time-domain channels, channel `p` holding `x(t)^(2p+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedReference {
    channels: Vec<Vec<f64>>,
}

impl ExpandedReference {
    pub fn order(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, p: usize) -> &[f64] {
        &self.channels[p]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }
}

/// Expands `x` into the odd powers `x, x^3, ..., x^(2P-1)`.
pub fn expand_reference(x: &[f64], order: usize) -> Result<ExpandedReference> {
    if order == 0 {
        return Err(AecError::Config("expansion order must be at least 1".into()));
    }
    let mut channels = Vec::with_capacity(order);
    channels.push(x.to_vec());
    for p in 1..order {
        // x^(2p+1) = x^(2p-1) * x^2
        let prev: &Vec<f64> = &channels[p - 1];
        let next = prev.iter().zip(x).map(|(&a, &v)| a * v * v).collect();
        channels.push(next);
    }
    Ok(ExpandedReference { channels })
}

/// Stacked observation `[Y, X_0[j], .., X_0[j-L+1], .., X_{P-1}[j-L+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedObservation(pub Vec<Complex64>);

impl StackedObservation {
    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Position of tap `l` of expansion channel `p` inside a stacked vector.
#[inline]
pub fn stack_index(p: usize, l: usize, ctf_len: usize) -> usize {
    1 + p * ctf_len + l
}

/// Checks that the reference spectrograms line up with the microphone one.
pub fn check_shapes(mic: &Spectrogram, refs: &[Spectrogram]) -> Result<()> {
    if refs.is_empty() {
        return Err(AecError::Structural("no reference channels".into()));
    }
    for (p, r) in refs.iter().enumerate() {
        if !mic.same_shape(r) {
            return Err(AecError::Structural(format!(
                "reference channel {p} is {}x{}, microphone is {}x{}",
                r.bins(),
                r.frames(),
                mic.bins(),
                mic.frames()
            )));
        }
    }
    Ok(())
}

/// Writes the stacked observation for bin `i`, frame `j` into `out`.
///
/// Shapes are not re-checked; callers validate once with [`check_shapes`].
#[inline]
pub fn stack_into(
    out: &mut [Complex64],
    mic: &Spectrogram,
    refs: &[Spectrogram],
    bin: usize,
    frame: usize,
    ctf_len: usize,
) {
    out[0] = mic.get(bin, frame);
    for (p, r) in refs.iter().enumerate() {
        for l in 0..ctf_len {
            out[stack_index(p, l, ctf_len)] = if l <= frame {
                r.get(bin, frame - l)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }
}

pub fn stack_observation(
    mic: &Spectrogram,
    refs: &[Spectrogram],
    bin: usize,
    frame: usize,
    ctf_len: usize,
) -> Result<StackedObservation> {
    check_shapes(mic, refs)?;
    if bin >= mic.bins() || frame >= mic.frames() {
        return Err(AecError::Structural(format!(
            "(bin {bin}, frame {frame}) outside {}x{} spectrogram",
            mic.bins(),
            mic.frames()
        )));
    }
    if ctf_len == 0 {
        return Err(AecError::Config("CTF length must be at least 1".into()));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); refs.len() * ctf_len + 1];
    stack_into(&mut v, mic, refs, bin, frame, ctf_len);
    Ok(StackedObservation(v))
}
