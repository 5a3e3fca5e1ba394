//! Synthetic echo scenarios with exact ground truth: exponential-decay room
//! responses, loudspeaker nonlinearity, SER-controlled double-talk, and a
//! generator that builds echo directly from CTF taps in the STFT domain.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::AecConfig;
use crate::error::{AecError, Result};
use crate::expansion::stack_index;
use crate::model::ExtractionFilter;
use crate::pipeline::reference_spectrograms;
use crate::spectral::{Spectrogram, Stft};

/// Memoryless loudspeaker response applied to the far-end signal.
pub trait Loudspeaker {
    fn drive(&self, x: &[f64]) -> Vec<f64>;
}

/// Symmetric clipping at `frac * max|x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardClip {
    pub frac: f64,
}

impl Loudspeaker for HardClip {
    fn drive(&self, x: &[f64]) -> Vec<f64> {
        hard_clip(x, self.frac)
    }
}

/// Any pointwise map `f(x)`.
pub struct Memoryless<F>(pub F);

impl<F: Fn(f64) -> f64> Loudspeaker for Memoryless<F> {
    fn drive(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| (self.0)(v)).collect()
    }
}

pub fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn clip_level(x: &[f64], frac: f64) -> f64 {
    frac * peak(x)
}

/// Clamps `x` to `[-c, c]` with `c = frac * max|x|`. All-zero input stays zero.
pub fn hard_clip(x: &[f64], frac: f64) -> Vec<f64> {
    let c = clip_level(x, frac);
    x.iter().map(|&v| v.clamp(-c, c)).collect()
}

/// Seeded exponential-decay noise room response with unit energy.
///
/// Amplitude envelope `exp(-3 ln(10) t / (T60 fs))`, i.e. energy falls by
/// 60 dB after `T60`.
pub fn synth_rir(t60_ms: f64, fs: u32, length: usize, seed: u64) -> Result<Vec<f64>> {
    if !(t60_ms > 0.0 && t60_ms.is_finite()) {
        return Err(AecError::Config(format!("T60 must be positive, got {t60_ms} ms")));
    }
    if length == 0 {
        return Err(AecError::Config("room response length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = 3.0 * std::f64::consts::LN_10 / (t60_ms * 1e-3 * fs as f64);
    let mut h: Vec<f64> = (0..length)
        .map(|t| {
            let n: f64 = StandardNormal.sample(&mut rng);
            n * (-decay * t as f64).exp()
        })
        .collect();
    let energy = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut h {
        *v /= energy;
    }
    Ok(h)
}

/// Full linear convolution.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        for (k, &hv) in h.iter().enumerate() {
            y[i + k] += xv * hv;
        }
    }
    y
}

pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}

/// Output of [`mix`]: the rescaled near end and the microphone signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixed {
    pub near_end: Vec<f64>,
    pub mixture: Vec<f64>,
    pub gain: f64,
}

/// Scales `near_end` so that `10 log10(P_s / P_v) = ser_db` over the common
/// length, then adds the echo.
pub fn mix(near_end: &[f64], echo: &[f64], ser_db: f64) -> Result<Mixed> {
    let n = near_end.len().min(echo.len());
    let (ps, pv) = (power(&near_end[..n]), power(&echo[..n]));
    if !(ps > 0.0) {
        return Err(AecError::DegenerateInput("near-end signal has zero power".into()));
    }
    if !(pv > 0.0) {
        return Err(AecError::DegenerateInput("echo signal has zero power".into()));
    }
    if !ser_db.is_finite() {
        return Err(AecError::Config(format!("SER must be finite, got {ser_db}")));
    }
    let gain = (pv / ps * 10f64.powf(ser_db / 10.0)).sqrt();
    let near: Vec<f64> = near_end[..n].iter().map(|v| v * gain).collect();
    let mixture = near.iter().zip(&echo[..n]).map(|(s, v)| s + v).collect();
    Ok(Mixed {
        near_end: near,
        mixture,
        gain,
    })
}

/// Measured `10 log10(P_s / P_v)`.
pub fn measured_ser_db(near_end: &[f64], echo: &[f64]) -> f64 {
    10.0 * (power(near_end) / power(echo)).log10()
}

/// Speech-like test signal: AR(2)-colored Gaussian noise under a piecewise
/// syllable envelope with pauses, peak-normalized to `0.9`.
///
/// Pauses keep a floor at -30 dB so windowed metrics never see digital
/// silence.
pub fn speech_like(len: usize, fs: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = fs as f64;
    // resonance around 500 Hz
    let (r, theta) = (0.95, 2.0 * std::f64::consts::PI * 500.0 / fs);
    let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
    let mut target = Vec::with_capacity(len);
    while target.len() < len {
        let seg = (rng.gen_range(0.08..0.35) * fs) as usize;
        let level = if rng.gen_bool(0.7) {
            rng.gen_range(0.3..1.0)
        } else {
            0.03
        };
        target.extend(std::iter::repeat_n(level, seg));
    }
    target.truncate(len);
    let smooth = (-1.0 / (0.01 * fs)).exp();
    let (mut y1, mut y2, mut env) = (0.0, 0.0, target.first().copied().unwrap_or(0.0));
    let mut out: Vec<f64> = target
        .iter()
        .map(|&lvl| {
            let e: f64 = StandardNormal.sample(&mut rng);
            let y = a1 * y1 + a2 * y2 + e;
            y2 = y1;
            y1 = y;
            env = smooth * env + (1.0 - smooth) * lvl;
            y * env
        })
        .collect();
    let p = peak(&out);
    if p > 0.0 {
        for v in &mut out {
            *v *= 0.9 / p;
        }
    }
    out
}

/// Parameters of a time-domain scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub t60_ms: f64,
    /// Room response length in samples; `None` uses the T60 length.
    pub rir_len: Option<usize>,
    pub ser_db: f64,
    pub clip_frac: f64,
    /// Without a near-end talker the mixture is the echo alone.
    pub double_talk: bool,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            duration_s: 10.0,
            sample_rate: crate::config::SAMPLE_RATE,
            t60_ms: 300.0,
            rir_len: None,
            ser_db: 0.0,
            clip_frac: 0.2,
            double_talk: true,
            seed: 42,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(AecError::Config(format!(
                "duration must be positive, got {}",
                self.duration_s
            )));
        }
        if self.sample_rate == 0 {
            return Err(AecError::Config("sample rate must be positive".into()));
        }
        if !(self.t60_ms > 0.0 && self.t60_ms.is_finite()) {
            return Err(AecError::Config(format!("T60 must be positive, got {}", self.t60_ms)));
        }
        if !(self.clip_frac > 0.0 && self.clip_frac <= 1.0) {
            return Err(AecError::Config(format!(
                "clip fraction must lie in (0, 1], got {}",
                self.clip_frac
            )));
        }
        if !self.ser_db.is_finite() {
            return Err(AecError::Config(format!("SER must be finite, got {}", self.ser_db)));
        }
        if self.rir_len == Some(0) {
            return Err(AecError::Config("room response length must be positive".into()));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }

    pub fn rir_samples(&self) -> usize {
        self.rir_len
            .unwrap_or_else(|| (self.t60_ms * 1e-3 * self.sample_rate as f64).round() as usize)
    }
}

/// A time-domain scenario with exact ground-truth decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub far_end: Vec<f64>,
    /// Near end after SER scaling (all zeros in single talk).
    pub near_end: Vec<f64>,
    /// `rir * loudspeaker(far_end)`, truncated to the signal length.
    pub echo: Vec<f64>,
    /// `echo + near_end`.
    pub mixture: Vec<f64>,
    pub rir: Vec<f64>,
    /// Absolute clipping level.
    pub clip_threshold: f64,
    pub ser_db: f64,
    /// `10 log10(P_s / P_v)` of the generated signals (`-inf` in single talk).
    pub measured_ser_db: f64,
}

// independent streams for the three random sources
const FAR_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const NEAR_STREAM: u64 = 0xbf58_476d_1ce4_e5b9;
const RIR_STREAM: u64 = 0x94d0_49bb_1331_11eb;

pub fn generate(params: &ScenarioParams) -> Result<Scenario> {
    generate_with(params, &HardClip { frac: params.clip_frac })
}

/// Builds a scenario with an arbitrary loudspeaker model.
pub fn generate_with(params: &ScenarioParams, speaker: &dyn Loudspeaker) -> Result<Scenario> {
    params.validate()?;
    let n = params.samples();
    let far_end = speech_like(n, params.sample_rate, params.seed ^ FAR_STREAM);
    let rir = synth_rir(
        params.t60_ms,
        params.sample_rate,
        params.rir_samples(),
        params.seed ^ RIR_STREAM,
    )?;
    let driven = speaker.drive(&far_end);
    let mut echo = convolve(&driven, &rir);
    echo.truncate(n);
    let (near_end, mixture) = if params.double_talk {
        let near = speech_like(n, params.sample_rate, params.seed ^ NEAR_STREAM);
        let m = mix(&near, &echo, params.ser_db)?;
        (m.near_end, m.mixture)
    } else {
        (vec![0.0; n], echo.clone())
    };
    let measured = measured_ser_db(&near_end, &echo);
    Ok(Scenario {
        clip_threshold: clip_level(&far_end, params.clip_frac),
        far_end,
        near_end,
        echo,
        mixture,
        rir,
        ser_db: params.ser_db,
        measured_ser_db: measured,
    })
}

/// STFT-domain scenario whose echo follows the CTF model exactly.
#[derive(Debug, Clone)]
pub struct CtfScenario {
    pub far_end: Vec<f64>,
    /// Expanded reference spectrograms, one per channel.
    pub refs: Vec<Spectrogram>,
    pub echo: Spectrogram,
    pub near_end: Spectrogram,
    pub mic: Spectrogram,
    /// `taps[p][bin][l]`: echo path of channel `p`.
    pub taps: Vec<Vec<Vec<Complex64>>>,
}

impl CtfScenario {
    /// Filters that cancel the echo exactly: `w[0] = 1` and
    /// `w[1 + pL + l] = -conj(taps[p][bin][l])`, so `w^H y = S`.
    pub fn ideal_filters(&self) -> Vec<ExtractionFilter> {
        let order = self.taps.len();
        let ctf_len = self.taps[0][0].len();
        (0..self.echo.bins())
            .map(|i| {
                let mut w = ExtractionFilter::identity(order * ctf_len + 1);
                for p in 0..order {
                    for l in 0..ctf_len {
                        w.0[stack_index(p, l, ctf_len)] = -self.taps[p][i][l].conj();
                    }
                }
                w
            })
            .collect()
    }
}

/// Generates echo directly as `sum_p sum_l A[p][i][l] X_p[i][j-l]` from
/// random decaying taps, plus white near-end noise at `ser_db`.
///
/// Channel `p` taps carry an extra gain `0.3^p` so the linear path dominates.
pub fn generate_ctf_exact(config: &AecConfig, duration_s: f64, ser_db: f64, seed: u64) -> Result<CtfScenario> {
    config.validate()?;
    let n = (duration_s * crate::config::SAMPLE_RATE as f64).round() as usize;
    let far_end = speech_like(n, crate::config::SAMPLE_RATE, seed ^ FAR_STREAM);
    let stft = Stft::new(config)?;
    let refs = reference_spectrograms(&stft, &far_end, config.order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ RIR_STREAM);
    let bins = config.bins();
    let taps: Vec<Vec<Vec<Complex64>>> = (0..config.order)
        .map(|p| {
            (0..bins)
                .map(|_| {
                    (0..config.ctf_len)
                        .map(|l| {
                            let re: f64 = StandardNormal.sample(&mut rng);
                            let im: f64 = StandardNormal.sample(&mut rng);
                            Complex64::new(re, im) * 0.3f64.powi(p as i32) * (-0.5 * l as f64).exp()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut echo = refs[0].zeros_like();
    for j in 0..echo.frames() {
        for i in 0..bins {
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, chan) in taps.iter().enumerate() {
                for (l, a) in chan[i].iter().enumerate() {
                    if l <= j {
                        acc += a * refs[p].get(i, j - l);
                    }
                }
            }
            echo.set(i, j, acc);
        }
    }
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ NEAR_STREAM);
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut noise_rng)).collect();
    let mut near_end = stft.analyze(&white);
    let energy = |s: &Spectrogram| -> f64 {
        (0..s.frames())
            .map(|j| s.frame(j).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    };
    let (pv, ps) = (energy(&echo), energy(&near_end));
    if !(pv > 0.0 && ps > 0.0) {
        return Err(AecError::DegenerateInput("zero-power CTF scenario".into()));
    }
    let gain = (pv / ps * 10f64.powf(ser_db / 10.0)).sqrt();
    let mut mic = echo.clone();
    for j in 0..near_end.frames() {
        let (s, m) = (near_end.frame_mut(j), mic.frame_mut(j));
        for (sv, mv) in s.iter_mut().zip(m.iter_mut()) {
            *sv *= gain;
            *mv += *sv;
        }
    }
    Ok(CtfScenario {
        far_end,
        refs,
        echo,
        near_end,
        mic,
        taps,
    })
}
