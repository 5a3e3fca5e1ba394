//! ERLE / tERLE series and the IP-vs-EISS runtime benchmark.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{IpMethod, SolverKind};
use crate::model::{weight, ExtractionFilter, WeightedCovariance};
use crate::solver_eiss::{self, SweepMode};
use crate::solver_ip::{normalize_in_place, IpWorkspace};

/// Upper clamp of every dB value.
pub const CAP_DB: f64 = 80.0;
/// Default metric window.
pub const WINDOW_MS: f64 = 128.0;

/// Per-window `10 log10(sum num^2 / sum den^2)` over non-overlapping windows.
///
/// A window whose denominator energy is below `1e-12` of the mean window
/// energy of `num` is reported as [`CAP_DB`]; if the numerator is below that
/// floor too there is nothing to cancel and the window reads 0 dB.
fn ratio_series(num: &[f64], den: &[f64], window_ms: f64, fs: u32) -> Vec<f64> {
    let n = num.len().min(den.len());
    if n == 0 {
        return Vec::new();
    }
    let win = ((window_ms * 1e-3 * fs as f64).round() as usize).max(1);
    let windows = n.div_ceil(win);
    let total: f64 = num[..n].iter().map(|v| v * v).sum();
    let floor = 1e-12 * total / windows as f64;
    (0..windows)
        .map(|k| {
            let range = k * win..((k + 1) * win).min(n);
            let a: f64 = num[range.clone()].iter().map(|v| v * v).sum();
            let b: f64 = den[range].iter().map(|v| v * v).sum();
            if b < floor || b == 0.0 {
                if a <= floor {
                    0.0
                } else {
                    CAP_DB
                }
            } else {
                (10.0 * (a / b).log10()).clamp(-CAP_DB, CAP_DB)
            }
        })
        .collect()
}

/// Echo return loss enhancement of `output` relative to `mic`, valid in
/// far-end single talk.
pub fn erle(mic: &[f64], output: &[f64], window_ms: f64, fs: u32) -> Vec<f64> {
    ratio_series(mic, output, window_ms, fs)
}

/// True ERLE: ground-truth echo against the echo left after applying the
/// recorded filters to the echo alone.
pub fn terle(echo: &[f64], residual_echo: &[f64], window_ms: f64, fs: u32) -> Vec<f64> {
    ratio_series(echo, residual_echo, window_ms, fs)
}

/// Mean over the final `fraction` of a series (at least one value).
pub fn steady_state_mean(series: &[f64], fraction: f64) -> f64 {
    if series.is_empty() {
        return f64::NAN;
    }
    let k = ((series.len() as f64 * fraction).ceil() as usize).clamp(1, series.len());
    let tail = &series[series.len() - k..];
    tail.iter().sum::<f64>() / k as f64
}

/// One benchmark measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: SolverKind,
    #[serde(rename = "P")]
    pub order: usize,
    #[serde(rename = "L")]
    pub ctf_len: usize,
    pub frames: usize,
    pub median_us_per_frame: f64,
    pub trials: usize,
}

impl BenchRow {
    /// Stacked dimension `P*L + 1`.
    pub fn dim(&self) -> usize {
        self.order * self.ctf_len + 1
    }
}

pub const BENCH_CSV_HEADER: &str = "solver,P,L,frames,median_us_per_frame,trials";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{}",
            self.solver, self.order, self.ctf_len, self.frames, self.median_us_per_frame, self.trials
        )
    }
}

/// Synthetic single-bin observations with heavy-tailed frame energies.
fn bench_observations(dim: usize, frames: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..frames)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            let level = g.exp();
            (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * level
                })
                .collect()
        })
        .collect()
}

/// Times one run of `frames` covariance-plus-solver updates on one bin and
/// returns microseconds per frame.
fn time_run(solver: SolverKind, ip_method: IpMethod, obs: &[Vec<Complex64>], alpha: f64, beta: f64) -> f64 {
    let dim = obs[0].len();
    let mut v = WeightedCovariance::scaled_identity(dim, 1e-3);
    let mut w = ExtractionFilter::identity(dim);
    let mut ws = IpWorkspace::with_method(dim, ip_method);
    let mut backup = Vec::with_capacity(dim);
    let start = Instant::now();
    for y in obs {
        let r = w.apply(y).norm();
        let phi = weight(r, beta, 1e-6);
        v.update(y, phi, alpha).expect("finite benchmark data");
        match solver {
            SolverKind::Ip => {
                backup.clear();
                backup.extend_from_slice(&w.0);
                if ws.solve_e1_regularized(&v, &mut w.0).is_err() || normalize_in_place(&mut w.0).is_err() {
                    w.0.copy_from_slice(&backup);
                }
            }
            SolverKind::Eiss => {
                let _ = solver_eiss::update_in_place(&mut w.0, &v, 1, SweepMode::Sequential, &mut backup);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(&w);
    elapsed * 1e6 / obs.len() as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Per-frame cost of each (solver, P, L) on a single bin, median over
/// `trials`. Runs on the calling thread only.
pub fn bench(order_values: &[usize], ctf_values: &[usize], frames: usize, trials: usize) -> Vec<BenchRow> {
    bench_with(order_values, ctf_values, frames, trials, IpMethod::Inverse)
}

pub fn bench_with(
    order_values: &[usize],
    ctf_values: &[usize],
    frames: usize,
    trials: usize,
    ip_method: IpMethod,
) -> Vec<BenchRow> {
    let frames = frames.max(1);
    let trials = trials.max(1);
    let mut rows = Vec::new();
    for solver in [SolverKind::Ip, SolverKind::Eiss] {
        for &order in order_values {
            for &ctf_len in ctf_values {
                let dim = order * ctf_len + 1;
                let obs = bench_observations(dim, frames, (order * 1000 + ctf_len) as u64);
                // warm-up
                time_run(solver, ip_method, &obs[..obs.len().min(50)], 0.992, 0.4);
                let times = (0..trials)
                    .map(|_| time_run(solver, ip_method, &obs, 0.992, 0.4))
                    .collect();
                rows.push(BenchRow {
                    solver,
                    order,
                    ctf_len,
                    frames,
                    median_us_per_frame: median(times),
                    trials,
                });
            }
        }
    }
    rows
}

/// Least-squares slope of `log(cost)` against `log(P*L + 1)` for one solver.
pub fn loglog_slope(rows: &[BenchRow], solver: SolverKind) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.solver == solver && r.median_us_per_frame > 0.0)
        .map(|r| ((r.dim() as f64).ln(), r.median_us_per_frame.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Summary of a benchmark grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchVerdict {
    pub ip_slope: Option<f64>,
    pub eiss_slope: Option<f64>,
    pub ip_slope_ok: bool,
    pub eiss_slope_ok: bool,
    /// EISS strictly faster at every grid point with `P*L + 1 >= 7`.
    pub eiss_faster: bool,
    /// Grid points (P, L) where EISS was not faster.
    pub slower_points: Vec<(usize, usize)>,
    pub low_confidence: bool,
}

pub const IP_SLOPE_RANGE: (f64, f64) = (2.5, 3.5);
pub const EISS_SLOPE_RANGE: (f64, f64) = (1.5, 2.5);

pub fn verdict(rows: &[BenchRow]) -> BenchVerdict {
    let ip_slope = loglog_slope(rows, SolverKind::Ip);
    let eiss_slope = loglog_slope(rows, SolverKind::Eiss);
    let within = |s: Option<f64>, (lo, hi): (f64, f64)| s.is_some_and(|s| (lo..=hi).contains(&s));
    let mut slower_points = Vec::new();
    for ip in rows.iter().filter(|r| r.solver == SolverKind::Ip && r.dim() >= 7) {
        let eiss = rows
            .iter()
            .find(|r| r.solver == SolverKind::Eiss && r.order == ip.order && r.ctf_len == ip.ctf_len);
        if eiss.is_none_or(|e| e.median_us_per_frame >= ip.median_us_per_frame) {
            slower_points.push((ip.order, ip.ctf_len));
        }
    }
    BenchVerdict {
        ip_slope_ok: within(ip_slope, IP_SLOPE_RANGE),
        eiss_slope_ok: within(eiss_slope, EISS_SLOPE_RANGE),
        ip_slope,
        eiss_slope,
        eiss_faster: slower_points.is_empty(),
        slower_points,
        low_confidence: rows.iter().any(|r| r.trials < 2),
    }
}
