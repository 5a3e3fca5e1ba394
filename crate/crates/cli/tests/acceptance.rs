//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command as Proc;
use std::time::{Duration, Instant};

use aec_cli::commands::{self, BenchArgs, EvaluateArgs, ProcessArgs, SimulateArgs};
use aec_cli::settings::{AecFlags, ScenarioFlags};
use aec_core::model::aux_value;
use aec_core::pipeline::{replay_spectral, run_spectral};
use aec_core::simulate::generate_ctf_exact;
use aec_core::solver_eiss::{eiss_apply, eiss_coeff, update_in_place, SweepMode};
use aec_core::solver_ip::{ip_update, normalize};
use aec_core::spectral::{analyze, synthesize, tail_len};
use aec_core::{AecConfig, Complex64, ExtractionFilter, IpMethod, SolverKind, Spectrogram, WeightedCovariance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> WeightedCovariance {
    let b: Vec<Complex64> = (0..n * n)
        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut data = vec![c(0.0, 0.0); n * n];
    for r in 0..n {
        for col in 0..n {
            data[r * n + col] = (0..n).map(|k| b[r * n + k] * b[col * n + k].conj()).sum();
        }
        data[r * n + r] += 0.1;
    }
    WeightedCovariance::from_row_major(n, data).unwrap()
}

fn stft_reconstruction() -> Outcome {
    let cfg = AecConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tail = tail_len(&cfg);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..16_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = synthesize(&analyze(&x, &cfg).unwrap(), &cfg).unwrap();
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = (tail..x.len() - tail).map(|t| (y[t] - x[t]).abs()).fold(0.0, f64::max);
        worst = worst.max(err / peak);
    }
    outcome(
        worst <= 1e-6,
        format!("worst interior relative error {worst:.2e} (limit 1e-6)"),
    )
}

fn eiss_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut grid_failures = 0;
    let mut increases = 0;
    let mut probes = 0usize;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=16);
        let v = random_pd(&mut rng, n);
        let mut w: Vec<Complex64> = (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        w[0] = c(1.0, 0.0);
        let mut w = ExtractionFilter(w);
        let objective = |w: &ExtractionFilter| aux_value(w, &v, Some(w.0[0])).unwrap();
        let mut prev = objective(&w);
        for k in 0..n {
            let u = eiss_coeff(&w, &v, k).unwrap();
            let at = |u: Complex64| objective(&eiss_apply(&w, u, k).unwrap());
            let best = at(u);
            let tol = 1e-10 * best.abs().max(1.0);
            let radius = 1.0 + u.norm();
            for step in [1e-4, 1e-3, 1e-2, 1e-1] {
                for d in 0..8 {
                    let phase = d as f64 * std::f64::consts::FRAC_PI_4;
                    let probe = u + Complex64::from_polar(step * radius, phase);
                    probes += 1;
                    if at(probe) < best - tol {
                        grid_failures += 1;
                    }
                }
            }
            w = eiss_apply(&w, u, k).unwrap();
            let now = objective(&w);
            if now > prev + 1e-10 * prev.abs().max(1.0) {
                increases += 1;
            }
            prev = now;
        }
    }
    outcome(
        grid_failures == 0 && increases == 0,
        format!("{probes} grid probes, {grid_failures} beat the closed form; {increases} objective increases"),
    )
}

fn fixed_point() -> Outcome {
    const CAP: usize = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_sweeps = 0;
    let mut unconverged = 0;
    let mut backup = Vec::new();
    for _ in 0..100 {
        let v = random_pd(&mut rng, 16);
        let want = normalize(&ip_update(&v).unwrap()).unwrap();
        let mut w = ExtractionFilter::identity(16).0;
        let mut sweeps = 0;
        let close = |w: &[Complex64]| w.iter().zip(&want.0).all(|(a, b)| (a - b).norm() <= 1e-6);
        while !close(&w) && sweeps < CAP {
            update_in_place(&mut w, &v, 1, SweepMode::Sequential, &mut backup).unwrap();
            sweeps += 1;
        }
        if !close(&w) {
            unconverged += 1;
        }
        max_sweeps = max_sweeps.max(sweeps);
    }
    outcome(
        unconverged == 0,
        format!("{unconverged}/100 unconverged, at most {max_sweeps} sweeps needed"),
    )
}

fn online_equivalence(dir: &Path) -> Outcome {
    let sc_dir = dir.join("scenario");
    commands::simulate(&SimulateArgs {
        out_dir: sc_dir.clone(),
        scenario: ScenarioFlags::default(),
    })
    .unwrap();
    let mut terle = Vec::new();
    for solver in [SolverKind::Ip, SolverKind::Eiss] {
        let aec = AecFlags {
            solver: Some(solver),
            ..Default::default()
        };
        let trace = dir.join(format!("{solver}.bin"));
        commands::process(&ProcessArgs {
            mic: sc_dir.join("mixture.wav"),
            farend: sc_dir.join("farend.wav"),
            out: dir.join(format!("{solver}.wav")),
            trace: Some(trace.clone()),
            aec: aec.clone(),
        })
        .unwrap();
        let summary = commands::evaluate(&EvaluateArgs {
            mixture: sc_dir.join("mixture.wav"),
            echo: sc_dir.join("echo.wav"),
            farend: sc_dir.join("farend.wav"),
            trace,
            csv: None,
            enhanced: None,
            window_ms: aec_core::metrics::WINDOW_MS,
            aec,
        })
        .unwrap();
        terle.push(summary["steady_state_terle_db"].as_f64().unwrap());
    }
    let (ip, eiss) = (terle[0], terle[1]);
    outcome(
        (ip - eiss).abs() <= 1.0 && ip > 10.0 && eiss > 10.0,
        format!(
            "steady-state tERLE IP {ip:.2} dB, EISS {eiss:.2} dB, gap {:.2} dB",
            (ip - eiss).abs()
        ),
    )
}

fn complexity(dir: &Path) -> Outcome {
    let summary = commands::bench(&BenchArgs {
        out: dir.join("bench.csv"),
        orders: "3,4".into(),
        ctf_lens: "2..12".into(),
        frames: 2000,
        trials: 5,
        ip_method: IpMethod::Inverse,
        verdict: None,
    })
    .unwrap();
    let v = &summary["verdict"];
    let ok = v["ip_slope_ok"].as_bool().unwrap()
        && v["eiss_slope_ok"].as_bool().unwrap()
        && v["eiss_faster"].as_bool().unwrap();
    outcome(
        ok,
        format!(
            "slopes IP {:.2} (2.5..3.5), EISS {:.2} (1.5..2.5); EISS slower at {}",
            v["ip_slope"].as_f64().unwrap_or(f64::NAN),
            v["eiss_slope"].as_f64().unwrap_or(f64::NAN),
            v["slower_points"]
        ),
    )
}

fn energy(s: &Spectrogram, from: usize) -> f64 {
    (from..s.frames())
        .map(|j| s.frame(j).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum()
}

/// Residual-to-echo ratio (dB) over the final quarter of frames.
fn ctf_residual_db(cfg: &AecConfig, ser_db: f64) -> Vec<f64> {
    let sc = generate_ctf_exact(cfg, 10.0, ser_db, 7).unwrap();
    [SolverKind::Ip, SolverKind::Eiss]
        .into_iter()
        .map(|solver| {
            let cfg = cfg.clone().with_solver(solver);
            let (_, mut state) = run_spectral(&sc.mic, &sc.refs, &cfg, true).unwrap();
            let trace = state.take_trace().unwrap();
            let residual = replay_spectral(&trace, &sc.echo, &sc.refs, cfg.ctf_len).unwrap();
            let from = sc.echo.frames() * 3 / 4;
            10.0 * (energy(&residual, from) / energy(&sc.echo, from)).log10()
        })
        .collect()
}

fn model_exact_recovery() -> Outcome {
    let cfg = AecConfig::default();
    let r = ctf_residual_db(&cfg, -10.0);
    let at_zero = ctf_residual_db(&cfg, 0.0);
    outcome(
        r.iter().all(|&d| d <= -20.0),
        format!(
            "residual/echo at -10 dB SER: IP {:.2} dB, EISS {:.2} dB (at 0 dB SER: {:.2}, {:.2})",
            r[0], r[1], at_zero[0], at_zero[1]
        ),
    )
}

fn covariance_integrity() -> Outcome {
    let n = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut v = WeightedCovariance::scaled_identity(n, 1e-3);
    let mut worst_defect = 0.0f64;
    let mut worst_eig = f64::INFINITY;
    let mut y = vec![c(0.0, 0.0); n];
    for step in 1..=100_000 {
        let level = rng.gen_range(-3.0f64..3.0).exp();
        for z in &mut y {
            *z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * level;
        }
        let phi = rng.gen_range(1e-6f64..1.0).powf(-1.6);
        v.update(&y, phi, 0.992).unwrap();
        if step % 10_000 == 0 {
            let scale = v.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
            worst_defect = worst_defect.max(v.hermitian_defect() / scale);
            let m = nalgebra::DMatrix::from_fn(n, n, |r, col| v.get(r, col));
            let eig = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
            worst_eig = worst_eig.min(eig / v.trace());
        }
    }
    outcome(
        worst_defect <= 1e-12 && worst_eig >= -1e-10,
        format!("Hermitian defect {worst_defect:.1e} (limit 1e-12), min eigenvalue/trace {worst_eig:.2e}"),
    )
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn determinism(dir: &Path) -> Outcome {
    let bin = env!("CARGO_BIN_EXE_aec");
    let mut runs = Vec::new();
    for k in 0..2 {
        let d = dir.join(format!("run{k}"));
        let sc = d.join("scenario");
        let ok = Proc::new(bin)
            .args(["simulate", sc.to_str().unwrap(), "--duration", "4", "--seed", "42"])
            .output()
            .unwrap()
            .status
            .success()
            && Proc::new(bin)
                .arg("process")
                .args([sc.join("mixture.wav"), sc.join("farend.wav"), d.join("out.wav")])
                .arg("--trace")
                .arg(d.join("trace.bin"))
                .output()
                .unwrap()
                .status
                .success();
        if !ok {
            return outcome(false, "a command failed");
        }
        let mut files = files_in(&d);
        files.extend(files_in(&sc));
        runs.push(files);
    }
    let count = runs[0].len();
    outcome(
        runs[0] == runs[1],
        format!("{count} output files compared byte for byte"),
    )
}

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let criteria: Vec<(&str, Duration, Check)> = vec![
        (
            "1 STFT perfect reconstruction",
            Duration::from_secs(10),
            Box::new(stft_reconstruction),
        ),
        (
            "2 EISS coordinate optimality",
            Duration::from_secs(60),
            Box::new(eiss_optimality),
        ),
        ("3 IP/EISS fixed point", Duration::from_secs(30), Box::new(fixed_point)),
        (
            "4 online solver equivalence",
            Duration::from_secs(120),
            Box::new(|| online_equivalence(d)),
        ),
        (
            "5 complexity separation",
            Duration::from_secs(600),
            Box::new(|| complexity(d)),
        ),
        (
            "6 model-exact recovery",
            Duration::from_secs(60),
            Box::new(model_exact_recovery),
        ),
        (
            "7 covariance integrity",
            Duration::from_secs(30),
            Box::new(covariance_integrity),
        ),
        ("8 determinism", Duration::from_secs(600), Box::new(|| determinism(d))),
    ];
    let mut failed = 0;
    for (name, budget, check) in &criteria {
        let start = Instant::now();
        let r = check();
        let took = start.elapsed();
        let pass = r.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            r.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
