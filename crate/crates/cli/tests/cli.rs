use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use aec_cli::wav;
use aec_core::{AecConfig, FilterTrace};

fn aec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aec")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_int16(path: &Path, rate: u32, channels: u16, n: usize) {
    let spec = hound::WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for i in 0..n * channels as usize {
        w.write_sample(((i % 100) as i16 - 50) * 100).unwrap();
    }
    w.finalize().unwrap();
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(aec(&["--help"]).status.code(), Some(0));
    assert_eq!(aec(&["--version"]).status.code(), Some(0));
    assert_eq!(aec(&[]).status.code(), Some(1));
    assert_eq!(aec(&["process", "only-one.wav"]).status.code(), Some(1));
    assert_eq!(aec(&["bench", "x.csv", "--L", "5..2"]).status.code(), Some(1));
}

#[test]
fn silence_in_silence_out() {
    let dir = tempfile::tempdir().unwrap();
    let (mic, far, out) = (
        dir.path().join("m.wav"),
        dir.path().join("f.wav"),
        dir.path().join("o.wav"),
    );
    wav::write(&mic, &vec![0.0; 8000], 16000).unwrap();
    wav::write(&far, &vec![0.0; 8000], 16000).unwrap();
    let r = aec(&["process", s(&mic), s(&far), s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = json(&r);
    assert_eq!(summary["bins"], 513);
    assert_eq!(summary["solver"], "eiss");
    let y = wav::read(&out).unwrap().unwrap();
    assert_eq!(y.samples.len(), 8000);
    assert!(y.samples.iter().all(|&v| v == 0.0));
}

#[test]
fn wrong_rate_multichannel_and_malformed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.wav");
    let cd = dir.path().join("cd.wav");
    let stereo = dir.path().join("stereo.wav");
    let broken = dir.path().join("broken.wav");
    let out = dir.path().join("o.wav");
    write_int16(&good, 16000, 1, 4000);
    write_int16(&cd, 44100, 1, 4000);
    write_int16(&stereo, 16000, 2, 4000);
    let mut bytes = fs::read(&good).unwrap();
    bytes.truncate(30);
    fs::write(&broken, bytes).unwrap();

    let r = aec(&["process", s(&good), s(&cd), s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("cd.wav") && err.contains("44100"), "{err}");

    let r = aec(&["process", s(&stereo), s(&good), s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("stereo.wav"));

    let r = aec(&["process", s(&broken), s(&good), s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("broken.wav") && err.contains("byte 20"), "{err}");
}

#[test]
fn simulate_manifest_and_options() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sc");
    let r = aec(&["simulate", s(&out), "--duration", "2", "--ser-db", "10", "--seed", "3"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["farend.wav", "near.wav", "echo.wav", "mixture.wav", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert!((manifest["measured_ser_db"].as_f64().unwrap() - 10.0).abs() < 0.01);
    assert_eq!(manifest["params"]["t60_ms"], 300.0);

    // clip 1 keeps the loudspeaker linear: the clip level is the far-end peak
    let r = aec(&["simulate", s(&out), "--duration", "1", "--clip", "1"]);
    assert_eq!(r.status.code(), Some(0));
    let far = wav::read(&out.join("farend.wav")).unwrap().unwrap().samples;
    let peak = far.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let level = json(&r)["clip_threshold"].as_f64().unwrap();
    assert!((level - peak).abs() < 1e-6);

    assert_eq!(aec(&["simulate", s(&out), "--clip", "0"]).status.code(), Some(1));
    assert_eq!(aec(&["simulate", s(&out), "--t60-ms", "-5"]).status.code(), Some(1));
}

#[test]
fn scenario_toml_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("s.toml");
    fs::write(&toml, "duration_s = 1.0\nseed = 9\nser_db = 4.0\n").unwrap();
    let out = dir.path().join("sc");
    let r = aec(&["simulate", s(&out), "--scenario", s(&toml), "--seed", "10"]);
    let m = json(&r);
    assert_eq!((m["seed"].as_u64(), m["samples"].as_u64()), (Some(10), Some(16000)));
    assert_eq!(m["params"]["ser_db"], 4.0);
}

#[test]
fn evaluate_identity_trace_and_missing_echo() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc");
    assert!(aec(&["simulate", s(&sc), "--duration", "2"]).status.success());
    let cfg = AecConfig::default();
    let frames = aec_core::spectral::frame_count(32000, cfg.hop);
    let trace_path = dir.path().join("id.bin");
    FilterTrace::identity(cfg.bins(), cfg.dim(), frames)
        .write_to(fs::File::create(&trace_path).unwrap())
        .unwrap();
    let csv = dir.path().join("m.csv");
    let (mix, echo, far) = (sc.join("mixture.wav"), sc.join("echo.wav"), sc.join("farend.wav"));
    let r = aec(&["evaluate", s(&mix), s(&echo), s(&far), s(&trace_path), "--csv", s(&csv)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = json(&r);
    assert!(summary["steady_state_terle_db"].as_f64().unwrap().abs() < 0.1);
    assert!(summary["steady_state_erle_db"].as_f64().unwrap().abs() < 0.1);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("window,end_s,erle_db,terle_db\n"));
    assert_eq!(text.lines().count(), 1 + summary["windows"].as_u64().unwrap() as usize);

    let missing = dir.path().join("nope.wav");
    let r = aec(&["evaluate", s(&mix), s(&missing), s(&far), s(&trace_path)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.wav"));

    // a trace recorded with a different filter length
    let r = aec(&["evaluate", s(&mix), s(&echo), s(&far), s(&trace_path), "-L", "3"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn process_then_evaluate_beats_ten_db() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc");
    assert!(aec(&["simulate", s(&sc)]).status.success());
    let (mix, echo, far) = (sc.join("mixture.wav"), sc.join("echo.wav"), sc.join("farend.wav"));
    let out = dir.path().join("out.wav");
    let trace = dir.path().join("t.bin");
    let cfg = dir.path().join("aec.toml");
    fs::write(&cfg, "solver = \"eiss\"\nalpha = 0.992\n").unwrap();
    let r = aec(&[
        "process",
        s(&mix),
        s(&far),
        s(&out),
        "--trace",
        s(&trace),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(json(&r)["frames"], 625);
    let enhanced = dir.path().join("enh.wav");
    let r = aec(&[
        "evaluate",
        s(&mix),
        s(&echo),
        s(&far),
        s(&trace),
        "--enhanced",
        s(&enhanced),
    ]);
    let terle = json(&r)["steady_state_terle_db"].as_f64().unwrap();
    assert!(terle > 10.0, "{terle}");
    // the enhanced signal rebuilt from the trace matches the live output
    let a = wav::read(&out).unwrap().unwrap().samples;
    let b = wav::read(&enhanced).unwrap().unwrap().samples;
    let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn bench_small_grid_single_trial() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let r = aec(&[
        "bench",
        s(&csv),
        "--P",
        "3",
        "--L",
        "2..4",
        "--frames",
        "50",
        "--trials",
        "1",
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("solver,P,L,frames,median_us_per_frame,trials")
    );
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    let verdict: serde_json::Value = serde_json::from_slice(&fs::read(csv.with_extension("json")).unwrap()).unwrap();
    assert_eq!(verdict["verdict"]["low_confidence"], true);
    assert!(verdict["verdict"]["ip_slope"].is_number());
}
