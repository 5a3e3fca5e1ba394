use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use aec_core::metrics::{self, BenchRow, BENCH_CSV_HEADER, WINDOW_MS};
use aec_core::{pipeline, simulate, FilterTrace, IpMethod, SAMPLE_RATE};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult, ExitKind};
use crate::settings::{AecFlags, ScenarioFlags};
use crate::wav;

#[derive(Debug, Parser)]
#[command(name = "aec", version, about = "Streaming nonlinear acoustic echo cancellation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cancel the echo in a microphone recording
    Process(ProcessArgs),
    /// Generate a synthetic echo scenario
    Simulate(SimulateArgs),
    /// Score a filter trace with ERLE and true ERLE
    Evaluate(EvaluateArgs),
    /// Per-frame cost of both solvers over a (P, L) grid
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    pub mic: PathBuf,
    pub farend: PathBuf,
    pub out: PathBuf,
    /// Write the per-frame filters here
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub aec: AecFlags,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub scenario: ScenarioFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub mixture: PathBuf,
    pub echo: PathBuf,
    pub farend: PathBuf,
    pub trace: PathBuf,
    /// Per-window series output
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write the enhanced signal reconstructed from the trace
    #[arg(long)]
    pub enhanced: Option<PathBuf>,
    #[arg(long, default_value_t = WINDOW_MS)]
    pub window_ms: f64,
    #[command(flatten)]
    pub aec: AecFlags,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub out: PathBuf,
    /// Expansion orders, e.g. "3,4" or "2..5"
    #[arg(long = "P", default_value = "3,4")]
    pub orders: String,
    /// CTF lengths, e.g. "2..12"
    #[arg(long = "L", default_value = "2..12")]
    pub ctf_lens: String,
    #[arg(long, default_value_t = 2000)]
    pub frames: usize,
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value = "inverse")]
    pub ip_method: IpMethod,
    /// Verdict JSON path; defaults to OUT with a .json extension
    #[arg(long)]
    pub verdict: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<Value> {
    match cli.command {
        Command::Process(a) => process(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Bench(a) => bench(&a),
    }
}

/// Reads a mono 16 kHz input, naming the file in every diagnostic.
pub fn read_input(path: &Path) -> CliResult<Vec<f64>> {
    if !path.is_file() {
        return Err(CliError::usage("no such input file").in_file(path));
    }
    let data = wav::read(path)
        .map_err(|e| CliError::data(e.to_string()).in_file(path))?
        .map_err(|e| CliError::from(e).in_file(path))?;
    if data.sample_rate != SAMPLE_RATE {
        return Err(CliError::data(format!(
            "sample rate {} Hz, expected {} Hz (no resampling)",
            data.sample_rate, SAMPLE_RATE
        ))
        .in_file(path));
    }
    Ok(data.samples)
}

fn write_output(path: &Path, samples: &[f64]) -> CliResult<()> {
    wav::write(path, samples, SAMPLE_RATE).map_err(|e| CliError::data(e.to_string()).in_file(path))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::data(e.to_string()).in_file(path)
}

fn fit_len(mut x: Vec<f64>, n: usize) -> Vec<f64> {
    x.resize(n, 0.0);
    x
}

pub fn process(a: &ProcessArgs) -> CliResult<Value> {
    let config = a.aec.resolve()?;
    let mic = read_input(&a.mic)?;
    let far = fit_len(read_input(&a.farend)?, mic.len());
    let start = Instant::now();
    let out = pipeline::run(&mic, &far, &config, a.trace.is_some())?;
    let wall = start.elapsed().as_secs_f64();
    if out.near_end.iter().any(|v| !v.is_finite()) {
        return Err(CliError {
            kind: ExitKind::Numeric,
            message: "non-finite output samples".into(),
        });
    }
    write_output(&a.out, &out.near_end[..mic.len()])?;
    if let (Some(path), Some(trace)) = (&a.trace, &out.trace) {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        trace.write_to(&mut w).and_then(|_| w.flush()).map_err(io_err(path))?;
    }
    Ok(json!({
        "command": "process",
        "solver": config.solver,
        "ip_method": config.ip_method,
        "frames": out.frames,
        "bins": config.bins(),
        "filter_len": config.dim(),
        "samples": mic.len(),
        "degraded_updates": out.degraded_updates,
        "wall_time_s": wall,
        "output": a.out,
        "trace": a.trace,
    }))
}

pub const SCENARIO_FILES: [&str; 4] = ["farend.wav", "near.wav", "echo.wav", "mixture.wav"];

pub fn simulate(a: &SimulateArgs) -> CliResult<Value> {
    let params = a.scenario.resolve()?;
    if params.sample_rate != SAMPLE_RATE {
        return Err(CliError::usage(format!("sample rate must be {SAMPLE_RATE} Hz")));
    }
    let sc = simulate::generate(&params)?;
    fs::create_dir_all(&a.out_dir).map_err(io_err(&a.out_dir))?;
    for (name, x) in SCENARIO_FILES
        .iter()
        .zip([&sc.far_end, &sc.near_end, &sc.echo, &sc.mixture])
    {
        write_output(&a.out_dir.join(name), x)?;
    }
    let manifest = json!({
        "params": params,
        "seed": params.seed,
        "samples": sc.mixture.len(),
        "rir_len": sc.rir.len(),
        "clip_threshold": sc.clip_threshold,
        "measured_ser_db": if sc.measured_ser_db.is_finite() { json!(sc.measured_ser_db) } else { Value::Null },
        "files": SCENARIO_FILES,
    });
    let path = a.out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<Value> {
    let config = a.aec.resolve()?;
    if !(a.window_ms > 0.0 && a.window_ms.is_finite()) {
        return Err(CliError::usage("window length must be positive"));
    }
    let mixture = read_input(&a.mixture)?;
    let n = mixture.len();
    let echo = fit_len(read_input(&a.echo)?, n);
    let far = fit_len(read_input(&a.farend)?, n);
    if !a.trace.is_file() {
        return Err(CliError::usage("no such trace file").in_file(&a.trace));
    }
    let file = File::open(&a.trace).map_err(io_err(&a.trace))?;
    let trace = FilterTrace::read_from(BufReader::new(file)).map_err(|e| CliError::from(e).in_file(&a.trace))?;

    let enhanced = pipeline::replay_on_echo(&trace, &mixture, &far, &config)?;
    let residual = pipeline::replay_on_echo(&trace, &echo, &far, &config)?;
    let erle = metrics::erle(&mixture, &enhanced[..n], a.window_ms, SAMPLE_RATE);
    let terle = metrics::terle(&echo, &residual[..n], a.window_ms, SAMPLE_RATE);
    if let Some(path) = &a.enhanced {
        write_output(path, &enhanced[..n])?;
    }
    if let Some(path) = &a.csv {
        let win = (a.window_ms * 1e-3 * SAMPLE_RATE as f64).round();
        let mut text = String::from("window,end_s,erle_db,terle_db\n");
        for (k, (e, t)) in erle.iter().zip(&terle).enumerate() {
            let end = ((k + 1) as f64 * win).min(n as f64) / SAMPLE_RATE as f64;
            text.push_str(&format!("{k},{end:.4},{e:.6},{t:.6}\n"));
        }
        fs::write(path, text).map_err(io_err(path))?;
    }
    Ok(json!({
        "command": "evaluate",
        "windows": erle.len(),
        "window_ms": a.window_ms,
        "steady_state_fraction": 0.25,
        "steady_state_erle_db": metrics::steady_state_mean(&erle, 0.25),
        "steady_state_terle_db": metrics::steady_state_mean(&terle, 0.25),
        "csv": a.csv,
    }))
}

/// Parses "3,4", "2..12" (inclusive) or a mix such as "2,5..7".
pub fn parse_grid(s: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::usage(format!("invalid grid '{s}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn bench(a: &BenchArgs) -> CliResult<Value> {
    let orders = parse_grid(&a.orders)?;
    let ctf_lens = parse_grid(&a.ctf_lens)?;
    if a.frames == 0 || a.trials == 0 {
        return Err(CliError::usage("frames and trials must be positive"));
    }
    let rows: Vec<BenchRow> = metrics::bench_with(&orders, &ctf_lens, a.frames, a.trials, a.ip_method);
    let mut csv = String::from(BENCH_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
    }
    fs::write(&a.out, csv).map_err(io_err(&a.out))?;
    let verdict = metrics::verdict(&rows);
    let summary = json!({
        "command": "bench",
        "rows": rows.len(),
        "frames": a.frames,
        "trials": a.trials,
        "ip_method": a.ip_method,
        "verdict": verdict,
    });
    let path = a.verdict.clone().unwrap_or_else(|| a.out.with_extension("json"));
    let text = serde_json::to_string_pretty(&summary).expect("verdict serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(summary)
}
