//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical or I/O failure,
//! 64 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{
    calibrate_nu_corr, parse_range, run_beamsplit_map, run_oracle_check, run_stark_amplitude_sweep,
    run_stark_detuning_sweep, run_tms_chevron, write_sweep_csv, BeamsplitSettings, CalibrationScan,
    ChevronSettings, OracleSettings, Propagator, StarkAmpSettings, StarkDetuningSettings, SweepResult,
};
use crate::fockspace::BasisLabel;
use crate::hamiltonian::{build_oracle, HamiltonianSpec, ModelKind, OracleOptions};
use crate::model::{load_config, ExperimentConfig, Mode, SystemParams};
use crate::spectra::frame_detunings;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Tolerance of the oracle cross-check (relative).
pub const ORACLE_REL_TOL: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "cqedsim", version, about = "Driven transmon-cavity effective Hamiltonian simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config; the built-in reference parameters are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV; a `<stem>.meta.json` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stark shift against drive amplitude.
    StarkAmp {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "qubit")]
        target: String,
        /// Amplitude grid `start:stop:count` (MHz).
        #[arg(long)]
        eps: Option<String>,
        /// Tone detuning (MHz); -20 for the qubit, 18.5 for the cavity by default.
        #[arg(long, allow_hyphen_values = true)]
        detuning: Option<f64>,
        #[arg(long, default_value = "late,late_no_h2,early")]
        models: String,
    },
    /// Qubit Stark shift against qubit tone detuning.
    StarkDetuning {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 7.63)]
        eps_q: f64,
        /// Detuning grid `start:stop:count` (MHz); values inside the guard band are skipped.
        #[arg(long, allow_hyphen_values = true)]
        delta_q: Option<String>,
        #[arg(long, default_value = "late,late_no_h2,early")]
        models: String,
    },
    /// Two-mode-squeezing population map over (eps_q, eps_c).
    Chevron {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        n: usize,
        #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long)]
        gate_time: Option<f64>,
        #[arg(long)]
        eps_q: Option<String>,
        /// Cavity amplitude grid; chosen from the resonance ridge when omitted.
        #[arg(long)]
        eps_c: Option<String>,
        #[arg(long, default_value = "late")]
        models: String,
        /// Integrate the time-dependent Hamiltonian instead of exact evolution.
        #[arg(long)]
        ode: bool,
    },
    /// Beam-splitter population map over (tau, cavity offset).
    Beamsplit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        drive: BeamsplitArgs,
        /// Cavity tone correction (MHz); calibrated when omitted.
        #[arg(long, allow_hyphen_values = true)]
        nu_corr: Option<f64>,
        #[arg(long)]
        tau: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        offsets: Option<String>,
        #[arg(long)]
        ode: bool,
    },
    /// Calibrates the beam-splitter cavity tone correction.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        drive: BeamsplitArgs,
    },
    /// Compares late, early and oracle Stark shifts at one drive point.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 7.63)]
        eps_q: f64,
        #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
        delta_q: f64,
        /// Phase-slope window (us).
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
    },
    /// Prints the terms of a Hamiltonian built from the config's drives.
    DumpTerms {
        #[arg(long)]
        config: Option<PathBuf>,
        /// late, late_no_h2, early or oracle.
        #[arg(long, default_value = "late")]
        model: String,
        /// Move to the frame of the tone detunings.
        #[arg(long)]
        drive_frame: bool,
    },
}

#[derive(Debug, Args)]
pub struct BeamsplitArgs {
    #[arg(long, default_value_t = -50.0, allow_hyphen_values = true)]
    pub delta: f64,
    #[arg(long, default_value_t = 10.0)]
    pub eps_q: f64,
    #[arg(long, default_value_t = 20.0)]
    pub eps_c: f64,
}

/// Written next to every output after a successful run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config_sha256: String,
    pub tool_version: &'static str,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<String>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct LoadedConfig {
    cfg: ExperimentConfig,
    path: Option<String>,
    hash: String,
}

fn load(path: Option<&Path>) -> Result<LoadedConfig> {
    match path {
        Some(p) => {
            let bytes = fs::read(p)?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Error::validation("config", "not valid UTF-8"))?;
            Ok(LoadedConfig {
                cfg: load_config(&text)?,
                path: Some(p.display().to_string()),
                hash: sha256_hex(&bytes),
            })
        }
        None => {
            let cfg = ExperimentConfig::new(SystemParams::reference_device());
            let hash = sha256_hex(cfg.to_json().as_bytes());
            Ok(LoadedConfig { cfg, path: None, hash })
        }
    }
}

fn parse_models(text: &str) -> Result<Vec<ModelKind>> {
    let models: Vec<ModelKind> = text.split(',').map(str::parse).collect::<Result<_>>()?;
    if models.is_empty() {
        return Err(Error::validation("models", "must not be empty"));
    }
    Ok(models)
}

/// Flag value, else the config's experiment axis of that name, else `None`.
fn axis_or(flag: &Option<String>, cfg: &ExperimentConfig, axis: &str) -> Result<Option<Vec<f64>>> {
    if let Some(text) = flag {
        return parse_range(text).map(Some);
    }
    Ok(cfg
        .experiment
        .as_ref()
        .and_then(|e| e.axis(axis))
        .map(<[f64]>::to_vec))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.meta.json"))
}

fn emit_sweep(result: &SweepResult, out: Option<&Path>, manifest: RunManifest) -> Result<()> {
    let mut csv = Vec::new();
    write_sweep_csv(result, &mut csv)?;
    match out {
        None => std::io::stdout().write_all(&csv)?,
        Some(path) => {
            write_atomic(path, &csv)?;
            let meta = serde_json::json!({
                "manifest": manifest,
                "experiment": result.experiment,
                "models": result.models,
                "axes": result.axes.iter().map(|a| serde_json::json!({"name": a.name, "len": a.values.len()})).collect::<Vec<_>>(),
                "columns": result.observables.iter().map(|o| o.name.clone()).collect::<Vec<_>>(),
                "failed_cells": result.errors.iter().filter(|e| !e.is_empty()).count(),
                "metadata": result.metadata,
            });
            let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
            write_atomic(&sidecar_path(path), text.as_bytes())?;
        }
    }
    Ok(())
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    match out {
        None => println!("{text}"),
        Some(p) => write_atomic(p, text.as_bytes())?,
    }
    Ok(())
}

fn manifest(command: &str, loaded: &LoadedConfig, started: f64, out: Option<&Path>) -> RunManifest {
    let mut outputs = Vec::new();
    if let Some(p) = out {
        outputs.push(p.display().to_string());
        outputs.push(sidecar_path(p).display().to_string());
    }
    RunManifest {
        command: command.to_string(),
        config_path: loaded.path.clone(),
        config_sha256: loaded.hash.clone(),
        tool_version: env!("CARGO_PKG_VERSION"),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        outputs,
    }
}

fn beamsplit_settings(drive: &BeamsplitArgs) -> BeamsplitSettings {
    BeamsplitSettings {
        delta: drive.delta,
        eps_q: drive.eps_q,
        eps_c: drive.eps_c,
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<i32> {
    let started = unix_now();
    match cli.command {
        Command::StarkAmp { common, target, eps, detuning, models } => {
            let loaded = load(common.config.as_deref())?;
            let target: Mode = target.parse()?;
            let mut s = StarkAmpSettings::defaults(target);
            let axis = match target {
                Mode::Qubit => "eps_q_MHz",
                Mode::Cavity => "eps_c_MHz",
            };
            if let Some(v) = axis_or(&eps, &loaded.cfg, axis)? {
                s.eps = v;
            }
            if let Some(d) = detuning {
                s.detuning = d;
            }
            s.models = parse_models(&models)?;
            let r = run_stark_amplitude_sweep(&loaded.cfg, &s)?;
            log::info!("stark-amp: {} cells done", r.cells());
            emit_sweep(&r, common.out.as_deref(), manifest("stark-amp", &loaded, started, common.out.as_deref()))?;
        }
        Command::StarkDetuning { common, eps_q, delta_q, models } => {
            let loaded = load(common.config.as_deref())?;
            let mut s = StarkDetuningSettings {
                eps_q,
                models: parse_models(&models)?,
                ..Default::default()
            };
            if let Some(v) = axis_or(&delta_q, &loaded.cfg, "delta_q_MHz")? {
                s.detunings = v
                    .into_iter()
                    .filter(|d| d.abs() >= crate::experiments::GUARD_BAND_MHZ)
                    .collect();
            }
            let r = run_stark_detuning_sweep(&loaded.cfg, &s)?;
            log::info!("stark-detuning: {} cells done", r.cells());
            emit_sweep(&r, common.out.as_deref(), manifest("stark-detuning", &loaded, started, common.out.as_deref()))?;
        }
        Command::Chevron { common, n, delta, gate_time, eps_q, eps_c, models, ode } => {
            let loaded = load(common.config.as_deref())?;
            let exp = loaded.cfg.experiment.as_ref();
            let mut s = ChevronSettings {
                n,
                delta,
                models: parse_models(&models)?,
                propagator: if ode { Propagator::Ode } else { Propagator::Exact },
                ..Default::default()
            };
            if let Some(t) = gate_time.or_else(|| exp.and_then(|e| e.gate_time_us)) {
                s.gate_time_us = t;
            }
            if let Some(label) = exp.and_then(|e| e.initial_state.as_deref()) {
                let l = BasisLabel::parse(label)?;
                if l.q != 0 {
                    return Err(Error::validation("experiment.initial_state", "chevron starts in the qubit ground state"));
                }
                s.n = l.c;
            }
            if let Some(v) = axis_or(&eps_q, &loaded.cfg, "eps_q_MHz")? {
                s.eps_q = v;
            }
            s.eps_c = axis_or(&eps_c, &loaded.cfg, "eps_c_MHz")?;
            let r = run_tms_chevron(&loaded.cfg, &s)?;
            log::info!("chevron: {} cells done", r.cells());
            emit_sweep(&r, common.out.as_deref(), manifest("chevron", &loaded, started, common.out.as_deref()))?;
        }
        Command::Beamsplit { common, drive, nu_corr, tau, offsets, ode } => {
            let loaded = load(common.config.as_deref())?;
            let mut s = beamsplit_settings(&drive);
            s.nu_corr = nu_corr;
            s.propagator = if ode { Propagator::Ode } else { Propagator::Exact };
            if let Some(v) = axis_or(&tau, &loaded.cfg, "tau_us")? {
                s.tau_us = v;
            }
            if let Some(v) = axis_or(&offsets, &loaded.cfg, "delta_cd_MHz")? {
                s.offsets = v;
            }
            let r = run_beamsplit_map(&loaded.cfg, &s)?;
            log::info!("beamsplit: {} cells done", r.cells());
            emit_sweep(&r, common.out.as_deref(), manifest("beamsplit", &loaded, started, common.out.as_deref()))?;
        }
        Command::Calibrate { common, drive } => {
            let loaded = load(common.config.as_deref())?;
            let c = calibrate_nu_corr(&loaded.cfg, &beamsplit_settings(&drive), &CalibrationScan::default())?;
            let value = serde_json::json!({
                "calibration": c,
                "manifest": manifest("calibrate", &loaded, started, None),
            });
            emit_json(&value, common.out.as_deref())?;
        }
        Command::Validate { common, eps_q, delta_q, duration } => {
            let loaded = load(common.config.as_deref())?;
            let s = OracleSettings {
                eps_q,
                delta_q,
                duration,
                ..Default::default()
            };
            let r = run_oracle_check(&loaded.cfg, &s)?;
            let pass = r.relative_error <= ORACLE_REL_TOL;
            let sign = r.early_mhz.signum() != r.oracle_mhz.signum();
            println!("eps_q = {} MHz, delta_q = {} MHz", r.eps_q_mhz, r.delta_q_mhz);
            println!("  late        {:+.6} MHz", r.late_mhz);
            println!("  late_no_h2  {:+.6} MHz", r.late_no_h2_mhz);
            println!("  early       {:+.6} MHz", r.early_mhz);
            println!("  oracle      {:+.6} MHz (fit residual {:.2e} rad)", r.oracle_mhz, r.oracle_fit_residual);
            println!(
                "  late vs oracle: {:.2}% ({}), early sign {}",
                100.0 * r.relative_error,
                if pass { "within 5%" } else { "outside 5%" },
                if sign { "disagrees" } else { "agrees" }
            );
            if let Some(out) = common.out.as_deref() {
                let value = serde_json::json!({
                    "report": r,
                    "manifest": manifest("validate", &loaded, started, Some(out)),
                });
                emit_json(&value, Some(out))?;
            }
            if !pass {
                return Ok(EXIT_NUMERIC);
            }
        }
        Command::DumpTerms { config, model, drive_frame } => {
            let loaded = load(config.as_deref())?;
            let p = loaded.cfg.params()?;
            let tones = loaded.cfg.tones()?;
            let spec: HamiltonianSpec = if model == "oracle" {
                build_oracle(&p, &tones, &loaded.cfg.hilbert, OracleOptions::default())?
            } else {
                model.parse::<ModelKind>()?.build(&p, &tones)?
            };
            let spec = if drive_frame {
                let (dq, dc) = frame_detunings(&tones)?;
                spec.to_drive_frame(dq, dc, false)?
            } else {
                spec
            };
            print!("{}", spec.dump_terms());
        }
    }
    Ok(EXIT_OK)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERIC
    }
}

/// Worker count from `CQEDSIM_THREADS`, if set and valid.
fn thread_cap() -> Option<usize> {
    std::env::var("CQEDSIM_THREADS").ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_NUMERIC;
        }
    };
    match pool.install(|| run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.tag());
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(dispatch(["cqedsim", "stark-amp", "--bogus"]), EXIT_USAGE);
        assert_eq!(dispatch(["cqedsim"]), EXIT_USAGE);
        assert_eq!(dispatch(["cqedsim", "frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(dispatch(["cqedsim", "--help"]), EXIT_OK);
    }

    #[test]
    fn bad_values_are_input_errors() {
        assert_eq!(dispatch(["cqedsim", "stark-amp", "--eps", "0:1"]), EXIT_INPUT);
        assert_eq!(dispatch(["cqedsim", "stark-amp", "--models", "late,bogus"]), EXIT_INPUT);
        assert_eq!(dispatch(["cqedsim", "stark-amp", "--target", "flux"]), EXIT_INPUT);
    }

    #[test]
    fn missing_config_file_is_numeric_failure() {
        assert_eq!(dispatch(["cqedsim", "stark-amp", "--config", "/nonexistent/cfg.json"]), EXIT_NUMERIC);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/stark.csv")), PathBuf::from("out/stark.meta.json"));
    }

    #[test]
    fn model_lists() {
        assert_eq!(parse_models("late,early").unwrap(), vec![ModelKind::Late, ModelKind::Early]);
        assert!(parse_models("").is_err());
    }
}
