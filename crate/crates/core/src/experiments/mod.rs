//! Parameter sweeps reproducing the Stark-shift, two-mode-squeezing and
//! beam-splitting experiments, plus the oracle cross-check.
//!
//! Every runner returns a [`SweepResult`]. Cells that fail numerically carry
//! an error tag and `NaN` values; the sweep itself only fails on bad input.

mod sweep;

use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    phase_slope_frequency, propagate_schrodinger_compiled, propagate_static, resolving_step, PhaseSlopeOptions,
    SolverStats,
};
use crate::error::{Error, Result};
use crate::fockspace::{basis_state, BasisLabel, StateVector};
use crate::hamiltonian::{build_oracle, HamiltonianSpec, ModelKind, OracleOptions};
use crate::model::{angular_to_mhz, DriveTone, ExperimentConfig, HilbertSpec, Mode, Params, SolverConfig, Tone};
use crate::spectra::{eig_herm, stark_shift, track_dressed, TrackReference};

pub use sweep::{read_sweep_csv, write_sweep_csv, Axis, Observable, SweepResult};

/// Detuning band around resonance that sweeps skip (MHz).
pub const GUARD_BAND_MHZ: f64 = 2.0;
/// Device value of the beam-splitter frequency correction (MHz).
pub const NU_CORR_REFERENCE_MHZ: f64 = -5.02;
/// Confidence below which a detuning-sweep cell is flagged as inside the
/// avoided crossing.
pub const CROSSING_FLAG: f64 = 0.9;

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Parses `start:stop:count` into a grid.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::validation("range", format!("expected start:stop:count, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !start.is_finite() || !stop.is_finite() || (n > 1 && start == stop) {
        return Err(bad());
    }
    Ok(linspace(start, stop, n))
}

fn check_axis(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::validation(name, "must not be empty"));
    }
    if values.iter().any(|v| !v.is_finite()) || !crate::model::is_strictly_monotone(values) {
        return Err(Error::validation(name, "values must be finite and strictly monotone"));
    }
    Ok(())
}

fn tone(params: &Params, target: Mode, eps: f64, detuning: f64) -> Result<Tone> {
    Tone::from_config(&DriveTone::new(target, eps, detuning), params)
}

/// Population of qubit level `q`, summed over the cavity.
pub fn qubit_population(psi: &StateVector, h: &HilbertSpec, q: usize) -> f64 {
    (0..h.n_c).map(|c| psi[q * h.n_c + c].norm_sqr()).sum()
}

fn finish(result: &mut SweepResult, cfg: &ExperimentConfig, start: Instant, stats: Option<SolverStats>) {
    let echo: serde_json::Value = serde_json::from_str(&cfg.to_json()).expect("config echo");
    result.set_meta("config", echo);
    result.set_meta("runtime_s", start.elapsed().as_secs_f64());
    if let Some(s) = stats {
        result.set_meta("solver_stats", s);
    }
}

fn model_names(models: &[ModelKind]) -> Vec<String> {
    models.iter().map(|m| m.name().to_string()).collect()
}

/// How the gate experiments evolve the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagator {
    /// Eigendecomposition of the static drive-frame Hamiltonian. Exact, and
    /// equivalent to the mode-frame evolution up to diagonal phases.
    #[default]
    Exact,
    /// Adaptive integration of the time-dependent mode-frame Hamiltonian.
    Ode,
}

/// Qubit-`e` populations at `times` (starting at 0) from `psi0`.
fn evolve_populations(
    spec: &HamiltonianSpec,
    h: &HilbertSpec,
    psi0: &StateVector,
    times: &[f64],
    how: Propagator,
    solver: &SolverConfig,
) -> Result<(Vec<f64>, SolverStats)> {
    let (states, stats) = match how {
        Propagator::Exact => {
            let (dq, dc) = crate::spectra::frame_detunings(&spec.tones)?;
            let op = spec.to_drive_frame(dq, dc, true)?.static_operator(h)?;
            (propagate_static(&op, psi0, times)?, SolverStats::default())
        }
        Propagator::Ode => {
            let tr = propagate_schrodinger_compiled(&spec.compile(h), psi0, times, solver, None)?;
            (tr.states, tr.stats)
        }
    };
    Ok((states.iter().map(|x| qubit_population(x, h, 1)).collect(), stats))
}

// ---------------------------------------------------------------------------
// Stark shift versus amplitude

/// Amplitude sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct StarkAmpSettings {
    pub target: Mode,
    /// Drive amplitudes (MHz).
    pub eps: Vec<f64>,
    /// Tone detuning (MHz).
    pub detuning: f64,
    pub models: Vec<ModelKind>,
}

impl StarkAmpSettings {
    /// Qubit drive at -20 MHz or cavity drive at 18.5 MHz, ε from 0 to 15 MHz.
    pub fn defaults(target: Mode) -> Self {
        StarkAmpSettings {
            target,
            eps: linspace(0.0, 15.0, 31),
            detuning: match target {
                Mode::Qubit => -20.0,
                Mode::Cavity => 18.5,
            },
            models: ModelKind::ALL.to_vec(),
        }
    }
}

/// Qubit and cavity Stark shifts against drive amplitude for each model.
///
/// Columns per model: `shift_<model>_kHz` (qubit `g0 → e0`),
/// `cavity_shift_<model>_kHz` (`g0 → g1`) and `confidence_<model>`.
pub fn run_stark_amplitude_sweep(cfg: &ExperimentConfig, s: &StarkAmpSettings) -> Result<SweepResult> {
    let start = Instant::now();
    let params = cfg.params()?;
    cfg.hilbert.validate()?;
    check_axis("eps", &s.eps)?;
    if s.models.is_empty() {
        return Err(Error::validation("models", "must not be empty"));
    }
    let axis = match s.target {
        Mode::Qubit => "eps_q_MHz",
        Mode::Cavity => "eps_c_MHz",
    };
    let mut result = SweepResult::new("stark_amplitude", vec![Axis::new(axis, s.eps.clone())]);
    result.models = model_names(&s.models);
    let h = cfg.hilbert;
    for &model in &s.models {
        let cells: Vec<Result<[f64; 3]>> = s
            .eps
            .par_iter()
            .map(|&eps| {
                let tones = vec![tone(&params, s.target, eps, s.detuning)?];
                let r = stark_shift(&params, &tones, model, &h, None)?;
                Ok([r.qubit_mhz * 1e3, r.cavity_mhz * 1e3, r.confidence])
            })
            .collect();
        let mut cols = [Vec::new(), Vec::new(), Vec::new()];
        for (cell, r) in cells.into_iter().enumerate() {
            let v = r.unwrap_or_else(|e| {
                result.mark(cell, e.tag());
                [f64::NAN; 3]
            });
            for k in 0..3 {
                cols[k].push(v[k]);
            }
        }
        let [q, c, conf] = cols;
        result.push_observable(format!("shift_{}_kHz", model.name()), q);
        result.push_observable(format!("cavity_shift_{}_kHz", model.name()), c);
        result.push_observable(format!("confidence_{}", model.name()), conf);
    }
    result.set_meta("target", s.target);
    result.set_meta("detuning_MHz", s.detuning);
    finish(&mut result, cfg, start, None);
    Ok(result)
}

// ---------------------------------------------------------------------------
// Stark shift versus detuning

#[derive(Debug, Clone, PartialEq)]
pub struct StarkDetuningSettings {
    /// Qubit drive amplitude (MHz).
    pub eps_q: f64,
    /// Qubit tone detunings (MHz).
    pub detunings: Vec<f64>,
    pub models: Vec<ModelKind>,
}

impl Default for StarkDetuningSettings {
    /// ε_q = 7.63 MHz over [-300, 100] MHz in 2 MHz steps, minus the guard band.
    fn default() -> Self {
        let detunings = linspace(-300.0, 100.0, 201)
            .into_iter()
            .filter(|d| d.abs() >= GUARD_BAND_MHZ)
            .collect();
        StarkDetuningSettings {
            eps_q: 7.63,
            detunings,
            models: ModelKind::ALL.to_vec(),
        }
    }
}

/// Qubit Stark shift against qubit tone detuning. Each model is tracked
/// adiabatically along the sweep; the chain restarts from the bare states
/// when the sweep crosses resonance.
///
/// Columns per model: `shift_<model>_kHz`, `confidence_<model>`, plus
/// `avoided_crossing` (1 where the first model's confidence drops below
/// [`CROSSING_FLAG`]). Cells with a confidence below the tracking floor keep
/// their value and are tagged `ambiguous_tracking`; cells inside the guard
/// band are `NaN` with tag `guard_band`.
pub fn run_stark_detuning_sweep(cfg: &ExperimentConfig, s: &StarkDetuningSettings) -> Result<SweepResult> {
    let start = Instant::now();
    let params = cfg.params()?;
    cfg.hilbert.validate()?;
    check_axis("detunings", &s.detunings)?;
    if s.models.is_empty() {
        return Err(Error::validation("models", "must not be empty"));
    }
    if !(s.eps_q >= 0.0 && s.eps_q.is_finite()) {
        return Err(Error::validation("eps_q", "must be finite and >= 0"));
    }
    let h = cfg.hilbert;
    let mut result = SweepResult::new("stark_detuning", vec![Axis::new("delta_q_MHz", s.detunings.clone())]);
    result.models = model_names(&s.models);
    let chains: Vec<(Vec<f64>, Vec<f64>, Vec<Option<&'static str>>)> = s
        .models
        .par_iter()
        .map(|&model| {
            let mut prev: Option<Vec<DVector<C64>>> = None;
            let mut last_sign = 0.0;
            let (mut shift, mut conf, mut tags) = (Vec::new(), Vec::new(), Vec::new());
            for &d in &s.detunings {
                if d.abs() < GUARD_BAND_MHZ {
                    shift.push(f64::NAN);
                    conf.push(f64::NAN);
                    tags.push(Some("guard_band"));
                    prev = None;
                    continue;
                }
                if d.signum() != last_sign {
                    prev = None;
                    last_sign = d.signum();
                }
                let r = tone(&params, Mode::Qubit, s.eps_q, d)
                    .and_then(|t| stark_shift(&params, &[t], model, &h, prev.as_deref()));
                match r {
                    Ok(r) => {
                        shift.push(r.qubit_mhz * 1e3);
                        conf.push(r.confidence);
                        tags.push(r.ambiguous.then_some("ambiguous_tracking"));
                        prev = Some(r.vectors);
                    }
                    Err(e) => {
                        shift.push(f64::NAN);
                        conf.push(f64::NAN);
                        tags.push(Some(e.tag()));
                        prev = None;
                    }
                }
            }
            (shift, conf, tags)
        })
        .collect();
    let crossing: Vec<f64> = chains[0]
        .1
        .iter()
        .map(|c| if *c < CROSSING_FLAG { 1.0 } else { 0.0 })
        .collect();
    for (model, (shift, conf, tags)) in s.models.iter().zip(chains) {
        for (cell, tag) in tags.iter().enumerate() {
            if let Some(t) = tag {
                result.mark(cell, t);
            }
        }
        result.push_observable(format!("shift_{}_kHz", model.name()), shift);
        result.push_observable(format!("confidence_{}", model.name()), conf);
    }
    result.push_observable("avoided_crossing", crossing);
    result.set_meta("eps_q_MHz", s.eps_q);
    result.set_meta("guard_band_MHz", GUARD_BAND_MHZ);
    finish(&mut result, cfg, start, None);
    Ok(result)
}

// ---------------------------------------------------------------------------
// Two-mode squeezing chevron

#[derive(Debug, Clone, PartialEq)]
pub struct ChevronSettings {
    /// Photon index: initial state `|g, n>`, target `|e, n+1>`.
    pub n: usize,
    /// Qubit tone at `-Δ`, cavity tone at `Δ - (n+1)χ` (MHz).
    pub delta: f64,
    pub gate_time_us: f64,
    pub eps_q: Vec<f64>,
    /// `None` picks a range that puts the resonance ridge on the diagonal.
    pub eps_c: Option<Vec<f64>>,
    pub models: Vec<ModelKind>,
    pub propagator: Propagator,
}

impl Default for ChevronSettings {
    fn default() -> Self {
        ChevronSettings {
            n: 0,
            delta: 20.0,
            gate_time_us: 4.2,
            eps_q: linspace(0.0, 8.0, 21),
            eps_c: None,
            models: vec![ModelKind::Late],
            propagator: Propagator::Exact,
        }
    }
}

fn tms_tones(p: &Params, n: usize, delta: f64, eps_q: f64, eps_c: f64) -> Result<Vec<Tone>> {
    let chi = angular_to_mhz(p.chi);
    Ok(vec![
        tone(p, Mode::Qubit, eps_q, -delta)?,
        tone(p, Mode::Cavity, eps_c, delta - (n as f64 + 1.0) * chi)?,
    ])
}

/// Drive-frame energy difference `E(b) - E(a)` (MHz) of the late model with
/// the families in `drop` removed, tracked from the bare states.
fn diabatic_gap(p: &Params, tones: &[Tone], h: &HilbertSpec, a: BasisLabel, b: BasisLabel, drop: &[&str]) -> Result<f64> {
    let mut spec = ModelKind::Late.build(p, tones)?;
    spec.terms.retain(|t| !drop.contains(&t.family));
    let (dq, dc) = crate::spectra::frame_detunings(tones)?;
    let op = spec.to_drive_frame(dq, dc, true)?.static_operator(h)?;
    let eig = eig_herm(&op)?;
    let asg = track_dressed(&eig, h, &[a, b], TrackReference::Bare)?;
    Ok(angular_to_mhz(eig.eigenvalues[asg[1].index] - eig.eigenvalues[asg[0].index]))
}

/// Scans `f` over `[lo, hi]` in `step` increments for the first sign change
/// and bisects it to `tol`.
fn find_root(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, step: f64, tol: f64) -> Result<Option<f64>> {
    let mut x0 = lo;
    let mut f0 = f(x0)?;
    while x0 < hi {
        let x1 = (x0 + step).min(hi);
        let f1 = f(x1)?;
        if f0 == 0.0 {
            return Ok(Some(x0));
        }
        if f0.signum() != f1.signum() {
            let (mut a, mut b, mut fa) = (x0, x1, f0);
            while b - a > tol {
                let m = 0.5 * (a + b);
                let fm = f(m)?;
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        x0 = x1;
        f0 = f1;
    }
    Ok(None)
}

/// Cavity amplitude (MHz) at which `|g,n>` and `|e,n+1>` are degenerate in
/// the drive frame for qubit amplitude `eps_q`, ignoring the squeezing
/// coupling itself.
pub fn tms_ridge(p: &Params, h: &HilbertSpec, n: usize, delta: f64, eps_q: f64) -> Result<f64> {
    let a = BasisLabel::new(0, n);
    let b = BasisLabel::new(1, n + 1);
    let drop = ["h1:b†a†", "h2:b†a†"];
    let gap = |eps_c: f64| diabatic_gap(p, &tms_tones(p, n, delta, eps_q, eps_c)?, h, a, b, &drop);
    find_root(gap, 0.0, 200.0, 2.0, 1e-6)?
        .ok_or_else(|| Error::Calibration(format!("no squeezing resonance below 200 MHz at eps_q = {eps_q} MHz")))
}

/// Qubit excited-state population after the gate time over an
/// `(eps_q, eps_c)` grid, starting from `|g,n>`. Columns `P_e_<model>`.
pub fn run_tms_chevron(cfg: &ExperimentConfig, s: &ChevronSettings) -> Result<SweepResult> {
    let start = Instant::now();
    let params = cfg.params()?;
    let h = cfg.hilbert;
    h.validate()?;
    cfg.solver.validate()?;
    check_axis("eps_q", &s.eps_q)?;
    if !(s.gate_time_us > 0.0 && s.gate_time_us.is_finite()) {
        return Err(Error::validation("gate_time_us", "must be > 0"));
    }
    if s.n + 1 >= h.n_c {
        return Err(Error::validation("n", format!("needs n_c > {}", s.n + 1)));
    }
    if s.models.is_empty() {
        return Err(Error::validation("models", "must not be empty"));
    }
    let eps_c = match &s.eps_c {
        Some(v) => {
            check_axis("eps_c", v)?;
            v.clone()
        }
        None => {
            let q_max = s.eps_q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let c_max = tms_ridge(&params, &h, s.n, s.delta, q_max)?;
            linspace(0.0, c_max, s.eps_q.len())
        }
    };
    let mut result = SweepResult::new(
        "tms_chevron",
        vec![Axis::new("eps_q_MHz", s.eps_q.clone()), Axis::new("eps_c_MHz", eps_c.clone())],
    );
    result.models = model_names(&s.models);
    let psi0 = basis_state(&h, BasisLabel::new(0, s.n))?;
    let cells: Vec<(f64, f64)> = s.eps_q.iter().flat_map(|&q| eps_c.iter().map(move |&c| (q, c))).collect();
    let mut stats = SolverStats::default();
    for &model in &s.models {
        let out: Vec<Result<(f64, SolverStats)>> = cells
            .par_iter()
            .map(|&(eq, ec)| {
                let tones = tms_tones(&params, s.n, s.delta, eq, ec)?;
                let spec = model.build(&params, &tones)?;
                let times = [0.0, s.gate_time_us];
                let (pe, st) = evolve_populations(&spec, &h, &psi0, &times, s.propagator, &cfg.solver)?;
                Ok((pe[1], st))
            })
            .collect();
        let mut pe = Vec::with_capacity(cells.len());
        for (cell, r) in out.into_iter().enumerate() {
            match r {
                Ok((p, st)) => {
                    pe.push(p);
                    stats.merge(&st);
                }
                Err(e) => {
                    pe.push(f64::NAN);
                    result.mark(cell, e.tag());
                }
            }
        }
        result.push_observable(format!("P_e_{}", model.name()), pe);
        log::info!("chevron: {} done", model.name());
    }
    result.set_meta("n", s.n);
    result.set_meta("delta_MHz", s.delta);
    result.set_meta("gate_time_us", s.gate_time_us);
    result.set_meta("eps_c_auto", s.eps_c.is_none());
    result.set_meta("propagator", s.propagator);
    finish(&mut result, cfg, start, Some(stats));
    Ok(result)
}

// ---------------------------------------------------------------------------
// Beam splitting

#[derive(Debug, Clone, PartialEq)]
pub struct BeamsplitSettings {
    /// Common tone detuning Δ_q = Δ_c (MHz).
    pub delta: f64,
    pub eps_q: f64,
    pub eps_c: f64,
    /// Cavity tone offset; `None` calibrates it first.
    pub nu_corr: Option<f64>,
    pub tau_us: Vec<f64>,
    /// Extra cavity offset δω_cd around the corrected point (MHz).
    pub offsets: Vec<f64>,
    pub model: ModelKind,
    pub propagator: Propagator,
}

impl Default for BeamsplitSettings {
    fn default() -> Self {
        BeamsplitSettings {
            delta: -50.0,
            eps_q: 10.0,
            eps_c: 20.0,
            nu_corr: None,
            tau_us: linspace(0.0, 20.0, 41),
            offsets: linspace(-1.0, 1.0, 41),
            model: ModelKind::Late,
            propagator: Propagator::Exact,
        }
    }
}

/// Calibration scan settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationScan {
    /// Half-width of the fine scan around the diabatic guess (MHz).
    pub span: f64,
    pub points: usize,
    /// Window over which the peak transfer is taken (us).
    pub tau_max: f64,
    pub time_samples: usize,
}

impl Default for CalibrationScan {
    fn default() -> Self {
        CalibrationScan {
            span: 0.5,
            points: 41,
            tau_max: 20.0,
            time_samples: 801,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    /// Cavity tone offset that maximizes the transfer (MHz).
    pub nu_corr_mhz: f64,
    /// Offset where the uncoupled levels cross (MHz).
    pub diabatic_guess_mhz: f64,
    /// Peak `P_e` over the window at the calibrated offset.
    pub peak_transfer: f64,
    pub reference_mhz: f64,
    /// `(offset, peak P_e)` pairs of the fine scan.
    pub scan: Vec<(f64, f64)>,
}

fn bs_tones(p: &Params, s: &BeamsplitSettings, offset: f64) -> Result<Vec<Tone>> {
    Ok(vec![
        tone(p, Mode::Qubit, s.eps_q, s.delta)?,
        tone(p, Mode::Cavity, s.eps_c, s.delta + offset)?,
    ])
}

/// Largest qubit excited population reached from `|g,1>` within the window,
/// from exact propagation of the static drive-frame Hamiltonian.
fn peak_transfer(p: &Params, h: &HilbertSpec, model: ModelKind, tones: &[Tone], scan: &CalibrationScan) -> Result<f64> {
    let spec = model.build(p, tones)?;
    let psi0 = basis_state(h, BasisLabel::new(0, 1))?;
    let times = linspace(0.0, scan.tau_max, scan.time_samples);
    let (pe, _) = evolve_populations(&spec, h, &psi0, &times, Propagator::Exact, &SolverConfig::default())?;
    Ok(pe.into_iter().fold(0.0, f64::max))
}

/// Finds the cavity tone offset that centers the `|g,1> ↔ |e,0>` transfer:
/// a diabatic root-find gives the starting point, a fine scan of the peak
/// transfer with a quadratic refinement gives the result.
pub fn calibrate_nu_corr(cfg: &ExperimentConfig, s: &BeamsplitSettings, scan: &CalibrationScan) -> Result<Calibration> {
    let p = cfg.params()?;
    let h = cfg.hilbert;
    h.validate()?;
    if s.eps_q == 0.0 && s.eps_c == 0.0 {
        return Err(Error::Calibration("both drive amplitudes are zero, there is no transfer to center".into()));
    }
    if scan.points < 3 || !(scan.span > 0.0) || !(scan.tau_max > 0.0) || scan.time_samples < 2 {
        return Err(Error::validation("calibration scan", "needs >= 3 points, span > 0 and a window > 0"));
    }
    let (a, b) = (BasisLabel::new(0, 1), BasisLabel::new(1, 0));
    let drop = ["h1:ba†", "h2:ba†"];
    let gap = |nu: f64| diabatic_gap(&p, &bs_tones(&p, s, nu)?, &h, a, b, &drop);
    let guess = find_root(gap, -40.0, 40.0, 0.5, 1e-7)?
        .ok_or_else(|| Error::Calibration("no beam-splitter resonance within ±40 MHz".into()))?;
    let offsets = linspace(guess - scan.span, guess + scan.span, scan.points);
    let peaks: Vec<Result<f64>> = offsets
        .par_iter()
        .map(|&nu| peak_transfer(&p, &h, s.model, &bs_tones(&p, s, nu)?, scan))
        .collect();
    let peaks: Vec<f64> = peaks.into_iter().collect::<Result<_>>()?;
    let k = (0..peaks.len()).max_by(|&i, &j| peaks[i].total_cmp(&peaks[j])).unwrap();
    let k = k.clamp(1, peaks.len() - 2);
    let (y0, y1, y2) = (peaks[k - 1], peaks[k], peaks[k + 1]);
    let step = offsets[1] - offsets[0];
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom < 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
    let nu = offsets[k] + shift.clamp(-1.0, 1.0) * step;
    let peak = peak_transfer(&p, &h, s.model, &bs_tones(&p, s, nu)?, scan)?;
    Ok(Calibration {
        nu_corr_mhz: nu,
        diabatic_guess_mhz: guess,
        peak_transfer: peak,
        reference_mhz: NU_CORR_REFERENCE_MHZ,
        scan: offsets.into_iter().zip(peaks).collect(),
    })
}

/// Qubit excited population over `(τ, δω_cd)` from `|g,1>` with the cavity
/// tone at `Δ + ν_corr + δω_cd`. One evolution per offset samples all gate
/// times. Column `P_e_<model>`.
pub fn run_beamsplit_map(cfg: &ExperimentConfig, s: &BeamsplitSettings) -> Result<SweepResult> {
    let start = Instant::now();
    let p = cfg.params()?;
    let h = cfg.hilbert;
    h.validate()?;
    cfg.solver.validate()?;
    check_axis("tau_us", &s.tau_us)?;
    check_axis("offsets", &s.offsets)?;
    if s.tau_us.iter().any(|t| *t < 0.0) || s.tau_us[0] > s.tau_us[s.tau_us.len() - 1] {
        return Err(Error::validation("tau_us", "must be increasing and >= 0"));
    }
    let (nu, calibration) = match s.nu_corr {
        Some(v) => (v, None),
        None => {
            let c = calibrate_nu_corr(cfg, s, &CalibrationScan::default())?;
            (c.nu_corr_mhz, Some(c))
        }
    };
    let mut result = SweepResult::new(
        "beamsplit",
        vec![Axis::new("tau_us", s.tau_us.clone()), Axis::new("delta_cd_MHz", s.offsets.clone())],
    );
    result.models = vec![s.model.name().to_string()];
    let psi0 = basis_state(&h, BasisLabel::new(0, 1))?;
    let mut grid = s.tau_us.clone();
    let prepend = grid[0] > 0.0;
    if prepend {
        grid.insert(0, 0.0);
    }
    let rows: Vec<Result<(Vec<f64>, SolverStats)>> = s
        .offsets
        .par_iter()
        .map(|&d| {
            let spec = s.model.build(&p, &bs_tones(&p, s, nu + d)?)?;
            let (mut pe, st) = evolve_populations(&spec, &h, &psi0, &grid, s.propagator, &cfg.solver)?;
            if prepend {
                pe.remove(0);
            }
            Ok((pe, st))
        })
        .collect();
    let (nt, nd) = (s.tau_us.len(), s.offsets.len());
    let mut pe = vec![f64::NAN; nt * nd];
    let mut stats = SolverStats::default();
    for (j, r) in rows.into_iter().enumerate() {
        match r {
            Ok((col, st)) => {
                stats.merge(&st);
                for (i, v) in col.into_iter().enumerate() {
                    pe[i * nd + j] = v;
                }
            }
            Err(e) => {
                for i in 0..nt {
                    result.mark(i * nd + j, e.tag());
                }
            }
        }
    }
    result.push_observable(format!("P_e_{}", s.model.name()), pe);
    result.set_meta("nu_corr_MHz", nu);
    result.set_meta("nu_corr_reference_MHz", NU_CORR_REFERENCE_MHZ);
    result.set_meta("calibration", calibration);
    result.set_meta("delta_MHz", s.delta);
    result.set_meta("eps_q_MHz", s.eps_q);
    result.set_meta("eps_c_MHz", s.eps_c);
    result.set_meta("propagator", s.propagator);
    finish(&mut result, cfg, start, Some(stats));
    Ok(result)
}

/// Interior local maxima of `v` whose topographic prominence is at least
/// `min_prominence`. Endpoints never count.
pub fn count_fringes(v: &[f64], min_prominence: f64) -> usize {
    let n = v.len();
    (1..n.saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
        .filter(|&i| {
            let mut left = v[i];
            for &x in v[..i].iter().rev() {
                if x > v[i] {
                    break;
                }
                left = left.min(x);
            }
            let mut right = v[i];
            for &x in &v[i + 1..] {
                if x > v[i] {
                    break;
                }
                right = right.min(x);
            }
            v[i] - left.max(right) >= min_prominence
        })
        .count()
}

/// Mirror axis of a row-major `rows × cols` map along its columns, as a
/// fractional column index on a half-cell lattice. Candidate axes keep at
/// least half of the columns paired; the one with the smallest mean
/// `|P(j) - P(2c - j)|` wins.
pub fn mirror_center(map: &[f64], rows: usize, cols: usize) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    for twice in 0..=(2 * (cols - 1)) {
        let c2 = twice as isize;
        let (mut sum, mut pairs) = (0.0, 0usize);
        for r in 0..rows {
            for j in 0..cols {
                let k = c2 - j as isize;
                if k <= j as isize || k >= cols as isize {
                    continue;
                }
                sum += (map[r * cols + j] - map[r * cols + k as usize]).abs();
                pairs += 1;
            }
        }
        if 2 * pairs < rows * (cols / 2) {
            continue;
        }
        let score = sum / pairs.max(1) as f64;
        if score < best.0 {
            best = (score, twice as f64 / 2.0);
        }
    }
    best.1
}

// ---------------------------------------------------------------------------
// Oracle cross-check

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub eps_q: f64,
    pub delta_q: f64,
    /// Phase-slope window (us) and sample spacing (us).
    pub duration: f64,
    pub sample_dt: f64,
    /// Integrator tolerances for the oracle runs.
    pub solver: SolverConfig,
    pub renormalize: bool,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            eps_q: 7.63,
            delta_q: -20.0,
            duration: 2.0,
            sample_dt: 1e-3,
            solver: SolverConfig {
                rtol: 1e-8,
                atol: 1e-10,
                max_step_ns: 5.0,
            },
            renormalize: true,
        }
    }
}

/// Spectral shifts of the effective models next to the oracle's phase-slope
/// shift at one qubit drive point (all MHz).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub eps_q_mhz: f64,
    pub delta_q_mhz: f64,
    pub late_mhz: f64,
    pub late_no_h2_mhz: f64,
    pub early_mhz: f64,
    pub oracle_mhz: f64,
    /// `|late - oracle| / |oracle|`.
    pub relative_error: f64,
    pub oracle_fit_residual: f64,
    pub solver_stats: SolverStats,
    pub runtime_s: f64,
}

/// Runs the late, late-without-H2 and early models spectrally and the oracle
/// by phase slopes, driven and undriven.
pub fn run_oracle_check(cfg: &ExperimentConfig, s: &OracleSettings) -> Result<OracleReport> {
    let start = Instant::now();
    let p = cfg.params()?;
    let h = cfg.hilbert;
    h.validate()?;
    s.solver.validate()?;
    let tones = vec![tone(&p, Mode::Qubit, s.eps_q, s.delta_q)?];
    let spectral = |m: ModelKind| stark_shift(&p, &tones, m, &h, None).map(|r| r.qubit_mhz);
    let (late, no_h2, early) = (spectral(ModelKind::Late)?, spectral(ModelKind::LateNoH2)?, spectral(ModelKind::Early)?);

    let opts = OracleOptions { renormalize: s.renormalize };
    let g0 = BasisLabel::new(0, 0);
    let e0 = BasisLabel::new(1, 0);
    let slope = |spec: &HamiltonianSpec| {
        let ps = PhaseSlopeOptions {
            duration: s.duration,
            dt_max: resolving_step(spec),
            sample_dt: s.sample_dt,
        };
        phase_slope_frequency(spec, &h, g0, e0, &ps, &s.solver)
    };
    let driven = slope(&build_oracle(&p, &tones, &h, opts)?)?;
    let undriven = slope(&build_oracle(&p, &[], &h, opts)?)?;
    let oracle = driven.frequency_mhz - undriven.frequency_mhz;
    let mut stats = driven.stats;
    stats.merge(&undriven.stats);
    Ok(OracleReport {
        eps_q_mhz: s.eps_q,
        delta_q_mhz: s.delta_q,
        late_mhz: late,
        late_no_h2_mhz: no_h2,
        early_mhz: early,
        oracle_mhz: oracle,
        relative_error: (late - oracle).abs() / oracle.abs(),
        oracle_fit_residual: driven.fit_residual.max(undriven.fit_residual),
        solver_stats: stats,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
