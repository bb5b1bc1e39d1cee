//! Acceptance suite. Each test prints one `PASS`/`FAIL` line and then asserts.
//!
//! Run with `cargo test --test acceptance -- --test-threads 1` to see the
//! lines in order.

use std::cell::Cell;
use std::io::Write;
use std::time::{Duration, Instant};

use cqedsim::displacement::{build_xi_set, drive_cancellation_residual, xi_value, XiFamily};
use cqedsim::dynamics::{propagate_lindblad, Rates};
use cqedsim::experiments::{
    calibrate_nu_corr, count_fringes, mirror_center, run_beamsplit_map, run_oracle_check, run_stark_amplitude_sweep,
    run_stark_detuning_sweep, run_tms_chevron, BeamsplitSettings, CalibrationScan, ChevronSettings, OracleSettings,
    StarkAmpSettings, StarkDetuningSettings,
};
use cqedsim::fockspace::{basis_state, hermiticity_defect, BasisLabel};
use cqedsim::hamiltonian::{build_oracle, build_undriven, HamiltonianSpec, ModelKind, OracleOptions};
use cqedsim::model::{
    mhz_to_angular, validate_params, DriveTone, ExperimentConfig, HilbertSpec, Mode, Params, SolverConfig,
    SystemParams, Tone,
};
use cqedsim::spectra::{frame_detunings, stark_shift};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};

const RESIDUAL_PER_EPS: f64 = 1e-10;
const RESIDUAL_CASES: u32 = 200;
const STATIC_SPREAD: f64 = 1e-15;
const HERMITIAN_DEFECT: f64 = 1e-12;
const HERMITIAN_TIMES: usize = 100;
const ORACLE_REL: f64 = 0.05;
const CONFIDENCE_DIP: f64 = 0.9;
const NEG_ALPHA_MHZ: f64 = -229.9;
const DIP_WINDOW_MHZ: f64 = 15.0;
const H2_FLOOR_KHZ: f64 = 1.0;
const CHEVRON_PEAK: f64 = 0.9;
const CHEVRON_FRINGES: usize = 2;
const FRINGE_PROMINENCE: f64 = 0.2;
const BEAMSPLIT_PEAK: f64 = 0.9;
const MIRROR_CELLS: f64 = 1.0;
const TRACE_DRIFT_PER_US: f64 = 1e-8;
const MIN_EIGENVALUE: f64 = -1e-6;
const DECAY_MATCH: f64 = 1e-8;
const TRUNC_SHIFT_KHZ: f64 = 1.0;
const TRUNC_POPULATION: f64 = 0.01;

/// Writes straight to stderr so the line shows even when libtest captures output.
fn report(name: &str, pass: bool, detail: String, elapsed: Duration) -> bool {
    let line = format!(
        "{} {name}: {detail} [{:.1} s]\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    pass
}

fn params() -> Params {
    validate_params(&SystemParams::reference_device()).unwrap()
}

fn cfg(n_c: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(SystemParams::reference_device());
    c.hilbert = HilbertSpec::new(4, n_c);
    c
}

fn tone(p: &Params, mode: Mode, eps: f64, det: f64) -> Tone {
    Tone::from_config(&DriveTone::new(mode, eps, det), p).unwrap()
}

fn arb_tone() -> impl Strategy<Value = DriveTone> {
    (
        prop_oneof![Just(Mode::Qubit), Just(Mode::Cavity)],
        0.1..30.0f64,
        prop_oneof![-400.0..-2.0f64, 2.0..400.0f64],
        -3.2..3.2f64,
    )
        .prop_map(|(m, e, d, ph)| DriveTone::new(m, e, d).with_phase(ph))
}

#[test]
fn displacement_correctness() {
    let start = Instant::now();
    let p = params();
    let mut runner = TestRunner::new(Config { cases: RESIDUAL_CASES, ..Config::default() });
    let worst = Cell::new(0.0_f64);
    let outcome = runner.run(
        &(prop::collection::vec(arb_tone(), 1..5), 0.0..50.0f64),
        |(raw, t)| {
            let tones: Vec<Tone> = raw.iter().map(|d| Tone::from_config(d, &p).unwrap()).collect();
            let set = build_xi_set(&p, &tones).unwrap();
            let eps = tones.iter().map(|t| t.epsilon).fold(0.0, f64::max);
            let r = drive_cancellation_residual(&set, &tones, &p, t) / eps;
            worst.set(worst.get().max(r));
            prop_assert!(r < RESIDUAL_PER_EPS);
            Ok(())
        },
    );
    let pass = outcome.is_ok() && start.elapsed() < Duration::from_secs(1);
    assert!(report(
        "displacement",
        pass,
        format!("{RESIDUAL_CASES} cases, worst residual/eps {:.2e} (< {RESIDUAL_PER_EPS:e})", worst.get()),
        start.elapsed()
    ));
}

#[test]
fn resonance_statics() {
    let start = Instant::now();
    let p = params();
    let spread = |dq: f64, dc: f64, conj_q: bool| {
        let set = build_xi_set(&p, &[tone(&p, Mode::Qubit, 6.0, dq), tone(&p, Mode::Cavity, 9.0, dc)]).unwrap();
        let value = |t: f64| {
            let q = xi_value(&set, Mode::Qubit, XiFamily::Co, t);
            let c = xi_value(&set, Mode::Cavity, XiFamily::Co, t);
            if conj_q { q.conj() * c } else { q * c }
        };
        let v0: C64 = value(0.0);
        (1..200).map(|k| (value(0.0377 * k as f64) - v0).norm()).fold(0.0, f64::max)
    };
    let cases = [
        (-50.0, -50.0, true, true),
        (30.0, 30.0, true, true),
        (-50.0, -45.0, true, false),
        (-50.0, 50.0, true, false),
        (-20.0, 20.0, false, true),
        (35.0, -35.0, false, true),
        (-20.0, 18.0, false, false),
        (-20.0, -20.0, false, false),
    ];
    let mut pass = true;
    for (dq, dc, conj_q, expect_static) in cases {
        let s = spread(dq, dc, conj_q);
        pass &= if expect_static { s < STATIC_SPREAD } else { s > 1e-6 };
    }
    assert!(report(
        "resonance_statics",
        pass,
        format!("{} tone pairs, static iff Δ_c = ±Δ_q", cases.len()),
        start.elapsed()
    ));
}

#[test]
fn hermiticity() {
    let start = Instant::now();
    let p = params();
    let h = HilbertSpec::new(4, 12);
    let tone_sets = [
        vec![tone(&p, Mode::Qubit, 7.63, -20.0)],
        vec![tone(&p, Mode::Qubit, 4.0, 20.0), tone(&p, Mode::Cavity, 19.0, -20.0)],
        vec![tone(&p, Mode::Qubit, 10.0, -50.0), tone(&p, Mode::Cavity, 20.0, -55.0)],
        vec![tone(&p, Mode::Qubit, 3.0, -120.0), tone(&p, Mode::Qubit, 5.0, 40.0), tone(&p, Mode::Cavity, 8.0, 25.0)],
    ];
    let mut rng = TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha);
    let mut worst = 0.0_f64;
    let mut count = 0;
    for tones in &tone_sets {
        let mut specs: Vec<HamiltonianSpec> = ModelKind::ALL.iter().map(|m| m.build(&p, tones).unwrap()).collect();
        specs.push(build_oracle(&p, tones, &h, OracleOptions::default()).unwrap());
        specs.push(build_undriven(&p));
        if tones.len() == 1 {
            let (dq, dc) = frame_detunings(tones).unwrap();
            for m in ModelKind::ALL {
                specs.push(m.build(&p, tones).unwrap().to_drive_frame(dq, dc, true).unwrap());
            }
        }
        for spec in &specs {
            for _ in 0..HERMITIAN_TIMES {
                let t = rng.random_range(0.0..100.0);
                worst = worst.max(hermiticity_defect(&spec.evaluate(&h, t)));
            }
            count += 1;
        }
    }
    let pass = worst < HERMITIAN_DEFECT && start.elapsed() < Duration::from_secs(5);
    assert!(report(
        "hermiticity",
        pass,
        format!("{count} Hamiltonians x {HERMITIAN_TIMES} times, worst defect {worst:.2e} (< {HERMITIAN_DEFECT:e})"),
        start.elapsed()
    ));
}

#[test]
fn oracle_cross_check() {
    let start = Instant::now();
    let r = run_oracle_check(&cfg(12), &OracleSettings::default()).unwrap();
    let sign = r.early_mhz.signum() != r.oracle_mhz.signum();
    let pass = r.relative_error <= ORACLE_REL && sign && start.elapsed() < Duration::from_secs(600);
    assert!(report(
        "oracle_cross_check",
        pass,
        format!(
            "late {:+.4} MHz, oracle {:+.4} MHz, rel {:.2}% (<= {}%), early {:+.4} MHz opposite sign: {sign}",
            r.late_mhz,
            r.oracle_mhz,
            100.0 * r.relative_error,
            100.0 * ORACLE_REL,
            r.early_mhz
        ),
        start.elapsed()
    ));
}

fn detuning_shape() -> (Vec<(f64, f64, f64)>, f64, f64, bool, Duration) {
    let start = Instant::now();
    let c = cfg(12);
    let p = c.params().unwrap();
    let h = c.hilbert;
    let r = run_stark_detuning_sweep(&c, &StarkDetuningSettings::default()).unwrap();
    let axis = &r.axes[0].values;
    let at = |name: &str, d: f64| {
        let k = axis.iter().position(|x| (x - d).abs() < 1e-9).unwrap();
        r.observable(name).unwrap()[k]
    };
    let (plus, minus) = (at("shift_late_kHz", 20.0), at("shift_late_kHz", -20.0));
    let conf = r.observable("confidence_late").unwrap();
    let dip = axis
        .iter()
        .zip(conf)
        .filter(|(d, _)| (*d - NEG_ALPHA_MHZ).abs() <= DIP_WINDOW_MHZ)
        .any(|(_, c)| *c < CONFIDENCE_DIP);
    let shift = |m: ModelKind, d: f64| stark_shift(&p, &[tone(&p, Mode::Qubit, 7.63, d)], m, &h, None).unwrap().qubit_mhz;
    let gaps: Vec<(f64, f64, f64)> = [-100.0, -200.0, -400.0]
        .iter()
        .map(|&d| (d, shift(ModelKind::Late, d), shift(ModelKind::Early, d)))
        .collect();
    (gaps, plus, minus, dip, start.elapsed())
}

#[test]
fn detuning_sweep_shape() {
    let (gaps, plus, minus, dip, elapsed) = detuning_shape();
    let in_budget = elapsed < Duration::from_secs(120);
    let i = plus.signum() != minus.signum() && in_budget;
    report(
        "detuning_sign_change",
        i,
        format!("late shift {plus:+.1} kHz at +20 MHz, {minus:+.1} kHz at -20 MHz"),
        elapsed,
    );
    report(
        "detuning_transition_dip",
        dip && in_budget,
        format!("confidence < {CONFIDENCE_DIP} within ±{DIP_WINDOW_MHZ} MHz of {NEG_ALPHA_MHZ} MHz: {dip}"),
        elapsed,
    );
    let diffs: Vec<f64> = gaps.iter().map(|(_, l, e)| (l - e).abs()).collect();
    let monotone = diffs.windows(2).all(|w| w[1] < w[0]);
    let detail = gaps
        .iter()
        .zip(&diffs)
        .map(|((d, l, e), g)| format!("{d}: late {l:+.4} early {e:+.4} gap {g:.4}"))
        .collect::<Vec<_>>()
        .join("; ");
    report("detuning_asymptotic_agreement", monotone && in_budget, format!("MHz {detail}"), elapsed);
    assert!(i && dip && in_budget, "sign change or transition dip failed");
    assert!(monotone, "|late - early| is not monotone over -100, -200, -400 MHz");
}

#[test]
fn h2_visibility() {
    let start = Instant::now();
    let s = StarkAmpSettings::defaults(Mode::Qubit);
    let eps_max = s.eps.iter().cloned().fold(0.0, f64::max);
    let s = StarkAmpSettings { eps: vec![eps_max], models: vec![ModelKind::Late, ModelKind::LateNoH2], ..s };
    let r = run_stark_amplitude_sweep(&cfg(12), &s).unwrap();
    let late = r.observable("shift_late_kHz").unwrap()[0];
    let no_h2 = r.observable("shift_late_no_h2_kHz").unwrap()[0];
    let gap = (late - no_h2).abs();
    assert!(report(
        "h2_visibility",
        gap > H2_FLOOR_KHZ,
        format!("eps_q {eps_max} MHz: late {late:.1} kHz, without H2 {no_h2:.1} kHz, |diff| {gap:.1} kHz (> {H2_FLOOR_KHZ})"),
        start.elapsed()
    ));
}

#[test]
fn chevron() {
    let start = Instant::now();
    let s = ChevronSettings::default();
    let r = run_tms_chevron(&cfg(12), &s).unwrap();
    let pe = r.observable("P_e_late").unwrap();
    let n = r.axes[0].values.len();
    let m = r.axes[1].values.len();
    let peak = pe.iter().cloned().fold(0.0, f64::max);
    let diagonal: Vec<f64> = (0..n).map(|i| pe[r.index(&[i, i])]).collect();
    let fringes = count_fringes(&diagonal, FRINGE_PROMINENCE);
    let corner = pe[0];
    let pass = n == 21
        && m == 21
        && s.gate_time_us == 4.2
        && s.n == 0
        && peak > CHEVRON_PEAK
        && fringes >= CHEVRON_FRINGES
        && corner == 0.0
        && start.elapsed() < Duration::from_secs(1200);
    assert!(report(
        "chevron",
        pass,
        format!("{n}x{m} grid, max P_e {peak:.3} (> {CHEVRON_PEAK}), diagonal fringes {fringes} (>= {CHEVRON_FRINGES}), corner {corner}"),
        start.elapsed()
    ));
}

#[test]
fn beam_splitter() {
    let start = Instant::now();
    let c = cfg(12);
    let s = BeamsplitSettings::default();
    let cal = calibrate_nu_corr(&c, &s, &CalibrationScan::default()).unwrap();
    let r = run_beamsplit_map(&c, &BeamsplitSettings { nu_corr: Some(cal.nu_corr_mhz), ..s.clone() }).unwrap();
    let pe = r.observable("P_e_late").unwrap();
    let (nt, nd) = (r.axes[0].values.len(), r.axes[1].values.len());
    let center = r.axes[1].values.iter().position(|d| *d == 0.0).unwrap();
    let mirror = mirror_center(pe, nt, nd);
    let line_peak = (0..nt).map(|i| pe[i * nd + center]).fold(0.0, f64::max);
    let zero_row = r.axes[0].values[0] == 0.0 && pe[..nd].iter().all(|p| *p == 0.0);
    let pass = (mirror - center as f64).abs() <= MIRROR_CELLS
        && line_peak > BEAMSPLIT_PEAK
        && zero_row
        && start.elapsed() < Duration::from_secs(1200);
    assert!(report(
        "beam_splitter",
        pass,
        format!(
            "nu_corr {:.3} MHz, mirror axis at column {mirror:.1} vs center {center}, center-line max P_e {line_peak:.3} (> {BEAMSPLIT_PEAK}), tau=0 row zero: {zero_row}",
            cal.nu_corr_mhz
        ),
        start.elapsed()
    ));
}

#[test]
fn lindblad_integrity() {
    let start = Instant::now();
    let p = params();
    let h = HilbertSpec::new(3, 4);
    let tones = vec![tone(&p, Mode::Qubit, 7.63, -20.0)];
    let spec = ModelKind::Late.build(&p, &tones).unwrap();
    let plus = (basis_state(&h, BasisLabel::new(0, 1)).unwrap() + basis_state(&h, BasisLabel::new(1, 0)).unwrap())
        * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let rho0 = &plus * plus.adjoint();
    let rates = Rates {
        kappa_q: mhz_to_angular(0.05),
        kappa_c: mhz_to_angular(0.02),
        kappa_d: mhz_to_angular(0.1),
    };
    let duration = 1.0;
    let grid: Vec<f64> = (0..=20).map(|k| duration * k as f64 / 20.0).collect();
    let tr = propagate_lindblad(&spec, &h, &rho0, &grid, &SolverConfig::default(), rates).unwrap();
    let drift_rate = tr.drift / duration;

    let kappa = mhz_to_angular(0.05);
    let hc = HilbertSpec::new(1, 3);
    let one = basis_state(&hc, BasisLabel::new(0, 1)).unwrap();
    let decay_grid: Vec<f64> = (0..=10).map(|k| k as f64).collect();
    let silent = HamiltonianSpec::new(p.clone(), &[], "zero");
    let dec = propagate_lindblad(
        &silent,
        &hc,
        &(&one * one.adjoint()),
        &decay_grid,
        &SolverConfig::default(),
        Rates { kappa_c: kappa, ..Default::default() },
    )
    .unwrap();
    let decay_err = dec
        .times
        .iter()
        .zip(&dec.states)
        .map(|(t, r)| (r[(1, 1)].re - (-kappa * t).exp()).abs())
        .fold(0.0, f64::max);
    let pass = drift_rate < TRACE_DRIFT_PER_US
        && tr.min_eigenvalue >= MIN_EIGENVALUE
        && decay_err < DECAY_MATCH
        && start.elapsed() < Duration::from_secs(60);
    assert!(report(
        "lindblad_integrity",
        pass,
        format!(
            "trace drift {drift_rate:.2e}/us (< {TRACE_DRIFT_PER_US:e}), min eig {:.2e} (>= {MIN_EIGENVALUE:e}), decay error {decay_err:.2e} (< {DECAY_MATCH:e})",
            tr.min_eigenvalue
        ),
        start.elapsed()
    ));
}

/// Largest absolute difference between matching columns, skipping NaN cells.
fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn truncation_convergence() {
    let start = Instant::now();
    let (lo, hi) = (cfg(12), cfg(14));
    let mut shift_diff = 0.0_f64;
    for target in [Mode::Qubit, Mode::Cavity] {
        let s = StarkAmpSettings::defaults(target);
        let (a, b) = (run_stark_amplitude_sweep(&lo, &s).unwrap(), run_stark_amplitude_sweep(&hi, &s).unwrap());
        for (x, y) in a.observables.iter().zip(&b.observables) {
            if x.name.contains("shift") {
                shift_diff = shift_diff.max(max_diff(&x.values, &y.values));
            }
        }
    }
    let s = StarkDetuningSettings::default();
    let (a, b) = (run_stark_detuning_sweep(&lo, &s).unwrap(), run_stark_detuning_sweep(&hi, &s).unwrap());
    for (x, y) in a.observables.iter().zip(&b.observables) {
        if x.name.contains("shift") {
            shift_diff = shift_diff.max(max_diff(&x.values, &y.values));
        }
    }

    let mut pop_diff = 0.0_f64;
    let s = ChevronSettings::default();
    let (a, b) = (run_tms_chevron(&lo, &s).unwrap(), run_tms_chevron(&hi, &s).unwrap());
    pop_diff = pop_diff.max(max_diff(a.observable("P_e_late").unwrap(), b.observable("P_e_late").unwrap()));
    let s = BeamsplitSettings::default();
    let nu = calibrate_nu_corr(&lo, &s, &CalibrationScan::default()).unwrap().nu_corr_mhz;
    let s = BeamsplitSettings { nu_corr: Some(nu), ..s };
    let (a, b) = (run_beamsplit_map(&lo, &s).unwrap(), run_beamsplit_map(&hi, &s).unwrap());
    pop_diff = pop_diff.max(max_diff(a.observable("P_e_late").unwrap(), b.observable("P_e_late").unwrap()));

    let pass = shift_diff < TRUNC_SHIFT_KHZ && pop_diff < TRUNC_POPULATION;
    assert!(report(
        "truncation_convergence",
        pass,
        format!("n_c 12 -> 14: max shift change {shift_diff:.2e} kHz (< {TRUNC_SHIFT_KHZ}), max population change {pop_diff:.2e} (< {TRUNC_POPULATION})"),
        start.elapsed()
    ));
}
