use super::*;
use crate::fockspace::basis_state;
use crate::hamiltonian::{build_late_rwa, build_undriven, HamiltonianTerm, TermOp};
use crate::model::{mhz_to_angular, validate_params, DriveTone, Params, SystemParams, Tone};

fn params() -> Params {
    validate_params(&SystemParams::reference_device()).unwrap()
}

fn custom(terms: Vec<HamiltonianTerm>) -> HamiltonianSpec {
    let mut s = HamiltonianSpec::new(params(), &[], "test");
    s.terms = terms;
    s
}

fn number_c(w: f64) -> HamiltonianSpec {
    custom(vec![HamiltonianTerm::hermitian("n", w, TermOp::Monomial(Monomial::new(0, 0, 1, 1)))])
}

fn grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

#[test]
fn zero_hamiltonian_is_identity() {
    let h = HilbertSpec::new(3, 3);
    let psi = basis_state(&h, BasisLabel::new(1, 2)).unwrap();
    let tr = propagate_schrodinger(&custom(vec![]), &h, &psi, &grid(1.0, 4), &SolverConfig::default()).unwrap();
    for s in &tr.states {
        assert_eq!(s, &psi);
    }
}

#[test]
fn number_operator_phase() {
    let h = HilbertSpec::new(1, 3);
    let w = mhz_to_angular(3.0);
    let psi = basis_state(&h, BasisLabel::new(0, 1)).unwrap();
    let tr = propagate_schrodinger(&number_c(w), &h, &psi, &grid(2.0, 8), &SolverConfig::default()).unwrap();
    for (t, s) in tr.times.iter().zip(&tr.states) {
        assert!((s[1] - C64::from_polar(1.0, -w * t)).norm() < 1e-8);
    }
}

#[test]
fn resonant_rabi() {
    let h = HilbertSpec::new(2, 1);
    let omega = mhz_to_angular(1.3);
    let spec = custom(vec![HamiltonianTerm::paired(
        "drive",
        C64::new(omega / 2.0, 0.0),
        0.0,
        TermOp::Monomial(Monomial::new(1, 0, 0, 0)),
    )]);
    let psi = basis_state(&h, BasisLabel::new(0, 0)).unwrap();
    let tr = propagate_schrodinger(&spec, &h, &psi, &grid(3.0, 30), &SolverConfig::default()).unwrap();
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let pe = s[1].norm_sqr();
        assert!((pe - (omega * t / 2.0).sin().powi(2)).abs() < 1e-6);
    }
}

#[test]
fn norm_drift_over_ten_microseconds() {
    let p = params();
    let h = HilbertSpec::new(4, 8);
    let tones: Vec<Tone> = [DriveTone::new(Mode::Qubit, 6.0, -20.0), DriveTone::new(Mode::Cavity, 20.0, 18.0)]
        .iter()
        .map(|d| Tone::from_config(d, &p).unwrap())
        .collect();
    let spec = build_late_rwa(&p, &tones, true).unwrap();
    let psi = basis_state(&h, BasisLabel::new(0, 0)).unwrap();
    let tr = propagate_schrodinger(&spec, &h, &psi, &grid(10.0, 20), &SolverConfig::default()).unwrap();
    assert!(tr.drift < 1e-8, "drift {}", tr.drift);
}

#[test]
fn tolerance_halving_is_converged() {
    let p = params();
    let h = HilbertSpec::new(4, 6);
    let tones: Vec<Tone> = [DriveTone::new(Mode::Qubit, 6.0, -20.0), DriveTone::new(Mode::Cavity, 20.0, 18.0)]
        .iter()
        .map(|d| Tone::from_config(d, &p).unwrap())
        .collect();
    let spec = build_late_rwa(&p, &tones, true).unwrap();
    let psi = basis_state(&h, BasisLabel::new(0, 0)).unwrap();
    let base = SolverConfig::default();
    let half = SolverConfig { rtol: base.rtol / 2.0, atol: base.atol / 2.0, ..base };
    let a = propagate_schrodinger(&spec, &h, &psi, &grid(4.0, 8), &base).unwrap();
    let b = propagate_schrodinger(&spec, &h, &psi, &grid(4.0, 8), &half).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        for i in 0..h.dim() {
            assert!((x[i].norm_sqr() - y[i].norm_sqr()).abs() < 1e-6);
        }
    }
}

#[test]
fn bad_inputs() {
    let h = HilbertSpec::new(2, 2);
    let psi = basis_state(&h, BasisLabel::new(0, 0)).unwrap();
    let loose = SolverConfig { rtol: 1e-3, ..Default::default() };
    assert!(matches!(
        propagate_schrodinger(&custom(vec![]), &h, &psi, &[0.0, 1.0], &loose),
        Err(Error::Tolerance(_))
    ));
    assert!(propagate_schrodinger(&custom(vec![]), &h, &(psi.clone() * C64::new(2.0, 0.0)), &[0.0, 1.0], &SolverConfig::default()).is_err());
    assert!(propagate_schrodinger(&custom(vec![]), &h, &psi, &[0.0, 0.0], &SolverConfig::default()).is_err());
}

#[test]
fn lindblad_closed_limit_matches_schrodinger() {
    let p = params();
    let h = HilbertSpec::new(3, 4);
    let tones = vec![Tone::from_config(&DriveTone::new(Mode::Qubit, 8.0, -20.0), &p).unwrap()];
    let spec = build_late_rwa(&p, &tones, true).unwrap();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let psi = (basis_state(&h, BasisLabel::new(0, 0)).unwrap() + basis_state(&h, BasisLabel::new(1, 1)).unwrap()) * C64::new(s2, 0.0);
    let rho0 = &psi * psi.adjoint();
    let times = grid(1.0, 5);
    let tight = SolverConfig { rtol: 1e-12, atol: 1e-14, ..Default::default() };
    let a = propagate_schrodinger(&spec, &h, &psi, &times, &tight).unwrap();
    let b = propagate_lindblad(&spec, &h, &rho0, &times, &tight, Rates::default()).unwrap();
    for (psi_t, rho_t) in a.states.iter().zip(&b.states) {
        let pure = psi_t * psi_t.adjoint();
        let d = (pure - rho_t).norm();
        assert!(d < 1e-8, "diff {d}");
    }
}

#[test]
fn cavity_decay_is_exponential() {
    let h = HilbertSpec::new(1, 3);
    let kappa = mhz_to_angular(0.05);
    let one = basis_state(&h, BasisLabel::new(0, 1)).unwrap();
    let rho0 = &one * one.adjoint();
    let tr = propagate_lindblad(
        &custom(vec![]),
        &h,
        &rho0,
        &grid(10.0, 10),
        &SolverConfig::default(),
        Rates { kappa_c: kappa, ..Default::default() },
    )
    .unwrap();
    for (t, r) in tr.times.iter().zip(&tr.states) {
        let d = (r[(1, 1)].re - (-kappa * t).exp()).abs();
        assert!(d < 1e-8, "diff {d} at {t}");
    }
    assert!(tr.drift < 1e-8 * 10.0);
}

#[test]
fn displaced_dephasing_preserves_trace() {
    let p = params();
    let h = HilbertSpec::new(3, 3);
    let tones = vec![Tone::from_config(&DriveTone::new(Mode::Qubit, 7.63, -20.0), &p).unwrap()];
    let spec = build_late_rwa(&p, &tones, true).unwrap();
    let plus = (basis_state(&h, BasisLabel::new(0, 0)).unwrap() + basis_state(&h, BasisLabel::new(1, 0)).unwrap())
        * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let rho0 = &plus * plus.adjoint();
    let rates = Rates { kappa_d: mhz_to_angular(0.2), ..Default::default() };
    let tr = propagate_lindblad(&spec, &h, &rho0, &grid(2.0, 4), &SolverConfig::default(), rates).unwrap();
    assert!(tr.drift < 2e-8, "trace drift {}", tr.drift);
    assert!(tr.min_eigenvalue > -1e-6);
}

#[test]
fn undriven_dephasing_equals_plain_number_dephasing() {
    let p = params();
    let h = HilbertSpec::new(3, 2);
    let tones = vec![Tone::from_config(&DriveTone::new(Mode::Qubit, 0.0, -20.0), &p).unwrap()];
    let mut spec = build_late_rwa(&p, &tones, true).unwrap();
    let plus = (basis_state(&h, BasisLabel::new(0, 0)).unwrap() + basis_state(&h, BasisLabel::new(1, 0)).unwrap())
        * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let rho0 = &plus * plus.adjoint();
    let gamma = mhz_to_angular(0.1);
    let times = grid(1.0, 4);
    let rates = Rates { kappa_d: gamma, ..Default::default() };
    let a = propagate_lindblad(&spec, &h, &rho0, &times, &SolverConfig::default(), rates).unwrap();
    spec.tones.clear();
    let b = propagate_lindblad(&spec, &h, &rho0, &times, &SolverConfig::default(), rates).unwrap();
    for ((t, x), y) in times.iter().zip(&a.states).zip(&b.states) {
        assert_eq!(x, y);
        // Coherence between g and e decays at rate γ/2 (one excitation apart).
        let ge = x[(0, h.n_c)].norm();
        assert!((ge - 0.5 * (-gamma * t / 2.0).exp()).abs() < 1e-8);
    }
}

#[test]
fn phase_slope_of_number_operator() {
    let h = HilbertSpec::new(1, 3);
    let w = mhz_to_angular(2.5);
    let opts = PhaseSlopeOptions { duration: 2.0, dt_max: 1e-3, sample_dt: 1e-3 };
    let r = phase_slope_frequency(&number_c(w), &h, BasisLabel::new(0, 0), BasisLabel::new(0, 1), &opts, &SolverConfig::default()).unwrap();
    assert!((r.frequency_mhz - 2.5).abs() < 1e-9);
    assert!(r.fit_residual < 1e-8);
}

#[test]
fn phase_slope_matches_eigen_difference() {
    let p = params();
    let h = HilbertSpec::new(4, 4);
    let spec = build_undriven(&p);
    let opts = PhaseSlopeOptions { duration: 2.0, dt_max: 1e-2, sample_dt: 1e-3 };
    let (g, f) = (BasisLabel::new(0, 0), BasisLabel::new(2, 1));
    let r = phase_slope_frequency(&spec, &h, g, f, &opts, &SolverConfig::default()).unwrap();
    let s = eig_herm(&spec.evaluate(&h, 0.0)).unwrap();
    let e = |l: BasisLabel| {
        let i = l.index(&h).unwrap();
        let k = (0..h.dim()).max_by(|&a, &b| s.eigenvectors[(i, a)].norm().total_cmp(&s.eigenvectors[(i, b)].norm())).unwrap();
        s.eigenvalues[k]
    };
    let expect = angular_to_mhz(e(f) - e(g));
    assert!((r.frequency_mhz - expect).abs() < 1e-3);
}

#[test]
fn coarse_sampling_fails_unwrap() {
    let h = HilbertSpec::new(1, 2);
    let opts = PhaseSlopeOptions { duration: 1.0, dt_max: 1e-3, sample_dt: 0.1 };
    let r = phase_slope_frequency(&number_c(mhz_to_angular(4.0)), &h, BasisLabel::new(0, 0), BasisLabel::new(0, 1), &opts, &SolverConfig::default());
    assert!(matches!(r, Err(Error::PhaseUnwrap { .. })));
}

#[test]
fn static_propagation_matches_integrator() {
    let p = params();
    let h = HilbertSpec::new(4, 5);
    let tones: Vec<Tone> = [DriveTone::new(Mode::Qubit, 4.0, -20.0), DriveTone::new(Mode::Cavity, 19.0, 18.077)]
        .iter()
        .map(|d| Tone::from_config(d, &p).unwrap())
        .collect();
    let spec = build_late_rwa(&p, &tones, true).unwrap();
    let (dq, dc) = crate::spectra::frame_detunings(&tones).unwrap();
    let op = spec.to_drive_frame(dq, dc, true).unwrap().static_operator(&h).unwrap();
    let psi = basis_state(&h, BasisLabel::new(0, 0)).unwrap();
    let times = grid(0.2, 4);
    let exact = propagate_static(&op, &psi, &times).unwrap();
    let ode = propagate_schrodinger(&spec, &h, &psi, &times, &SolverConfig::default()).unwrap();
    for (x, y) in exact.iter().zip(&ode.states) {
        // Frames differ by diagonal phases only.
        for i in 0..h.dim() {
            assert!((x[i].norm() - y[i].norm()).abs() < 1e-8);
        }
    }
}
