//! Closed and open time evolution, and the phase-slope frequency estimator.
//!
//! All states live in the displaced, mode-rotating frame of the Hamiltonian
//! they are propagated under. Populations are reported in that frame.

pub mod integrator;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::displacement::{build_xi_set, xi_value, XiFamily, XiSet};
use crate::error::{Error, Result};
use crate::fockspace::{BasisLabel, DensityMatrix, Monomial, Operator, StateVector};
use crate::hamiltonian::{CompiledHamiltonian, HamiltonianSpec};
use crate::model::{angular_to_mhz, HilbertSpec, Mode, SolverConfig};
use crate::spectra::eig_herm;
use integrator::{integrate, StepControl};

pub use integrator::SolverStats;

/// Samples of a propagation at the requested times.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub stats: SolverStats,
    /// Largest deviation of the norm (pure) or trace (mixed) from 1.
    pub drift: f64,
    /// Smallest eigenvalue of ρ seen at the output times (1 for pure states).
    pub min_eigenvalue: f64,
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::validation("t_grid", "must not be empty"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("t_grid", "must be finite and strictly increasing"));
    }
    Ok(())
}

pub(crate) fn step_control(solver: &SolverConfig, h_max: Option<f64>) -> Result<StepControl> {
    if !(1e-12..=1e-6).contains(&solver.rtol) {
        return Err(Error::Tolerance(format!("rtol {} outside [1e-12, 1e-6]", solver.rtol)));
    }
    if !(solver.atol > 0.0 && solver.atol.is_finite()) {
        return Err(Error::Tolerance(format!("atol {} must be positive", solver.atol)));
    }
    if !(solver.max_step_ns > 0.0 && solver.max_step_ns.is_finite()) {
        return Err(Error::Tolerance("max_step_ns must be positive".into()));
    }
    let cap = solver.max_step_us();
    Ok(StepControl {
        rtol: solver.rtol,
        atol: solver.atol,
        h_max: h_max.map_or(cap, |h| h.min(cap)),
    })
}

/// Integrates `dψ/dt = -i H(t) ψ`, sampling at `t_grid` (`psi0` is the state
/// at `t_grid[0]`). `h_max` further caps the step below the solver setting.
pub fn propagate_schrodinger_compiled(
    ham: &CompiledHamiltonian,
    psi0: &StateVector,
    t_grid: &[f64],
    solver: &SolverConfig,
    h_max: Option<f64>,
) -> Result<Trajectory<StateVector>> {
    check_grid(t_grid)?;
    if psi0.len() != ham.dim {
        return Err(Error::Dimension(format!("state has dimension {}, H has {}", psi0.len(), ham.dim)));
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::validation("psi0", "must be normalized"));
    }
    let ctl = step_control(solver, h_max)?;
    let minus_i = C64::new(0.0, -1.0);
    let mut states = Vec::with_capacity(t_grid.len());
    let mut drift = 0.0f64;
    let stats = integrate(
        |t, y, dy| {
            dy.fill(C64::new(0.0, 0.0));
            ham.apply_add(t, minus_i, y, dy);
        },
        psi0.as_slice(),
        t_grid,
        ctl,
        |_, _, y| {
            let v = DVector::from_column_slice(y);
            drift = drift.max((v.norm() - 1.0).abs());
            states.push(v);
            Ok(())
        },
        |_| false,
    )?;
    Ok(Trajectory {
        times: t_grid.to_vec(),
        states,
        stats,
        drift,
        min_eigenvalue: 1.0,
    })
}

pub fn propagate_schrodinger(
    spec: &HamiltonianSpec,
    h: &HilbertSpec,
    psi0: &StateVector,
    t_grid: &[f64],
    solver: &SolverConfig,
) -> Result<Trajectory<StateVector>> {
    propagate_schrodinger_compiled(&spec.compile(h), psi0, t_grid, solver, None)
}

/// Exact evolution under a time-independent Hamiltonian by
/// eigendecomposition: `ψ(t) = V e^{-iΛ(t - t₀)} V† ψ₀` at every `t_grid` time.
pub fn propagate_static(op: &Operator, psi0: &StateVector, t_grid: &[f64]) -> Result<Vec<StateVector>> {
    check_grid(t_grid)?;
    if psi0.len() != op.dim() {
        return Err(Error::Dimension(format!("state has dimension {}, H has {}", psi0.len(), op.dim())));
    }
    let eig = eig_herm(op)?;
    let v = &eig.eigenvectors;
    let coeffs = v.adjoint() * psi0;
    let t0 = t_grid[0];
    Ok(t_grid
        .iter()
        .map(|&t| {
            if t == t0 {
                return psi0.clone();
            }
            let phased = DVector::from_iterator(
                coeffs.len(),
                coeffs
                    .iter()
                    .zip(&eig.eigenvalues)
                    .map(|(c, e)| c * C64::from_polar(1.0, -e * (t - t0))),
            );
            v * phased
        })
        .collect())
}

/// Dissipation rates (angular units) for the master equation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Rates {
    pub kappa_q: f64,
    pub kappa_c: f64,
    pub kappa_d: f64,
}

struct Dissipator {
    rate: f64,
    l: DMatrix<C64>,
    ldl: DMatrix<C64>,
}

impl Dissipator {
    fn new(rate: f64, l: DMatrix<C64>) -> Self {
        let ldl = l.adjoint() * &l;
        Dissipator { rate, l, ldl }
    }

    /// `out += rate (L ρ L† - ½{L†L, ρ})`
    fn apply(&self, rho: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let half = C64::new(0.5 * self.rate, 0.0);
        let g = C64::new(self.rate, 0.0);
        *out += (&self.l * rho * self.l.adjoint()) * g;
        *out -= (&self.ldl * rho + rho * &self.ldl) * half;
    }
}

/// Integrates the master equation
/// `dρ/dt = -i[H, ρ] + κ_c D[a]ρ + κ_q D[b]ρ + κ_d D[(b† - ξ*)(b - ξ)]ρ`,
/// where the dephasing operator follows the co-rotating qubit displacement
/// `ξ_q(t)` of the Hamiltonian's tones. ρ is re-symmetrized after every
/// accepted step.
pub fn propagate_lindblad(
    spec: &HamiltonianSpec,
    h: &HilbertSpec,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    solver: &SolverConfig,
    rates: Rates,
) -> Result<Trajectory<DensityMatrix>> {
    check_grid(t_grid)?;
    let n = h.dim();
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::Dimension(format!("ρ is {}x{}, space has {n}", rho0.nrows(), rho0.ncols())));
    }
    if (rho0.trace().re - 1.0).abs() > 1e-10 || (rho0 - rho0.adjoint()).norm() > 1e-10 {
        return Err(Error::validation("rho0", "must be Hermitian with unit trace"));
    }
    if rates.kappa_q < 0.0 || rates.kappa_c < 0.0 || rates.kappa_d < 0.0 {
        return Err(Error::validation("rates", "must be >= 0"));
    }
    let ctl = step_control(solver, None)?;
    let ham = spec.compile(h);
    let b = Monomial::new(0, 1, 0, 0).to_operator(h).0;
    let a = Monomial::new(0, 0, 0, 1).to_operator(h).0;
    let num_q = Monomial::new(1, 1, 0, 0).to_operator(h).0;
    let mut fixed = Vec::new();
    if rates.kappa_c > 0.0 {
        fixed.push(Dissipator::new(rates.kappa_c, a));
    }
    if rates.kappa_q > 0.0 {
        fixed.push(Dissipator::new(rates.kappa_q, b.clone()));
    }
    let xi: XiSet = if rates.kappa_d > 0.0 {
        build_xi_set(&spec.params, &spec.tones)?
    } else {
        XiSet::default()
    };
    let ident = DMatrix::<C64>::identity(n, n);
    let dephasing = |t: f64| {
        let x = xi_value(&xi, Mode::Qubit, XiFamily::Co, t);
        // (b† - ξ*)(b - ξ) = b†b - ξ b† - ξ* b + |ξ|²
        let l = &num_q - b.adjoint() * x - &b * x.conj() + &ident * C64::new(x.norm_sqr(), 0.0);
        Dissipator::new(rates.kappa_d, l)
    };
    let static_dephasing = (rates.kappa_d > 0.0 && xi.is_empty()).then(|| dephasing(0.0));
    let minus_i = C64::new(0.0, -1.0);
    let mut states = Vec::with_capacity(t_grid.len());
    let mut drift = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let stats = integrate(
        |t, y, dy| {
            dy.fill(C64::new(0.0, 0.0));
            ham.commutator_add(t, minus_i, y, dy);
            if fixed.is_empty() && rates.kappa_d == 0.0 {
                return;
            }
            let rho = DMatrix::from_column_slice(n, n, y);
            let mut acc = DMatrix::zeros(n, n);
            for d in &fixed {
                d.apply(&rho, &mut acc);
            }
            if rates.kappa_d > 0.0 {
                match &static_dephasing {
                    Some(d) => d.apply(&rho, &mut acc),
                    None => dephasing(t).apply(&rho, &mut acc),
                }
            }
            for (o, v) in dy.iter_mut().zip(acc.iter()) {
                *o += v;
            }
        },
        rho0.as_slice(),
        t_grid,
        ctl,
        |_, t, y| {
            let rho = DMatrix::from_column_slice(n, n, y);
            drift = drift.max((rho.trace().re - 1.0).abs());
            let herm = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
            let lo = herm.symmetric_eigenvalues().min();
            if lo < -1e-6 {
                log::warn!("density matrix eigenvalue {lo:.3e} at t = {t} us");
            }
            min_eig = min_eig.min(lo);
            states.push(rho);
            Ok(())
        },
        |y| {
            for j in 0..n {
                for i in 0..j {
                    let m = (y[i + j * n] + y[j + i * n].conj()) * 0.5;
                    y[i + j * n] = m;
                    y[j + i * n] = m.conj();
                }
                y[j + j * n].im = 0.0;
            }
            true
        },
    )?;
    Ok(Trajectory {
        times: t_grid.to_vec(),
        states,
        stats,
        drift,
        min_eigenvalue: min_eig,
    })
}

/// Result of [`phase_slope_frequency`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSlope {
    /// `(E_b - E_a) / 2π` in MHz.
    pub frequency_mhz: f64,
    /// Fitted energies of the two labels (rad/us).
    pub energy_a: f64,
    pub energy_b: f64,
    /// Largest RMS residual of the two linear fits (rad).
    pub fit_residual: f64,
    pub stats: SolverStats,
}

/// Least-squares slope, intercept and RMS residual.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

/// Energy of a bare label from the unwrapped phase of `<label|ψ(t)>` when
/// the label itself is propagated.
fn label_energy(
    ham: &CompiledHamiltonian,
    h: &HilbertSpec,
    label: BasisLabel,
    times: &[f64],
    solver: &SolverConfig,
    dt_max: f64,
) -> Result<(f64, f64, SolverStats)> {
    let idx = label.index(h)?;
    let psi0 = crate::fockspace::basis_state(h, label)?;
    let mut phases = Vec::with_capacity(times.len());
    let mut prev: Option<f64> = None;
    let mut unwrapped = 0.0;
    let mut samples: Vec<C64> = Vec::with_capacity(times.len());
    let mut stats = SolverStats::default();
    // Stream the samples through the integrator's observer rather than
    // keeping every state.
    let ctl = step_control(solver, Some(dt_max))?;
    let minus_i = C64::new(0.0, -1.0);
    stats.merge(&integrate(
        |t, y, dy| {
            dy.fill(C64::new(0.0, 0.0));
            ham.apply_add(t, minus_i, y, dy);
        },
        psi0.as_slice(),
        times,
        ctl,
        |_, _, y| {
            samples.push(y[idx]);
            Ok(())
        },
        |_| false,
    )?);
    for (k, amp) in samples.iter().enumerate() {
        let t = times[k];
        if amp.norm() < 0.1 {
            return Err(Error::LowOverlap {
                label: label.to_string(),
                t,
                overlap: amp.norm(),
            });
        }
        let ph = amp.arg();
        if let Some(p) = prev {
            let mut jump = ph - p;
            jump -= std::f64::consts::TAU * (jump / std::f64::consts::TAU).round();
            if jump.abs() > std::f64::consts::FRAC_PI_2 {
                return Err(Error::PhaseUnwrap { t, jump });
            }
            unwrapped += jump;
        } else {
            unwrapped = ph;
        }
        prev = Some(ph);
        phases.push(unwrapped);
    }
    let skip = times.len() / 5;
    let (slope, _, rms) = linear_fit(&times[skip..], &phases[skip..]);
    Ok((-slope, rms, stats))
}

/// Window and resolution of a phase-slope estimate (all in us).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSlopeOptions {
    pub duration: f64,
    /// Step cap; should resolve the fastest rotation with about 20 steps.
    pub dt_max: f64,
    /// Spacing of the phase samples.
    pub sample_dt: f64,
}

/// Transition frequency `label_a → label_b` from the phase slopes of the two
/// propagated bare states. The slope is fitted over the final 80% of the window.
pub fn phase_slope_frequency(
    spec: &HamiltonianSpec,
    h: &HilbertSpec,
    label_a: BasisLabel,
    label_b: BasisLabel,
    opts: &PhaseSlopeOptions,
    solver: &SolverConfig,
) -> Result<PhaseSlope> {
    let PhaseSlopeOptions { duration, dt_max, sample_dt } = *opts;
    if !(duration > 0.0 && dt_max > 0.0 && sample_dt > 0.0) {
        return Err(Error::validation("phase_slope", "duration and steps must be > 0"));
    }
    let n = (duration / sample_dt).round().max(10.0) as usize;
    let times: Vec<f64> = (0..=n).map(|k| duration * k as f64 / n as f64).collect();
    let ham = spec.compile(h);
    let (ea, ra, sa) = label_energy(&ham, h, label_a, &times, solver, dt_max)?;
    let (eb, rb, sb) = label_energy(&ham, h, label_b, &times, solver, dt_max)?;
    let mut stats = sa;
    stats.merge(&sb);
    Ok(PhaseSlope {
        frequency_mhz: angular_to_mhz(eb - ea),
        energy_a: ea,
        energy_b: eb,
        fit_residual: ra.max(rb),
        stats,
    })
}

/// Step cap resolving the fastest rotation of `spec` with 20 steps per period.
pub fn resolving_step(spec: &HamiltonianSpec) -> f64 {
    let w = spec.max_rotation();
    if w == 0.0 {
        f64::INFINITY
    } else {
        std::f64::consts::TAU / (20.0 * w)
    }
}

#[cfg(test)]
mod tests;
