//! Dormand–Prince 5(4) with PI step-size control.
//!
//! Coefficients and controller constants follow the classic DOPRI5 code:
//! error norm is an RMS over components weighted by `atol + rtol·max(|y|,|y_new|)`,
//! and the step factor uses `err^0.17 / err_old^0.04`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step (us).
    pub h_max: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct SolverStats {
    pub accepted: u64,
    pub rejected: u64,
    pub f_evals: u64,
}

impl SolverStats {
    pub fn merge(&mut self, other: &SolverStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.f_evals += other.f_evals;
    }
}

fn axpy_into(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..out.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrates `dy/dt = f(t, y)` from `t_out[0]` through every time in `t_out`,
/// landing exactly on each. `observe(i, t, y)` sees the state at `t_out[i]`;
/// `on_accept` may adjust the state after each accepted step and returns
/// whether it did.
pub fn integrate<F, O, A>(
    mut f: F,
    y0: &[C64],
    t_out: &[f64],
    ctl: StepControl,
    mut observe: O,
    mut on_accept: A,
) -> Result<SolverStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    O: FnMut(usize, f64, &[C64]) -> Result<()>,
    A: FnMut(&mut [C64]) -> bool,
{
    let n = y0.len();
    let mut stats = SolverStats::default();
    if t_out.is_empty() {
        return Ok(stats);
    }
    let mut t = t_out[0];
    let mut y = y0.to_vec();
    observe(0, t, &y)?;
    if t_out.len() == 1 {
        return Ok(stats);
    }
    let zero = C64::new(0.0, 0.0);
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut ys = vec![zero; n];
    let mut ynew = vec![zero; n];

    f(t, &y, &mut k1);
    stats.f_evals += 1;

    let span = t_out[t_out.len() - 1] - t;
    let mut h = initial_step(&y, &k1, ctl, span);
    let mut err_old: f64 = 1e-4;
    let mut next = 1;
    let mut last_rejected = false;

    while next < t_out.len() {
        let target = t_out[next];
        let remaining = target - t;
        // Stretch slightly rather than leave a sliver before the output time.
        let hit = h * 1.01 >= remaining;
        let step = if hit { remaining } else { h };
        if step < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h: step });
        }

        axpy_into(&mut ys, &y, step, &[(A21, &k1)]);
        f(t + C2 * step, &ys, &mut k2);
        axpy_into(&mut ys, &y, step, &[(A31, &k1), (A32, &k2)]);
        f(t + C3 * step, &ys, &mut k3);
        axpy_into(&mut ys, &y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        f(t + C4 * step, &ys, &mut k4);
        axpy_into(&mut ys, &y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        f(t + C5 * step, &ys, &mut k5);
        axpy_into(&mut ys, &y, step, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        let t_new = if hit { target } else { t + step };
        f(t_new, &ys, &mut k6);
        axpy_into(&mut ynew, &y, step, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        f(t_new, &ynew, &mut k7);
        stats.f_evals += 6;

        let mut sum = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
            let sc = ctl.atol + ctl.rtol * y[i].norm().max(ynew[i].norm());
            sum += (e.norm() / sc).powi(2);
        }
        let err = (sum / n as f64).sqrt();

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / err_old.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (step / fac).min(ctl.h_max);
            if last_rejected {
                h_new = h_new.min(step);
            }
            err_old = err.max(1e-4);
            stats.accepted += 1;
            last_rejected = false;
            t = t_new;
            std::mem::swap(&mut y, &mut ynew);
            if on_accept(&mut y) {
                f(t, &y, &mut k1);
                stats.f_evals += 1;
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            if hit {
                observe(next, t, &y)?;
                next += 1;
                // A clamped step says nothing about the natural step size.
                h = h_new.max(h.min(ctl.h_max));
            } else {
                h = h_new;
            }
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h = step / (fac11 / SAFE).min(1.0 / FAC_MIN);
        }
        if !h.is_finite() {
            return Err(Error::StepSizeUnderflow { t, h });
        }
    }
    Ok(stats)
}

fn initial_step(y: &[C64], f0: &[C64], ctl: StepControl, span: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..y.len() {
        let sc = ctl.atol + ctl.rtol * y[i].norm();
        d0 += (y[i].norm() / sc).powi(2);
        d1 += (f0[i].norm() / sc).powi(2);
    }
    let n = y.len().max(1) as f64;
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(ctl.h_max).min(span.abs()).max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctl(rtol: f64) -> StepControl {
        StepControl {
            rtol,
            atol: rtol * 1e-2,
            h_max: 1.0,
        }
    }

    #[test]
    fn exponential_decay_hits_output_times() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.37).collect();
        let mut seen = Vec::new();
        integrate(
            |_, y, dy| dy[0] = -y[0],
            &[C64::new(1.0, 0.0)],
            &times,
            ctl(1e-10),
            |i, t, y| {
                assert_eq!(t, times[i]);
                seen.push((t, y[0]));
                Ok(())
            },
            |_| false,
        )
        .unwrap();
        assert_eq!(seen.len(), times.len());
        for (t, y) in seen {
            assert!((y.re - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn oscillator_phase_and_stats() {
        let w = 50.0;
        let mut last = C64::new(0.0, 0.0);
        let stats = integrate(
            |_, y, dy| dy[0] = C64::new(0.0, -w) * y[0],
            &[C64::new(1.0, 0.0)],
            &[0.0, 2.0],
            ctl(1e-11),
            |_, _, y| {
                last = y[0];
                Ok(())
            },
            |_| false,
        )
        .unwrap();
        assert!((last - C64::from_polar(1.0, -w * 2.0)).norm() < 1e-8);
        assert!(stats.accepted > 0);
        assert_eq!(stats.f_evals, 1 + 6 * (stats.accepted + stats.rejected));
    }

    #[test]
    fn stiff_blowup_underflows() {
        let r = integrate(
            |t, _, dy| dy[0] = C64::new(1.0 / (1.0 - t).powi(2), 0.0),
            &[C64::new(1.0, 0.0)],
            &[0.0, 2.0],
            ctl(1e-10),
            |_, _, _| Ok(()),
            |_| false,
        );
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. })));
    }
}
