//! Displacement amplitudes that cancel the linear drive terms.
//!
//! Each tone contributes a co-rotating amplitude `xi_1 ~ e^{-i Δ t}` and a
//! counter-rotating amplitude `xi_2 ~ e^{+i Δ t}`. The latter also carries a
//! fast `e^{2 i ω t}` factor in the lab-rotating frame; that factor is never
//! stored here, the Hamiltonian builders account for it when pairing phases.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Mode, Params, Tone};

/// Relative threshold on `|-2Δ - iκ| / ε` below which a drive counts as resonant.
pub const DEGENERATE_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum XiFamily {
    Co,
    Counter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiComponent {
    pub amplitude: C64,
    /// Angular frequency of the residual `e^{i rotation t}` phase.
    pub rotation: f64,
    pub family: XiFamily,
    pub target: Mode,
}

impl XiComponent {
    pub fn value(&self, t: f64) -> C64 {
        self.amplitude * C64::from_polar(1.0, self.rotation * t)
    }
}

/// Per-mode co and counter components, one of each per tone, in tone order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct XiSet {
    pub qubit_co: Vec<XiComponent>,
    pub qubit_counter: Vec<XiComponent>,
    pub cavity_co: Vec<XiComponent>,
    pub cavity_counter: Vec<XiComponent>,
}

impl XiSet {
    pub fn components(&self, mode: Mode, family: XiFamily) -> &[XiComponent] {
        match (mode, family) {
            (Mode::Qubit, XiFamily::Co) => &self.qubit_co,
            (Mode::Qubit, XiFamily::Counter) => &self.qubit_counter,
            (Mode::Cavity, XiFamily::Co) => &self.cavity_co,
            (Mode::Cavity, XiFamily::Counter) => &self.cavity_counter,
        }
    }

    fn components_mut(&mut self, mode: Mode, family: XiFamily) -> &mut Vec<XiComponent> {
        match (mode, family) {
            (Mode::Qubit, XiFamily::Co) => &mut self.qubit_co,
            (Mode::Qubit, XiFamily::Counter) => &mut self.qubit_counter,
            (Mode::Cavity, XiFamily::Co) => &mut self.cavity_co,
            (Mode::Cavity, XiFamily::Counter) => &mut self.cavity_counter,
        }
    }

    pub fn tone_count(&self, mode: Mode) -> usize {
        self.components(mode, XiFamily::Co).len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubit_co.is_empty() && self.cavity_co.is_empty()
    }
}

/// Co and counter displacement of a single tone on a mode of angular
/// frequency `mode_freq` with amplitude decay rate `kappa`.
pub fn xi_components(tone: &Tone, mode_freq: f64, kappa: f64) -> Result<(XiComponent, XiComponent)> {
    let zero = C64::new(0.0, 0.0);
    if tone.epsilon == 0.0 {
        let mk = |family, rotation| XiComponent {
            amplitude: zero,
            rotation,
            family,
            target: tone.target,
        };
        return Ok((mk(XiFamily::Co, -tone.detuning), mk(XiFamily::Counter, tone.detuning)));
    }
    let den_co = C64::new(-2.0 * tone.detuning, -kappa);
    if den_co.norm() < DEGENERATE_THRESHOLD * tone.epsilon {
        return Err(Error::DegenerateDrive {
            denominator: den_co.norm(),
        });
    }
    let den_counter = C64::new(4.0 * mode_freq + 2.0 * tone.detuning, -kappa);
    let co = XiComponent {
        amplitude: C64::from_polar(tone.epsilon, -tone.phase) / den_co,
        rotation: -tone.detuning,
        family: XiFamily::Co,
        target: tone.target,
    };
    let counter = XiComponent {
        amplitude: C64::from_polar(tone.epsilon, tone.phase) / den_counter,
        rotation: tone.detuning,
        family: XiFamily::Counter,
        target: tone.target,
    };
    Ok((co, counter))
}

pub fn build_xi_set(params: &Params, tones: &[Tone]) -> Result<XiSet> {
    let mut set = XiSet::default();
    for tone in tones {
        let (co, counter) = xi_components(
            tone,
            params.mode_frequency(tone.target),
            params.kappa(tone.target),
        )?;
        set.components_mut(tone.target, XiFamily::Co).push(co);
        set.components_mut(tone.target, XiFamily::Counter).push(counter);
    }
    Ok(set)
}

/// Sum over tones of one family's amplitudes at time `t`.
pub fn xi_value(set: &XiSet, mode: Mode, family: XiFamily, t: f64) -> C64 {
    set.components(mode, family).iter().map(|x| x.value(t)).sum()
}

/// Largest leftover coefficient of `b†` or `a†` after substituting the
/// displacement into the displaced drive Hamiltonian (rad/us).
///
/// The co family is checked in the mode-rotating frame. The counter family
/// is checked in its own frame co-moving at `2ω`, where the time derivative
/// picks up the extra `2iω` that the stored amplitude omits.
pub fn drive_cancellation_residual(set: &XiSet, tones: &[Tone], params: &Params, t: f64) -> f64 {
    let mut worst = 0.0_f64;
    for mode in [Mode::Qubit, Mode::Cavity] {
        let kappa = params.kappa(mode);
        let omega = params.mode_frequency(mode);
        let i = C64::new(0.0, 1.0);
        let mut co = C64::new(0.0, 0.0);
        for x in set.components(mode, XiFamily::Co) {
            let v = x.value(t);
            co += i * (i * x.rotation * v) + i * kappa / 2.0 * v;
        }
        let mut counter = C64::new(0.0, 0.0);
        for x in set.components(mode, XiFamily::Counter) {
            let v = x.value(t);
            counter += i * (i * (x.rotation + 2.0 * omega) * v) + i * kappa / 2.0 * v;
        }
        for tone in tones.iter().filter(|tn| tn.target == mode) {
            let phase = tone.detuning * t + tone.phase;
            co += C64::from_polar(tone.epsilon / 2.0, -phase);
            counter += C64::from_polar(tone.epsilon / 2.0, phase);
        }
        worst = worst.max(co.norm()).max(counter.norm());
    }
    worst
}
