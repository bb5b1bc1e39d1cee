//! Finite sums of rotating phasors `Σ c_k e^{i ν_k t}`.

use num_complex::Complex64 as C64;

use super::{same_rotation, HamiltonianTerm, TermOp};
use crate::displacement::{XiFamily, XiSet};
use crate::fockspace::Monomial;
use crate::model::Mode;

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Phasors(pub Vec<(C64, f64)>);

impl Phasors {
    pub fn xi(set: &XiSet, mode: Mode, family: XiFamily) -> Self {
        Phasors(
            set.components(mode, family)
                .iter()
                .map(|x| (x.amplitude, x.rotation))
                .collect(),
        )
    }

    pub fn conj(&self) -> Self {
        Phasors(self.0.iter().map(|&(c, r)| (c.conj(), -r)).collect())
    }

    pub fn mul(&self, other: &Phasors) -> Self {
        let mut out = Vec::with_capacity(self.0.len() * other.0.len());
        for &(a, ra) in &self.0 {
            for &(b, rb) in &other.0 {
                out.push((a * b, ra + rb));
            }
        }
        Phasors(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        Phasors(self.0.iter().map(|&(c, r)| (c * s, r)).collect())
    }

    pub fn add(&self, other: &Phasors) -> Self {
        Phasors(self.0.iter().chain(other.0.iter()).copied().collect())
    }

    /// `|x|²` as a phasor sum.
    pub fn abs2(&self) -> Self {
        self.conj().mul(self)
    }

    /// Combines equal rotations, snaps near-zero rotations to 0, and drops
    /// exactly vanishing coefficients. Output is ordered by first appearance.
    pub fn merged(&self) -> Self {
        let mut out: Vec<(C64, f64)> = Vec::new();
        for &(c, r) in &self.0 {
            let r = if same_rotation(r, 0.0) { 0.0 } else { r };
            match out.iter_mut().find(|e| same_rotation(e.1, r)) {
                Some(e) => e.0 += c,
                None => out.push((c, r)),
            }
        }
        out.retain(|e| e.0 != C64::new(0.0, 0.0));
        Phasors(out)
    }

    /// Static part of a real-valued phasor sum.
    #[cfg(test)]
    pub fn static_part(&self) -> f64 {
        self.merged()
            .0
            .iter()
            .filter(|e| e.1 == 0.0)
            .map(|e| e.0.re)
            .sum()
    }
}

/// Pushes `scale · P · op + h.c.` for a non-Hermitian `op`.
pub(crate) fn push_paired(
    terms: &mut Vec<HamiltonianTerm>,
    family: &'static str,
    scale: f64,
    poly: &Phasors,
    op: Monomial,
) {
    debug_assert!(!op.is_hermitian());
    for (c, r) in poly.scale(scale).merged().0 {
        terms.push(HamiltonianTerm::paired(family, c, r, TermOp::Monomial(op)));
    }
}

/// Pushes `scale · P · op` for a Hermitian `op` and a real-valued `P`.
/// The static part becomes one real term; every beat at `+ν` is emitted once
/// with `conjugate_pair`, standing in for its partner at `-ν`.
pub(crate) fn push_hermitian(
    terms: &mut Vec<HamiltonianTerm>,
    family: &'static str,
    scale: f64,
    poly: &Phasors,
    op: Monomial,
    include_beats: bool,
) {
    debug_assert!(op.is_hermitian());
    for (c, r) in poly.scale(scale).merged().0 {
        if r == 0.0 {
            if c.re != 0.0 {
                terms.push(HamiltonianTerm::hermitian(family, c.re, TermOp::Monomial(op)));
            }
        } else if r > 0.0 && include_beats {
            terms.push(HamiltonianTerm::paired(family, c, r, TermOp::Monomial(op)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs2_of_two_phasors() {
        let p = Phasors(vec![(C64::new(1.0, 0.0), 2.0), (C64::new(0.0, 0.5), -1.0)]);
        let m = p.abs2().merged();
        assert!((p.abs2().static_part() - 1.25).abs() < 1e-15);
        // beats at ±3 and the static sum
        assert_eq!(m.0.len(), 3);
        let plus = m.0.iter().find(|e| e.1 == 3.0).unwrap().0;
        let minus = m.0.iter().find(|e| e.1 == -3.0).unwrap().0;
        assert_eq!(plus, minus.conj());
    }

    #[test]
    fn merge_cancels_and_snaps() {
        let p = Phasors(vec![
            (C64::new(1.0, 0.0), 1e-13),
            (C64::new(-1.0, 0.0), 0.0),
            (C64::new(2.0, 0.0), 5.0),
        ]);
        let m = p.merged();
        assert_eq!(m.0, vec![(C64::new(2.0, 0.0), 5.0)]);
    }
}
