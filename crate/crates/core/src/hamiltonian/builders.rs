//! Late- and early-RWA effective Hamiltonians in the mode-rotating frame.

use super::phasor::{push_hermitian, push_paired, Phasors};
use super::{HamiltonianSpec, HamiltonianTerm, TermOp};
use crate::displacement::{build_xi_set, XiFamily, XiSet};
use crate::error::Result;
use crate::fockspace::Monomial;
use crate::model::{Mode, Params, Tone};

const NUM_Q: Monomial = Monomial::new(1, 1, 0, 0);
const NUM_C: Monomial = Monomial::new(0, 0, 1, 1);

fn xi(set: &XiSet, mode: Mode, family: XiFamily) -> Phasors {
    Phasors::xi(set, mode, family)
}

fn diag_terms(p: &Params, set: &XiSet, include_beats: bool) -> Vec<HamiltonianTerm> {
    let mut terms = Vec::new();
    let q2 = xi(set, Mode::Qubit, XiFamily::Co).abs2();
    let c2 = xi(set, Mode::Cavity, XiFamily::Co).abs2();
    let delta_q = q2.scale(-2.0 * p.alpha).add(&c2.scale(-p.chi));
    let delta_c = c2.scale(-2.0 * p.kerr_c).add(&q2.scale(-p.chi));
    push_hermitian(&mut terms, "diag", 1.0, &delta_q, NUM_Q, include_beats);
    push_hermitian(&mut terms, "diag", 1.0, &delta_c, NUM_C, include_beats);
    for (coeff, op) in [
        (-p.alpha / 2.0, Monomial::new(2, 2, 0, 0)),
        (-p.kerr_c / 2.0, Monomial::new(0, 0, 2, 2)),
        (-p.chi, Monomial::new(1, 1, 1, 1)),
    ] {
        if coeff != 0.0 {
            terms.push(HamiltonianTerm::hermitian("diag", coeff, TermOp::Monomial(op)));
        }
    }
    for t in terms.iter_mut().filter(|t| t.conjugate_pair) {
        t.family = "diag:beat";
    }
    terms
}

/// Diagonal part with drive-induced shifts. With several tones per mode the
/// static shift uses the summed moduli and cross-tone beats are separate
/// rotating `b†b` / `a†a` terms.
pub fn build_diag(params: &Params, set: &XiSet) -> HamiltonianSpec {
    let mut spec = HamiltonianSpec::new(*params, &[], "diag");
    spec.terms = diag_terms(params, set, true);
    spec
}

/// Undriven diagonal Hamiltonian.
pub fn build_undriven(params: &Params) -> HamiltonianSpec {
    build_diag(params, &XiSet::default())
}

/// First-order displacement terms of the anharmonic and dispersive parts.
pub fn build_h1(params: &Params, set: &XiSet) -> HamiltonianSpec {
    let p = params;
    let q = xi(set, Mode::Qubit, XiFamily::Co);
    let c = xi(set, Mode::Cavity, XiFamily::Co);
    let (q2, c2) = (q.abs2(), c.abs2());
    let mut t = Vec::new();
    push_paired(&mut t, "h1:b†2", -p.alpha / 2.0, &q.mul(&q), Monomial::new(2, 0, 0, 0));
    push_paired(&mut t, "h1:b†2b", p.alpha, &q, Monomial::new(2, 1, 0, 0));
    push_paired(&mut t, "h1:a†2", -p.kerr_c / 2.0, &c.mul(&c), Monomial::new(0, 0, 2, 0));
    push_paired(&mut t, "h1:a†2a", p.kerr_c, &c, Monomial::new(0, 0, 2, 1));
    push_paired(&mut t, "h1:b†a†", -p.chi, &q.mul(&c), Monomial::new(1, 0, 1, 0));
    push_paired(&mut t, "h1:ba†", -p.chi, &q.conj().mul(&c), Monomial::new(0, 1, 1, 0));
    push_paired(&mut t, "h1:b†ba†", p.chi, &c, Monomial::new(1, 1, 1, 0));
    push_paired(&mut t, "h1:b†a†a", p.chi, &q, Monomial::new(1, 0, 1, 1));
    let lin_q = q.mul(&q2).scale(p.alpha).add(&q.mul(&c2).scale(p.chi));
    push_paired(&mut t, "h1:b†", 1.0, &lin_q, Monomial::new(1, 0, 0, 0));
    let lin_c = c.mul(&c2).scale(p.kerr_c).add(&c.mul(&q2).scale(p.chi));
    push_paired(&mut t, "h1:a†", 1.0, &lin_c, Monomial::new(0, 0, 1, 0));
    let mut spec = HamiltonianSpec::new(*params, &[], "h1");
    spec.terms = t;
    spec
}

/// Corrections from the counter-rotating halves of the drives.
pub fn build_h2(params: &Params, set: &XiSet) -> HamiltonianSpec {
    let p = params;
    let q2s = xi(set, Mode::Qubit, XiFamily::Counter).conj();
    let c2s = xi(set, Mode::Cavity, XiFamily::Counter).conj();
    let q2 = xi(set, Mode::Qubit, XiFamily::Counter);
    let mut t = Vec::new();
    push_paired(&mut t, "h2:b†2b", p.alpha, &q2s, Monomial::new(2, 1, 0, 0));
    push_paired(&mut t, "h2:a†2a", -p.kerr_c, &c2s, Monomial::new(0, 0, 2, 1));
    push_paired(&mut t, "h2:b†a†", -p.chi / 6.0, &q2s.mul(&c2s), Monomial::new(1, 0, 1, 0));
    push_paired(&mut t, "h2:ba†", -p.chi / 6.0, &q2.mul(&c2s), Monomial::new(0, 1, 1, 0));
    push_paired(&mut t, "h2:b†ba†", p.chi / 6.0, &c2s, Monomial::new(1, 1, 1, 0));
    push_paired(&mut t, "h2:b†a†a", p.chi / 6.0, &q2s, Monomial::new(1, 0, 1, 1));
    let mut spec = HamiltonianSpec::new(*params, &[], "h2");
    spec.terms = t;
    spec
}

/// `H_diag + H1 (+ H2)` in the mode-rotating frame.
pub fn build_late_rwa(params: &Params, tones: &[Tone], include_h2: bool) -> Result<HamiltonianSpec> {
    let set = build_xi_set(params, tones)?;
    let model = if include_h2 { "late" } else { "late_no_h2" };
    let mut spec = HamiltonianSpec::new(*params, tones, model);
    spec.extend(build_diag(params, &set));
    spec.extend(build_h1(params, &set));
    if include_h2 {
        spec.extend(build_h2(params, &set));
    }
    Ok(spec)
}

/// Static diagonal part plus only those first-order terms that are exactly
/// resonant in the mode-rotating frame.
pub fn build_early_rwa(params: &Params, tones: &[Tone]) -> Result<HamiltonianSpec> {
    let set = build_xi_set(params, tones)?;
    let mut spec = HamiltonianSpec::new(*params, tones, "early");
    spec.terms = diag_terms(params, &set, false);
    spec.terms
        .extend(build_h1(params, &set).terms.into_iter().filter(|t| t.is_static()));
    Ok(spec)
}
