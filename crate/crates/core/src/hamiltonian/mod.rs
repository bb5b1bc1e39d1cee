//! Hamiltonians as lists of analytically rotating terms.
//!
//! A term contributes `coeff · e^{i·rotation·t} · op` and, when
//! `conjugate_pair` is set, its Hermitian conjugate as well. Operators are
//! kept symbolic (normal-ordered monomials or diagonal projectors) and only
//! materialized on a concrete truncation.

mod builders;
mod oracle;
mod phasor;

use std::fmt::Write as _;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fockspace::{BasisLabel, Monomial, Operator, SparseOp};
use crate::model::{angular_to_mhz, HilbertSpec, Params, Tone};

pub use builders::{build_diag, build_early_rwa, build_h1, build_h2, build_late_rwa, build_undriven};
pub use oracle::{build_oracle, OracleOptions};

/// Which effective model to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Late,
    LateNoH2,
    Early,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Late, ModelKind::LateNoH2, ModelKind::Early];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Late => "late",
            ModelKind::LateNoH2 => "late_no_h2",
            ModelKind::Early => "early",
        }
    }

    pub fn build(&self, params: &Params, tones: &[Tone]) -> Result<HamiltonianSpec> {
        match self {
            ModelKind::Late => build_late_rwa(params, tones, true),
            ModelKind::LateNoH2 => build_late_rwa(params, tones, false),
            ModelKind::Early => build_early_rwa(params, tones),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::validation("models", format!("unknown model `{s}`")))
    }
}

/// Two rotations closer than this (rad/us, scaled by magnitude) are the same.
pub const ROTATION_TOL: f64 = 1e-9;

pub(crate) fn same_rotation(a: f64, b: f64) -> bool {
    (a - b).abs() <= ROTATION_TOL * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermOp {
    Monomial(Monomial),
    /// `|k><k|` on a bare basis state.
    Projector(BasisLabel),
}

impl TermOp {
    pub fn qubit_charge(&self) -> i32 {
        match self {
            TermOp::Monomial(m) => m.qubit_charge(),
            TermOp::Projector(_) => 0,
        }
    }

    pub fn cavity_charge(&self) -> i32 {
        match self {
            TermOp::Monomial(m) => m.cavity_charge(),
            TermOp::Projector(_) => 0,
        }
    }

    pub fn is_hermitian(&self) -> bool {
        match self {
            TermOp::Monomial(m) => m.is_hermitian(),
            TermOp::Projector(_) => true,
        }
    }

    pub fn signature(&self) -> String {
        match self {
            TermOp::Monomial(m) => m.signature(),
            TermOp::Projector(l) => format!("|{l}><{l}|"),
        }
    }

    pub fn triplets(&self, h: &HilbertSpec) -> Vec<(usize, usize, f64)> {
        match self {
            TermOp::Monomial(m) => m.triplets(h),
            TermOp::Projector(l) => match l.index(h) {
                Ok(i) => vec![(i, i, 1.0)],
                Err(_) => Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub coeff: C64,
    pub rotation: f64,
    pub op: TermOp,
    pub conjugate_pair: bool,
    /// Operator family the term came from, e.g. `h1:b†a†`.
    pub family: &'static str,
}

impl HamiltonianTerm {
    pub fn hermitian(family: &'static str, coeff: f64, op: TermOp) -> Self {
        HamiltonianTerm {
            coeff: C64::new(coeff, 0.0),
            rotation: 0.0,
            op,
            conjugate_pair: false,
            family,
        }
    }

    pub fn paired(family: &'static str, coeff: C64, rotation: f64, op: TermOp) -> Self {
        HamiltonianTerm {
            coeff,
            rotation,
            op,
            conjugate_pair: true,
            family,
        }
    }

    pub fn is_static(&self) -> bool {
        self.rotation == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frame {
    ModeRotating,
    /// Rotating at each mode's drive detuning on top of the mode frame.
    Drive { delta_q: f64, delta_c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub terms: Vec<HamiltonianTerm>,
    pub frame: Frame,
    pub params: Params,
    pub tones: Vec<Tone>,
    pub model: &'static str,
}

impl HamiltonianSpec {
    pub fn new(params: Params, tones: &[Tone], model: &'static str) -> Self {
        HamiltonianSpec {
            terms: Vec::new(),
            frame: Frame::ModeRotating,
            params,
            tones: tones.to_vec(),
            model,
        }
    }

    pub fn extend(&mut self, other: HamiltonianSpec) {
        self.terms.extend(other.terms);
    }

    pub fn families(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for t in &self.terms {
            if !out.contains(&t.family) {
                out.push(t.family);
            }
        }
        out
    }

    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|t| t.is_static())
    }

    /// Largest |rotation| among the terms (rad/us).
    pub fn max_rotation(&self) -> f64 {
        self.terms.iter().map(|t| t.rotation.abs()).fold(0.0, f64::max)
    }

    /// Dense `H(t)`.
    pub fn evaluate(&self, h: &HilbertSpec, t: f64) -> Operator {
        let mut m = Operator::zeros(h.dim()).0;
        for term in &self.terms {
            let c = term.coeff * C64::from_polar(1.0, term.rotation * t);
            for (r, col, v) in term.op.triplets(h) {
                m[(r, col)] += c * v;
                if term.conjugate_pair {
                    m[(col, r)] += c.conj() * v;
                }
            }
        }
        Operator(m)
    }

    /// Dense static matrix; fails if any term still rotates.
    pub fn static_operator(&self, h: &HilbertSpec) -> Result<Operator> {
        if let Some(t) = self.terms.iter().find(|t| !t.is_static()) {
            return Err(Error::Frame {
                signature: t.op.signature(),
                rotation_mhz: angular_to_mhz(t.rotation),
            });
        }
        Ok(self.evaluate(h, 0.0))
    }

    /// Groups terms by rotation into sparse matrices for fast `H(t)ψ`.
    pub fn compile(&self, h: &HilbertSpec) -> CompiledHamiltonian {
        let mut groups: Vec<(f64, Vec<(usize, usize, C64)>)> = Vec::new();
        let mut push = |rot: f64, trip: Vec<(usize, usize, C64)>| {
            let rot = if same_rotation(rot, 0.0) { 0.0 } else { rot };
            match groups.iter_mut().find(|g| same_rotation(g.0, rot)) {
                Some(g) => g.1.extend(trip),
                None => groups.push((rot, trip)),
            }
        };
        for term in &self.terms {
            let trip = term.op.triplets(h);
            let c = term.coeff;
            push(term.rotation, trip.iter().map(|&(r, col, v)| (r, col, c * v)).collect());
            if term.conjugate_pair {
                push(-term.rotation, trip.iter().map(|&(r, col, v)| (col, r, c.conj() * v)).collect());
            }
        }
        groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        let groups = groups
            .into_iter()
            .map(|(rotation, trip)| (rotation, SparseOp::from_triplets(h.dim(), trip)))
            .filter(|(_, op)| !op.is_empty())
            .collect();
        CompiledHamiltonian {
            dim: h.dim(),
            groups,
        }
    }

    /// Moves into the frame rotating at `delta_q` on the qubit and `delta_c`
    /// on the cavity. With `require_static`, any rotation left over is an error.
    pub fn to_drive_frame(&self, delta_q: f64, delta_c: f64, require_static: bool) -> Result<HamiltonianSpec> {
        if self.frame != Frame::ModeRotating {
            return Err(Error::Frame {
                signature: "<frame>".into(),
                rotation_mhz: f64::NAN,
            });
        }
        let mut out = HamiltonianSpec {
            terms: Vec::with_capacity(self.terms.len() + 2),
            frame: Frame::Drive { delta_q, delta_c },
            ..self.clone()
        };
        for term in &self.terms {
            let mut t = term.clone();
            t.rotation += term.op.qubit_charge() as f64 * delta_q + term.op.cavity_charge() as f64 * delta_c;
            if same_rotation(t.rotation, 0.0) || (t.rotation.abs() <= ROTATION_TOL * (delta_q.abs() + delta_c.abs())) {
                t.rotation = 0.0;
            }
            if require_static && t.rotation != 0.0 {
                return Err(Error::Frame {
                    signature: t.op.signature(),
                    rotation_mhz: angular_to_mhz(t.rotation),
                });
            }
            out.terms.push(t);
        }
        if delta_q != 0.0 {
            out.terms.push(HamiltonianTerm::hermitian(
                "frame",
                -delta_q,
                TermOp::Monomial(Monomial::new(1, 1, 0, 0)),
            ));
        }
        if delta_c != 0.0 {
            out.terms.push(HamiltonianTerm::hermitian(
                "frame",
                -delta_c,
                TermOp::Monomial(Monomial::new(0, 0, 1, 1)),
            ));
        }
        Ok(out)
    }

    /// One line per term: coefficient (MHz), rotation (MHz), signature.
    pub fn dump_terms(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            let c = t.coeff / std::f64::consts::TAU;
            let _ = writeln!(
                s,
                "{:>+.9e} {:>+.9e}i  rot {:>+.6} MHz  {}{}  [{}]",
                c.re,
                c.im,
                angular_to_mhz(t.rotation),
                t.op.signature(),
                if t.conjugate_pair { " + h.c." } else { "" },
                t.family
            );
        }
        s
    }
}

/// `H(t) = Σ_g e^{i ν_g t} M_g` with sparse `M_g`.
#[derive(Debug, Clone)]
pub struct CompiledHamiltonian {
    pub dim: usize,
    pub groups: Vec<(f64, SparseOp)>,
}

impl CompiledHamiltonian {
    fn phases(&self, t: f64) -> impl Iterator<Item = (C64, &SparseOp)> {
        self.groups.iter().map(move |(nu, op)| {
            let ph = if *nu == 0.0 { C64::new(1.0, 0.0) } else { C64::from_polar(1.0, nu * t) };
            (ph, op)
        })
    }

    /// `out += scale · H(t) x`
    pub fn apply_add(&self, t: f64, scale: C64, x: &[C64], out: &mut [C64]) {
        for (ph, op) in self.phases(t) {
            op.mul_vec_add(scale * ph, x, out);
        }
    }

    /// `out += scale · [H(t), rho]` for column-major `rho`.
    pub fn commutator_add(&self, t: f64, scale: C64, rho: &[C64], out: &mut [C64]) {
        for (ph, op) in self.phases(t) {
            op.mul_mat_add(scale * ph, rho, out);
            op.mat_mul_add(-scale * ph, rho, out);
        }
    }

    pub fn max_rotation(&self) -> f64 {
        self.groups.iter().map(|g| g.0.abs()).fold(0.0, f64::max)
    }

    pub fn dense(&self, t: f64) -> Operator {
        let mut m = Operator::zeros(self.dim).0;
        for (ph, op) in self.phases(t) {
            m += op.to_dense() * ph;
        }
        Operator(m)
    }
}
