//! Truncated two-mode Fock space.
//!
//! The tensor ordering is qubit-major: basis state `|q, c>` (qubit level `q`,
//! cavity photon number `c`) sits at index `q * n_c + c`. Every conversion
//! between labels and indices goes through [`BasisLabel::index`].

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::HilbertSpec;

/// Largest total dimension accepted by [`build_mode_ops`] unless overridden.
pub const DEFAULT_DIM_CAP: usize = 4096;

pub type StateVector = DVector<C64>;
pub type DensityMatrix = DMatrix<C64>;

const QUBIT_LETTERS: [char; 4] = ['g', 'e', 'f', 'h'];

/// Bare product-basis label `|q, c>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisLabel {
    pub q: usize,
    pub c: usize,
}

impl BasisLabel {
    pub const fn new(q: usize, c: usize) -> Self {
        BasisLabel { q, c }
    }

    pub fn index(&self, h: &HilbertSpec) -> Result<usize> {
        if self.q >= h.n_q || self.c >= h.n_c {
            return Err(Error::Dimension(format!(
                "label {self} outside truncation ({} x {})",
                h.n_q, h.n_c
            )));
        }
        Ok(self.q * h.n_c + self.c)
    }

    pub fn from_index(h: &HilbertSpec, idx: usize) -> Self {
        BasisLabel {
            q: idx / h.n_c,
            c: idx % h.n_c,
        }
    }

    /// Accepts `g0`, `e,1`, `|f,2>`, `|e,0⟩`, or `q5c3` for qubit levels
    /// beyond `h`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Label(s.to_string());
        let t: String = s
            .trim()
            .trim_start_matches('|')
            .trim_end_matches(['>', '⟩'])
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .collect();
        if let Some(rest) = t.strip_prefix('q') {
            let (q, c) = rest.split_once('c').ok_or_else(bad)?;
            return Ok(BasisLabel {
                q: q.parse().map_err(|_| bad())?,
                c: c.parse().map_err(|_| bad())?,
            });
        }
        let mut chars = t.chars();
        let letter = chars.next().ok_or_else(bad)?;
        let q = QUBIT_LETTERS
            .iter()
            .position(|&l| l == letter)
            .ok_or_else(bad)?;
        let c = chars.as_str().parse().map_err(|_| bad())?;
        Ok(BasisLabel { q, c })
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match QUBIT_LETTERS.get(self.q) {
            Some(l) => write!(f, "{l}{}", self.c),
            None => write!(f, "q{}c{}", self.q, self.c),
        }
    }
}

/// Dense square operator on the full two-mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(pub DMatrix<C64>);

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Operator(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn dag(&self) -> Operator {
        Operator(self.0.adjoint())
    }

    pub fn scale(&self, c: C64) -> Operator {
        Operator(&self.0 * c)
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl std::ops::Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

/// Normal-ordered monomial `b†^bd b^b a†^ad a^a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub bd: u8,
    pub b: u8,
    pub ad: u8,
    pub a: u8,
}

impl Monomial {
    pub const fn new(bd: u8, b: u8, ad: u8, a: u8) -> Self {
        Monomial { bd, b, ad, a }
    }

    pub fn adjoint(&self) -> Self {
        Monomial {
            bd: self.b,
            b: self.bd,
            ad: self.a,
            a: self.ad,
        }
    }

    pub fn is_hermitian(&self) -> bool {
        self.bd == self.b && self.ad == self.a
    }

    pub fn degree(&self) -> u8 {
        self.bd + self.b + self.ad + self.a
    }

    /// Net qubit excitation change.
    pub fn qubit_charge(&self) -> i32 {
        self.bd as i32 - self.b as i32
    }

    /// Net cavity excitation change.
    pub fn cavity_charge(&self) -> i32 {
        self.ad as i32 - self.a as i32
    }

    pub fn signature(&self) -> String {
        format!("b†{} b{} a†{} a{}", self.bd, self.b, self.ad, self.a)
    }

    /// Nonzero entries `(row, col, value)` on the truncated space.
    pub fn triplets(&self, h: &HilbertSpec) -> Vec<(usize, usize, f64)> {
        let q = single_mode_entries(h.n_q, self.bd, self.b);
        let c = single_mode_entries(h.n_c, self.ad, self.a);
        let mut out = Vec::with_capacity(q.len() * c.len());
        for &(qr, qc, qv) in &q {
            for &(cr, cc, cv) in &c {
                out.push((qr * h.n_c + cr, qc * h.n_c + cc, qv * cv));
            }
        }
        out
    }

    pub fn to_operator(&self, h: &HilbertSpec) -> Operator {
        let mut m = DMatrix::zeros(h.dim(), h.dim());
        for (r, c, v) in self.triplets(h) {
            m[(r, c)] = C64::new(v, 0.0);
        }
        Operator(m)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.signature())
    }
}

/// `<m| (x†)^create x^annihilate |n>` on an `levels`-dimensional ladder.
fn single_mode_entries(levels: usize, create: u8, annihilate: u8) -> Vec<(usize, usize, f64)> {
    let (create, annihilate) = (create as usize, annihilate as usize);
    let mut out = Vec::new();
    for n in annihilate..levels {
        let mid = n - annihilate;
        let m = mid + create;
        if m >= levels {
            continue;
        }
        // sqrt(n!/mid!) * sqrt(m!/mid!)
        let mut v = 1.0;
        for k in (mid + 1)..=n {
            v *= (k as f64).sqrt();
        }
        for k in (mid + 1)..=m {
            v *= (k as f64).sqrt();
        }
        out.push((m, n, v));
    }
    out
}

/// Embedded ladder and number operators for both modes.
#[derive(Debug, Clone)]
pub struct ModeOps {
    pub hilbert: HilbertSpec,
    pub a: Operator,
    pub a_dag: Operator,
    pub n_c_op: Operator,
    pub b: Operator,
    pub b_dag: Operator,
    pub n_q_op: Operator,
    pub identity: Operator,
}

impl ModeOps {
    pub fn dim(&self) -> usize {
        self.hilbert.dim()
    }

    pub fn basis_state(&self, label: BasisLabel) -> Result<StateVector> {
        basis_state(&self.hilbert, label)
    }

    /// Projector onto qubit level `q`, identity on the cavity.
    pub fn qubit_projector(&self, q: usize) -> Operator {
        let h = &self.hilbert;
        let mut m = DMatrix::zeros(h.dim(), h.dim());
        if q < h.n_q {
            for c in 0..h.n_c {
                let i = q * h.n_c + c;
                m[(i, i)] = C64::new(1.0, 0.0);
            }
        }
        Operator(m)
    }
}

pub fn build_mode_ops(h: &HilbertSpec) -> Result<ModeOps> {
    build_mode_ops_with_cap(h, DEFAULT_DIM_CAP)
}

pub fn build_mode_ops_with_cap(h: &HilbertSpec, cap: usize) -> Result<ModeOps> {
    if h.n_q == 0 || h.n_c == 0 {
        return Err(Error::Dimension("mode truncation must be >= 1".into()));
    }
    if h.dim() > cap {
        return Err(Error::Dimension(format!(
            "total dimension {} exceeds cap {cap}",
            h.dim()
        )));
    }
    let b = Monomial::new(0, 1, 0, 0).to_operator(h);
    let a = Monomial::new(0, 0, 0, 1).to_operator(h);
    Ok(ModeOps {
        hilbert: *h,
        a_dag: a.dag(),
        n_c_op: Monomial::new(0, 0, 1, 1).to_operator(h),
        a,
        b_dag: b.dag(),
        n_q_op: Monomial::new(1, 1, 0, 0).to_operator(h),
        b,
        identity: Operator::identity(h.dim()),
    })
}

pub fn basis_state(h: &HilbertSpec, label: BasisLabel) -> Result<StateVector> {
    let mut v = DVector::zeros(h.dim());
    v[label.index(h)?] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Max-norm of `op - op†`.
pub fn hermiticity_defect(op: &Operator) -> f64 {
    let m = op.matrix();
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Anything an expectation value can be taken in.
pub trait QuantumState {
    fn dim(&self) -> usize;
    fn expectation_unchecked(&self, op: &Operator) -> C64;
}

impl QuantumState for StateVector {
    fn dim(&self) -> usize {
        self.len()
    }

    fn expectation_unchecked(&self, op: &Operator) -> C64 {
        self.dotc(&(op.matrix() * self))
    }
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn expectation_unchecked(&self, op: &Operator) -> C64 {
        (op.matrix() * self).trace()
    }
}

/// `<psi|op|psi>` or `Tr(op rho)`.
pub fn expectation<S: QuantumState>(op: &Operator, state: &S) -> Result<C64> {
    if op.dim() != state.dim() {
        return Err(Error::Dimension(format!(
            "operator is {0}x{0}, state has dimension {1}",
            op.dim(),
            state.dim()
        )));
    }
    let v = state.expectation_unchecked(op);
    debug_assert!(
        hermiticity_defect(op) > 1e-12 || v.im.abs() < 1e-10,
        "Hermitian expectation has imaginary part {}",
        v.im
    );
    Ok(v)
}

/// Compressed-row sparse matrix used on the hot path of the integrators.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOp {
    /// Builds from triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(dim: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|t| t.2 != C64::new(0.0, 0.0));
        let mut row_ptr = vec![0; dim + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOp {
            dim,
            row_ptr,
            cols: merged.iter().map(|t| t.1).collect(),
            vals: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut trip = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != C64::new(0.0, 0.0) {
                    trip.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), trip)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn adjoint(&self) -> SparseOp {
        SparseOp::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// `out += scale * self * x`
    pub fn mul_vec_add(&self, scale: C64, x: &[C64], out: &mut [C64]) {
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[r] += scale * acc;
        }
    }

    /// `out += scale * self * m` for column-major `m` (dim x dim).
    pub fn mul_mat_add(&self, scale: C64, m: &[C64], out: &mut [C64]) {
        let n = self.dim;
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = scale * self.vals[k];
                let c = self.cols[k];
                for j in 0..n {
                    out[r + j * n] += v * m[c + j * n];
                }
            }
        }
    }

    /// `out += scale * m * self` for column-major `m` (dim x dim).
    pub fn mat_mul_add(&self, scale: C64, m: &[C64], out: &mut [C64]) {
        let n = self.dim;
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = scale * self.vals[k];
                let c = self.cols[k];
                // (m * S)[i, c] += m[i, r] * S[r, c]
                let (src, dst) = (r * n, c * n);
                for i in 0..n {
                    out[dst + i] += v * m[src + i];
                }
            }
        }
    }
}
