//! Hermitian eigenanalysis, dressed-state tracking and ac Stark shifts.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fockspace::{hermiticity_defect, BasisLabel, Operator};
use crate::hamiltonian::{HamiltonianSpec, ModelKind};
use crate::model::{angular_to_mhz, HilbertSpec, Mode, Params, Tone};

/// Inputs with a larger Hermiticity defect (relative to their norm) are rejected.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Assignments whose squared overlap falls below this are flagged.
pub const CONFIDENCE_FLOOR: f64 = 0.5;
/// Eigenvalues closer than this (relative to the spectral radius) form one cluster.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Ascending, angular units.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub eigenvectors: DMatrix<C64>,
}

impl SpectrumResult {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.eigenvectors.column(k).into_owned()
    }
}

/// Diagonalizes a Hermitian operator.
///
/// Inside an exactly degenerate eigenspace the basis is rotated to line up
/// with bare basis states, so that labels of degenerate bare levels are
/// well defined.
pub fn eig_herm(h: &Operator) -> Result<SpectrumResult> {
    let scale = h.matrix().norm().max(1.0);
    let defect = hermiticity_defect(h);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { defect });
    }
    // Exact Hermitian part; the defect is already known to be tiny.
    let m = (h.matrix() + h.matrix().adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    let radius = eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs())).max(1.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eigenvalues[end] - eigenvalues[start] <= DEGENERACY_TOL * radius {
            end += 1;
        }
        if end - start > 1 {
            align_cluster(&mut vectors, start, end);
        }
        start = end;
    }
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors: vectors,
    })
}

/// Rotates columns `start..end` so that, greedily, each new column is the
/// normalized projection of the bare state with the largest remaining weight.
fn align_cluster(v: &mut DMatrix<C64>, start: usize, end: usize) {
    let n = v.nrows();
    let mut basis: Vec<DVector<C64>> = Vec::new();
    let cluster: Vec<DVector<C64>> = (start..end).map(|k| v.column(k).into_owned()).collect();
    let mut used = vec![false; n];
    while basis.len() < cluster.len() {
        // projection of each unused bare state onto the cluster, minus what is
        // already spanned by the chosen columns
        let mut best: Option<(f64, DVector<C64>, usize)> = None;
        for i in 0..n {
            if used[i] {
                continue;
            }
            let mut p = DVector::zeros(n);
            for c in &cluster {
                p += c * c[i].conj();
            }
            for b in &basis {
                let ov = b.dotc(&p);
                p -= b * ov;
            }
            let w = p.norm();
            if best.as_ref().is_none_or(|(bw, _, _)| w > *bw + 1e-12) {
                best = Some((w, p, i));
            }
        }
        let (w, p, i) = best.expect("cluster dimension never exceeds space dimension");
        used[i] = true;
        if w < 1e-8 {
            break;
        }
        basis.push(p / C64::new(w, 0.0));
    }
    if basis.len() == cluster.len() {
        for (k, b) in basis.into_iter().enumerate() {
            v.set_column(start + k, &b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub label: BasisLabel,
    pub index: usize,
    /// Squared overlap of the assigned eigenvector with the bare state.
    pub confidence: f64,
    /// Squared overlap with the tracking reference used for the assignment.
    pub reference_overlap: f64,
    pub ambiguous: bool,
}

/// Reference for [`track_dressed`].
pub enum TrackReference<'a> {
    /// Match against bare product states.
    Bare,
    /// Continue from eigenvectors of a previous sweep point, one per label.
    Previous(&'a [DVector<C64>]),
}

fn greedy_assign(scores: &[Vec<f64>], eigenvalues: &[f64]) -> Vec<usize> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (li, row) in scores.iter().enumerate() {
        for (k, &s) in row.iter().enumerate() {
            pairs.push((li, k, s));
        }
    }
    pairs.sort_by(|a, b| {
        if (a.2 - b.2).abs() <= 1e-9 {
            eigenvalues[a.1].total_cmp(&eigenvalues[b.1]).then(a.0.cmp(&b.0))
        } else {
            b.2.total_cmp(&a.2)
        }
    });
    let mut out = vec![usize::MAX; scores.len()];
    let mut taken = vec![false; eigenvalues.len()];
    for (li, k, _) in pairs {
        if out[li] == usize::MAX && !taken[k] {
            out[li] = k;
            taken[k] = true;
        }
    }
    out
}

/// Maps each label to one eigenvector by maximum squared overlap with the
/// reference. The mapping is injective; ties go to the smaller eigenvalue.
pub fn track_dressed(
    spec: &SpectrumResult,
    h: &HilbertSpec,
    labels: &[BasisLabel],
    reference: TrackReference<'_>,
) -> Result<Vec<Assignment>> {
    let n = spec.dim();
    if n != h.dim() {
        return Err(Error::Dimension(format!("spectrum has dimension {n}, space {}", h.dim())));
    }
    let idx: Vec<usize> = labels.iter().map(|l| l.index(h)).collect::<Result<_>>()?;
    let bare_overlap = |li: usize, k: usize| spec.eigenvectors[(idx[li], k)].norm_sqr();
    let scores: Vec<Vec<f64>> = match &reference {
        TrackReference::Bare => (0..labels.len())
            .map(|li| (0..n).map(|k| bare_overlap(li, k)).collect())
            .collect(),
        TrackReference::Previous(prev) => {
            if prev.len() != labels.len() || prev.iter().any(|v| v.len() != n) {
                return Err(Error::Dimension("tracking reference does not match labels".into()));
            }
            prev.iter()
                .map(|p| (0..n).map(|k| spec.eigenvectors.column(k).dotc(p).norm_sqr()).collect())
                .collect()
        }
    };
    let chosen = greedy_assign(&scores, &spec.eigenvalues);
    Ok(labels
        .iter()
        .enumerate()
        .map(|(li, &label)| {
            let k = chosen[li];
            let confidence = bare_overlap(li, k);
            Assignment {
                label,
                index: k,
                confidence,
                reference_overlap: scores[li][k],
                ambiguous: scores[li][k] < CONFIDENCE_FLOOR || confidence < CONFIDENCE_FLOOR,
            }
        })
        .collect())
}

/// Tracks along a sweep, re-anchoring to the bare labels whenever the
/// continued state has lost its bare character (squared overlap below the
/// confidence floor) while another eigenvector still carries it.
pub fn track_continued(
    spec: &SpectrumResult,
    h: &HilbertSpec,
    labels: &[BasisLabel],
    prev: Option<&[DVector<C64>]>,
) -> Result<Vec<Assignment>> {
    let bare = track_dressed(spec, h, labels, TrackReference::Bare)?;
    let Some(prev) = prev else {
        return Ok(bare);
    };
    let cont = track_dressed(spec, h, labels, TrackReference::Previous(prev))?;
    if cont
        .iter()
        .zip(&bare)
        .any(|(c, b)| c.confidence < CONFIDENCE_FLOOR && b.confidence > c.confidence)
    {
        return Ok(bare);
    }
    Ok(cont)
}

/// Drive-frame detunings (qubit, cavity), at most one tone per mode.
pub fn frame_detunings(tones: &[Tone]) -> Result<(f64, f64)> {
    let mut out = [None, None];
    for t in tones {
        let slot = match t.target {
            Mode::Qubit => &mut out[0],
            Mode::Cavity => &mut out[1],
        };
        if slot.replace(t.detuning).is_some() {
            return Err(Error::validation(
                "drives",
                format!("static drive frame needs at most one {} tone", t.target),
            ));
        }
    }
    Ok((out[0].unwrap_or(0.0), out[1].unwrap_or(0.0)))
}

const G0: BasisLabel = BasisLabel::new(0, 0);
const E0: BasisLabel = BasisLabel::new(1, 0);
const G1: BasisLabel = BasisLabel::new(0, 1);

/// Stark shifts of one model at one drive point.
#[derive(Debug, Clone, PartialEq)]
pub struct StarkShift {
    pub qubit_mhz: f64,
    pub cavity_mhz: f64,
    /// Lowest squared bare overlap among the tracked driven levels.
    pub confidence: f64,
    pub ambiguous: bool,
    /// Eigenvectors of `g0`, `e0`, `g1` for continuation.
    pub vectors: Vec<DVector<C64>>,
}

fn static_drive_frame(spec: &HamiltonianSpec, tones: &[Tone], h: &HilbertSpec) -> Result<Operator> {
    let (dq, dc) = frame_detunings(tones)?;
    spec.to_drive_frame(dq, dc, true)?.static_operator(h)
}

/// Transition energies `e0-g0` and `g1-g0` of a static Hamiltonian.
fn transitions(asg: &[Assignment], spec: &SpectrumResult) -> (f64, f64) {
    let e = |i: usize| spec.eigenvalues[asg[i].index];
    (e(1) - e(0), e(2) - e(0))
}

/// Qubit (`g0 → e0`) and cavity (`g0 → g1`) shifts relative to the undriven
/// system in the same frame, in MHz.
pub fn stark_shift(
    params: &Params,
    tones: &[Tone],
    model: ModelKind,
    h: &HilbertSpec,
    prev: Option<&[DVector<C64>]>,
) -> Result<StarkShift> {
    let labels = [G0, E0, G1];
    let driven = static_drive_frame(&model.build(params, tones)?, tones, h)?;
    let spec = eig_herm(&driven)?;
    let asg = track_continued(&spec, h, &labels, prev)?;

    let silent: Vec<Tone> = tones.iter().map(|t| Tone { epsilon: 0.0, ..*t }).collect();
    let bare = static_drive_frame(&model.build(params, &silent)?, &silent, h)?;
    let bare_spec = eig_herm(&bare)?;
    let bare_asg = track_dressed(&bare_spec, h, &labels, TrackReference::Bare)?;

    let (q, c) = transitions(&asg, &spec);
    let (q0, c0) = transitions(&bare_asg, &bare_spec);
    Ok(StarkShift {
        qubit_mhz: angular_to_mhz(q - q0),
        cavity_mhz: angular_to_mhz(c - c0),
        confidence: asg.iter().map(|a| a.confidence).fold(1.0, f64::min),
        ambiguous: asg.iter().any(|a| a.ambiguous),
        vectors: asg.iter().map(|a| spec.vector(a.index)).collect(),
    })
}
