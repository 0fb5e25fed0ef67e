//! State and density-operator algebra for a three-level atom coupled to two
//! truncated cavity modes.
//!
//! Composite spaces are ordered tensor products of labelled factors. The
//! protocol space is `atom ⊗ cavity1 ⊗ cavity2` with the atom index varying
//! slowest and the cavity-2 photon number fastest:
//!
//! ```text
//! index(level, n1, n2) = level * (c1 + 1) * (c2 + 1) + n1 * (c2 + 1) + n2
//! ```
//!
//! This ordering is frozen; golden fixtures depend on it.

use std::fmt;

use nalgebra::{DMatrix, DVector, Dim, Matrix, RawStorage};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Largest entry modulus of a complex matrix or vector.
pub trait MaxAbs {
    fn max_abs(&self) -> f64;
}

impl<R: Dim, C: Dim, S: RawStorage<Complex64, R, C>> MaxAbs for Matrix<Complex64, R, C, S> {
    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Squared-norm tolerance for "normalized" states.
pub const NORM_TOL: f64 = 1e-12;
/// Norms below this cannot be rescaled.
pub const UNNORMALIZABLE_TOL: f64 = 1e-14;
/// Entrywise Hermiticity and trace tolerance for density matrices.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
/// Largest imaginary residue tolerated in an expectation value that must be real.
pub const IMAG_TOL: f64 = 1e-10;
/// Projection weights below this mark the outcome as impossible.
pub const OUTCOME_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AtomLevel {
    L0,
    L1,
    L2,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 3] = [AtomLevel::L0, AtomLevel::L1, AtomLevel::L2];

    pub fn index(self) -> usize {
        match self {
            AtomLevel::L0 => 0,
            AtomLevel::L1 => 1,
            AtomLevel::L2 => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl fmt::Display for AtomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.index())
    }
}

/// A labelled tensor factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    /// The three-level protocol atom.
    Atom,
    /// A two-level probe atom (index 0 = ground, 1 = excited).
    Probe,
    Cavity1,
    Cavity2,
}

impl Subsystem {
    pub fn name(self) -> &'static str {
        match self {
            Subsystem::Atom => "atom",
            Subsystem::Probe => "probe",
            Subsystem::Cavity1 => "cavity1",
            Subsystem::Cavity2 => "cavity2",
        }
    }
}

/// Ordered tensor product of labelled factors; the first factor varies slowest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Space {
    factors: Vec<(Subsystem, usize)>,
}

impl Space {
    pub fn new(factors: Vec<(Subsystem, usize)>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::SpaceMismatch("a space needs at least one factor".into()));
        }
        for (i, (sub, dim)) in factors.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::SpaceMismatch(format!("factor {} has dimension 0", sub.name())));
            }
            if factors[..i].iter().any(|(s, _)| s == sub) {
                return Err(Error::SpaceMismatch(format!("factor {} appears twice", sub.name())));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[(Subsystem, usize)] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).product()
    }

    pub fn position(&self, sub: Subsystem) -> Option<usize> {
        self.factors.iter().position(|(s, _)| *s == sub)
    }

    pub fn factor_dim(&self, sub: Subsystem) -> Option<usize> {
        self.position(sub).map(|i| self.factors[i].1)
    }

    pub fn contains(&self, sub: Subsystem) -> bool {
        self.position(sub).is_some()
    }

    /// The complement of `sub`.
    pub fn without(&self, sub: Subsystem) -> Result<Space> {
        let pos = self.require(sub)?;
        let mut factors = self.factors.clone();
        factors.remove(pos);
        Space::new(factors)
    }

    fn require(&self, sub: Subsystem) -> Result<usize> {
        self.position(sub).ok_or_else(|| {
            Error::SpaceMismatch(format!("space has no {} factor", sub.name()))
        })
    }

    /// `(outer, d, inner)` sizes around the factor at `pos`.
    fn split(&self, pos: usize) -> (usize, usize, usize) {
        let outer = self.factors[..pos].iter().map(|(_, d)| d).product();
        let inner = self.factors[pos + 1..].iter().map(|(_, d)| d).product();
        (outer, self.factors[pos].1, inner)
    }

    /// Flat index of a digit tuple, one digit per factor.
    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.factors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.factors.len(),
                found: digits.len(),
            });
        }
        let mut index = 0;
        for (&digit, &(sub, dim)) in digits.iter().zip(&self.factors) {
            if digit >= dim {
                return Err(Error::IndexOutOfRange {
                    mode: sub.name(),
                    n: digit,
                    cutoff: dim - 1,
                });
            }
            index = index * dim + digit;
        }
        Ok(index)
    }

    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        for (slot, &(_, dim)) in digits.iter_mut().zip(&self.factors).rev() {
            *slot = index % dim;
            index /= dim;
        }
        digits
    }
}

/// Photon-number truncation of the two cavity modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertLayout {
    cutoff1: usize,
    cutoff2: usize,
}

impl HilbertLayout {
    pub const ATOM_DIM: usize = 3;

    pub fn new(cutoff1: usize, cutoff2: usize) -> Result<Self> {
        if cutoff1 < 1 {
            return Err(Error::invalid("cutoff1", "must be at least 1"));
        }
        if cutoff2 < 1 {
            return Err(Error::invalid("cutoff2", "must be at least 1"));
        }
        Ok(Self { cutoff1, cutoff2 })
    }

    /// Layout used for protocol runs at photon number `p`: one spare level
    /// above the highest level the protocol can populate.
    pub fn for_photon_number(p: usize) -> Self {
        Self {
            cutoff1: p + 2,
            cutoff2: p + 2,
        }
    }

    pub fn cutoff1(&self) -> usize {
        self.cutoff1
    }

    pub fn cutoff2(&self) -> usize {
        self.cutoff2
    }

    pub fn dim(&self) -> usize {
        Self::ATOM_DIM * self.field_dim()
    }

    pub fn field_dim(&self) -> usize {
        (self.cutoff1 + 1) * (self.cutoff2 + 1)
    }

    pub fn full_space(&self) -> Space {
        Space {
            factors: vec![
                (Subsystem::Atom, Self::ATOM_DIM),
                (Subsystem::Cavity1, self.cutoff1 + 1),
                (Subsystem::Cavity2, self.cutoff2 + 1),
            ],
        }
    }

    pub fn field_space(&self) -> Space {
        Space {
            factors: vec![
                (Subsystem::Cavity1, self.cutoff1 + 1),
                (Subsystem::Cavity2, self.cutoff2 + 1),
            ],
        }
    }

    /// Fails unless both cavities can hold `p + 1` photons.
    pub fn require_photon_number(&self, p: usize) -> Result<()> {
        if self.cutoff1 < p + 1 {
            return Err(Error::IndexOutOfRange {
                mode: "cavity1",
                n: p + 1,
                cutoff: self.cutoff1,
            });
        }
        if self.cutoff2 < p + 1 {
            return Err(Error::IndexOutOfRange {
                mode: "cavity2",
                n: p + 1,
                cutoff: self.cutoff2,
            });
        }
        Ok(())
    }

    fn check_photons(&self, n1: usize, n2: usize) -> Result<()> {
        if n1 > self.cutoff1 {
            return Err(Error::IndexOutOfRange {
                mode: "cavity1",
                n: n1,
                cutoff: self.cutoff1,
            });
        }
        if n2 > self.cutoff2 {
            return Err(Error::IndexOutOfRange {
                mode: "cavity2",
                n: n2,
                cutoff: self.cutoff2,
            });
        }
        Ok(())
    }

    pub fn basis_index(&self, level: AtomLevel, n1: usize, n2: usize) -> Result<usize> {
        self.check_photons(n1, n2)?;
        Ok(level.index() * self.field_dim() + n1 * (self.cutoff2 + 1) + n2)
    }

    pub fn field_index(&self, n1: usize, n2: usize) -> Result<usize> {
        self.check_photons(n1, n2)?;
        Ok(n1 * (self.cutoff2 + 1) + n2)
    }

    /// Inverse of [`basis_index`](Self::basis_index).
    pub fn basis_label(&self, index: usize) -> Option<(AtomLevel, usize, usize)> {
        if index >= self.dim() {
            return None;
        }
        let field = self.field_dim();
        let level = AtomLevel::from_index(index / field)?;
        let rest = index % field;
        Some((level, rest / (self.cutoff2 + 1), rest % (self.cutoff2 + 1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: Space,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(space: Space, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalConsistency("non-finite amplitude".into()));
        }
        Ok(Self { space, amplitudes })
    }

    pub fn zeros(space: Space) -> Self {
        let dim = space.dim();
        Self {
            space,
            amplitudes: CVector::zeros(dim),
        }
    }

    /// The product basis state `|level, n1, n2⟩`.
    pub fn basis(layout: &HilbertLayout, level: AtomLevel, n1: usize, n2: usize) -> Result<Self> {
        let mut state = Self::zeros(layout.full_space());
        state.amplitudes[layout.basis_index(level, n1, n2)?] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    /// The two-cavity Fock state `|n1, n2⟩`.
    pub fn field_basis(layout: &HilbertLayout, n1: usize, n2: usize) -> Result<Self> {
        let mut state = Self::zeros(layout.field_space());
        state.amplitudes[layout.field_index(n1, n2)?] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut CVector {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm();
        if norm.is_nan() || norm <= UNNORMALIZABLE_TOL {
            return Err(Error::Unnormalizable { norm });
        }
        Ok(Self {
            space: self.space.clone(),
            amplitudes: self.amplitudes.unscale(norm),
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(format!(
                "inner product of {:?} with {:?}",
                self.space, other.space
            )));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            space: self.space.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Result of [`DensityMatrix::project_atom`]: the unnormalized conditional
/// field operator and the probability of the outcome.
#[derive(Debug, Clone)]
pub struct AtomProjection {
    pub field: DensityMatrix,
    pub weight: f64,
}

impl AtomProjection {
    /// Field state renormalized by `N_k = 1 / weight`.
    pub fn normalized_field(&self) -> DensityMatrix {
        self.field.scaled(1.0 / self.weight)
    }
}

/// Measured deviations from the density-matrix invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.hermiticity_error <= HERMITIAN_TOL
            && self.trace_error <= TRACE_TOL
            && self.min_eigenvalue >= -PSD_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: Space,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(space: Space, matrix: CMatrix) -> Result<Self> {
        let dim = space.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        state.projector()
    }

    pub fn zeros(space: Space) -> Self {
        let dim = space.dim();
        Self {
            space,
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.scale(factor),
        }
    }

    /// Rescales to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace().re;
        if tr.is_nan() || tr <= UNNORMALIZABLE_TOL {
            return Err(Error::Unnormalizable { norm: tr });
        }
        Ok(self.scaled(1.0 / tr))
    }

    /// `(ρ + ρ†) / 2`.
    pub fn symmetrized(&self) -> Self {
        let matrix = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        Self {
            space: self.space.clone(),
            matrix,
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    /// Smallest eigenvalue of the Hermitian part.
    ///
    /// Rows and columns that vanish identically contribute an exact zero and
    /// are dropped; the rest is diagonalized through the real symmetric
    /// embedding `[[A, −B], [B, A]]` of `A + iB`, whose spectrum is that of
    /// `A + iB` with every eigenvalue doubled.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let herm = self.symmetrized().matrix;
        let n = herm.nrows();
        let support: Vec<usize> = (0..n)
            .filter(|&i| (0..n).any(|j| herm[(i, j)] != Complex64::new(0.0, 0.0)))
            .collect();
        let floor = if support.len() < n { 0.0 } else { f64::INFINITY };
        if support.is_empty() {
            return Ok(0.0);
        }
        let k = support.len();
        let mut real = DMatrix::<f64>::zeros(2 * k, 2 * k);
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                let z = herm[(i, j)];
                real[(a, b)] = z.re;
                real[(a + k, b + k)] = z.re;
                real[(a, b + k)] = -z.im;
                real[(a + k, b)] = z.im;
            }
        }
        let eig = real
            .try_symmetric_eigen(f64::EPSILON, 10_000)
            .ok_or_else(|| Error::EigenFailure("Hermitian eigensolver did not converge".into()))?;
        let min = eig.eigenvalues.iter().copied().fold(floor, f64::min);
        if !min.is_finite() {
            return Err(Error::EigenFailure(format!("non-finite eigenvalue {min}")));
        }
        Ok(min)
    }

    pub fn invariant_report(&self) -> Result<InvariantReport> {
        Ok(InvariantReport {
            hermiticity_error: self.hermiticity_error(),
            trace_error: (self.trace() - Complex64::new(1.0, 0.0)).norm(),
            min_eigenvalue: self.min_eigenvalue()?,
        })
    }

    /// Hermitian, unit trace and positive semidefinite, all within tolerance.
    pub fn check_invariants(&self) -> Result<InvariantReport> {
        let report = self.invariant_report()?;
        if !report.holds() {
            return Err(Error::InvariantViolation(format!(
                "hermiticity {:e}, trace error {:e}, min eigenvalue {:e}",
                report.hermiticity_error, report.trace_error, report.min_eigenvalue
            )));
        }
        Ok(report)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        // Tr(ρ ρ) = Σ_ij ρ_ij ρ_ji; for Hermitian ρ this is Σ |ρ_ij|².
        let mut acc = Complex64::new(0.0, 0.0);
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * self.matrix[(j, i)];
            }
        }
        acc.re
    }

    /// `⟨target|ρ|target⟩`.
    pub fn fidelity_pure(&self, target: &StateVector) -> Result<f64> {
        if target.space() != &self.space {
            return Err(Error::SpaceMismatch(format!(
                "target on {:?}, density matrix on {:?}",
                target.space(),
                self.space
            )));
        }
        let psi = target.amplitudes();
        let value = psi.dotc(&(&self.matrix * psi));
        if value.im.abs() > IMAG_TOL {
            return Err(Error::NumericalConsistency(format!(
                "fidelity has imaginary part {:e}",
                value.im
            )));
        }
        Ok(value.re)
    }

    /// The operator `⟨row|ρ|col⟩` on the complement of `sub`, where `row`
    /// and `col` are basis indices of that factor.
    pub fn block(&self, sub: Subsystem, row: usize, col: usize) -> Result<DensityMatrix> {
        let pos = self.space.require(sub)?;
        let (outer, d, inner) = self.space.split(pos);
        for k in [row, col] {
            if k >= d {
                return Err(Error::IndexOutOfRange {
                    mode: sub.name(),
                    n: k,
                    cutoff: d - 1,
                });
            }
        }
        let out_space = self.space.without(sub)?;
        let out_dim = outer * inner;
        let full = |o: usize, k: usize, i: usize| (o * d + k) * inner + i;
        let matrix = CMatrix::from_fn(out_dim, out_dim, |a, b| {
            let (oa, ia) = (a / inner, a % inner);
            let (ob, ib) = (b / inner, b % inner);
            self.matrix[(full(oa, row, ia), full(ob, col, ib))]
        });
        Ok(DensityMatrix {
            space: out_space,
            matrix,
        })
    }

    /// Traces out `sub`, returning the reduced operator on its complement.
    pub fn partial_trace(&self, sub: Subsystem) -> Result<DensityMatrix> {
        let d = self
            .space
            .factor_dim(sub)
            .ok_or_else(|| Error::SpaceMismatch(format!("space has no {} factor", sub.name())))?;
        let mut acc = self.block(sub, 0, 0)?;
        for k in 1..d {
            acc.matrix += self.block(sub, k, k)?.matrix;
        }
        Ok(acc)
    }

    /// Conditions the protocol atom on `level`.
    ///
    /// Returns the unnormalized field operator `⟨level|ρ|level⟩` and its
    /// trace. A weight below [`OUTCOME_TOL`] is reported as
    /// [`Error::OutcomeImpossible`].
    pub fn project_atom(&self, level: AtomLevel) -> Result<AtomProjection> {
        let field = self.block(Subsystem::Atom, level.index(), level.index())?;
        let tr = field.trace();
        if tr.im.abs() > IMAG_TOL {
            return Err(Error::NumericalConsistency(format!(
                "projection weight has imaginary part {:e}",
                tr.im
            )));
        }
        let weight = tr.re;
        if weight < OUTCOME_TOL {
            return Err(Error::OutcomeImpossible { level, weight });
        }
        Ok(AtomProjection { field, weight })
    }

    /// Probability of each atomic level, `Tr⟨k|ρ|k⟩`.
    pub fn atom_populations(&self) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for level in AtomLevel::ALL {
            out[level.index()] = self
                .block(Subsystem::Atom, level.index(), level.index())?
                .trace()
                .re;
        }
        Ok(out)
    }
}
