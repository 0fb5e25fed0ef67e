//! Resonant Jaynes-Cummings evolution through the two cavities, the Ramsey
//! zone, and a dense eigendecomposition propagator used as an independent
//! check of the analytic path.
//!
//! The analytic evolutions work in the interaction picture. On exact
//! resonance the free Hamiltonian is degenerate on every coupled block, so
//! the lab-frame state differs from the interaction-picture one only by the
//! global phase `η`, which [`ClosedFormState`] carries as metadata.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    AtomLevel, CMatrix, CVector, DensityMatrix, HilbertLayout, MaxAbs, Space, StateVector,
    Subsystem,
};

/// Amplitudes this large at a level the truncated ladder cannot raise are
/// treated as a truncation fault.
pub const TRUNCATION_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Couplings, cavity frequencies and atomic energies (rad/s, ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub g1: f64,
    pub g2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
}

impl CouplingConfig {
    /// Exactly resonant ladder: `E1 = E0 + ω2`, `E2 = E1 + ω1`.
    pub fn resonant(g1: f64, g2: f64, omega1: f64, omega2: f64, e0: f64) -> Result<Self> {
        let e1 = e0 + omega2;
        let config = Self {
            g1,
            g2,
            omega1,
            omega2,
            e0,
            e1,
            e2: e1 + omega1,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("g1", self.g1), ("g2", self.g2)] {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {g}")));
            }
        }
        for (name, w) in [("omega1", self.omega1), ("omega2", self.omega2)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {w}")));
            }
        }
        if !(self.e0 < self.e1 && self.e1 < self.e2) {
            return Err(Error::invalid("E", "atomic energies must satisfy E0 < E1 < E2"));
        }
        let scale = self.e2.abs().max(self.omega1).max(self.omega2);
        let tol = 1e-12 * scale;
        if (self.e1 - self.e0 - self.omega2).abs() > tol {
            return Err(Error::invalid("omega2", "E1 - E0 must equal omega2 (exact resonance)"));
        }
        if (self.e2 - self.e1 - self.omega1).abs() > tol {
            return Err(Error::invalid("omega1", "E2 - E1 must equal omega1 (exact resonance)"));
        }
        Ok(())
    }

    pub fn level_energy(&self, level: AtomLevel) -> f64 {
        match level {
            AtomLevel::L0 => self.e0,
            AtomLevel::L1 => self.e1,
            AtomLevel::L2 => self.e2,
        }
    }
}

/// Where the atom is while the Hamiltonian acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Free,
    InsideCavity1,
    InsideCavity2,
}

/// Truncated annihilation operator on `0..dim` photons.
pub fn annihilation(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

fn number_operator(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| if i == j { Complex64::new(i as f64, 0.0) } else { ZERO })
}

/// `|row⟩⟨col|` on the three-level atom.
fn atom_transition(row: AtomLevel, col: AtomLevel) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(row.index(), col.index())] = ONE;
    m
}

fn kron3(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> CMatrix {
    a.kronecker(b).kronecker(c)
}

/// Lab-frame Hamiltonian `H0` plus the coupling active at `stage`.
pub fn build_hamiltonian(layout: &HilbertLayout, config: &CouplingConfig, stage: Stage) -> CMatrix {
    let d1 = layout.cutoff1() + 1;
    let d2 = layout.cutoff2() + 1;
    let id3 = CMatrix::identity(3, 3);
    let id1 = CMatrix::identity(d1, d1);
    let id2 = CMatrix::identity(d2, d2);

    let atom_energy = CMatrix::from_diagonal(&CVector::from_vec(
        AtomLevel::ALL
            .iter()
            .map(|&l| Complex64::new(config.level_energy(l), 0.0))
            .collect(),
    ));
    let mut h = kron3(&atom_energy, &id1, &id2)
        + kron3(&id3, &number_operator(d1), &id2).scale(config.omega1)
        + kron3(&id3, &id1, &number_operator(d2)).scale(config.omega2);

    let coupling = match stage {
        Stage::Free => None,
        Stage::InsideCavity1 => Some(
            kron3(&atom_transition(AtomLevel::L2, AtomLevel::L1), &annihilation(d1), &id2)
                .scale(config.g1),
        ),
        Stage::InsideCavity2 => Some(
            kron3(&atom_transition(AtomLevel::L1, AtomLevel::L0), &id1, &annihilation(d2))
                .scale(config.g2),
        ),
    };
    if let Some(v) = coupling {
        h += &v + v.adjoint();
    }
    h
}

fn layout_of(space: &Space) -> Result<HilbertLayout> {
    match space.factors() {
        [(Subsystem::Atom, 3), (Subsystem::Cavity1, d1), (Subsystem::Cavity2, d2)] => {
            HilbertLayout::new(d1 - 1, d2 - 1)
        }
        other => Err(Error::SpaceMismatch(format!(
            "expected atom ⊗ cavity1 ⊗ cavity2, got {other:?}"
        ))),
    }
}

/// Applies `cos θ·1 − i sin θ·σx` to every coupled pair `(upper, lower)`,
/// where `pairs` yields `(upper index, lower index, √(n+1))`.
fn rotate_pairs(
    amps: &mut CVector,
    pairs: impl Iterator<Item = (usize, usize, f64)>,
    coupling: f64,
    t: f64,
) {
    for (upper, lower, root) in pairs {
        let (s, c) = (coupling * t * root).sin_cos();
        let a = amps[upper];
        let b = amps[lower];
        amps[upper] = a * c - I * b * s;
        amps[lower] = b * c - I * a * s;
    }
}

/// Resonant passage through cavity 1 for duration `t` (negative `t` runs backwards).
///
/// Rotates each pair `|2,n,m⟩ ↔ |1,n+1,m⟩` by `g1·t·√(n+1)`.
pub fn evolve_cavity1(state: &StateVector, t: f64, config: &CouplingConfig) -> Result<StateVector> {
    let layout = layout_of(state.space())?;
    let c1 = layout.cutoff1();
    let c2 = layout.cutoff2();
    let mut amps = state.amplitudes().clone();
    for m in 0..=c2 {
        let top = amps[layout.basis_index(AtomLevel::L2, c1, m)?].norm();
        if top > TRUNCATION_TOL {
            return Err(Error::Truncation {
                mode: "cavity1",
                amplitude: top,
            });
        }
    }
    let pairs = (0..c1).flat_map(|n| (0..=c2).map(move |m| (n, m))).map(|(n, m)| {
        (
            layout.basis_index(AtomLevel::L2, n, m).unwrap(),
            layout.basis_index(AtomLevel::L1, n + 1, m).unwrap(),
            ((n + 1) as f64).sqrt(),
        )
    });
    rotate_pairs(&mut amps, pairs, config.g1, t);
    StateVector::new(state.space().clone(), amps)
}

/// Resonant passage through cavity 2: pairs `|1,n,m⟩ ↔ |0,n,m+1⟩` rotate by `g2·t·√(m+1)`.
pub fn evolve_cavity2(state: &StateVector, t: f64, config: &CouplingConfig) -> Result<StateVector> {
    let layout = layout_of(state.space())?;
    let c1 = layout.cutoff1();
    let c2 = layout.cutoff2();
    let mut amps = state.amplitudes().clone();
    for n in 0..=c1 {
        let top = amps[layout.basis_index(AtomLevel::L1, n, c2)?].norm();
        if top > TRUNCATION_TOL {
            return Err(Error::Truncation {
                mode: "cavity2",
                amplitude: top,
            });
        }
    }
    let pairs = (0..=c1).flat_map(|n| (0..c2).map(move |m| (n, m))).map(|(n, m)| {
        (
            layout.basis_index(AtomLevel::L1, n, m).unwrap(),
            layout.basis_index(AtomLevel::L0, n, m + 1).unwrap(),
            ((m + 1) as f64).sqrt(),
        )
    });
    rotate_pairs(&mut amps, pairs, config.g2, t);
    StateVector::new(state.space().clone(), amps)
}

/// The analytic joint state after both passages from `|2,p,p⟩`.
///
/// `amplitudes` are on `[|2,p,p⟩, |1,p+1,p⟩, |0,p+1,p+1⟩]`; the lab-frame
/// state is `e^{−iη}` times this vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormState {
    pub p: usize,
    pub amplitudes: [Complex64; 3],
    pub global_phase: f64,
}

impl ClosedFormState {
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Embeds the amplitudes into `layout`, optionally multiplied by `e^{−iη}`.
    pub fn to_state(&self, layout: &HilbertLayout, with_phase: bool) -> Result<StateVector> {
        let p = self.p;
        let phase = if with_phase {
            Complex64::from_polar(1.0, -self.global_phase)
        } else {
            ONE
        };
        let mut state = StateVector::zeros(layout.full_space());
        let slots = [
            layout.basis_index(AtomLevel::L2, p, p)?,
            layout.basis_index(AtomLevel::L1, p + 1, p)?,
            layout.basis_index(AtomLevel::L0, p + 1, p + 1)?,
        ];
        for (slot, amp) in slots.into_iter().zip(self.amplitudes) {
            state.amplitudes_mut()[slot] = amp * phase;
        }
        Ok(state)
    }
}

pub fn psi_closed_form(p: usize, t1: f64, t2: f64, config: &CouplingConfig) -> ClosedFormState {
    let root = ((p + 1) as f64).sqrt();
    let (s1, c1) = (config.g1 * t1 * root).sin_cos();
    let (s2, c2) = (config.g2 * t2 * root).sin_cos();
    ClosedFormState {
        p,
        amplitudes: [
            Complex64::new(c1, 0.0),
            Complex64::new(0.0, -c2 * s1),
            Complex64::new(-s1 * s2, 0.0),
        ],
        global_phase: (config.e2 + (config.omega1 + config.omega2) * p as f64) * (t1 + t2),
    }
}

/// Ramsey-zone unitary on the atom:
/// `|0⟩ → (|0⟩ + e^{iχ}|2⟩)/√2`, `|2⟩ → (|2⟩ − e^{−iχ}|0⟩)/√2`, `|1⟩ → |1⟩`.
pub fn ramsey_unitary(chi: f64) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = CMatrix::zeros(3, 3);
    // Column k is the image of |k⟩.
    u[(0, 0)] = Complex64::new(h, 0.0);
    u[(2, 0)] = Complex64::from_polar(h, chi);
    u[(1, 1)] = ONE;
    u[(2, 2)] = Complex64::new(h, 0.0);
    u[(0, 2)] = -Complex64::from_polar(h, -chi);
    u
}

/// Applies the Ramsey mixing to whatever carries the protocol atom.
pub trait RamseyRotation: Sized {
    fn ramsey_rotation(&self, chi: f64) -> Result<Self>;
}

fn atom_split(space: &Space) -> Result<(usize, usize)> {
    let pos = space
        .position(Subsystem::Atom)
        .ok_or_else(|| Error::SpaceMismatch("no atom factor to rotate".into()))?;
    let outer: usize = space.factors()[..pos].iter().map(|f| f.1).product();
    let inner: usize = space.factors()[pos + 1..].iter().map(|f| f.1).product();
    Ok((outer, inner))
}

impl RamseyRotation for StateVector {
    fn ramsey_rotation(&self, chi: f64) -> Result<Self> {
        let (outer, inner) = atom_split(self.space())?;
        let u = ramsey_unitary(chi);
        let old = self.amplitudes();
        let mut amps = CVector::zeros(old.len());
        for o in 0..outer {
            for f in 0..inner {
                for l in 0..3 {
                    let mut acc = ZERO;
                    for k in 0..3 {
                        acc += u[(l, k)] * old[(o * 3 + k) * inner + f];
                    }
                    amps[(o * 3 + l) * inner + f] = acc;
                }
            }
        }
        StateVector::new(self.space().clone(), amps)
    }
}

impl RamseyRotation for DensityMatrix {
    fn ramsey_rotation(&self, chi: f64) -> Result<Self> {
        let (outer, inner) = atom_split(self.space())?;
        let big = CMatrix::identity(outer, outer)
            .kronecker(&ramsey_unitary(chi))
            .kronecker(&CMatrix::identity(inner, inner));
        DensityMatrix::new(self.space().clone(), &big * self.matrix() * big.adjoint())
    }
}

/// `exp(−iHt)` for a fixed Hermitian `H`, via its eigendecomposition.
#[derive(Debug, Clone)]
pub struct HermitianPropagator {
    eigen: SymmetricEigen<Complex64, nalgebra::Dyn>,
}

impl HermitianPropagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                found: h.ncols(),
            });
        }
        let scale = h.max_abs().max(1.0);
        let asym = (h - h.adjoint()).max_abs();
        if asym > 1e-12 * scale {
            return Err(Error::invalid("hamiltonian", format!("not Hermitian (max |H − H†| = {asym:e})")));
        }
        let eigen = h
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 100_000)
            .ok_or_else(|| Error::EigenFailure("Hermitian eigensolver did not converge".into()))?;
        let lambda = CMatrix::from_diagonal(&eigen.eigenvalues.map(|e| Complex64::new(e, 0.0)));
        let rebuilt = &eigen.eigenvectors * lambda * eigen.eigenvectors.adjoint();
        let error = (rebuilt - h).max_abs();
        if error.is_nan() || error > 1e-12 * scale {
            return Err(Error::EigenFailure(format!("reconstruction error {error:e}")));
        }
        Ok(Self { eigen })
    }

    pub fn eigenvalues(&self) -> &nalgebra::DVector<f64> {
        &self.eigen.eigenvalues
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        let v = &self.eigen.eigenvectors;
        let phases = CVector::from_iterator(
            self.eigen.eigenvalues.len(),
            self.eigen.eigenvalues.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
        );
        let mut scaled = v.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= phases[j];
        }
        scaled * v.adjoint()
    }

    pub fn apply(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        let v = &self.eigen.eigenvectors;
        if v.nrows() != state.amplitudes().len() {
            return Err(Error::DimensionMismatch {
                expected: v.nrows(),
                found: state.amplitudes().len(),
            });
        }
        let mut coeffs = v.adjoint() * state.amplitudes();
        for (c, &e) in coeffs.iter_mut().zip(self.eigen.eigenvalues.iter()) {
            *c *= Complex64::from_polar(1.0, -e * t);
        }
        StateVector::new(state.space().clone(), v * coeffs)
    }
}

/// `exp(−iHt)|ψ⟩` by dense eigendecomposition.
pub fn numeric_propagator(state: &StateVector, h: &CMatrix, t: f64) -> Result<StateVector> {
    HermitianPropagator::new(h)?.apply(state, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn config() -> CouplingConfig {
        CouplingConfig::resonant(1.3, 0.7, 40.0, 35.0, 2.0).unwrap()
    }

    fn amp(state: &StateVector, layout: &HilbertLayout, l: AtomLevel, n1: usize, n2: usize) -> Complex64 {
        state.amplitudes()[layout.basis_index(l, n1, n2).unwrap()]
    }

    #[test]
    fn resonant_config_validates() {
        assert!(CouplingConfig::resonant(-1.0, 1.0, 1.0, 1.0, 0.0).is_err());
        let mut c = config();
        c.e1 += 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn free_hamiltonian_is_diagonal() {
        let layout = HilbertLayout::new(2, 3).unwrap();
        let cfg = config();
        let h = build_hamiltonian(&layout, &cfg, Stage::Free);
        for i in 0..layout.dim() {
            let (l, n1, n2) = layout.basis_label(i).unwrap();
            for j in 0..layout.dim() {
                let expected = if i == j {
                    cfg.level_energy(l) + cfg.omega1 * n1 as f64 + cfg.omega2 * n2 as f64
                } else {
                    0.0
                };
                assert_abs_diff_eq!(h[(i, j)].re, expected, epsilon = 1e-12);
                assert_eq!(h[(i, j)].im, 0.0);
            }
        }
    }

    #[test]
    fn cavity1_coupling_matrix_element() {
        let layout = HilbertLayout::for_photon_number(3);
        let cfg = config();
        let h = build_hamiltonian(&layout, &cfg, Stage::InsideCavity1);
        for p in 0..4 {
            let row = layout.basis_index(AtomLevel::L1, p + 1, p).unwrap();
            let col = layout.basis_index(AtomLevel::L2, p, p).unwrap();
            assert_abs_diff_eq!(h[(row, col)].re, cfg.g1 * ((p + 1) as f64).sqrt(), epsilon = 1e-14);
        }
        for stage in [Stage::Free, Stage::InsideCavity1, Stage::InsideCavity2] {
            let h = build_hamiltonian(&layout, &cfg, stage);
            assert_eq!((&h - h.adjoint()).max_abs(), 0.0);
        }
    }

    #[test]
    fn cavity1_quarter_rotation() {
        let cfg = config();
        for p in 0..4usize {
            let layout = HilbertLayout::for_photon_number(p);
            let psi = StateVector::basis(&layout, AtomLevel::L2, p, p).unwrap();
            let t = FRAC_PI_4 / (cfg.g1 * ((p + 1) as f64).sqrt());
            let out = evolve_cavity1(&psi, t, &cfg).unwrap();
            assert!((amp(&out, &layout, AtomLevel::L2, p, p) - Complex64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
            assert!((amp(&out, &layout, AtomLevel::L1, p + 1, p) - Complex64::new(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
        }
    }

    #[test]
    fn cavity1_leaves_ground_and_dark_states() {
        let layout = HilbertLayout::new(2, 2).unwrap();
        let cfg = config();
        for (l, n1, n2) in [(AtomLevel::L0, 1, 2), (AtomLevel::L0, 0, 0), (AtomLevel::L1, 0, 1)] {
            let psi = StateVector::basis(&layout, l, n1, n2).unwrap();
            assert_eq!(evolve_cavity1(&psi, 3.7, &cfg).unwrap(), psi);
        }
    }

    #[test]
    fn cavity2_half_rotation() {
        let cfg = config();
        let p = 2;
        let layout = HilbertLayout::for_photon_number(p);
        let psi = StateVector::basis(&layout, AtomLevel::L1, p + 1, p).unwrap();
        let t = FRAC_PI_2 / (cfg.g2 * ((p + 1) as f64).sqrt());
        let out = evolve_cavity2(&psi, t, &cfg).unwrap();
        assert!((amp(&out, &layout, AtomLevel::L0, p + 1, p + 1) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(amp(&out, &layout, AtomLevel::L1, p + 1, p).norm() < 1e-15);

        let upper = StateVector::basis(&layout, AtomLevel::L2, 1, 3).unwrap();
        assert_eq!(evolve_cavity2(&upper, 0.9, &cfg).unwrap(), upper);
    }

    #[test]
    fn truncation_is_rejected() {
        let layout = HilbertLayout::new(1, 1).unwrap();
        let cfg = config();
        let top1 = StateVector::basis(&layout, AtomLevel::L2, 1, 0).unwrap();
        assert!(matches!(evolve_cavity1(&top1, 0.1, &cfg), Err(Error::Truncation { mode: "cavity1", .. })));
        let top2 = StateVector::basis(&layout, AtomLevel::L1, 0, 1).unwrap();
        assert!(matches!(evolve_cavity2(&top2, 0.1, &cfg), Err(Error::Truncation { mode: "cavity2", .. })));
    }

    #[test]
    fn closed_form_examples() {
        let cfg = config();
        let zero = psi_closed_form(2, 0.0, 0.0, &cfg);
        assert_eq!(zero.amplitudes, [ONE, ZERO, Complex64::new(-0.0, 0.0)]);
        assert_eq!(zero.global_phase, 0.0);

        let p = 1;
        let root = 2f64.sqrt();
        let ideal = psi_closed_form(p, FRAC_PI_4 / (cfg.g1 * root), FRAC_PI_2 / (cfg.g2 * root), &cfg);
        assert!((ideal.amplitudes[0] - FRAC_1_SQRT_2).norm() < 1e-15);
        assert!(ideal.amplitudes[1].norm() < 1e-15);
        assert!((ideal.amplitudes[2] + FRAC_1_SQRT_2).norm() < 1e-15);

        let swap = psi_closed_form(p, FRAC_PI_2 / (cfg.g1 * root), 0.0, &cfg);
        assert!(swap.amplitudes[0].norm() < 1e-15);
        assert!((swap.amplitudes[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        assert!(swap.amplitudes[2].norm() < 1e-15);
    }

    #[test]
    fn composite_analytic_matches_closed_form() {
        let cfg = config();
        for (p, t1, t2) in [(0usize, 0.37, 1.9), (3, -0.8, 0.25), (5, 2.2, -1.1)] {
            let layout = HilbertLayout::for_photon_number(p);
            let psi = StateVector::basis(&layout, AtomLevel::L2, p, p).unwrap();
            let out = evolve_cavity2(&evolve_cavity1(&psi, t1, &cfg).unwrap(), t2, &cfg).unwrap();
            let closed = psi_closed_form(p, t1, t2, &cfg);
            assert_abs_diff_eq!(closed.norm_squared(), 1.0, epsilon = 1e-12);
            let expected = closed.to_state(&layout, false).unwrap();
            assert!((out.amplitudes() - expected.amplitudes()).max_abs() < 1e-14);
        }
    }

    #[test]
    fn ramsey_examples() {
        let layout = HilbertLayout::new(1, 1).unwrap();
        let ground = StateVector::basis(&layout, AtomLevel::L0, 1, 0).unwrap();
        let out = ground.ramsey_rotation(0.0).unwrap();
        assert_abs_diff_eq!(amp(&out, &layout, AtomLevel::L0, 1, 0).re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(amp(&out, &layout, AtomLevel::L2, 1, 0).re, FRAC_1_SQRT_2, epsilon = 1e-15);

        let upper = StateVector::basis(&layout, AtomLevel::L2, 0, 1).unwrap();
        let chi = 0.7;
        let out = upper.ramsey_rotation(chi).unwrap();
        assert!((amp(&out, &layout, AtomLevel::L2, 0, 1) - FRAC_1_SQRT_2).norm() < 1e-15);
        assert!((amp(&out, &layout, AtomLevel::L0, 0, 1) + Complex64::from_polar(FRAC_1_SQRT_2, -chi)).norm() < 1e-15);

        for chi in [0.0, 1.0, PI] {
            let middle = StateVector::basis(&layout, AtomLevel::L1, 1, 1).unwrap();
            assert_eq!(middle.ramsey_rotation(chi).unwrap(), middle);
            let u = ramsey_unitary(chi);
            assert!((&u * u.adjoint() - CMatrix::identity(3, 3)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn ramsey_on_density_matches_state_path() {
        let layout = HilbertLayout::new(1, 2).unwrap();
        let mut psi = StateVector::basis(&layout, AtomLevel::L2, 0, 1).unwrap();
        psi.amplitudes_mut()[layout.basis_index(AtomLevel::L0, 1, 2).unwrap()] = Complex64::new(0.3, -0.4);
        psi.amplitudes_mut()[layout.basis_index(AtomLevel::L1, 1, 0).unwrap()] = Complex64::new(0.1, 0.2);
        let psi = psi.normalize().unwrap();
        let chi = 1.234;
        let via_state = psi.ramsey_rotation(chi).unwrap().projector();
        let via_rho = psi.projector().ramsey_rotation(chi).unwrap();
        assert!((via_state.matrix() - via_rho.matrix()).max_abs() < 1e-15);
    }

    #[test]
    fn propagator_identity_and_diagonal() {
        let layout = HilbertLayout::new(1, 1).unwrap();
        let cfg = config();
        let mut psi = StateVector::basis(&layout, AtomLevel::L2, 0, 1).unwrap();
        psi.amplitudes_mut()[3] = Complex64::new(0.0, 1.0);
        let psi = psi.normalize().unwrap();
        let h = build_hamiltonian(&layout, &cfg, Stage::InsideCavity1);
        let same = numeric_propagator(&psi, &h, 0.0).unwrap();
        assert!((same.amplitudes() - psi.amplitudes()).max_abs() < 1e-14);

        let h0 = build_hamiltonian(&layout, &cfg, Stage::Free);
        let t = 0.013;
        let out = numeric_propagator(&psi, &h0, t).unwrap();
        for k in 0..layout.dim() {
            let expected = psi.amplitudes()[k] * Complex64::from_polar(1.0, -h0[(k, k)].re * t);
            assert!((out.amplitudes()[k] - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = ONE;
        assert!(HermitianPropagator::new(&h).is_err());
    }

    #[test]
    fn lab_frame_matches_closed_form_including_eta() {
        // Realistic scales: g ~ 1.6e5 rad/s, ω ~ 1e10.
        let g = 2.0 * PI * 25e3;
        let cfg = CouplingConfig::resonant(g, 0.8 * g, 1e10, 1.1e10, 0.0).unwrap();
        for p in [0usize, 2, 5] {
            let layout = HilbertLayout::for_photon_number(p);
            let psi = StateVector::basis(&layout, AtomLevel::L2, p, p).unwrap();
            let (t1, t2) = (3.1e-6, 7.7e-6);
            let h1 = build_hamiltonian(&layout, &cfg, Stage::InsideCavity1);
            let h2 = build_hamiltonian(&layout, &cfg, Stage::InsideCavity2);
            let lab = numeric_propagator(&numeric_propagator(&psi, &h1, t1).unwrap(), &h2, t2).unwrap();
            let expected = psi_closed_form(p, t1, t2, &cfg).to_state(&layout, true).unwrap();
            let overlap = expected.inner(&lab).unwrap();
            assert!(overlap.norm() >= 1.0 - 1e-9, "p={p}: |overlap| = {}", overlap.norm());
            assert!((overlap - ONE).norm() < 1e-6, "p={p}: phase mismatch {overlap}");
        }
    }

    fn arb_state(layout: HilbertLayout) -> impl Strategy<Value = StateVector> {
        // Leave the top Fock levels empty so no passage truncates.
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), layout.dim()).prop_filter_map(
            "non-zero",
            move |v| {
                let mut s = StateVector::zeros(layout.full_space());
                for (i, (re, im)) in v.into_iter().enumerate() {
                    let (_, n1, n2) = layout.basis_label(i).unwrap();
                    if n1 < layout.cutoff1() && n2 < layout.cutoff2() {
                        s.amplitudes_mut()[i] = Complex64::new(re, im);
                    }
                }
                s.normalize().ok()
            },
        )
    }

    proptest! {
        #[test]
        fn evolution_preserves_norm(psi in arb_state(HilbertLayout::new(3, 3).unwrap()), t in -5.0f64..5.0, chi in 0.0f64..6.3) {
            let cfg = config();
            let a = evolve_cavity1(&psi, t, &cfg).unwrap();
            prop_assert!((a.norm_squared() - 1.0).abs() <= 1e-12);
            let b = evolve_cavity2(&psi, t, &cfg).unwrap();
            prop_assert!((b.norm_squared() - 1.0).abs() <= 1e-12);
            let r = psi.ramsey_rotation(chi).unwrap();
            prop_assert!((r.norm_squared() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn cavity2_leaves_level2_pointwise(psi in arb_state(HilbertLayout::new(2, 3).unwrap()), t in -5.0f64..5.0) {
            let cfg = config();
            let layout = HilbertLayout::new(2, 3).unwrap();
            let out = evolve_cavity2(&psi, t, &cfg).unwrap();
            for n1 in 0..=2 { for n2 in 0..=3 {
                let i = layout.basis_index(AtomLevel::L2, n1, n2).unwrap();
                prop_assert_eq!(out.amplitudes()[i], psi.amplitudes()[i]);
            }}
        }

        #[test]
        fn group_property(psi in arb_state(HilbertLayout::new(3, 3).unwrap()), t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
            let cfg = config();
            let split = evolve_cavity1(&evolve_cavity1(&psi, t1, &cfg).unwrap(), t2, &cfg).unwrap();
            let joint = evolve_cavity1(&psi, t1 + t2, &cfg).unwrap();
            prop_assert!((split.amplitudes() - joint.amplitudes()).max_abs() <= 1e-12);
            let split = evolve_cavity2(&evolve_cavity2(&psi, t1, &cfg).unwrap(), t2, &cfg).unwrap();
            let joint = evolve_cavity2(&psi, t1 + t2, &cfg).unwrap();
            prop_assert!((split.amplitudes() - joint.amplitudes()).max_abs() <= 1e-12);
        }

        #[test]
        fn analytic_matches_interaction_picture_propagator(psi in arb_state(HilbertLayout::new(2, 2).unwrap()), t in -3.0f64..3.0) {
            // H1 - H0 is the bare coupling; on resonance exp(-i(H0+H1)t) = exp(-iH0 t) exp(-iV t).
            let cfg = config();
            let layout = HilbertLayout::new(2, 2).unwrap();
            let v1 = build_hamiltonian(&layout, &cfg, Stage::InsideCavity1) - build_hamiltonian(&layout, &cfg, Stage::Free);
            let numeric = numeric_propagator(&psi, &v1, t).unwrap();
            let analytic = evolve_cavity1(&psi, t, &cfg).unwrap();
            prop_assert!((numeric.amplitudes() - analytic.amplitudes()).max_abs() <= 1e-12);
        }
    }
}
