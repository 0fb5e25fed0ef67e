//! A two-level probe atom, prepared in its ground state, sent through the
//! cavities after the protocol. Its return probability is compared between
//! a heralded field state and the same state with the Bell coherence removed.
//!
//! The probe couples resonantly with the Jaynes-Cummings form
//! `g (|e⟩⟨g| a_k + h.c.)` to each flagged cavity in turn.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, DensityMatrix, Space, Subsystem};

/// Population allowed at a level the truncated ladder cannot raise.
const TRUNCATION_POP_TOL: f64 = 1e-24;
/// Off-support weight tolerated by [`dephase_bell`].
pub const SUPPORT_TOL: f64 = 1e-10;

const GROUND: usize = 0;
const EXCITED: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub g_probe: f64,
    pub couple_cavity1: bool,
    pub couple_cavity2: bool,
    pub t1_probe: f64,
    pub t2_probe: f64,
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_probe.is_finite() && self.g_probe > 0.0) {
            return Err(Error::invalid("g_probe", "must be positive and finite"));
        }
        if !(self.couple_cavity1 || self.couple_cavity2) {
            return Err(Error::invalid("couple_cavity", "at least one cavity must be coupled"));
        }
        for (name, t) in [("t1_probe", self.t1_probe), ("t2_probe", self.t2_probe)] {
            if !t.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    /// Same flags with both durations multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            t1_probe: self.t1_probe * scale,
            t2_probe: self.t2_probe * scale,
            ..*self
        }
    }
}

fn field_cutoffs(space: &Space) -> Result<(usize, usize)> {
    match space.factors() {
        [(Subsystem::Cavity1, d1), (Subsystem::Cavity2, d2)] => Ok((d1 - 1, d2 - 1)),
        other => Err(Error::SpaceMismatch(format!(
            "expected a cavity1 ⊗ cavity2 field state, got {other:?}"
        ))),
    }
}

/// Removes the `|p,p⟩⟨p+1,p+1|` coherences, keeping every population.
pub fn dephase_bell(rho_field: &DensityMatrix, p: usize) -> Result<DensityMatrix> {
    let (c1, c2) = field_cutoffs(rho_field.space())?;
    if c1 < p + 1 || c2 < p + 1 {
        return Err(Error::IndexOutOfRange {
            mode: "cavity1/cavity2",
            n: p + 1,
            cutoff: c1.min(c2),
        });
    }
    let low = p * (c2 + 1) + p;
    let high = (p + 1) * (c2 + 1) + p + 1;
    let m = rho_field.matrix();
    let on_support = m[(low, low)].re + m[(high, high)].re;
    let off_support = (rho_field.trace().re - on_support).abs();
    if off_support > SUPPORT_TOL {
        return Err(Error::SupportViolation { weight: off_support });
    }
    let mut out = m.clone();
    out[(low, high)] = Complex64::new(0.0, 0.0);
    out[(high, low)] = Complex64::new(0.0, 0.0);
    DensityMatrix::new(rho_field.space().clone(), out)
}

/// Resonant probe–cavity rotation for duration `t` on `probe ⊗ cavity1 ⊗ cavity2`.
fn probe_unitary(space: &Space, cavity: Subsystem, g: f64, t: f64) -> CMatrix {
    let dim = space.dim();
    let pos = space.position(cavity).expect("probe space has both cavities");
    let mut u = CMatrix::identity(dim, dim);
    for index in 0..dim {
        let digits = space.digits_of(index);
        let n = digits[pos];
        if digits[0] != GROUND || n == 0 {
            continue;
        }
        // |g, n⟩ ↔ |e, n−1⟩ with angle g t √n.
        let mut partner = digits.clone();
        partner[0] = EXCITED;
        partner[pos] = n - 1;
        let j = space.index_of(&partner).expect("partner in range");
        let (s, c) = (g * t * (n as f64).sqrt()).sin_cos();
        u[(index, index)] = Complex64::new(c, 0.0);
        u[(j, j)] = Complex64::new(c, 0.0);
        u[(j, index)] = Complex64::new(0.0, -s);
        u[(index, j)] = Complex64::new(0.0, -s);
    }
    u
}

/// Population of excited-probe states whose cavity is already at its cutoff.
fn stranded_population(rho: &DensityMatrix, cavity: Subsystem) -> f64 {
    let space = rho.space();
    let pos = space.position(cavity).expect("probe space has both cavities");
    let top = space.factors()[pos].1 - 1;
    (0..space.dim())
        .filter(|&i| {
            let d = space.digits_of(i);
            d[0] == EXCITED && d[pos] == top
        })
        .map(|i| rho.matrix()[(i, i)].re.abs())
        .sum()
}

/// Probability of finding the probe still in its ground state after the
/// flagged cavity passages.
pub fn probe_return_probability(rho_field: &DensityMatrix, probe: &ProbeConfig) -> Result<f64> {
    probe.validate()?;
    let (c1, c2) = field_cutoffs(rho_field.space())?;
    let space = Space::new(vec![
        (Subsystem::Probe, 2),
        (Subsystem::Cavity1, c1 + 1),
        (Subsystem::Cavity2, c2 + 1),
    ])?;
    let mut probe_ground = CMatrix::zeros(2, 2);
    probe_ground[(GROUND, GROUND)] = Complex64::new(1.0, 0.0);
    let mut rho = DensityMatrix::new(space.clone(), probe_ground.kronecker(rho_field.matrix()))?;

    let stages = [
        (probe.couple_cavity1, Subsystem::Cavity1, probe.t1_probe),
        (probe.couple_cavity2, Subsystem::Cavity2, probe.t2_probe),
    ];
    for (active, cavity, t) in stages {
        if !active {
            continue;
        }
        let stranded = stranded_population(&rho, cavity);
        if stranded > TRUNCATION_POP_TOL {
            return Err(Error::Truncation {
                mode: cavity.name(),
                amplitude: stranded.sqrt(),
            });
        }
        let u = probe_unitary(&space, cavity, probe.g_probe, t);
        rho = DensityMatrix::new(space.clone(), &u * rho.matrix() * u.adjoint())?;
    }

    let value = rho.block(Subsystem::Probe, GROUND, GROUND)?.trace();
    if value.im.abs() > 1e-10 {
        return Err(Error::NumericalConsistency(format!(
            "probe probability has imaginary part {:e}",
            value.im
        )));
    }
    Ok(value.re.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSample {
    pub t: f64,
    pub signal_bell: f64,
    pub signal_mixture: f64,
    pub contrast: f64,
}

/// Return probabilities for `rho_field` and its dephased counterpart, with
/// both probe durations scaled by each scan value.
pub fn probe_sweep(rho_field: &DensityMatrix, p: usize, probe: &ProbeConfig, times: &[f64]) -> Result<Vec<ProbeSample>> {
    if times.is_empty() {
        return Err(Error::invalid("times", "scan needs at least one time"));
    }
    let mixture = dephase_bell(rho_field, p)?;
    times
        .par_iter()
        .map(|&t| {
            let scaled = probe.scaled(t);
            let signal_bell = probe_return_probability(rho_field, &scaled)?;
            let signal_mixture = probe_return_probability(&mixture, &scaled)?;
            Ok(ProbeSample {
                t,
                signal_bell,
                signal_mixture,
                contrast: (signal_bell - signal_mixture).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{annihilation, HermitianPropagator};
    use crate::hilbert::{AtomLevel, HilbertLayout, MaxAbs, StateVector};
    use crate::protocol::bell_target;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn cavity1_only(g: f64, t: f64) -> ProbeConfig {
        ProbeConfig {
            g_probe: g,
            couple_cavity1: true,
            couple_cavity2: false,
            t1_probe: t,
            t2_probe: 0.0,
        }
    }

    fn both(g: f64, t: f64) -> ProbeConfig {
        ProbeConfig {
            g_probe: g,
            couple_cavity1: true,
            couple_cavity2: true,
            t1_probe: t,
            t2_probe: t,
        }
    }

    fn bell(p: usize, chi: f64, level: AtomLevel) -> DensityMatrix {
        bell_target(p, chi, level, &HilbertLayout::for_photon_number(p)).unwrap().projector()
    }

    #[test]
    fn dephase_examples() {
        let rho = bell(0, 0.0, AtomLevel::L0);
        let mixed = dephase_bell(&rho, 0).unwrap();
        let layout = HilbertLayout::for_photon_number(0);
        let i00 = layout.field_index(0, 0).unwrap();
        let i11 = layout.field_index(1, 1).unwrap();
        assert_abs_diff_eq!(mixed.matrix()[(i00, i00)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed.matrix()[(i11, i11)].re, 0.5, epsilon = 1e-15);
        assert_eq!(mixed.matrix()[(i00, i11)], Complex64::new(0.0, 0.0));
        assert_eq!(dephase_bell(&mixed, 0).unwrap(), mixed);
        for chi in [0.0, 1.0, PI] {
            let rho = bell(2, chi, AtomLevel::L2);
            assert_abs_diff_eq!(rho.purity(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(dephase_bell(&rho, 2).unwrap().purity(), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn dephase_rejects_off_support_states() {
        let layout = HilbertLayout::for_photon_number(0);
        let rho = StateVector::field_basis(&layout, 1, 0).unwrap().projector();
        assert!(matches!(dephase_bell(&rho, 0), Err(Error::SupportViolation { .. })));
    }

    #[test]
    fn vacuum_is_dark() {
        let layout = HilbertLayout::for_photon_number(0);
        let vac = StateVector::field_basis(&layout, 0, 0).unwrap().projector();
        for t in [0.0, 0.3, 2.0, 17.0] {
            assert_eq!(probe_return_probability(&vac, &both(1.3, t)).unwrap(), 1.0);
            assert_eq!(probe_return_probability(&vac, &cavity1_only(1.3, t)).unwrap(), 1.0);
        }
    }

    #[test]
    fn dephased_mixture_cavity1_formula() {
        let g: f64 = 0.7;
        let mixed = dephase_bell(&bell(0, 0.0, AtomLevel::L0), 0).unwrap();
        for t in [0.0, 0.4, 1.1, 3.0, 9.5] {
            let expected = (1.0 + (g * t).cos().powi(2)) / 2.0;
            assert_abs_diff_eq!(probe_return_probability(&mixed, &cavity1_only(g, t)).unwrap(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn cavity1_probe_cannot_see_coherence() {
        for p in [0, 2] {
            for chi in [0.0, 0.8, PI] {
                let rho = bell(p, chi, AtomLevel::L2);
                let a = rho.partial_trace(Subsystem::Cavity2).unwrap();
                let b = dephase_bell(&rho, p).unwrap().partial_trace(Subsystem::Cavity2).unwrap();
                assert!((a.matrix() - b.matrix()).max_abs() <= 1e-15);
                let times: Vec<f64> = (0..40).map(|k| 0.25 * k as f64).collect();
                let scan = probe_sweep(&rho, p, &cavity1_only(1.0, 1.0), &times).unwrap();
                assert!(scan.iter().all(|s| s.contrast <= 1e-10));
            }
        }
    }

    #[test]
    fn single_frequency_signal_is_periodic() {
        // p = 0, cavity 1 only: the only Rabi frequency is g, so the period is π/g.
        let g = 1.7;
        let rho = bell(0, 0.5, AtomLevel::L0);
        for t in [0.2, 0.9, 2.5] {
            let a = probe_return_probability(&rho, &cavity1_only(g, t)).unwrap();
            let b = probe_return_probability(&rho, &cavity1_only(g, t + PI / g)).unwrap();
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn truncation_is_detected() {
        // After cavity 1 the probe is excited while cavity 2 already sits at its cutoff.
        let layout = HilbertLayout::new(2, 2).unwrap();
        let rho = StateVector::field_basis(&layout, 1, 2).unwrap().projector();
        let err = probe_return_probability(&rho, &both(1.0, 0.5)).unwrap_err();
        assert!(matches!(err, Error::Truncation { mode: "cavity2", .. }));
    }

    #[test]
    fn config_validation() {
        let mut cfg = both(1.0, 1.0);
        cfg.couple_cavity1 = false;
        cfg.couple_cavity2 = false;
        assert!(cfg.validate().is_err());
        assert!(both(0.0, 1.0).validate().is_err());
        assert!(probe_sweep(&bell(0, 0.0, AtomLevel::L0), 0, &both(1.0, 1.0), &[]).is_err());
    }

    /// Dense-propagator oracle on a larger truncation: `exp(−iHt)` of the
    /// probe Hamiltonian built from ladder matrices.
    fn dense_oracle(rho_field: &CMatrix, g: f64, t: f64, cav1: bool, cav2: bool) -> f64 {
        let n = 4;
        let a = annihilation(n);
        let id = CMatrix::identity(n, n);
        let mut raise = CMatrix::zeros(2, 2);
        raise[(EXCITED, GROUND)] = Complex64::new(1.0, 0.0);
        let h1 = raise.kronecker(&a).kronecker(&id).scale(g);
        let h1 = &h1 + h1.adjoint();
        let h2 = raise.kronecker(&id).kronecker(&a).scale(g);
        let h2 = &h2 + h2.adjoint();

        // Embed the (c+1)² field matrix into n² levels.
        let d = (rho_field.nrows() as f64).sqrt() as usize;
        let mut big = CMatrix::zeros(n * n, n * n);
        for i in 0..rho_field.nrows() {
            for j in 0..rho_field.ncols() {
                big[((i / d) * n + i % d, (j / d) * n + j % d)] = rho_field[(i, j)];
            }
        }
        let mut ground = CMatrix::zeros(2, 2);
        ground[(GROUND, GROUND)] = Complex64::new(1.0, 0.0);
        let mut rho = ground.kronecker(&big);
        for (active, h) in [(cav1, &h1), (cav2, &h2)] {
            if active {
                let u = HermitianPropagator::new(h).unwrap().unitary(t);
                rho = &u * rho * u.adjoint();
            }
        }
        (0..n * n).map(|i| rho[(i, i)].re).sum()
    }

    #[test]
    fn analytic_probe_matches_dense_oracle() {
        let g = 1.0;
        for (chi, level) in [(0.0, AtomLevel::L0), (PI, AtomLevel::L0), (0.4, AtomLevel::L2)] {
            let rho = bell(0, chi, level);
            let mix = dephase_bell(&rho, 0).unwrap();
            for t in [0.0, 0.3, 1.7, 4.2] {
                for (c1, c2) in [(true, false), (true, true), (false, true)] {
                    let cfg = ProbeConfig { g_probe: g, couple_cavity1: c1, couple_cavity2: c2, t1_probe: t, t2_probe: t };
                    for r in [&rho, &mix] {
                        let analytic = probe_return_probability(r, &cfg).unwrap();
                        let dense = dense_oracle(r.matrix(), g, t, c1, c2);
                        assert!((analytic - dense).abs() <= 1e-12, "t={t} c1={c1} c2={c2}");
                    }
                }
            }
        }
    }

    #[derive(serde::Deserialize)]
    struct OracleCase {
        signal_bell: Vec<f64>,
        signal_mixture: Vec<f64>,
    }

    #[derive(serde::Deserialize)]
    struct OracleFixture {
        g_probe: f64,
        times: Vec<f64>,
        cases: std::collections::BTreeMap<String, OracleCase>,
    }

    #[test]
    fn matches_frozen_external_oracle() {
        let fixture: OracleFixture =
            serde_json::from_str(include_str!("../tests/fixtures/probe_oracle.json")).unwrap();
        let cases = [
            ("L0_chi0", 0.0, AtomLevel::L0),
            ("L0_chipi", PI, AtomLevel::L0),
            ("L2_chi0", 0.0, AtomLevel::L2),
        ];
        for (name, chi, level) in cases {
            let rho = bell(0, chi, level);
            for (mode, cfg) in [("cavity1", cavity1_only(fixture.g_probe, 1.0)), ("both", both(fixture.g_probe, 1.0))] {
                let case = &fixture.cases[&format!("{name}_{mode}")];
                let scan = probe_sweep(&rho, 0, &cfg, &fixture.times).unwrap();
                for (k, s) in scan.iter().enumerate() {
                    assert!((s.signal_bell - case.signal_bell[k]).abs() <= 1e-12);
                    assert!((s.signal_mixture - case.signal_mixture[k]).abs() <= 1e-12);
                }
            }
        }
    }
}
