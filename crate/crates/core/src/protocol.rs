//! The conditional Bell-state scheme end to end: `|2,p,p⟩` → cavity 1 →
//! cavity 2 → Ramsey zone → measurement of the atom, averaged over the
//! interaction-time jitter.
//!
//! Also hosts the closed-form fidelity `F(γ)` and success probability
//! `P(γ)` the simulation is checked against.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{evolve_cavity1, evolve_cavity2, CouplingConfig, RamseyRotation};
use crate::error::{Error, Result};
use crate::hilbert::{
    AtomLevel, CMatrix, CVector, DensityMatrix, HilbertLayout, StateVector, Subsystem,
};
use crate::jitter::{average, sample_points, Averaging, JitterModel};

/// Largest amplitude tolerated at the top Fock level of either cavity.
pub const TRUNCATION_TOL: f64 = 1e-12;
/// Tolerance on the atom-diagonal block decomposition of `ρ_R`.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// Mean interaction times giving rotation angles `π/4` in cavity 1 and
/// `π/2` in cavity 2 for photon number `p`.
pub fn ideal_timings(p: usize, g1: f64, g2: f64) -> Result<(f64, f64)> {
    for (name, g) in [("g1", g1), ("g2", g2)] {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::invalid(name, format!("must be positive and finite, got {g}")));
        }
    }
    let root = ((p + 1) as f64).sqrt();
    Ok((PI / (4.0 * root * g1), PI / (2.0 * root * g2)))
}

/// The ideal two-cavity target heralded by `outcome`:
/// `(|p,p⟩ ∓ e^{iχ}|p+1,p+1⟩)/√2`, minus for `L2`, plus for `L0`.
pub fn bell_target(p: usize, chi: f64, outcome: AtomLevel, layout: &HilbertLayout) -> Result<StateVector> {
    layout.require_photon_number(p)?;
    let sign = match outcome {
        AtomLevel::L2 => -1.0,
        AtomLevel::L0 => 1.0,
        AtomLevel::L1 => {
            return Err(Error::invalid("outcome", "only L0 and L2 herald a Bell state"));
        }
    };
    let mut state = StateVector::zeros(layout.field_space());
    state.amplitudes_mut()[layout.field_index(p, p)?] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    state.amplitudes_mut()[layout.field_index(p + 1, p + 1)?] =
        Complex64::from_polar(FRAC_1_SQRT_2, chi) * sign;
    Ok(state)
}

/// `F(γ) = 2/(3 + e^{−γ²π²/2}) · [1/2 + (1 + e^{−γ²π²/2})/4 + e^{−γ²π²/4}]`.
pub fn fidelity_closed_form(gamma: f64) -> f64 {
    let e2 = (-gamma * gamma * PI * PI / 2.0).exp();
    let e4 = (-gamma * gamma * PI * PI / 4.0).exp();
    2.0 / (3.0 + e2) * (0.5 + 0.25 * (1.0 + e2) + e4)
}

/// `P(γ) = [1 + (1 + e^{−γ²π²/2})/2] / 4`, the same for both heralding outcomes.
pub fn success_probability_closed_form(gamma: f64) -> f64 {
    let e2 = (-gamma * gamma * PI * PI / 2.0).exp();
    0.25 * (1.0 + 0.5 * (1.0 + e2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    pub p: usize,
    pub gamma: f64,
    pub chi: f64,
    pub config: CouplingConfig,
    /// Explicit mean interaction times; [`ideal_timings`] when absent.
    pub t_bar_override: Option<(f64, f64)>,
}

impl ProtocolParams {
    pub fn new(p: usize, gamma: f64, chi: f64, config: CouplingConfig) -> Self {
        Self {
            p,
            gamma,
            chi,
            config,
            t_bar_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid("gamma", format!("must be finite and non-negative, got {}", self.gamma)));
        }
        if !self.chi.is_finite() {
            return Err(Error::invalid("chi", "must be finite"));
        }
        Ok(())
    }

    pub fn timings(&self) -> Result<(f64, f64)> {
        match self.t_bar_override {
            Some(t) => Ok(t),
            None => ideal_timings(self.p, self.config.g1, self.config.g2),
        }
    }

    pub fn jitter(&self) -> Result<JitterModel> {
        let (t1, t2) = self.timings()?;
        JitterModel::new(self.gamma, t1, t2)
    }

    pub fn layout(&self) -> HilbertLayout {
        HilbertLayout::for_photon_number(self.p)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..*self }
    }
}

/// The post-Ramsey pure state for exact durations `(t1, t2)`.
pub fn post_ramsey_state(params: &ProtocolParams, t1: f64, t2: f64) -> Result<StateVector> {
    let layout = params.layout();
    let p = params.p;
    let psi = StateVector::basis(&layout, AtomLevel::L2, p, p)?;
    let psi = evolve_cavity1(&psi, t1, &params.config)?;
    let psi = evolve_cavity2(&psi, t2, &params.config)?;
    psi.ramsey_rotation(params.chi)
}

/// Batch-means error bars, present for Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardErrors {
    pub fidelity_l0: f64,
    pub fidelity_l2: f64,
    pub probability_l0: f64,
    pub probability_l2: f64,
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub params: ProtocolParams,
    pub layout: HilbertLayout,
    pub rho_r: DensityMatrix,
    /// `P(L0), P(L1), P(L2)` from the trace over the fields.
    pub outcome_probabilities: [f64; 3],
    /// Normalized field states heralded by `L0` and `L2`.
    pub conditional_field_states: BTreeMap<AtomLevel, DensityMatrix>,
    /// The `L1`-conditioned field state, absent when `P(L1)` vanishes.
    pub l1_field_state: Option<DensityMatrix>,
    /// Fidelities of the `L0`/`L2` field states with their Bell targets.
    pub fidelities: BTreeMap<AtomLevel, f64>,
    pub closed_form_f: f64,
    pub closed_form_p: f64,
    /// Largest amplitude found at the top Fock level of either cavity.
    pub truncation_amplitude: f64,
    pub standard_errors: Option<StandardErrors>,
}

impl ProtocolResult {
    pub fn probability(&self, level: AtomLevel) -> f64 {
        self.outcome_probabilities[level.index()]
    }

    pub fn fidelity(&self, level: AtomLevel) -> Option<f64> {
        self.fidelities.get(&level).copied()
    }

    /// Every density matrix the run produced, labelled.
    pub fn density_matrices(&self) -> Vec<(String, &DensityMatrix)> {
        let mut out = vec![("rho_R".to_string(), &self.rho_r)];
        for (level, rho) in &self.conditional_field_states {
            out.push((format!("field|{level}"), rho));
        }
        if let Some(rho) = &self.l1_field_state {
            out.push(("field|L1".to_string(), rho));
        }
        out
    }
}

/// Square root of the largest population at `n1 = cutoff1` or `n2 = cutoff2`.
fn top_level_amplitude(rho: &DensityMatrix, layout: &HilbertLayout) -> f64 {
    let mut worst = 0.0f64;
    for index in 0..layout.dim() {
        let (_, n1, n2) = layout.basis_label(index).expect("index in range");
        if n1 == layout.cutoff1() || n2 == layout.cutoff2() {
            worst = worst.max(rho.matrix()[(index, index)].re.abs());
        }
    }
    worst.sqrt()
}

fn conditional_fidelity(rho_r: &DensityMatrix, level: AtomLevel, target: &StateVector) -> Result<f64> {
    rho_r.project_atom(level)?.normalized_field().fidelity_pure(target)
}

pub fn run_protocol(params: &ProtocolParams, scheme: &Averaging) -> Result<ProtocolResult> {
    params.validate()?;
    let layout = params.layout();
    let jitter = params.jitter()?;
    let averaged = average(|t1, t2| post_ramsey_state(params, t1, t2), &jitter, scheme)?;
    let rho_r = averaged.rho;

    let truncation_amplitude = top_level_amplitude(&rho_r, &layout);
    if truncation_amplitude > TRUNCATION_TOL {
        return Err(Error::Truncation {
            mode: "cavity1/cavity2",
            amplitude: truncation_amplitude,
        });
    }

    let reduced_atom = rho_r.partial_trace(Subsystem::Cavity1)?.partial_trace(Subsystem::Cavity2)?;
    let mut outcome_probabilities = [0.0; 3];
    for level in AtomLevel::ALL {
        outcome_probabilities[level.index()] = reduced_atom.matrix()[(level.index(), level.index())].re;
    }

    let mut conditional_field_states = BTreeMap::new();
    let mut fidelities = BTreeMap::new();
    let mut targets = BTreeMap::new();
    for level in [AtomLevel::L0, AtomLevel::L2] {
        let field = rho_r.project_atom(level)?.normalized_field();
        let target = bell_target(params.p, params.chi, level, &layout)?;
        fidelities.insert(level, field.fidelity_pure(&target)?);
        conditional_field_states.insert(level, field);
        targets.insert(level, target);
    }
    let l1_field_state = match rho_r.project_atom(AtomLevel::L1) {
        Ok(proj) => Some(proj.normalized_field()),
        Err(Error::OutcomeImpossible { .. }) => None,
        Err(e) => return Err(e),
    };

    let standard_errors = match &averaged.mc {
        Some(mc) => {
            let fid = |level: AtomLevel| {
                let target = &targets[&level];
                mc.standard_error(|rho| conditional_fidelity(rho, level, target))
            };
            let prob = |level: AtomLevel| {
                mc.standard_error(|rho| {
                    Ok(rho.block(Subsystem::Atom, level.index(), level.index())?.trace().re)
                })
            };
            Some(StandardErrors {
                fidelity_l0: fid(AtomLevel::L0)?,
                fidelity_l2: fid(AtomLevel::L2)?,
                probability_l0: prob(AtomLevel::L0)?,
                probability_l2: prob(AtomLevel::L2)?,
            })
        }
        None => None,
    };

    Ok(ProtocolResult {
        params: *params,
        layout,
        rho_r,
        outcome_probabilities,
        conditional_field_states,
        l1_field_state,
        fidelities,
        closed_form_f: fidelity_closed_form(params.gamma),
        closed_form_p: success_probability_closed_form(params.gamma),
        truncation_amplitude,
        standard_errors,
    })
}

/// Measured deviations of `ρ_R` from its atom-diagonal block decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualReport {
    /// `‖⟨0|ρ_residual|0⟩‖_F`.
    pub residual_l0_norm: f64,
    /// `‖⟨2|ρ_residual|2⟩‖_F`.
    pub residual_l2_norm: f64,
    /// `Tr⟨2|ρ_R|2⟩`.
    pub l2_trace: f64,
    /// `|Tr⟨2|ρ_R|2⟩ − P(γ)|` against the closed form.
    pub l2_trace_deviation: f64,
}

impl ResidualReport {
    pub fn passed(&self) -> bool {
        self.residual_l0_norm <= RESIDUAL_TOL && self.residual_l2_norm <= RESIDUAL_TOL
    }
}

/// The field vectors multiplying `|2⟩` and `|0⟩` (up to sign) after the
/// Ramsey zone, for exact durations.
fn heralded_field_vectors(params: &ProtocolParams, layout: &HilbertLayout, t1: f64, t2: f64) -> Result<(CVector, CVector)> {
    let p = params.p;
    let root = ((p + 1) as f64).sqrt();
    let (s1, c1) = (params.config.g1 * t1 * root).sin_cos();
    let s2 = (params.config.g2 * t2 * root).sin();
    let low = layout.field_index(p, p)?;
    let high = layout.field_index(p + 1, p + 1)?;
    let mut phi2 = CVector::zeros(layout.field_dim());
    phi2[low] = Complex64::new(c1, 0.0);
    phi2[high] = -Complex64::from_polar(s1 * s2, params.chi);
    let mut phi0 = CVector::zeros(layout.field_dim());
    phi0[low] = Complex64::from_polar(c1, -params.chi);
    phi0[high] = Complex64::new(s1 * s2, 0.0);
    Ok((phi2, phi0))
}

/// Checks that the `L2` and `L0` diagonal blocks of `ρ_R` are exactly half
/// the jitter averages of the heralded field projectors, so that the
/// remainder has vanishing `⟨0|·|0⟩` and `⟨2|·|2⟩` blocks.
///
/// `scheme` must be the one that produced `rho_r`; the averages are taken
/// over the same sample points.
pub fn residual_check(rho_r: &DensityMatrix, params: &ProtocolParams, scheme: &Averaging) -> Result<ResidualReport> {
    let layout = params.layout();
    if rho_r.space() != &layout.full_space() {
        return Err(Error::SpaceMismatch("rho_R does not live on the protocol layout".into()));
    }
    let jitter = params.jitter()?;
    let points = sample_points(&jitter, scheme)?;
    let dim = layout.field_dim();
    let mut avg2 = CMatrix::zeros(dim, dim);
    let mut avg0 = CMatrix::zeros(dim, dim);
    for (t1, t2, w) in points {
        let (phi2, phi0) = heralded_field_vectors(params, &layout, t1, t2)?;
        avg2 += (&phi2 * phi2.adjoint()).scale(w);
        avg0 += (&phi0 * phi0.adjoint()).scale(w);
    }

    // ρ_residual = ρ_R − ½A₂⊗|2⟩⟨2| − ½A₀⊗|0⟩⟨0| − ⟨1|ρ_R|1⟩⊗|1⟩⟨1|.
    let mut residual = rho_r.matrix().clone();
    let blocks = [
        (AtomLevel::L2, avg2.scale(0.5)),
        (AtomLevel::L0, avg0.scale(0.5)),
        (AtomLevel::L1, rho_r.block(Subsystem::Atom, 1, 1)?.into_matrix()),
    ];
    for (level, block) in &blocks {
        let off = level.index() * dim;
        let mut view = residual.view_mut((off, off), (dim, dim));
        view -= block;
    }
    let residual = DensityMatrix::new(layout.full_space(), residual)?;
    let residual_l0_norm = residual.block(Subsystem::Atom, 0, 0)?.matrix().norm();
    let residual_l2_norm = residual.block(Subsystem::Atom, 2, 2)?.matrix().norm();
    let l2_trace = rho_r.block(Subsystem::Atom, 2, 2)?.trace().re;

    let report = ResidualReport {
        residual_l0_norm,
        residual_l2_norm,
        l2_trace,
        l2_trace_deviation: (l2_trace - success_probability_closed_form(params.gamma)).abs(),
    };
    if !report.passed() {
        return Err(Error::ResidualMismatch(format!(
            "‖⟨0|ρ_res|0⟩‖ = {:e}, ‖⟨2|ρ_res|2⟩‖ = {:e}",
            report.residual_l0_norm, report.residual_l2_norm
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    /// Simulated fidelity of the `L2`-heralded state.
    pub f_sim: f64,
    pub f_closed: f64,
    /// Simulated `P(L2)`.
    pub p_sim: f64,
    pub p_closed: f64,
}

/// Uniform grid of `steps` spread parameters from `gamma_min` to `gamma_max`.
pub fn gamma_grid(gamma_min: f64, gamma_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(gamma_min.is_finite() && gamma_max.is_finite() && 0.0 <= gamma_min && gamma_min <= gamma_max) {
        return Err(Error::invalid("gamma", format!("need 0 ≤ min ≤ max, got [{gamma_min}, {gamma_max}]")));
    }
    match steps {
        0 => Err(Error::invalid("steps", "must be at least 1")),
        1 => Ok(vec![gamma_min]),
        _ if gamma_min == gamma_max => Err(Error::invalid("steps", "more than one step needs min < max")),
        _ => {
            let span = gamma_max - gamma_min;
            let last = (steps - 1) as f64;
            Ok((0..steps)
                .map(|k| if k + 1 == steps { gamma_max } else { gamma_min + span * k as f64 / last })
                .collect())
        }
    }
}

/// Runs the protocol at each grid point; rows come back in grid order.
pub fn sweep_gamma(
    base: &ProtocolParams,
    gamma_min: f64,
    gamma_max: f64,
    steps: usize,
    scheme: &Averaging,
) -> Result<Vec<SweepRow>> {
    gamma_grid(gamma_min, gamma_max, steps)?
        .into_par_iter()
        .map(|gamma| {
            let result = run_protocol(&base.with_gamma(gamma), scheme)?;
            Ok(SweepRow {
                gamma,
                f_sim: result.fidelities[&AtomLevel::L2],
                f_closed: result.closed_form_f,
                p_sim: result.probability(AtomLevel::L2),
                p_closed: result.closed_form_p,
            })
        })
        .collect()
}
