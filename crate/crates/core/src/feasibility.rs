//! Order-of-magnitude check that the experiment outruns cavity damping and
//! atomic decay. All quantities in SI units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reminder carried in every report.
pub const SMALL_PHOTON_CAVEAT: &str =
    "cavity losses are negligible only while the photon number stored in each cavity stays small";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabParams {
    pub q: f64,
    pub omega: f64,
    /// `true`: `omega` is divided into `Q` directly. `false`: `omega` is a
    /// cycle frequency and `2π·omega` is used.
    pub omega_is_angular: bool,
    pub p: u32,
    pub l_apparatus: f64,
    pub v_atom: f64,
    pub tau_atom: f64,
}

impl Default for LabParams {
    /// Open Fabry-Perot cavities, thermal Rydberg beam, one photon.
    fn default() -> Self {
        Self {
            q: 3e8,
            omega: 1e10,
            omega_is_angular: true,
            p: 1,
            l_apparatus: 0.1,
            v_atom: 500.0,
            tau_atom: 1e-2,
        }
    }
}

impl LabParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("q", self.q),
            ("omega", self.omega),
            ("l_apparatus", self.l_apparatus),
            ("v_atom", self.v_atom),
            ("tau_atom", self.tau_atom),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.p == 0 {
            return Err(Error::invalid("p", "damping time Q/(p·omega) needs p ≥ 1"));
        }
        Ok(())
    }

    fn effective_omega(&self) -> f64 {
        if self.omega_is_angular {
            self.omega
        } else {
            2.0 * std::f64::consts::PI * self.omega
        }
    }
}

/// Photon storage time `Q / (p·ω)`.
pub fn cavity_damping_time(q: f64, omega: f64, p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::invalid("p", "damping time Q/(p·omega) needs p ≥ 1"));
    }
    if !(q > 0.0 && omega > 0.0) {
        return Err(Error::invalid("q", "Q and omega must be positive"));
    }
    Ok(q / (p as f64 * omega))
}

/// Time of flight `l / v` through the apparatus.
pub fn experiment_duration(l_apparatus: f64, v_atom: f64) -> Result<f64> {
    if !(l_apparatus > 0.0 && v_atom > 0.0) {
        return Err(Error::invalid("l_apparatus", "length and velocity must be positive"));
    }
    Ok(l_apparatus / v_atom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    Infeasible { reasons: Vec<String> },
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub params: LabParams,
    /// `T`, s.
    pub duration: f64,
    /// `τ`, s.
    pub damping_time: f64,
    /// `τ_A`, s.
    pub atomic_lifetime: f64,
    /// `T / τ`; below one means losses are outrun.
    pub cavity_margin: f64,
    /// `T / τ_A`.
    pub atomic_margin: f64,
    pub cavity_ok: bool,
    pub atom_ok: bool,
    pub verdict: Verdict,
    pub caveat: &'static str,
}

pub fn feasibility_report(params: &LabParams) -> Result<FeasibilityReport> {
    params.validate()?;
    let duration = experiment_duration(params.l_apparatus, params.v_atom)?;
    let damping_time = cavity_damping_time(params.q, params.effective_omega(), params.p)?;
    let cavity_ok = duration < damping_time;
    let atom_ok = duration < params.tau_atom;

    let mut reasons = Vec::new();
    if !cavity_ok {
        reasons.push(format!(
            "cavity losses: T = {duration:e} s is not below the damping time τ = {damping_time:e} s"
        ));
    }
    if !atom_ok {
        reasons.push(format!(
            "atomic decay: T = {duration:e} s is not below the atomic lifetime τ_A = {:e} s",
            params.tau_atom
        ));
    }
    let verdict = if reasons.is_empty() {
        Verdict::Feasible
    } else {
        Verdict::Infeasible { reasons }
    };

    Ok(FeasibilityReport {
        params: *params,
        duration,
        damping_time,
        atomic_lifetime: params.tau_atom,
        cavity_margin: duration / damping_time,
        atomic_margin: duration / params.tau_atom,
        cavity_ok,
        atom_ok,
        verdict,
        caveat: SMALL_PHOTON_CAVEAT,
    })
}
