//! Subcommand bodies. Each returns the rendered output; nothing is written
//! until the whole computation has succeeded.

use std::path::Path;

use cavity_bell::dynamics::{build_hamiltonian, evolve_cavity1, evolve_cavity2, numeric_propagator, Stage};
use cavity_bell::feasibility::{feasibility_report, LabParams, Verdict};
use cavity_bell::hilbert::DensityMatrix;
use cavity_bell::jitter::{Averaging, MC_GENERATOR};
use cavity_bell::probe::{probe_sweep, ProbeConfig};
use cavity_bell::protocol::{bell_target, gamma_grid, residual_check, sweep_gamma, ProtocolResult};
use cavity_bell::{run_protocol, AtomLevel, HilbertLayout, ProtocolParams, StateVector};
use serde::Serialize;

use crate::config::{parse_config, Format, RunConfig};
use crate::output::{csv_number, csv_table, json};
use crate::{Cli, CliError, Command, FeasibilityArgs, FieldSource, Outcome, ProbeArgs, ProbeMode};

pub struct CommandOutput {
    pub body: String,
    /// Set by `validate` when a check misses its tolerance.
    pub failed: bool,
}

impl CommandOutput {
    fn ok(body: String) -> Self {
        Self { body, failed: false }
    }
}

/// Reads `--config` (if any) and applies the global flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => parse_config(&read_config(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(samples) = cli.mc_samples {
        config.mc_samples = Some(samples);
    }
    if let Some(nodes) = cli.nodes {
        config.nodes = nodes;
    }
    if cli.format.is_some() {
        config.format = cli.format;
    }
    if cli.out.is_some() {
        config.out = cli.out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn execute(cli: &Cli) -> Result<CommandOutput, CliError> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&config).map(CommandOutput::ok),
        Command::SweepGamma { min, max, steps } => cmd_sweep_gamma(&config, *min, *max, *steps).map(CommandOutput::ok),
        Command::Probe(args) => cmd_probe(&config, args).map(CommandOutput::ok),
        Command::Feasibility(args) => cmd_feasibility(&config, args).map(CommandOutput::ok),
        Command::Validate { tolerance_scale } => cmd_validate(&config, *tolerance_scale),
    }
}

fn format_or(config: &RunConfig, default: Format, allowed: &[Format], command: &str) -> Result<Format, CliError> {
    let format = config.format.unwrap_or(default);
    if !allowed.contains(&format) {
        return Err(CliError::Usage(format!("{command} does not support --format {format:?}")));
    }
    Ok(format)
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub p: usize,
    pub gamma: f64,
    pub chi: f64,
    pub g1: f64,
    pub g2: f64,
    pub t_bar_1: f64,
    pub t_bar_2: f64,
    pub scheme: &'static str,
    pub nodes: Option<usize>,
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub mc_generator: Option<&'static str>,
    pub probability_l0: f64,
    pub probability_l1: f64,
    pub probability_l2: f64,
    pub fidelity_l0: f64,
    pub fidelity_l2: f64,
    pub fidelity_closed_form: f64,
    pub probability_closed_form: f64,
    pub fidelity_l0_se: Option<f64>,
    pub fidelity_l2_se: Option<f64>,
    pub probability_l0_se: Option<f64>,
    pub probability_l2_se: Option<f64>,
    pub residual_l0_norm: f64,
    pub residual_l2_norm: f64,
    pub residual_passed: bool,
    pub truncation_amplitude: f64,
    pub truncation_passed: bool,
}

pub fn simulate_report(config: &RunConfig) -> Result<SimulateReport, CliError> {
    let params = config.params()?;
    let scheme = config.averaging()?;
    let result = run_protocol(&params, &scheme)?;
    let residual = residual_check(&result.rho_r, &params, &scheme)?;
    let (t_bar_1, t_bar_2) = params.timings()?;
    let (scheme_name, nodes, mc_samples, seed, mc_generator) = match scheme {
        Averaging::Quadrature(q) => ("quadrature", Some(q.nodes_per_axis), None, None, None),
        Averaging::MonteCarlo(mc) => ("monte_carlo", None, Some(mc.samples), Some(mc.seed), Some(MC_GENERATOR)),
    };
    let se = result.standard_errors;
    Ok(SimulateReport {
        p: params.p,
        gamma: params.gamma,
        chi: params.chi,
        g1: params.config.g1,
        g2: params.config.g2,
        t_bar_1,
        t_bar_2,
        scheme: scheme_name,
        nodes,
        mc_samples,
        seed,
        mc_generator,
        probability_l0: result.probability(AtomLevel::L0),
        probability_l1: result.probability(AtomLevel::L1),
        probability_l2: result.probability(AtomLevel::L2),
        fidelity_l0: result.fidelities[&AtomLevel::L0],
        fidelity_l2: result.fidelities[&AtomLevel::L2],
        fidelity_closed_form: result.closed_form_f,
        probability_closed_form: result.closed_form_p,
        fidelity_l0_se: se.map(|s| s.fidelity_l0),
        fidelity_l2_se: se.map(|s| s.fidelity_l2),
        probability_l0_se: se.map(|s| s.probability_l0),
        probability_l2_se: se.map(|s| s.probability_l2),
        residual_l0_norm: residual.residual_l0_norm,
        residual_l2_norm: residual.residual_l2_norm,
        residual_passed: residual.passed(),
        truncation_amplitude: result.truncation_amplitude,
        truncation_passed: result.truncation_amplitude <= cavity_bell::protocol::TRUNCATION_TOL,
    })
}

pub fn cmd_simulate(config: &RunConfig) -> Result<String, CliError> {
    format_or(config, Format::Json, &[Format::Json], "simulate")?;
    json(&simulate_report(config)?)
}

pub const SWEEP_HEADER: [&str; 5] = ["gamma", "F_sim", "F_closed", "P_sim", "P_closed"];

pub fn cmd_sweep_gamma(config: &RunConfig, min: f64, max: f64, steps: usize) -> Result<String, CliError> {
    let format = format_or(config, Format::Csv, &[Format::Csv, Format::Json], "sweep-gamma")?;
    if steps < 2 {
        return Err(CliError::Usage("sweep-gamma needs STEPS ≥ 2".into()));
    }
    if max > 1.0 {
        return Err(CliError::Usage(format!("sweep-gamma: MAX must be at most 1, got {max}")));
    }
    gamma_grid(min, max, steps).map_err(|e| CliError::Usage(e.to_string()))?;
    let rows = sweep_gamma(&config.params()?, min, max, steps, &config.averaging()?)?;
    match format {
        Format::Csv => Ok(csv_table(
            &SWEEP_HEADER,
            rows.iter().map(|r| vec![r.gamma, r.f_sim, r.f_closed, r.p_sim, r.p_closed]),
        )),
        Format::Json => json(&rows),
    }
}

pub const PROBE_HEADER: [&str; 4] = ["t", "signal_bell", "signal_mixture", "contrast"];

fn probe_times(args: &ProbeArgs) -> Result<Vec<f64>, CliError> {
    let times = match (args.t_max, args.t_steps) {
        (Some(t_max), Some(steps)) => {
            if steps < 2 || !(t_max.is_finite() && t_max > 0.0) {
                return Err(CliError::Usage("--t-max must be positive and --t-steps at least 2".into()));
            }
            let last = (steps - 1) as f64;
            (0..steps).map(|k| t_max * k as f64 / last).collect()
        }
        _ => args.times.clone(),
    };
    if times.is_empty() {
        return Err(CliError::Usage("probe needs --times or --t-max/--t-steps".into()));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(CliError::Usage(format!("probe time {t} is not finite")));
    }
    Ok(times)
}

pub fn cmd_probe(config: &RunConfig, args: &ProbeArgs) -> Result<String, CliError> {
    let format = format_or(config, Format::Csv, &[Format::Csv, Format::Json], "probe")?;
    let times = probe_times(args)?;
    let level = match args.outcome {
        Outcome::L0 => AtomLevel::L0,
        Outcome::L2 => AtomLevel::L2,
    };
    let rho_field = match args.state {
        FieldSource::Bell => {
            bell_target(config.p, config.chi, level, &HilbertLayout::for_photon_number(config.p))?.projector()
        }
        FieldSource::Protocol => {
            let mut result = run_protocol(&config.params()?, &config.averaging()?)?;
            result
                .conditional_field_states
                .remove(&level)
                .ok_or(CliError::Numerical(cavity_bell::Error::OutcomeImpossible { level, weight: 0.0 }))?
        }
    };
    let probe = ProbeConfig {
        g_probe: args.g_probe.unwrap_or(config.g1),
        couple_cavity1: true,
        couple_cavity2: args.mode == ProbeMode::Both,
        t1_probe: 1.0,
        t2_probe: if args.mode == ProbeMode::Both { 1.0 } else { 0.0 },
    };
    probe.validate()?;
    let samples = probe_sweep(&rho_field, config.p, &probe, &times)?;
    match format {
        Format::Csv => Ok(csv_table(
            &PROBE_HEADER,
            samples.iter().map(|s| vec![s.t, s.signal_bell, s.signal_mixture, s.contrast]),
        )),
        Format::Json => json(&samples),
    }
}

#[derive(Debug, Serialize)]
pub struct FeasibilityOutput {
    pub q: f64,
    pub omega: f64,
    pub omega_is_angular: bool,
    pub p: u32,
    pub l_apparatus: f64,
    pub v_atom: f64,
    pub duration: f64,
    pub damping_time: f64,
    pub atomic_lifetime: f64,
    pub cavity_margin: f64,
    pub atomic_margin: f64,
    pub cavity_ok: bool,
    pub atom_ok: bool,
    pub feasible: bool,
    pub reasons: Vec<String>,
    pub caveat: &'static str,
}

pub fn cmd_feasibility(config: &RunConfig, args: &FeasibilityArgs) -> Result<String, CliError> {
    format_or(config, Format::Json, &[Format::Json], "feasibility")?;
    let defaults = LabParams::default();
    let params = LabParams {
        q: args.q.unwrap_or(defaults.q),
        omega: args.omega.unwrap_or(defaults.omega),
        omega_is_angular: !args.omega_cycles,
        p: args.p,
        l_apparatus: args.length.unwrap_or(defaults.l_apparatus),
        v_atom: args.velocity.unwrap_or(defaults.v_atom),
        tau_atom: args.tau_atom.unwrap_or(defaults.tau_atom),
    };
    let report = feasibility_report(&params)?;
    let reasons = match &report.verdict {
        Verdict::Feasible => Vec::new(),
        Verdict::Infeasible { reasons } => reasons.clone(),
    };
    json(&FeasibilityOutput {
        q: params.q,
        omega: params.omega,
        omega_is_angular: params.omega_is_angular,
        p: params.p,
        l_apparatus: params.l_apparatus,
        v_atom: params.v_atom,
        duration: report.duration,
        damping_time: report.damping_time,
        atomic_lifetime: report.atomic_lifetime,
        cavity_margin: report.cavity_margin,
        atomic_margin: report.atomic_margin,
        cavity_ok: report.cavity_ok,
        atom_ok: report.atom_ok,
        feasible: report.verdict.is_feasible(),
        reasons,
        caveat: report.caveat,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub check: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(check: &'static str, deviation: f64, tolerance: f64) -> Self {
        Self {
            check,
            deviation,
            tolerance,
            passed: deviation <= tolerance,
        }
    }
}

fn worst_invariant(rho: &DensityMatrix) -> Result<f64, CliError> {
    let r = rho.invariant_report()?;
    Ok(r.hermiticity_error.max(r.trace_error).max(-r.min_eigenvalue).max(0.0))
}

/// Runs the cross-checks with every tolerance multiplied by `scale`.
pub fn validation_checks(config: &RunConfig, scale: f64) -> Result<Vec<Check>, CliError> {
    let coupling = config.coupling()?;
    let quad = Averaging::Quadrature(cavity_bell::QuadratureScheme::new(config.nodes.max(32))?);
    let mut checks = Vec::new();

    let mut propagator = 0.0f64;
    for p in [0usize, 1, 3, 5] {
        let layout = HilbertLayout::for_photon_number(p);
        let psi = StateVector::basis(&layout, AtomLevel::L2, p, p)?;
        let h1 = build_hamiltonian(&layout, &coupling, Stage::InsideCavity1);
        let h2 = build_hamiltonian(&layout, &coupling, Stage::InsideCavity2);
        for (a, b) in [(0.3, 0.7), (1.0, 1.0), (2.9, 0.4), (-0.6, 1.8)] {
            let (t1, t2) = (a / coupling.g1, b / coupling.g2);
            let analytic = evolve_cavity2(&evolve_cavity1(&psi, t1, &coupling)?, t2, &coupling)?;
            let numeric = numeric_propagator(&numeric_propagator(&psi, &h1, t1)?, &h2, t2)?;
            propagator = propagator.max(1.0 - analytic.inner(&numeric)?.norm());
        }
    }
    checks.push(Check::new("analytic_vs_eigen_propagator", propagator, 1e-9 * scale));

    let mut runs: Vec<ProtocolResult> = Vec::new();
    let mut ideal = 0.0f64;
    let mut residual = 0.0f64;
    for p in [0usize, 2] {
        let params = ProtocolParams::new(p, 0.0, config.chi, coupling);
        let result = run_protocol(&params, &quad)?;
        for level in [AtomLevel::L0, AtomLevel::L2] {
            ideal = ideal.max((1.0 - result.fidelities[&level]).abs());
        }
        ideal = ideal.max(result.probability(AtomLevel::L1));
        let report = residual_check(&result.rho_r, &params, &quad)?;
        residual = residual.max(report.residual_l0_norm).max(report.residual_l2_norm);
        runs.push(result);
    }
    checks.push(Check::new("ideal_case_fidelity", ideal, 1e-12 * scale));

    let mut fidelity = 0.0f64;
    let mut probability = 0.0f64;
    for p in [0usize, 1] {
        for gamma in [0.02, 0.05, 0.1] {
            let params = ProtocolParams::new(p, gamma, config.chi, coupling);
            let result = run_protocol(&params, &quad)?;
            for level in [AtomLevel::L0, AtomLevel::L2] {
                fidelity = fidelity.max((result.fidelities[&level] - result.closed_form_f).abs());
                probability = probability.max((result.probability(level) - result.closed_form_p).abs());
            }
            if gamma == 0.1 {
                let report = residual_check(&result.rho_r, &params, &quad)?;
                residual = residual.max(report.residual_l0_norm).max(report.residual_l2_norm);
            }
            runs.push(result);
        }
    }
    checks.push(Check::new("fidelity_vs_closed_form", fidelity, 1e-6 * scale));
    checks.push(Check::new("probability_vs_closed_form", probability, 1e-6 * scale));
    checks.push(Check::new("residual_blocks", residual, 1e-12 * scale));

    let mut invariants = 0.0f64;
    let mut truncation = 0.0f64;
    for result in &runs {
        truncation = truncation.max(result.truncation_amplitude);
        for (_, rho) in result.density_matrices() {
            invariants = invariants.max(worst_invariant(rho)?);
        }
    }
    checks.push(Check::new("density_matrix_invariants", invariants, 1e-10 * scale));
    checks.push(Check::new("truncation_amplitude", truncation, 1e-12 * scale));

    let mut null_contrast = 0.0f64;
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25 / coupling.g1).collect();
    for (level, chi) in [(AtomLevel::L0, 0.0), (AtomLevel::L2, std::f64::consts::PI)] {
        let rho = bell_target(0, chi, level, &HilbertLayout::for_photon_number(0))?.projector();
        let probe = ProbeConfig {
            g_probe: coupling.g1,
            couple_cavity1: true,
            couple_cavity2: false,
            t1_probe: 1.0,
            t2_probe: 0.0,
        };
        for s in probe_sweep(&rho, 0, &probe, &times)? {
            null_contrast = null_contrast.max(s.contrast);
        }
    }
    checks.push(Check::new("probe_cavity1_null_contrast", null_contrast, 1e-10 * scale));

    let lab = feasibility_report(&LabParams::default())?;
    checks.push(Check::new("feasibility_duration", ((lab.duration - 2e-4) / 2e-4).abs(), 1e-12 * scale));

    Ok(checks)
}

pub fn cmd_validate(config: &RunConfig, scale: f64) -> Result<CommandOutput, CliError> {
    let format = format_or(config, Format::Csv, &[Format::Csv, Format::Json], "validate")?;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(CliError::Usage("tolerance scale must be finite and non-negative".into()));
    }
    let checks = validation_checks(config, scale)?;
    let failed = checks.iter().any(|c| !c.passed);
    let body = match format {
        Format::Csv => {
            let mut out = String::from("check,deviation,tolerance,status\n");
            for c in &checks {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    c.check,
                    csv_number(c.deviation),
                    csv_number(c.tolerance),
                    if c.passed { "PASS" } else { "FAIL" }
                ));
            }
            out
        }
        Format::Json => json(&checks)?,
    };
    Ok(CommandOutput { body, failed })
}
