//! Flat `key = value` run configuration.

use std::f64::consts::PI;
use std::path::PathBuf;

use cavity_bell::dynamics::CouplingConfig;
use cavity_bell::jitter::{Averaging, MCConfig, QuadratureScheme, DEFAULT_NODES};
use cavity_bell::ProtocolParams;
use serde::Deserialize;

use crate::CliError;

/// Largest photon number accepted without an explicit `max_p` override.
pub const DEFAULT_MAX_P: usize = 6;

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: f64,
    pub p: usize,
    pub chi: f64,
    /// Couplings in rad/s.
    pub g1: f64,
    pub g2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub e0: f64,
    pub t_bar_1: Option<f64>,
    pub t_bar_2: Option<f64>,
    pub nodes: usize,
    /// Switches to Monte Carlo averaging when set.
    pub mc_samples: Option<usize>,
    pub seed: u64,
    pub max_p: usize,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = 2.0 * PI * 25e3;
        Self {
            gamma: 0.1,
            p: 0,
            chi: 0.0,
            g1: g,
            g2: g,
            omega1: 1e10,
            omega2: 1e10,
            e0: 0.0,
            t_bar_1: None,
            t_bar_2: None,
            nodes: DEFAULT_NODES,
            mc_samples: None,
            seed: 0,
            max_p: DEFAULT_MAX_P,
            out: None,
            format: None,
        }
    }
}

fn range_error(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(range_error("gamma", format_args!("must lie in [0, 1], got {}", self.gamma)));
        }
        if self.p > self.max_p {
            return Err(range_error("p", format_args!("must be at most {}, got {}", self.max_p, self.p)));
        }
        if !self.chi.is_finite() {
            return Err(range_error("chi", "must be finite"));
        }
        for (name, v) in [("g1", self.g1), ("g2", self.g2), ("omega1", self.omega1), ("omega2", self.omega2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(range_error(name, format_args!("must be positive and finite, got {v}")));
            }
        }
        if !self.e0.is_finite() {
            return Err(range_error("e0", "must be finite"));
        }
        match (self.t_bar_1, self.t_bar_2) {
            (None, None) => {}
            (Some(t1), Some(t2)) => {
                for (name, t) in [("t_bar_1", t1), ("t_bar_2", t2)] {
                    if !(t.is_finite() && t > 0.0) {
                        return Err(range_error(name, format_args!("must be positive and finite, got {t}")));
                    }
                }
            }
            _ => return Err(range_error("t_bar_1", "t_bar_1 and t_bar_2 must be given together")),
        }
        if self.nodes == 0 {
            return Err(range_error("nodes", "must be at least 1"));
        }
        if self.mc_samples == Some(0) {
            return Err(range_error("mc_samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn coupling(&self) -> Result<CouplingConfig, CliError> {
        CouplingConfig::resonant(self.g1, self.g2, self.omega1, self.omega2, self.e0)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<ProtocolParams, CliError> {
        let mut params = ProtocolParams::new(self.p, self.gamma, self.chi, self.coupling()?);
        if let (Some(t1), Some(t2)) = (self.t_bar_1, self.t_bar_2) {
            params.t_bar_override = Some((t1, t2));
        }
        Ok(params)
    }

    pub fn averaging(&self) -> Result<Averaging, CliError> {
        let scheme = match self.mc_samples {
            Some(samples) => Averaging::MonteCarlo(MCConfig::new(samples, self.seed)?),
            None => Averaging::Quadrature(QuadratureScheme::new(self.nodes)?),
        };
        Ok(scheme)
    }
}

/// Parses and validates a configuration document; missing keys take defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
