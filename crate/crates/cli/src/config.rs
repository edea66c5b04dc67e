//! Flat TOML run configuration. Units are part of every key name; values are
//! converted to SI by shifting their decimal exponent.

use std::fs;
use std::path::Path;

use phaseprop::propagator::MIN_CELLS;
use phaseprop::wavefield::ELECTRON_MASS;
use phaseprop::{ExperimentConfig, Grid, PhysicalConstants, Scheme, SolverOptions};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One run's settings as written by the user. Missing keys take the
/// double-slit baseline values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slit_half_separation_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_rho_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_s_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final_ns: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_x_max_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

impl ConfigFile {
    pub fn baseline() -> Self {
        let solver = SolverOptions::default();
        Self {
            mass_kg: Some(ELECTRON_MASS),
            slit_half_separation_nm: Some(500.0),
            sigma_rho_nm: Some(100.0),
            sigma_s_nm: Some(100.0),
            t_final_ns: Some(2.0),
            grid_x_max_um: Some(10.0),
            grid_cells: Some(16384),
            cfl: Some(solver.cfl),
            node_epsilon: Some(solver.node_epsilon),
            scheme: Some(solver.scheme.to_string()),
            max_steps: Some(solver.max_steps),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// Every key filled in from the baseline where missing.
    pub fn resolved(&self) -> Self {
        let base = Self::baseline();
        macro_rules! fill {
            ($($key:ident),*) => {
                Self { $($key: self.$key.clone().or(base.$key),)* }
            };
        }
        fill!(
            mass_kg,
            slit_half_separation_nm,
            sigma_rho_nm,
            sigma_s_nm,
            t_final_ns,
            grid_x_max_um,
            grid_cells,
            cfl,
            node_epsilon,
            scheme,
            max_steps
        )
    }

    /// Logs a notice for every key that falls back to its default.
    pub fn log_defaults(&self) {
        let explicit = toml::Table::try_from(self).expect("flat config always serializes");
        let resolved = toml::Table::try_from(self.resolved()).expect("flat config always serializes");
        for (key, value) in &resolved {
            if !explicit.contains_key(key) {
                log::info!("{key} not set; using default {value}");
            }
        }
    }

    /// Validated SI configuration. Errors name the offending key.
    pub fn to_experiment(&self) -> Result<ExperimentConfig, CliError> {
        let c = self.resolved();
        let positive = |key: &str, v: Option<f64>| -> Result<f64, CliError> {
            let v = v.expect("resolved");
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(CliError::Config(format!("{key} must be finite and > 0 (got {v})")))
            }
        };
        let mass = positive("mass_kg", c.mass_kg)?;
        let half_separation = shift_decimal(positive("slit_half_separation_nm", c.slit_half_separation_nm)?, -9);
        let sigma_rho_nm = positive("sigma_rho_nm", c.sigma_rho_nm)?;
        let sigma_s_nm = positive("sigma_s_nm", c.sigma_s_nm)?;
        if sigma_s_nm < sigma_rho_nm {
            return Err(CliError::Config(format!(
                "sigma_s_nm must be >= sigma_rho_nm (got {sigma_s_nm} < {sigma_rho_nm})"
            )));
        }
        let t_final_ns = c.t_final_ns.expect("resolved");
        if !(t_final_ns.is_finite() && t_final_ns >= 0.0) {
            return Err(CliError::Config(format!("t_final_ns must be finite and >= 0 (got {t_final_ns})")));
        }
        let x_max = shift_decimal(positive("grid_x_max_um", c.grid_x_max_um)?, -6);
        let cells = c.grid_cells.expect("resolved");
        if cells < MIN_CELLS {
            return Err(CliError::Config(format!("grid_cells must be >= {MIN_CELLS} (got {cells})")));
        }
        let cfl = c.cfl.expect("resolved");
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(CliError::Config(format!("cfl must lie in (0, 1] (got {cfl})")));
        }
        let node_epsilon = c.node_epsilon.expect("resolved");
        if !(node_epsilon.is_finite() && node_epsilon >= 0.0) {
            return Err(CliError::Config(format!("node_epsilon must be finite and >= 0 (got {node_epsilon})")));
        }
        let scheme: Scheme = c
            .scheme
            .as_deref()
            .expect("resolved")
            .parse()
            .map_err(|e| CliError::Config(format!("scheme: {e}")))?;
        let max_steps = c.max_steps.expect("resolved");
        if max_steps == 0 {
            return Err(CliError::Config("max_steps must be >= 1 (got 0)".into()));
        }

        let constants = PhysicalConstants::new(PhysicalConstants::electron().hbar, mass)
            .map_err(|e| CliError::Config(format!("mass_kg: {e}")))?;
        let config = ExperimentConfig {
            constants,
            half_separation,
            sigma_rho: shift_decimal(sigma_rho_nm, -9),
            sigma_s: shift_decimal(sigma_s_nm, -9),
            t_final: shift_decimal(t_final_ns, -9),
            grid: Grid::symmetric(x_max, cells).map_err(|e| CliError::Config(format!("grid: {e}")))?,
            solver: SolverOptions {
                cfl,
                scheme,
                node_epsilon,
                max_steps,
                ..Default::default()
            },
        };
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }
}

/// `v * 10^exponent`, rounded once from the shortest decimal form of `v`, so
/// `101.5` nm becomes exactly the literal `101.5e-9`.
pub fn shift_decimal(v: f64, exponent: i32) -> f64 {
    let text = format!("{v:e}");
    let (mantissa, exp) = text.split_once('e').expect("`{:e}` always has an exponent");
    let exp: i32 = exp.parse().expect("`{:e}` exponent is an integer");
    format!("{mantissa}e{}", exp + exponent).parse().expect("valid float literal")
}

/// Reads `path`, or the baseline when no path is given.
pub fn parse_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let file = match path {
        None => ConfigFile::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            ConfigFile::from_toml(&text)?
        }
    };
    file.log_defaults();
    file.to_experiment()?;
    Ok(file)
}
