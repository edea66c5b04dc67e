//! The double-slit scenario: a narrow initial density transported by the phase
//! of a (possibly wider) two-packet wave function.

mod discrepancy;
mod fringe;

use serde::{Deserialize, Serialize};

pub use discrepancy::{born_discrepancy, Discrepancy};
pub use fringe::{fringe_analysis, Extremum, FringeReport};

use crate::exec::{self, Execution};
use crate::phaseflow::{VelocityField, VelocitySampler};
use crate::propagator::{initial_density, propagate_fv, DensityField, FvDiagnostics, Grid, SolverOptions};
use crate::wavefield::{DoubleSlitWave, PhysicalConstants};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub constants: PhysicalConstants,
    /// Half the slit separation `X`, in metres.
    pub half_separation: f64,
    /// Width of the initial density packets.
    pub sigma_rho: f64,
    /// Width of the packets whose phase drives the transport.
    pub sigma_s: f64,
    pub t_final: f64,
    pub grid: Grid,
    pub solver: SolverOptions,
}

impl Default for ExperimentConfig {
    /// Electrons, `2X = 1 um`, `sigma_rho = sigma_S = 100 nm`, 2 ns on +/-10 um with 16384 cells.
    fn default() -> Self {
        Self {
            constants: PhysicalConstants::electron(),
            half_separation: 500e-9,
            sigma_rho: 100e-9,
            sigma_s: 100e-9,
            t_final: 2e-9,
            grid: Grid::symmetric(10e-6, 16384).expect("default grid is valid"),
            solver: SolverOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn with_sigma_s(mut self, sigma_s: f64) -> Self {
        self.sigma_s = sigma_s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        PhysicalConstants::new(self.constants.hbar, self.constants.mass)?;
        DoubleSlitWave::new(self.half_separation, self.sigma_rho, self.constants)?;
        DoubleSlitWave::new(self.half_separation, self.sigma_s, self.constants)?;
        if !(self.sigma_s >= self.sigma_rho) {
            return Err(Error::Config(format!(
                "sigma_s ({:e} m) must be >= sigma_rho ({:e} m)",
                self.sigma_s, self.sigma_rho
            )));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::Config(format!("t_final must be finite and >= 0 (got {:e} s)", self.t_final)));
        }
        Grid::new(self.grid.x_min(), self.grid.x_max(), self.grid.cells())?;
        self.solver.validate()
    }

    /// The wave function whose modulus defines the initial density.
    pub fn density_wave(&self) -> Result<DoubleSlitWave> {
        DoubleSlitWave::new(self.half_separation, self.sigma_rho, self.constants)
    }

    /// The wave function whose phase defines the velocity field.
    pub fn phase_wave(&self) -> Result<DoubleSlitWave> {
        DoubleSlitWave::new(self.half_separation, self.sigma_s, self.constants)
    }

    pub fn sampler(&self) -> Result<VelocitySampler> {
        VelocitySampler::new(self.phase_wave()?, self.solver.node_epsilon)
    }

    fn describe(&self) -> String {
        format!(
            "run with sigma_s = {} nm, sigma_rho = {} nm, t_final = {} ns, {} cells on [{:e}, {:e}] m, {}",
            self.sigma_s * 1e9,
            self.sigma_rho * 1e9,
            self.t_final * 1e9,
            self.grid.cells(),
            self.grid.x_min(),
            self.grid.x_max(),
            self.solver.scheme
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ExperimentConfig,
    pub diagnostics: FvDiagnostics,
    pub node_epsilon: f64,
    /// Which width the Born reference uses; always the phase width.
    pub born_reference_sigma: f64,
    /// Overlap defects `exp(-X^2 / (2 sigma^2))` of the two wave functions (not renormalized).
    pub normalization_defect_rho: f64,
    pub normalization_defect_s: f64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub rho_final: DensityField,
    /// `|psi(x, t_final, sigma_S)|^2` as cell averages on the same grid.
    pub born_reference: DensityField,
    /// Velocity at the cell centres at `t_final`.
    pub velocity: Vec<f64>,
    pub metadata: RunMetadata,
}

/// Builds `rho0` from `sigma_rho`, transports it with the phase of the
/// `sigma_S` wave function and evaluates the Born reference.
pub fn run_double_slit(config: &ExperimentConfig) -> Result<RunResult> {
    run_inner(config).map_err(|e| e.in_run(|| config.describe()))
}

fn run_inner(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let exec = config.solver.exec;
    let density_wave = config.density_wave()?;
    let phase_wave = config.phase_wave()?;
    let rho0 = initial_density(&density_wave, &config.grid)?;
    let sampler = config.sampler()?;
    let outcome = propagate_fv(&rho0, &sampler, config.t_final, &config.solver)?;

    let snapshot = phase_wave.at(config.t_final)?;
    let born_reference = DensityField::from_fn(config.grid, config.t_final, exec, |x| snapshot.density(x))?;
    let centers = config.grid.centers();
    let mut velocity = vec![0.0; centers.len()];
    sampler.sample(&centers, config.t_final, &mut velocity, exec)?;

    Ok(RunResult {
        rho_final: outcome.field,
        born_reference,
        velocity,
        metadata: RunMetadata {
            config: *config,
            diagnostics: outcome.diagnostics,
            node_epsilon: config.solver.node_epsilon,
            born_reference_sigma: config.sigma_s,
            normalization_defect_rho: density_wave.normalization_defect(),
            normalization_defect_s: phase_wave.normalization_defect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// One independent run per `sigma_S` value, in input order. Individual
/// failures are returned in place; only an empty list is rejected outright.
pub fn sweep_sigma_s(base: &ExperimentConfig, sigma_s_values: &[f64]) -> Result<Vec<Result<RunResult>>> {
    if sigma_s_values.is_empty() {
        return Err(Error::Config("sigma_s sweep needs at least one value".into()));
    }
    let concurrent = sigma_s_values.len() > 1 && base.solver.exec.is_parallel();
    let outer = if concurrent { Execution::Parallel } else { Execution::Sequential };
    Ok(exec::map_collect(outer, sigma_s_values.len(), |i| {
        let mut config = base.with_sigma_s(sigma_s_values[i]);
        if concurrent {
            // Runs are already spread over the pool.
            config.solver.exec = Execution::Sequential;
        }
        let mut result = run_double_slit(&config);
        if let Ok(r) = result.as_mut() {
            r.metadata.config.solver.exec = base.solver.exec;
        }
        result
    }))
}
