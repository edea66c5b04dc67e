//! Phase-guided transport of probability densities.
//!
//! The phase of a freely evolving double-slit wave function defines a velocity
//! field `v = (1/m) dS/dx`. Any initial density can be carried along that field
//! with the continuity equation `d(rho)/dt = -d(v rho)/dx`. Transporting the
//! Born density `|psi(x, 0)|^2` reproduces `|psi(x, t)|^2`; transporting a
//! narrower density under the phase of a wider packet splits the central
//! interference maximum.
//!
//! Modules:
//! - [`wavefield`]: closed-form two-packet wave function and its derivative.
//! - [`phaseflow`]: phase extraction and the transport velocity field.
//! - [`propagator`]: finite-volume, truncated time-ordered series and
//!   characteristics propagators on a uniform grid.
//! - [`experiment`]: the double-slit scenario, sigma_S sweeps and fringe
//!   analysis.
//! - [`verify`]: self-checks grouped into a quick and a full level.

pub mod error;
pub mod exec;
pub mod experiment;
pub mod phaseflow;
pub mod propagator;
pub mod verify;
pub mod wavefield;

pub use error::{Error, Result};
pub use exec::Execution;
pub use experiment::{
    born_discrepancy, fringe_analysis, run_double_slit, sweep_sigma_s, Discrepancy,
    Extremum, ExperimentConfig, FringeReport, RunMetadata, RunResult,
};
pub use phaseflow::{divergence_term, phase, VelocityField, VelocitySampler};
pub use propagator::{
    initial_density, propagate_characteristics, propagate_fv, propagate_series, total_mass,
    DensityField, FvDiagnostics, FvOutcome, Grid, Scheme, SeriesOutcome, SolverOptions,
    TrajectoryOptions,
};
pub use wavefield::{gamma, ComplexAmplitude, DoubleSlitWave, Packets, PhysicalConstants, Slit};
