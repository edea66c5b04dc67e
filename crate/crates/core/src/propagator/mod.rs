//! Transport of a density on a uniform grid under a velocity field.
//!
//! Three independent formulations of the continuity equation:
//! [`propagate_fv`] (conservative finite volumes, the production path),
//! [`propagate_series`] (truncated time-ordered series, short times only) and
//! [`propagate_characteristics`] (trajectories plus a Jacobian weight).

mod characteristics;
mod fv;
mod grid;
mod pchip;
mod series;

pub use characteristics::{propagate_characteristics, TrajectoryOptions};
pub use fv::{propagate_fv, FvDiagnostics, FvOutcome, Scheme, SolverOptions};
pub use grid::{initial_density, total_mass, DensityField, Grid, BOUNDARY_DENSITY_LIMIT, MIN_CELLS};
pub use series::{propagate_series, SeriesOutcome};
