//! Conservative finite-volume integration of `d(rho)/dt + d(v rho)/dx = 0`.
//!
//! Cell averages change only through face fluxes `F = v_face * rho_face`, with
//! `rho_face` taken from the upwind cell. Two reconstructions are available:
//!
//! - [`Scheme::Upwind`]: donor cell (piecewise constant), forward Euler with the
//!   face velocity sampled at the half-step time.
//! - [`Scheme::Muscl`]: third-order upwind-biased (kappa = 1/3) reconstruction
//!   of `ln rho` from point values recovered from the cell averages, advanced
//!   with two-stage SSP Runge-Kutta. Reconstructing the logarithm keeps the
//!   relative truncation error small in Gaussian tails, which matters because
//!   the flow near `x = 0` compresses tail material by four orders of magnitude
//!   before it expands again.
//!
//! Outflow boundaries use zero-gradient ghost cells. A flux limiter scales the
//! outflow of any cell that would otherwise go negative, so every stage is
//! positivity preserving without touching conservation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::grid::DensityField;
use crate::exec::{self, Execution};
use crate::phaseflow::{VelocityField, DEFAULT_NODE_EPSILON};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "upwind")]
    Upwind,
    #[default]
    #[serde(rename = "upwind-MUSCL")]
    Muscl,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Upwind => "upwind",
            Scheme::Muscl => "upwind-MUSCL",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upwind" => Ok(Scheme::Upwind),
            "upwind-muscl" | "muscl" => Ok(Scheme::Muscl),
            _ => Err(Error::Config(format!(
                "unknown scheme {s:?} (expected \"upwind\" or \"upwind-MUSCL\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Courant number bound, in (0, 1].
    pub cfl: f64,
    pub scheme: Scheme,
    /// Relative density floor handed to the velocity sampler.
    pub node_epsilon: f64,
    pub max_steps: usize,
    /// Abort once the mass that crossed the boundaries exceeds this.
    pub leakage_limit: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            scheme: Scheme::Muscl,
            node_epsilon: DEFAULT_NODE_EPSILON,
            max_steps: 1_000_000,
            leakage_limit: 1e-6,
            exec: Execution::Parallel,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1] (got {})", self.cfl)));
        }
        if !(self.node_epsilon.is_finite() && self.node_epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "node_epsilon must be finite and >= 0 (got {})",
                self.node_epsilon
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.leakage_limit >= 0.0) {
            return Err(Error::Config(format!(
                "leakage_limit must be >= 0 (got {})",
                self.leakage_limit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FvDiagnostics {
    pub scheme: Scheme,
    pub steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    /// Largest `max|v| dt / dx` over all stages.
    pub max_courant: f64,
    /// Total mass that crossed either boundary, in either direction.
    pub leakage: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// `final_mass - initial_mass`.
    pub mass_drift: f64,
    /// Number of cell-stages whose outflow had to be limited to stay >= 0.
    pub positivity_limited: usize,
    /// Velocity field evaluations over the face set, including CFL retries.
    pub velocity_samples: usize,
}

#[derive(Debug, Clone)]
pub struct FvOutcome {
    pub field: DensityField,
    pub diagnostics: FvDiagnostics,
}

/// Propagates `rho0` from `rho0.time()` to `t_final` under `field`.
pub fn propagate_fv<V: VelocityField + ?Sized>(
    rho0: &DensityField,
    field: &V,
    t_final: f64,
    opts: &SolverOptions,
) -> Result<FvOutcome> {
    opts.validate()?;
    let t0 = rho0.time();
    if !(t_final.is_finite() && t_final >= t0) {
        return Err(Error::Domain {
            name: "t_final",
            value: t_final,
            constraint: "must be finite and >= the initial density's time",
        });
    }
    let mut kernel = Kernel::new(rho0, opts);
    let initial_mass = rho0.mass_audit();
    let mut diag = FvDiagnostics {
        scheme: opts.scheme,
        steps: 0,
        min_dt: f64::INFINITY,
        max_dt: 0.0,
        max_courant: 0.0,
        leakage: 0.0,
        initial_mass,
        final_mass: initial_mass,
        mass_drift: 0.0,
        positivity_limited: 0,
        velocity_samples: 0,
    };
    if t_final == t0 {
        diag.min_dt = 0.0;
        return Ok(FvOutcome {
            field: rho0.clone(),
            diagnostics: diag,
        });
    }

    let span = t_final - t0;
    let min_dt = span / opts.max_steps as f64;
    let cfl_dx = opts.cfl * kernel.dx;
    let mut t = t0;
    let mut rho = rho0.values().to_vec();

    // Face velocities at the current time (SSP-RK2 reuses the end-of-step sample).
    let mut v_now = vec![0.0; kernel.faces.len()];
    let mut v_next = vec![0.0; kernel.faces.len()];
    if opts.scheme == Scheme::Muscl {
        field.sample(&kernel.faces, t, &mut v_now, opts.exec)?;
    }
    let mut speed_hint = max_abs(&v_now);
    // Ratio of end-of-step to start-of-step speed on the last accepted step.
    let mut growth = 1.0f64;

    while t < t_final {
        let remaining = t_final - t;
        let predicted = speed_hint * growth.max(1.0) * (1.0 + 2e-3);
        let mut dt = if predicted > 0.0 {
            (cfl_dx / predicted).min(remaining)
        } else {
            remaining
        };
        // Velocity sample time within the step: end for RK2, midpoint for Euler.
        let sample_at = |dt: f64| match opts.scheme {
            Scheme::Muscl => t + dt,
            Scheme::Upwind => t + 0.5 * dt,
        };
        let mut speed;
        let mut attempts = 0;
        loop {
            field.sample(&kernel.faces, sample_at(dt), &mut v_next, opts.exec)?;
            diag.velocity_samples += 1;
            speed = max_abs(&v_next);
            if opts.scheme == Scheme::Muscl {
                speed = speed.max(max_abs(&v_now));
            }
            if speed * dt <= cfl_dx * (1.0 + 1e-12) {
                break;
            }
            attempts += 1;
            let shrink = if attempts > 8 { 0.9f64.powi(attempts - 8) } else { 1.0 };
            dt = cfl_dx / speed * shrink;
        }
        let last = dt >= remaining;
        if !last && (dt < min_dt || diag.steps >= opts.max_steps) {
            return Err(Error::CflStall {
                t,
                dt,
                min_dt,
                max_speed: speed,
            });
        }

        let leaked = match opts.scheme {
            Scheme::Upwind => kernel.euler_step(&mut rho, &v_next, dt, &mut diag),
            Scheme::Muscl => kernel.rk2_step(&mut rho, &v_now, &v_next, dt, &mut diag),
        };
        diag.leakage += leaked;
        diag.steps += 1;
        diag.min_dt = diag.min_dt.min(dt);
        diag.max_dt = diag.max_dt.max(dt);
        diag.max_courant = diag.max_courant.max(speed * dt / kernel.dx);
        t = if last { t_final } else { t + dt };

        if diag.leakage > opts.leakage_limit {
            return Err(Error::Leakage {
                leaked: diag.leakage,
                limit: opts.leakage_limit,
                t,
            });
        }
        let next_speed = max_abs(&v_next);
        if speed_hint > 0.0 {
            growth = next_speed / speed_hint;
        }
        speed_hint = next_speed;
        if opts.scheme == Scheme::Muscl {
            std::mem::swap(&mut v_now, &mut v_next);
        }
    }

    let field_out = DensityField::new(*rho0.grid(), rho, t_final)?;
    diag.final_mass = field_out.mass_audit();
    diag.mass_drift = diag.final_mass - diag.initial_mass;
    Ok(FvOutcome {
        field: field_out,
        diagnostics: diag,
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Scratch buffers for one propagation.
struct Kernel {
    n: usize,
    dx: f64,
    scheme: Scheme,
    exec: Execution,
    faces: Vec<f64>,
    /// Cell values with two ghost cells on each side.
    padded: Vec<f64>,
    /// Reconstructed point values and their sixth roots, padded like `padded`.
    point: Vec<f64>,
    root: Vec<f64>,
    /// Right-face (`plus`) and left-face (`minus`) values for cells -1..=n.
    plus: Vec<f64>,
    minus: Vec<f64>,
    flux: Vec<f64>,
    stage: Vec<f64>,
}

impl Kernel {
    fn new(rho0: &DensityField, opts: &SolverOptions) -> Self {
        let grid = rho0.grid();
        let n = grid.cells();
        Self {
            n,
            dx: grid.dx(),
            scheme: opts.scheme,
            exec: opts.exec,
            faces: grid.faces(),
            padded: vec![0.0; n + 4],
            point: vec![0.0; n + 4],
            root: vec![0.0; n + 4],
            plus: vec![0.0; n + 2],
            minus: vec![0.0; n + 2],
            flux: vec![0.0; n + 1],
            stage: vec![0.0; n],
        }
    }

    fn euler_step(&mut self, rho: &mut [f64], v: &[f64], dt: f64, diag: &mut FvDiagnostics) -> f64 {
        let leaked = self.fluxes(rho, v, dt, diag);
        let lambda = dt / self.dx;
        apply_fluxes(rho, &self.flux, lambda);
        leaked * dt
    }

    fn rk2_step(
        &mut self,
        rho: &mut [f64],
        v0: &[f64],
        v1: &[f64],
        dt: f64,
        diag: &mut FvDiagnostics,
    ) -> f64 {
        let lambda = dt / self.dx;
        let leaked0 = self.fluxes(rho, v0, dt, diag);
        let mut stage = std::mem::take(&mut self.stage);
        stage.copy_from_slice(rho);
        apply_fluxes(&mut stage, &self.flux, lambda);
        let leaked1 = self.fluxes(&stage, v1, dt, diag);
        apply_fluxes(&mut stage, &self.flux, lambda);
        for (r, s) in rho.iter_mut().zip(&stage) {
            *r = 0.5 * (*r + *s);
        }
        self.stage = stage;
        0.5 * dt * (leaked0 + leaked1)
    }

    /// Fills `self.flux` for the state `rho` and face velocities `v`.
    /// Returns the absolute boundary flux (mass per second).
    fn fluxes(&mut self, rho: &[f64], v: &[f64], dt: f64, diag: &mut FvDiagnostics) -> f64 {
        let n = self.n;
        self.padded[2..n + 2].copy_from_slice(rho);
        self.padded[0] = rho[0];
        self.padded[1] = rho[0];
        self.padded[n + 2] = rho[n - 1];
        self.padded[n + 3] = rho[n - 1];

        match self.scheme {
            Scheme::Upwind => {
                self.plus.copy_from_slice(&self.padded[1..n + 3]);
                self.minus.copy_from_slice(&self.padded[1..n + 3]);
            }
            Scheme::Muscl => self.reconstruct_log(),
        }

        let (plus, minus) = (&self.plus, &self.minus);
        // Face k sits between cells k-1 and k, i.e. reconstruction slots k and k+1.
        exec::fill(self.exec, &mut self.flux, |k| {
            let vk = v[k];
            if vk > 0.0 {
                vk * plus[k]
            } else if vk < 0.0 {
                vk * minus[k + 1]
            } else {
                0.0
            }
        });

        // Limit outflow so that no cell can be emptied below zero in this stage.
        let lambda = dt / self.dx;
        #[allow(clippy::needless_range_loop)]
        for j in 0..n {
            let out_right = self.flux[j + 1].max(0.0);
            let out_left = (-self.flux[j]).max(0.0);
            let outflow = lambda * (out_right + out_left);
            if outflow > rho[j] {
                let theta = rho[j] / outflow;
                if self.flux[j + 1] > 0.0 {
                    self.flux[j + 1] *= theta;
                }
                if self.flux[j] < 0.0 {
                    self.flux[j] *= theta;
                }
                diag.positivity_limited += 1;
            }
        }
        self.flux[0].abs() + self.flux[n].abs()
    }

    /// kappa = 1/3 reconstruction of `ln rho` from fourth-order point values.
    ///
    /// Works on `q = p^(1/6)`: `exp(l_j + (a + 2b) / 6)` is `p_j q_{j+1}^2 / (q_j q_{j-1})`.
    fn reconstruct_log(&mut self) {
        let n = self.n;
        let padded = &self.padded;
        let last = n + 3;
        exec::fill(self.exec, &mut self.point, |j| {
            let mean = padded[j];
            let point = if mean <= 0.0 || j == 0 || j == last {
                mean
            } else {
                let corr = ((padded[j + 1] + padded[j - 1]) - 2.0 * mean) / 24.0;
                if corr.abs() < 0.5 * mean {
                    mean - corr
                } else {
                    mean
                }
            };
            point.max(f64::MIN_POSITIVE)
        });
        let point = &self.point;
        let empty_root = (f64::MIN_POSITIVE.ln() / 6.0).exp();
        exec::fill(self.exec, &mut self.root, |j| {
            if point[j] == f64::MIN_POSITIVE {
                empty_root
            } else {
                (point[j].ln() / 6.0).exp()
            }
        });
        let q = &self.root;
        // Slot s in plus/minus is cell s-1, i.e. padded index s+1.
        exec::fill(self.exec, &mut self.plus, |s| {
            let j = s + 1;
            if padded[j] <= 0.0 {
                return 0.0;
            }
            let face = point[j] * ((q[j + 1] * q[j + 1]) / (q[j] * q[j - 1]));
            bounded(padded[j], padded[j + 1], face)
        });
        exec::fill(self.exec, &mut self.minus, |s| {
            let j = s + 1;
            if padded[j] <= 0.0 {
                return 0.0;
            }
            let face = point[j] * ((q[j - 1] * q[j - 1]) / (q[j] * q[j + 1]));
            bounded(padded[j], padded[j - 1], face)
        });
    }
}

/// Keeps a face value within a factor two of the two cells sharing the face.
/// Inactive for smooth data; it only catches empty or underflowed cells.
fn bounded(own: f64, neighbour: f64, value: f64) -> f64 {
    if own <= 0.0 {
        return 0.0;
    }
    let lo = 0.5 * own.min(neighbour);
    let hi = 2.0 * own.max(neighbour);
    value.max(lo).min(hi)
}

fn apply_fluxes(rho: &mut [f64], flux: &[f64], lambda: f64) {
    for (j, r) in rho.iter_mut().enumerate() {
        #[cfg(not(feature = "inject-flux-sign-error"))]
        let net = flux[j + 1] - flux[j];
        #[cfg(feature = "inject-flux-sign-error")]
        let net = flux[j + 1] + flux[j];
        *r -= lambda * net;
    }
}
