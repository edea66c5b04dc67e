//! Method-of-characteristics propagator.
//!
//! Trajectories `dx/dt = v(x, t)` are launched over the support of `rho0` and
//! carry `rho0(x0) / J`, where `J = dx/dx0` is estimated from neighbouring
//! trajectories. All trajectories share one adaptive RK4 step sequence, so the
//! numerical flow map is smooth in `x0` and differencing it is meaningful.
//! Wherever neighbours end up more than `max_gap_cells` cells apart (fringe
//! minima), extra seeds are inserted and integrated with the recorded steps.
//! The pointwise result is resampled to cell averages by exact integration of
//! a monotone cubic interpolant.

use serde::{Deserialize, Serialize};

use super::grid::DensityField;
use super::pchip::Pchip;
use crate::exec::{self, Execution};
use crate::phaseflow::VelocityField;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOptions {
    /// Initial trajectory count; `None` uses one per grid cell.
    pub n_traj: Option<usize>,
    /// Relative position tolerance of the RK4 step-doubling controller.
    pub rtol: f64,
    /// Refinement target for the final spacing of neighbours, in cells.
    pub max_gap_cells: f64,
    /// Seeds are launched where `rho0` exceeds this fraction of its peak.
    pub support_floor: f64,
    pub max_steps: usize,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            n_traj: None,
            rtol: 1e-9,
            max_gap_cells: 1.0,
            support_floor: 1e-9,
            max_steps: 100_000,
            exec: Execution::Parallel,
        }
    }
}

/// Hard cap on seeds inserted into one gap.
const MAX_SPLIT: usize = 4096;

pub fn propagate_characteristics<V: VelocityField + ?Sized>(
    rho0: &DensityField,
    field: &V,
    t_final: f64,
    opts: &TrajectoryOptions,
) -> Result<DensityField> {
    let t0 = rho0.time();
    if !(t_final.is_finite() && t_final >= t0) {
        return Err(Error::Domain {
            name: "t_final",
            value: t_final,
            constraint: "must be finite and >= the initial density's time",
        });
    }
    let grid = *rho0.grid();
    let cells = grid.cells();
    let n_traj = opts.n_traj.unwrap_or(cells);
    if n_traj < cells {
        return Err(Error::Config(format!(
            "n_traj must be >= the number of cells ({n_traj} < {cells})"
        )));
    }
    if !(opts.rtol > 0.0 && opts.max_gap_cells > 0.0 && opts.support_floor >= 0.0) {
        return Err(Error::Config("trajectory tolerances must be positive".into()));
    }
    if t_final == t0 {
        return Ok(rho0.clone());
    }

    let values = rho0.values();
    let peak = rho0.peak();
    let Some(first) = values.iter().position(|v| *v > opts.support_floor * peak) else {
        return DensityField::new(grid, vec![0.0; cells], t_final);
    };
    let last = values.iter().rposition(|v| *v > opts.support_floor * peak).unwrap();
    let (a, b) = (grid.face(first), grid.face(last + 1));
    let width = (b - a) / n_traj as f64;
    let mid = 0.5 * (a + b);
    let seeds: Vec<f64> = (0..n_traj)
        .map(|j| mid + (j as f64 + 0.5 - 0.5 * n_traj as f64) * width)
        .collect();

    let scale = a.abs().max(b.abs());
    let flow = Flow {
        field,
        exec: opts.exec,
    };
    let (steps, ends) = flow.integrate_adaptive(&seeds, t0, t_final, opts, scale)?;

    // Insert seeds where neighbours separated too far.
    let max_gap = opts.max_gap_cells * grid.dx();
    let mut inserted = Vec::new();
    let mut counts = vec![0usize; n_traj];
    for j in 0..n_traj - 1 {
        let gap = ends[j + 1] - ends[j];
        if !(gap > 0.0) {
            return Err(Error::TrajectoryCrossing { x0: seeds[j], t: t_final });
        }
        let k = ((gap / max_gap).ceil() as usize).min(MAX_SPLIT);
        if k > 1 {
            let (lo, hi) = (seeds[j], seeds[j + 1]);
            let span = hi - lo;
            for m in 1..k {
                // Built from the nearer endpoint so mirrored gaps get mirrored seeds.
                let x = if 2 * m < k {
                    lo + span * (m as f64 / k as f64)
                } else if 2 * m == k {
                    0.5 * (lo + hi)
                } else {
                    hi - span * ((k - m) as f64 / k as f64)
                };
                inserted.push(x);
            }
            counts[j] = k - 1;
        }
    }
    let inserted_ends = flow.replay(&inserted, &steps)?;

    let total = n_traj + inserted.len();
    let mut x0 = Vec::with_capacity(total);
    let mut x1 = Vec::with_capacity(total);
    let mut cursor = 0;
    for j in 0..n_traj {
        x0.push(seeds[j]);
        x1.push(ends[j]);
        x0.extend_from_slice(&inserted[cursor..cursor + counts[j]]);
        x1.extend_from_slice(&inserted_ends[cursor..cursor + counts[j]]);
        cursor += counts[j];
    }

    let jac = jacobian(&x0, &x1, t_final)?;
    let start = point_values(rho0, &x0);
    let rho_traj: Vec<f64> = start.iter().zip(&jac).map(|(r, j)| r / j).collect();

    let interp = Pchip::new(&x1, &rho_traj);
    let dx = grid.dx();
    let mut out = vec![0.0; cells];
    exec::fill(opts.exec, &mut out, |i| {
        (interp.integrate(grid.face(i), grid.face(i + 1)) / dx).max(0.0)
    });
    DensityField::new(grid, out, t_final)
}

/// `dx1/dx0` by the three-point non-uniform centred difference, one-sided at the ends.
fn jacobian(x0: &[f64], x1: &[f64], t: f64) -> Result<Vec<f64>> {
    let n = x0.len();
    let mut jac = vec![0.0; n];
    if n < 3 {
        return Err(Error::Config("need at least three trajectories".into()));
    }
    if let Some(j) = (0..n - 1).find(|&j| !(x1[j + 1] > x1[j])) {
        return Err(Error::TrajectoryCrossing { x0: x0[j], t });
    }
    jac[0] = (x1[1] - x1[0]) / (x0[1] - x0[0]);
    jac[n - 1] = (x1[n - 1] - x1[n - 2]) / (x0[n - 1] - x0[n - 2]);
    for j in 1..n - 1 {
        let h1 = x0[j] - x0[j - 1];
        let h2 = x0[j + 1] - x0[j];
        jac[j] = (h1 * h1 * (x1[j + 1] - x1[j]) + h2 * h2 * (x1[j] - x1[j - 1])) / (h1 * h2 * (h1 + h2));
    }
    if let Some(j) = jac.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::TrajectoryCrossing { x0: x0[j], t });
    }
    Ok(jac)
}

/// `rho0` at arbitrary points: fourth-order point values recovered from the
/// cell averages, interpolated with a four-point cubic in `ln rho` (exact for
/// Gaussians, positive by construction).
fn point_values(rho0: &DensityField, xs: &[f64]) -> Vec<f64> {
    let grid = rho0.grid();
    let v = rho0.values();
    let n = v.len();
    let logs: Vec<f64> = (0..n)
        .map(|i| {
            let l = v[i.saturating_sub(1)];
            let r = v[(i + 1).min(n - 1)];
            let corr = ((l + r) - 2.0 * v[i]) / 24.0;
            let p = if corr.abs() < 0.5 * v[i] { v[i] - corr } else { v[i] };
            p.max(f64::MIN_POSITIVE).ln()
        })
        .collect();
    let dx = grid.dx();
    xs.iter()
        .map(|&x| {
            let s = (x - grid.x_min()) / dx - 0.5;
            let k = (s.floor() as isize).clamp(1, n as isize - 3) as usize;
            let u = s - k as f64;
            let (a, b, c, d) = (logs[k - 1], logs[k], logs[k + 1], logs[k + 2]);
            let value = -u * (u - 1.0) * (u - 2.0) / 6.0 * a + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * b
                - (u + 1.0) * u * (u - 2.0) / 2.0 * c
                + (u + 1.0) * u * (u - 1.0) / 6.0 * d;
            value.exp()
        })
        .collect()
}

struct Flow<'a, V: ?Sized> {
    field: &'a V,
    exec: Execution,
}

#[derive(Debug, Clone, Copy)]
struct Step {
    t: f64,
    h: f64,
}

impl<V: VelocityField + ?Sized> Flow<'_, V> {
    fn sample(&self, xs: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        self.field.sample(xs, t, out, self.exec)
    }

    fn rk4(&self, x: &[f64], t: f64, h: f64, k1: Option<&[f64]>, s: &mut Scratch) -> Result<Vec<f64>> {
        let n = x.len();
        match k1 {
            Some(k) => s.k1.copy_from_slice(k),
            None => self.sample(x, t, &mut s.k1)?,
        }
        for ((y, x), k) in s.y.iter_mut().zip(x).zip(&s.k1) {
            *y = x + 0.5 * h * k;
        }
        self.sample(&s.y, t + 0.5 * h, &mut s.k2)?;
        for ((y, x), k) in s.y.iter_mut().zip(x).zip(&s.k2) {
            *y = x + 0.5 * h * k;
        }
        self.sample(&s.y, t + 0.5 * h, &mut s.k3)?;
        for ((y, x), k) in s.y.iter_mut().zip(x).zip(&s.k3) {
            *y = x + h * k;
        }
        self.sample(&s.y, t + h, &mut s.k4)?;
        Ok((0..n)
            .map(|i| x[i] + h / 6.0 * ((s.k1[i] + s.k4[i]) + 2.0 * (s.k2[i] + s.k3[i])))
            .collect())
    }

    /// One step-doubled, Richardson-extrapolated RK4 step. Returns the new
    /// positions and the raw difference between the two estimates.
    fn doubled(&self, x: &[f64], t: f64, h: f64, s: &mut Scratch) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut k1 = vec![0.0; x.len()];
        self.sample(x, t, &mut k1)?;
        let big = self.rk4(x, t, h, Some(&k1), s)?;
        let half = self.rk4(x, t, 0.5 * h, Some(&k1), s)?;
        let small = self.rk4(&half, t + 0.5 * h, 0.5 * h, None, s)?;
        let next: Vec<f64> = small
            .iter()
            .zip(&big)
            .map(|(s, b)| s + (s - b) / 15.0)
            .collect();
        let diff: Vec<f64> = small.iter().zip(&big).map(|(s, b)| s - b).collect();
        Ok((next, diff))
    }

    fn integrate_adaptive(
        &self,
        seeds: &[f64],
        t0: f64,
        t1: f64,
        opts: &TrajectoryOptions,
        scale: f64,
    ) -> Result<(Vec<Step>, Vec<f64>)> {
        let span = t1 - t0;
        let mut s = Scratch::new(seeds.len());
        let mut x = seeds.to_vec();
        let mut t = t0;
        let mut h = span * 1e-3;
        let mut steps = Vec::new();
        let mut attempts = 0usize;
        while t < t1 {
            attempts += 1;
            let last = h >= t1 - t;
            if last {
                h = t1 - t;
            }
            if attempts > opts.max_steps || h < span * 1e-14 {
                return Err(Error::CflStall {
                    t,
                    dt: h,
                    min_dt: span * 1e-14,
                    max_speed: f64::NAN,
                });
            }
            let (next, diff) = self.doubled(&x, t, h, &mut s)?;
            let err = next
                .iter()
                .zip(&diff)
                .map(|(p, d)| d.abs() / (opts.rtol * (p.abs() + 1e-3 * scale)))
                .fold(0.0, f64::max)
                / 15.0;
            if err <= 1.0 {
                steps.push(Step { t, h });
                x = next;
                t = if last { t1 } else { t + h };
            }
            let factor = if err > 0.0 { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) } else { 4.0 };
            h *= factor;
        }
        Ok((steps, x))
    }

    fn replay(&self, seeds: &[f64], steps: &[Step]) -> Result<Vec<f64>> {
        if seeds.is_empty() {
            return Ok(Vec::new());
        }
        let mut s = Scratch::new(seeds.len());
        let mut x = seeds.to_vec();
        for step in steps {
            x = self.doubled(&x, step.t, step.h, &mut s)?.0;
        }
        Ok(x)
    }
}

struct Scratch {
    y: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            y: vec![0.0; n],
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::grid::Grid;

    struct Linear(f64);

    impl VelocityField for Linear {
        fn velocity(&self, x: f64, _t: f64) -> Result<f64> {
            Ok(self.0 * x)
        }
    }

    fn gaussian(grid: Grid, centre: f64, width: f64, t: f64) -> DensityField {
        DensityField::from_fn(grid, t, Execution::Sequential, move |x| {
            (-0.5 * ((x - centre) / width).powi(2)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * width)
        })
        .unwrap()
    }

    #[test]
    fn zero_duration_is_identity() {
        let g = Grid::symmetric(1.0, 64).unwrap();
        let rho = gaussian(g, 0.0, 0.1, 0.5);
        let out = propagate_characteristics(&rho, &Linear(1.0), 0.5, &TrajectoryOptions::default()).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn too_few_trajectories_rejected() {
        let g = Grid::symmetric(1.0, 64).unwrap();
        let rho = gaussian(g, 0.0, 0.1, 0.0);
        let opts = TrajectoryOptions { n_traj: Some(10), ..Default::default() };
        assert!(propagate_characteristics(&rho, &Linear(1.0), 0.5, &opts).is_err());
    }

    #[test]
    fn linear_flow_matches_exact_stretch() {
        let g = Grid::symmetric(1.0, 800).unwrap();
        let rho = gaussian(g, 0.05, 0.05, 0.0);
        let (a, t): (f64, f64) = (2.0, 0.4);
        let s = (a * t).exp();
        let exact = gaussian(g, 0.05 * s, 0.05 * s, t);
        let max_err = |out: &DensityField| {
            out.values()
                .iter()
                .zip(exact.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
                / exact.peak()
        };
        let coarse = propagate_characteristics(&rho, &Linear(a), t, &TrajectoryOptions::default()).unwrap();
        // Monotone resampling flattens the peak by O(gap^2).
        assert!(max_err(&coarse) < 1e-3, "{}", max_err(&coarse));
        assert!((coarse.mass_audit() - exact.mass_audit()).abs() < 1e-6);
        let opts = TrajectoryOptions { max_gap_cells: 0.25, ..Default::default() };
        let fine = propagate_characteristics(&rho, &Linear(a), t, &opts).unwrap();
        assert!(max_err(&fine) < 0.1 * max_err(&coarse), "{}", max_err(&fine));
    }

    #[test]
    fn folded_map_is_a_crossing() {
        let x0 = [0.0, 0.1, 0.2, 0.3, 0.4];
        let x1 = [0.0, 0.2, 0.5, 0.45, 0.6];
        match jacobian(&x0, &x1, 2.0) {
            Err(Error::TrajectoryCrossing { x0, t }) => {
                assert_eq!(t, 2.0);
                assert!(x0 > 0.1 && x0 < 0.4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jacobian_of_affine_map_is_exact() {
        let x0 = [0.0, 0.1, 0.35, 0.4, 1.0];
        let x1: Vec<f64> = x0.iter().map(|x| 3.0 * x - 1.0).collect();
        for j in jacobian(&x0, &x1, 0.0).unwrap() {
            assert!((j - 3.0).abs() < 1e-12);
        }
    }
}
