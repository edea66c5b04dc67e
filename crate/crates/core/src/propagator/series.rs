//! Truncated time-ordered series for `rho(t) = T exp(int L(s) ds) rho0`,
//! with `L(s) f = -d(v(., s) f)/dx`.
//!
//! Term `j` is `int_{t0}^{t} L(s) term_{j-1}(s) ds`, so every nested simplex
//! integral is built from the previous term's values on one shared time grid
//! (trapezoidal rule). Cost is linear in `order * quadrature_steps`.

use serde::{Deserialize, Serialize};

use super::grid::DensityField;
use crate::exec::{self, Execution};
use crate::phaseflow::VelocityField;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesOutcome {
    /// Partial sum with negative rounding noise clipped to zero.
    pub field: DensityField,
    /// Unclipped partial sum.
    pub partial_sum: Vec<f64>,
    /// Grid L2 norm of each term at `t_final`, starting with `rho0`.
    pub term_norms: Vec<f64>,
    /// Number of correction terms included in `partial_sum`.
    pub terms_used: usize,
    /// Set when a term norm grew with order; `partial_sum` stops before it.
    pub diverged: bool,
}

/// Sums `rho0` and up to `order` correction terms of the series at `t_final`.
pub fn propagate_series<V: VelocityField + ?Sized>(
    rho0: &DensityField,
    field: &V,
    t_final: f64,
    order: usize,
    quadrature_steps: usize,
    exec: Execution,
) -> Result<SeriesOutcome> {
    let t0 = rho0.time();
    if !(t_final.is_finite() && t_final >= t0) {
        return Err(Error::Domain {
            name: "t_final",
            value: t_final,
            constraint: "must be finite and >= the initial density's time",
        });
    }
    if quadrature_steps == 0 {
        return Err(Error::Config("quadrature_steps must be at least 1".into()));
    }
    let grid = *rho0.grid();
    let n = grid.cells();
    let dx = grid.dx();
    let norm = |f: &[f64]| (f.iter().map(|v| v * v).sum::<f64>() * dx).sqrt();
    let mut term_norms = vec![norm(rho0.values())];
    let mut sum = rho0.values().to_vec();

    if order == 0 || t_final == t0 {
        return Ok(SeriesOutcome {
            field: DensityField::new(grid, sum.clone(), t_final)?,
            partial_sum: sum,
            term_norms,
            terms_used: 0,
            diverged: false,
        });
    }

    let q = quadrature_steps;
    let h = (t_final - t0) / q as f64;
    let times: Vec<f64> = (0..=q)
        .map(|k| if k == q { t_final } else { t0 + k as f64 * h })
        .collect();
    let faces = grid.faces();
    let mut velocity = vec![0.0; (q + 1) * (n + 1)];
    for (k, row) in velocity.chunks_mut(n + 1).enumerate() {
        field.sample(&faces, times[k], row, exec)?;
    }

    // prev[k * n..(k + 1) * n] is the previous term at time node k.
    let mut prev: Vec<f64> = rho0.values().repeat(q + 1);
    let mut generated = vec![0.0; (q + 1) * n];
    let mut next = vec![0.0; (q + 1) * n];
    let mut terms_used = 0;
    let mut diverged = false;

    for j in 1..=order {
        for k in 0..=q {
            let v = &velocity[k * (n + 1)..(k + 1) * (n + 1)];
            let f = &prev[k * n..(k + 1) * n];
            apply_generator(v, f, dx, &mut generated[k * n..(k + 1) * n], exec);
        }
        next[..n].fill(0.0);
        for k in 1..=q {
            let dt = times[k] - times[k - 1];
            let (done, rest) = next.split_at_mut(k * n);
            let before = &done[(k - 1) * n..];
            let g0 = &generated[(k - 1) * n..k * n];
            let g1 = &generated[k * n..(k + 1) * n];
            for (i, out) in rest[..n].iter_mut().enumerate() {
                *out = before[i] + 0.5 * dt * (g0[i] + g1[i]);
            }
        }
        let last = &next[q * n..];
        let term_norm = norm(last);
        term_norms.push(term_norm);
        if j >= 2 && term_norm > term_norms[j - 1] {
            diverged = true;
            break;
        }
        for (s, t) in sum.iter_mut().zip(last) {
            *s += t;
        }
        terms_used = j;
        std::mem::swap(&mut prev, &mut next);
    }

    let clipped: Vec<f64> = sum.iter().map(|v| v.max(0.0)).collect();
    Ok(SeriesOutcome {
        field: DensityField::new(grid, clipped, t_final)?,
        partial_sum: sum,
        term_norms,
        terms_used,
        diverged,
    })
}

/// `out_i = -(v_{i+1/2} f_{i+1/2} - v_{i-1/2} f_{i-1/2}) / dx` with face
/// averages and zero-gradient ghosts: the centred form of `-d(v f)/dx`.
fn apply_generator(v: &[f64], f: &[f64], dx: f64, out: &mut [f64], exec: Execution) {
    let n = f.len();
    exec::fill(exec, out, |i| {
        let left = if i == 0 { f[0] } else { 0.5 * (f[i - 1] + f[i]) };
        let right = if i == n - 1 { f[n - 1] } else { 0.5 * (f[i] + f[i + 1]) };
        -(v[i + 1] * right - v[i] * left) / dx
    });
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

    fn gaussian(grid: Grid, width: f64) -> DensityField {
        DensityField::from_fn(grid, 0.0, Execution::Sequential, |x| {
            (-0.5 * (x / width).powi(2)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * width)
        })
        .unwrap()
    }

    #[test]
    fn order_zero_and_zero_time_are_identity() {
        let g = Grid::symmetric(1.0, 64).unwrap();
        let rho = gaussian(g, 0.1);
        let a = propagate_series(&rho, &Linear(1.0), 0.5, 0, 10, Execution::Sequential).unwrap();
        assert_eq!(a.field.values(), rho.values());
        let b = propagate_series(&rho, &Linear(1.0), 0.0, 5, 10, Execution::Sequential).unwrap();
        assert_eq!(b.field.values(), rho.values());
        assert_eq!(b.terms_used, 0);
    }

    #[test]
    fn linear_flow_converges_to_exact_stretch() {
        // rho(x, t) = e^{-a t} rho0(x e^{-a t}) for v = a x.
        let g = Grid::symmetric(1.0, 2000).unwrap();
        let w = 0.1;
        let rho = gaussian(g, w);
        let (a, t): (f64, f64) = (1.0, 0.05);
        let out = propagate_series(&rho, &Linear(a), t, 6, 50, Execution::Sequential).unwrap();
        let s = (a * t).exp();
        let exact = gaussian(g, w * s);
        let err = out
            .partial_sum
            .iter()
            .zip(exact.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err / exact.peak() < 1e-4, "{err}");
        assert!(!out.diverged);
        assert_eq!(out.terms_used, 6);
        // Each term should be much smaller than the last.
        for k in 1..out.term_norms.len() - 1 {
            assert!(out.term_norms[k + 1] < 0.2 * out.term_norms[k]);
        }
    }

    #[test]
    fn first_term_scales_linearly_for_constant_field() {
        let g = Grid::symmetric(1.0, 1000).unwrap();
        let rho = gaussian(g, 0.1);
        let n1 = propagate_series(&rho, &Linear(1.0), 0.01, 1, 4, Execution::Sequential).unwrap();
        let n2 = propagate_series(&rho, &Linear(1.0), 0.02, 1, 4, Execution::Sequential).unwrap();
        let ratio = n2.term_norms[1] / n1.term_norms[1];
        assert!((ratio - 2.0).abs() < 1e-10, "{ratio}");
    }

    #[test]
    fn large_time_flags_divergence() {
        let g = Grid::symmetric(1.0, 400).unwrap();
        let rho = gaussian(g, 0.05);
        let out = propagate_series(&rho, &Linear(30.0), 1.0, 12, 100, Execution::Sequential).unwrap();
        assert!(out.diverged);
        assert!(out.terms_used < 12);
        assert!(out.field.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = Grid::symmetric(1.0, 64).unwrap();
        let rho = gaussian(g, 0.1);
        assert!(propagate_series(&rho, &Linear(1.0), 1.0, 2, 0, Execution::Sequential).is_err());
        assert!(propagate_series(&rho, &Linear(1.0), -1.0, 2, 4, Execution::Sequential).is_err());
    }
}
