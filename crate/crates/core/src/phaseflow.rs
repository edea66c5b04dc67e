//! Phase extraction and the transport velocity `v = (1/m) dS/dx`.
//!
//! The velocity is evaluated as `(hbar/m) Im(psi' conj(psi)) / |psi|^2`, which
//! equals `(hbar/m) d(arg psi)/dx` without any branch unwrapping. Near nodes of
//! `psi` the denominator is floored at `node_epsilon` times the instantaneous
//! peak density.

use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::wavefield::{non_negative, DoubleSlitWave, WaveSnapshot};
use crate::{Error, Result};

/// Default relative density floor used in the velocity denominator.
pub const DEFAULT_NODE_EPSILON: f64 = 1e-12;

/// Principal value of `arg psi(x, t)` in `(-pi, pi]`, i.e. `S(x, t) / hbar`.
///
/// Returns exactly 0 at `t = 0`. An exact zero of `psi` (including underflow
/// far in the tails) is reported as [`Error::Node`].
pub fn phase(x: f64, t: f64, wave: &DoubleSlitWave) -> Result<f64> {
    let psi = wave.psi(x, t)?;
    if psi.norm_sqr() == 0.0 {
        return Err(Error::Node { x, t });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(psi.arg())
}

/// A velocity field `v(x, t)` that can drive the propagators.
pub trait VelocityField: Sync {
    fn velocity(&self, x: f64, t: f64) -> Result<f64>;

    /// `out[i] = v(xs[i], t)`.
    fn sample(&self, xs: &[f64], t: f64, out: &mut [f64], exec: Execution) -> Result<()> {
        exec::try_fill(exec, out, |i| self.velocity(xs[i], t))
    }
}

/// The velocity field of a [`DoubleSlitWave`], with node regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySampler {
    wave: DoubleSlitWave,
    node_epsilon: f64,
}

impl VelocitySampler {
    pub fn new(wave: DoubleSlitWave, node_epsilon: f64) -> Result<Self> {
        non_negative("node_epsilon", node_epsilon)?;
        Ok(Self { wave, node_epsilon })
    }

    pub fn wave(&self) -> &DoubleSlitWave {
        &self.wave
    }

    pub fn node_epsilon(&self) -> f64 {
        self.node_epsilon
    }

    fn frozen(&self, t: f64) -> Result<Option<FrozenVelocity>> {
        if t == 0.0 {
            // S vanishes identically at t = 0.
            self.wave.at(t)?;
            return Ok(None);
        }
        let snapshot = self.wave.at(t)?;
        let floor = self.node_epsilon * self.wave.peak_density_bound(t)?;
        Ok(Some(FrozenVelocity {
            snapshot,
            floor,
            hbar_over_mass: self.wave.constants().hbar_over_mass(),
        }))
    }
}

struct FrozenVelocity {
    snapshot: WaveSnapshot,
    floor: f64,
    hbar_over_mass: f64,
}

impl FrozenVelocity {
    fn eval(&self, x: f64) -> Result<f64> {
        let (slope, density) = self.snapshot.log_slope_and_density(x);
        let v = self.hbar_over_mass * slope * (density / density.max(self.floor));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Node {
                x,
                t: self.snapshot.time(),
            })
        }
    }
}

impl VelocityField for VelocitySampler {
    fn velocity(&self, x: f64, t: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Domain {
                name: "x",
                value: x,
                constraint: "must be finite",
            });
        }
        match self.frozen(t)? {
            None => Ok(0.0),
            Some(f) => f.eval(x),
        }
    }

    fn sample(&self, xs: &[f64], t: f64, out: &mut [f64], exec: Execution) -> Result<()> {
        match self.frozen(t)? {
            None => {
                out.fill(0.0);
                Ok(())
            }
            Some(f) => exec::try_fill(exec, out, |i| f.eval(xs[i])),
        }
    }
}

/// Centered difference `(v(x + dx) - v(x - dx)) / (2 dx)`, i.e. `dv/dx`.
pub fn divergence_term<V: VelocityField + ?Sized>(x: f64, t: f64, field: &V, dx: f64) -> Result<f64> {
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::Domain {
            name: "dx",
            value: dx,
            constraint: "must be finite and > 0",
        });
    }
    Ok((field.velocity(x + dx, t)? - field.velocity(x - dx, t)?) / (2.0 * dx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::{Packets, PhysicalConstants, Slit};
    use approx::assert_relative_eq;

    const X: f64 = 500e-9;
    const SIGMA: f64 = 100e-9;

    fn wave() -> DoubleSlitWave {
        DoubleSlitWave::new(X, SIGMA, PhysicalConstants::electron()).unwrap()
    }

    /// `hbar gamma (x - X) / (2 m sigma^2 (1 + gamma^2))`.
    fn single_packet_velocity(x: f64, t: f64) -> f64 {
        let c = PhysicalConstants::electron();
        let g = c.hbar * t / (2.0 * c.mass * SIGMA * SIGMA);
        c.hbar * g * (x - X) / (2.0 * c.mass * SIGMA * SIGMA * (1.0 + g * g))
    }

    #[test]
    fn phase_vanishes_at_t0_and_is_even() {
        let w = wave();
        for x in [-1e-6, 0.0, 3e-7] {
            assert_eq!(phase(x, 0.0, &w).unwrap(), 0.0);
        }
        for t in [0.2e-9, 2e-9] {
            for k in 1..40 {
                let x = k as f64 * 53e-9;
                let p = phase(x, t, &w).unwrap();
                assert!(p > -std::f64::consts::PI && p <= std::f64::consts::PI);
                assert_eq!(p, phase(-x, t, &w).unwrap());
            }
        }
    }

    #[test]
    fn phase_reports_nodes() {
        // Far enough out that psi underflows to an exact zero.
        let err = phase(1e-3, 1e-12, &wave()).unwrap_err();
        assert!(matches!(err, Error::Node { .. }));
    }

    #[test]
    fn phase_gradient_vanishes_at_origin() {
        let w = wave();
        let h = 1e-11;
        let t = 1.2e-9;
        let g = (phase(h, t, &w).unwrap() - phase(-h, t, &w).unwrap()) / (2.0 * h);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn velocity_is_zero_at_t0_and_origin() {
        let s = VelocitySampler::new(wave(), DEFAULT_NODE_EPSILON).unwrap();
        for x in [-2e-6, 0.0, 1e-7] {
            assert_eq!(s.velocity(x, 0.0).unwrap(), 0.0);
        }
        for t in [0.1e-9, 2e-9] {
            assert_eq!(s.velocity(0.0, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn velocity_is_odd() {
        let s = VelocitySampler::new(wave(), DEFAULT_NODE_EPSILON).unwrap();
        for t in [0.05e-9, 0.9e-9, 2e-9] {
            for k in 0..300 {
                let x = k as f64 * 31.7e-9;
                assert_eq!(s.velocity(x, t).unwrap(), -s.velocity(-x, t).unwrap());
            }
        }
    }

    #[test]
    fn velocity_matches_phase_gradient() {
        // Independent route: differentiate the principal phase numerically.
        let w = wave();
        let s = VelocitySampler::new(w, 0.0).unwrap();
        let c = w.constants();
        for (x, t) in [(0.21e-6, 0.7e-9), (0.9e-6, 2e-9), (-1.4e-6, 1.5e-9)] {
            let h = 1e-12;
            let mut dphi = phase(x + h, t, &w).unwrap() - phase(x - h, t, &w).unwrap();
            if dphi > std::f64::consts::PI {
                dphi -= 2.0 * std::f64::consts::PI;
            } else if dphi < -std::f64::consts::PI {
                dphi += 2.0 * std::f64::consts::PI;
            }
            let fd = c.hbar / c.mass * dphi / (2.0 * h);
            let v = s.velocity(x, t).unwrap();
            assert!((fd - v).abs() < 1e-5 * v.abs(), "x={x} t={t} fd={fd} v={v}");
        }
    }

    #[test]
    fn single_packet_velocity_is_linear() {
        let w = wave().with_packets(Packets::Only(Slit::Upper));
        let s = VelocitySampler::new(w, DEFAULT_NODE_EPSILON).unwrap();
        for t in [0.1e-9, 1e-9, 2e-9] {
            let width = w.spread_width(t).unwrap();
            for k in -50..=50 {
                let x = X + k as f64 * 0.1 * width;
                let expected = single_packet_velocity(x, t);
                let v = s.velocity(x, t).unwrap();
                assert!((v - expected).abs() <= 1e-8 * expected.abs().max(1e-300), "x={x} t={t}");
            }
        }
    }

    #[test]
    fn single_packet_divergence_is_uniform() {
        let w = wave().with_packets(Packets::Only(Slit::Upper));
        let s = VelocitySampler::new(w, DEFAULT_NODE_EPSILON).unwrap();
        let c = w.constants();
        let t = 1.5e-9;
        let g = w.gamma(t).unwrap();
        let expected = c.hbar * g / (2.0 * c.mass * SIGMA * SIGMA * (1.0 + g * g));
        for x in [0.0, 0.3e-6, 0.5e-6, 1.2e-6] {
            assert_relative_eq!(divergence_term(x, t, &s, 1e-9).unwrap(), expected, max_relative = 1e-7);
        }
    }

    #[test]
    fn divergence_is_even_and_zero_at_t0() {
        let s = VelocitySampler::new(wave(), DEFAULT_NODE_EPSILON).unwrap();
        assert_eq!(divergence_term(0.4e-6, 0.0, &s, 1e-9).unwrap(), 0.0);
        for k in 1..30 {
            let x = k as f64 * 71e-9;
            let a = divergence_term(x, 1.1e-9, &s, 1e-9).unwrap();
            let b = divergence_term(-x, 1.1e-9, &s, 1e-9).unwrap();
            assert_eq!(a, b);
        }
        assert!(divergence_term(0.0, 1e-9, &s, 0.0).is_err());
    }

    #[test]
    fn regularization_is_local() {
        let w = wave();
        let plain = VelocitySampler::new(w, 0.0).unwrap();
        let floored = VelocitySampler::new(w, 1e-12).unwrap();
        for t in [0.3e-9, 2e-9] {
            let peak = w.peak_density_bound(t).unwrap();
            for k in -400..=400 {
                let x = k as f64 * 25e-9;
                if w.born_density(x, t).unwrap() / peak > 1e-6 {
                    let a = plain.velocity(x, t).unwrap();
                    let b = floored.velocity(x, t).unwrap();
                    assert!((a - b).abs() <= 1e-9 * a.abs());
                }
            }
        }
    }

    #[test]
    fn unregularized_node_is_an_error() {
        let s = VelocitySampler::new(wave(), 0.0).unwrap();
        assert!(matches!(s.velocity(1e-3, 1e-12), Err(Error::Node { .. })));
        let floored = VelocitySampler::new(wave(), 1e-12).unwrap();
        assert_eq!(floored.velocity(1e-3, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn batch_sampling_matches_pointwise() {
        let s = VelocitySampler::new(wave(), DEFAULT_NODE_EPSILON).unwrap();
        let xs: Vec<f64> = (0..3000).map(|i| -3e-6 + i as f64 * 2e-9).collect();
        let mut out = vec![0.0; xs.len()];
        s.sample(&xs, 1.7e-9, &mut out, Execution::Parallel).unwrap();
        for (x, v) in xs.iter().zip(&out) {
            assert_eq!(*v, s.velocity(*x, 1.7e-9).unwrap());
        }
        assert!(VelocitySampler::new(wave(), -1.0).is_err());
    }
}
