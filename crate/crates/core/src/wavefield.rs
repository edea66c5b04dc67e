//! Closed-form double-slit wave function.
//!
//! Each slit emits a freely spreading Gaussian packet
//!
//! ```text
//! psi_{up,lw}(x, t) = (2 pi)^(-1/4) (sigma (1 + i gamma))^(-1/2)
//!                     * exp(-(x -/+ X)^2 / (4 sigma^2 (1 + i gamma)))
//! gamma = hbar t / (2 m sigma^2)
//! ```
//!
//! and the two-slit state is their normalized sum `(psi_up + psi_lw) / sqrt(2)`.
//! All quantities are SI.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Complex amplitude in m^(-1/2).
pub type ComplexAmplitude = Complex64;

/// Reduced Planck constant, CODATA 2018 (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Electron rest mass, CODATA 2018 (kg).
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        positive("hbar", hbar)?;
        positive("mass", mass)?;
        Ok(Self { hbar, mass })
    }

    pub fn electron() -> Self {
        Self {
            hbar: HBAR,
            mass: ELECTRON_MASS,
        }
    }

    /// hbar / m in m^2/s.
    pub fn hbar_over_mass(&self) -> f64 {
        self.hbar / self.mass
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::electron()
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            constraint: "must be finite and > 0",
        })
    }
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            constraint: "must be finite and >= 0",
        })
    }
}

/// Dimensionless spreading parameter `hbar t / (2 m sigma^2)`.
pub fn gamma(t: f64, sigma: f64, constants: &PhysicalConstants) -> Result<f64> {
    non_negative("t", t)?;
    positive("sigma", sigma)?;
    Ok(constants.hbar * t / (2.0 * constants.mass * sigma * sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slit {
    /// Packet centred at `+X`.
    Upper,
    /// Packet centred at `-X`.
    Lower,
}

/// Which packets make up the state.
///
/// `Only` drops the other packet entirely (no `1/sqrt(2)`), leaving a single
/// normalized Gaussian. It exists for the analytic single-packet checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Packets {
    #[default]
    Both,
    Only(Slit),
}

/// The analytic two-packet wave function with half separation `X` and
/// single-slit width `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleSlitWave {
    half_separation: f64,
    sigma: f64,
    constants: PhysicalConstants,
    packets: Packets,
}

impl DoubleSlitWave {
    pub fn new(half_separation: f64, sigma: f64, constants: PhysicalConstants) -> Result<Self> {
        positive("half_separation_X", half_separation)?;
        positive("sigma", sigma)?;
        PhysicalConstants::new(constants.hbar, constants.mass)?;
        Ok(Self {
            half_separation,
            sigma,
            constants,
            packets: Packets::Both,
        })
    }

    /// Same geometry restricted to the given packets.
    pub fn with_packets(mut self, packets: Packets) -> Self {
        self.packets = packets;
        self
    }

    pub fn half_separation(&self) -> f64 {
        self.half_separation
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn packets(&self) -> Packets {
        self.packets
    }

    pub fn gamma(&self, t: f64) -> Result<f64> {
        gamma(t, self.sigma, &self.constants)
    }

    /// Packet width at time `t`: `sigma sqrt(1 + gamma^2)`.
    pub fn spread_width(&self, t: f64) -> Result<f64> {
        let g = self.gamma(t)?;
        Ok(self.sigma * (1.0 + g * g).sqrt())
    }

    /// Upper bound on `|psi(x, t)|^2` over `x`.
    ///
    /// A single packet peaks at `1 / (sqrt(2 pi) sigma_t)`; the two-packet sum is
    /// bounded by twice that, reached when both packets overlap fully.
    pub fn peak_density_bound(&self, t: f64) -> Result<f64> {
        let single = 1.0 / ((2.0 * PI).sqrt() * self.spread_width(t)?);
        Ok(match self.packets {
            Packets::Both => 2.0 * single,
            Packets::Only(_) => single,
        })
    }

    /// `int |psi|^2 dx - 1`. Time independent; `exp(-X^2 / (2 sigma^2))` for
    /// the two-packet state, which the construction does not renormalize.
    pub fn normalization_defect(&self) -> f64 {
        match self.packets {
            Packets::Both => {
                let r = self.half_separation / self.sigma;
                (-0.5 * r * r).exp()
            }
            Packets::Only(_) => 0.0,
        }
    }

    /// Freezes the time-dependent coefficients for repeated evaluation at `t`.
    pub fn at(&self, t: f64) -> Result<WaveSnapshot> {
        let g = self.gamma(t)?;
        let spread = Complex64::new(1.0, g);
        let s2 = self.sigma * self.sigma;
        // (2 pi)^(-1/4) (sigma (1 + i gamma))^(-1/2), principal branch.
        let prefactor = (spread * self.sigma).sqrt().inv() * (2.0 * PI).powf(-0.25);
        let inv_width = (spread * (4.0 * s2)).inv();
        Ok(WaveSnapshot {
            t,
            half_separation: self.half_separation,
            prefactor,
            inv_width,
            packets: self.packets,
        })
    }

    pub fn psi_single(&self, x: f64, t: f64, slit: Slit) -> Result<ComplexAmplitude> {
        finite_x(x)?;
        Ok(self.at(t)?.packet(x, slit))
    }

    /// The superposition `(psi_up + psi_lw) / sqrt(2)` (or the selected packet).
    pub fn psi(&self, x: f64, t: f64) -> Result<ComplexAmplitude> {
        finite_x(x)?;
        Ok(self.at(t)?.psi(x))
    }

    pub fn dpsi_dx(&self, x: f64, t: f64) -> Result<ComplexAmplitude> {
        finite_x(x)?;
        Ok(self.at(t)?.psi_and_derivative(x).1)
    }

    pub fn born_density(&self, x: f64, t: f64) -> Result<f64> {
        finite_x(x)?;
        Ok(self.at(t)?.density(x))
    }
}

fn finite_x(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "x",
            value: x,
            constraint: "must be finite",
        })
    }
}

/// A [`DoubleSlitWave`] with its time-dependent coefficients evaluated.
///
/// Evaluation is mirror exact: `psi(-x)` and `psi(x)` are bitwise equal and
/// `dpsi(-x) == -dpsi(x)` for the two-packet state.
#[derive(Debug, Clone, Copy)]
pub struct WaveSnapshot {
    t: f64,
    half_separation: f64,
    prefactor: Complex64,
    /// `1 / (4 sigma^2 (1 + i gamma))`
    inv_width: Complex64,
    packets: Packets,
}

impl WaveSnapshot {
    pub fn time(&self) -> f64 {
        self.t
    }

    fn offset(&self, x: f64, slit: Slit) -> f64 {
        match slit {
            Slit::Upper => x - self.half_separation,
            Slit::Lower => x + self.half_separation,
        }
    }

    fn packet_at_offset(&self, d: f64) -> Complex64 {
        self.prefactor * (-(self.inv_width * (d * d))).exp()
    }

    pub fn packet(&self, x: f64, slit: Slit) -> Complex64 {
        self.packet_at_offset(self.offset(x, slit))
    }

    pub fn psi(&self, x: f64) -> Complex64 {
        match self.packets {
            Packets::Both => (self.packet(x, Slit::Upper) + self.packet(x, Slit::Lower)) * FRAC_1_SQRT_2,
            Packets::Only(slit) => self.packet(x, slit),
        }
    }

    /// `(psi, dpsi/dx)`, using `d/dx packet = packet * (-2 (x -/+ X) / (4 sigma^2 (1 + i gamma)))`.
    pub fn psi_and_derivative(&self, x: f64) -> (Complex64, Complex64) {
        let term = |slit: Slit| {
            let d = self.offset(x, slit);
            let p = self.packet_at_offset(d);
            (p, p * (self.inv_width * (-2.0 * d)))
        };
        match self.packets {
            Packets::Both => {
                let (pu, du) = term(Slit::Upper);
                let (pl, dl) = term(Slit::Lower);
                ((pu + pl) * FRAC_1_SQRT_2, (du + dl) * FRAC_1_SQRT_2)
            }
            Packets::Only(slit) => term(slit),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.psi(x).norm_sqr()
    }

    /// `(Im(psi' / psi), |psi|^2)` with a single complex exponential.
    ///
    /// For the two-packet state the nearer packet is factored out, leaving
    /// `r = exp(-4 X |x| / (4 sigma^2 (1 + i gamma)))` with `|r| <= 1`. The
    /// first component is odd in `x` and the second even, both bitwise.
    pub fn log_slope_and_density(&self, x: f64) -> (f64, f64) {
        let slit = match self.packets {
            Packets::Only(slit) => {
                let d = self.offset(x, slit);
                let e = -(self.inv_width * (d * d));
                let slope = (self.inv_width * (-2.0 * d)).im;
                return (slope, self.prefactor.norm_sqr() * (2.0 * e.re).exp());
            }
            Packets::Both => Slit::Upper,
        };
        let a = x.abs();
        let near = self.offset(a, slit);
        let far = a + self.half_separation;
        let r = (-(self.inv_width * (4.0 * self.half_separation * a))).exp();
        let one_plus_r = r + 1.0;
        let slope = (self.inv_width * -2.0 * (r * far + near) / one_plus_r).im;
        let envelope = (-2.0 * self.inv_width.re * (near * near)).exp();
        let density = 0.5 * self.prefactor.norm_sqr() * envelope * one_plus_r.norm_sqr();
        (if x < 0.0 { -slope } else { slope }, density)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const X: f64 = 500e-9;
    const SIGMA: f64 = 100e-9;

    fn fig1_wave() -> DoubleSlitWave {
        DoubleSlitWave::new(X, SIGMA, PhysicalConstants::electron()).unwrap()
    }

    #[test]
    fn gamma_values() {
        let e = PhysicalConstants::electron();
        assert_eq!(gamma(0.0, SIGMA, &e).unwrap(), 0.0);
        // Reference values evaluated in 30-digit arithmetic.
        assert_relative_eq!(gamma(2e-9, SIGMA, &e).unwrap(), 11.576_763_605_054_297, max_relative = 1e-14);
        assert_relative_eq!(gamma(2e-9, 101.5e-9, &e).unwrap(), 11.237_121_604_556_575, max_relative = 1e-14);
        assert!((gamma(2e-9, SIGMA, &e).unwrap() - 11.576).abs() < 1e-3);
        assert!((gamma(2e-9, 101.5e-9, &e).unwrap() - 11.237).abs() < 1e-3);
    }

    #[test]
    fn gamma_rejects_bad_input() {
        let e = PhysicalConstants::electron();
        assert!(gamma(-1e-9, SIGMA, &e).is_err());
        assert!(gamma(1e-9, 0.0, &e).is_err());
        assert!(gamma(f64::NAN, SIGMA, &e).is_err());
        assert!(gamma(f64::INFINITY, SIGMA, &e).is_err());
        assert!(PhysicalConstants::new(0.0, 1.0).is_err());
        assert!(DoubleSlitWave::new(-1.0, SIGMA, e).is_err());
    }

    #[test]
    fn gamma_is_monotone_in_time() {
        let e = PhysicalConstants::electron();
        let mut last = -1.0;
        for k in 0..50 {
            let g = gamma(k as f64 * 1e-10, SIGMA, &e).unwrap();
            assert!(g > last);
            last = g;
        }
    }

    #[test]
    fn single_packet_peak_and_reality_at_t0() {
        let w = fig1_wave();
        let p = w.psi_single(X, 0.0, Slit::Upper).unwrap();
        assert_eq!(p.im, 0.0);
        assert_relative_eq!(p.re, (2.0 * PI).powf(-0.25) / SIGMA.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(p.norm_sqr(), 3_989_422.804_014_327, max_relative = 1e-13);
        for x in [-3e-6, -1e-7, 0.0, 2.5e-7, 9e-7] {
            assert_eq!(w.psi_single(x, 0.0, Slit::Lower).unwrap().im, 0.0);
            assert_eq!(w.psi(x, 0.0).unwrap().im, 0.0);
        }
    }

    #[test]
    fn double_packet_origin_value() {
        // sqrt(2) (2 pi)^(-1/4) sigma^(-1/2) exp(-X^2 / (4 sigma^2)), 30-digit reference.
        let v = fig1_wave().psi(0.0, 0.0).unwrap();
        assert_eq!(v.im, 0.0);
        assert_relative_eq!(v.re, 5.452_924_930_226_525, max_relative = 1e-13);
        assert_relative_eq!(v.re / (-6.25f64).exp(), 2_824.685_045_811_064, max_relative = 1e-13);
    }

    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        // Composite Simpson.
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn single_packets_stay_normalized() {
        let w = fig1_wave();
        for t in [0.0, 0.5e-9, 2e-9] {
            let width = w.spread_width(t).unwrap();
            for slit in [Slit::Upper, Slit::Lower] {
                let c = if slit == Slit::Upper { X } else { -X };
                let norm = integrate(
                    |x| w.psi_single(x, t, slit).unwrap().norm_sqr(),
                    c - 8.0 * width,
                    c + 8.0 * width,
                    4000,
                );
                assert!((norm - 1.0).abs() < 1e-6, "t={t} norm={norm}");
            }
        }
    }

    #[test]
    fn double_packet_normalization_defect() {
        let w = fig1_wave();
        assert_relative_eq!(w.normalization_defect(), 3.726_653_172_078_671e-6, max_relative = 1e-12);
        for t in [0.0, 2e-9] {
            let width = w.spread_width(t).unwrap();
            let norm = integrate(|x| w.born_density(x, t).unwrap(), -X - 9.0 * width, X + 9.0 * width, 8000);
            assert!((norm - 1.0 - w.normalization_defect()).abs() < 1e-9, "t={t} norm={norm}");
        }
    }

    #[test]
    fn mirror_symmetry_is_exact() {
        let w = fig1_wave();
        for t in [0.0, 0.3e-9, 2e-9] {
            let snap = w.at(t).unwrap();
            for k in 0..200 {
                let x = (k as f64 - 100.0) * 37.3e-9;
                let (p, d) = snap.psi_and_derivative(x);
                let (pm, dm) = snap.psi_and_derivative(-x);
                assert_eq!(p, pm);
                assert_eq!(d, -dm);
                assert_eq!(snap.density(x), snap.density(-x));
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let w = fig1_wave();
        let (x, t, h) = (0.3e-6, 1e-9, 1e-12);
        let fd = (w.psi(x + h, t).unwrap() - w.psi(x - h, t).unwrap()) / (2.0 * h);
        let d = w.dpsi_dx(x, t).unwrap();
        assert!((fd - d).norm() / d.norm() < 1e-6);
    }

    #[test]
    fn derivative_error_is_second_order() {
        let w = fig1_wave();
        let (x, t) = (0.31e-6, 1.3e-9);
        let d = w.dpsi_dx(x, t).unwrap();
        let err = |h: f64| ((w.psi(x + h, t).unwrap() - w.psi(x - h, t).unwrap()) / (2.0 * h) - d).norm();
        let ratio = err(8e-9) / err(4e-9);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn single_packet_logarithmic_derivative() {
        let w = fig1_wave().with_packets(Packets::Only(Slit::Upper));
        let (x, t) = (0.77e-6, 0.8e-9);
        let g = w.gamma(t).unwrap();
        let expected = -Complex64::new(x - X, 0.0) / (Complex64::new(1.0, g) * (2.0 * SIGMA * SIGMA));
        let got = w.dpsi_dx(x, t).unwrap() / w.psi(x, t).unwrap();
        assert!((got - expected).norm() / expected.norm() < 1e-12);
    }

    #[test]
    fn origin_current_vanishes() {
        let w = fig1_wave();
        for t in [0.1e-9, 1e-9, 2e-9] {
            let snap = w.at(t).unwrap();
            let (p, d) = snap.psi_and_derivative(0.0);
            assert_eq!((d * p.conj()).im, 0.0);
        }
    }

    #[test]
    fn t0_density_is_two_humps() {
        let w = fig1_wave();
        let peak = w.born_density(X, 0.0).unwrap();
        assert_relative_eq!(peak, 0.5 * 3_989_422.804_014_327, max_relative = 1e-5);
        assert_eq!(peak, w.born_density(-X, 0.0).unwrap());
        // Both tails meet at x = 0: 4 exp(-X^2 / (2 sigma^2)) of the peak.
        let centre = w.born_density(0.0, 0.0).unwrap() / peak;
        assert_relative_eq!(centre, 4.0 * (-12.5f64).exp(), max_relative = 1e-9);
        let half = w.born_density(X + SIGMA * (2.0 * 2f64.ln()).sqrt(), 0.0).unwrap();
        assert_relative_eq!(half / peak, 0.5, max_relative = 1e-4);
    }

    #[test]
    fn factored_slope_matches_direct_evaluation() {
        for packets in [Packets::Both, Packets::Only(Slit::Upper), Packets::Only(Slit::Lower)] {
            let w = fig1_wave().with_packets(packets);
            for t in [0.05e-9, 1e-9, 2e-9] {
                let snap = w.at(t).unwrap();
                for k in -60..=60 {
                    let x = k as f64 * 61e-9;
                    let (p, d) = snap.psi_and_derivative(x);
                    let (slope, density) = snap.log_slope_and_density(x);
                    if p.norm_sqr() < 1e-250 {
                        continue;
                    }
                    let direct = (d * p.conj()).im / p.norm_sqr();
                    assert!((slope - direct).abs() <= 1e-9 * direct.abs().max(1e3), "{packets:?} x={x} t={t}");
                    assert_relative_eq!(density, p.norm_sqr(), max_relative = 1e-10);
                    if packets == Packets::Both {
                        let (ms, md) = snap.log_slope_and_density(-x);
                        assert_eq!(ms, -slope);
                        assert_eq!(md, density);
                    }
                }
            }
        }
    }
}
