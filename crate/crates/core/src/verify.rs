//! Self-checks of the transport physics and numerics, grouped by cost.
//!
//! `Quick` runs every check on a 4096-cell grid; `Full` uses the default
//! 16384-cell grid and adds the upwind convergence study.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::experiment::{born_discrepancy, fringe_analysis, sweep_sigma_s, ExperimentConfig, RunResult};
use crate::propagator::{
    initial_density, propagate_characteristics, propagate_fv, propagate_series, Grid, Scheme,
    TrajectoryOptions,
};
use crate::wavefield::{gamma, Packets, PhysicalConstants, Slit};
use crate::{Error, Execution, Result, VelocityField, VelocitySampler};

/// Sweep used for the split monotonicity check, in metres.
pub const SPLIT_SWEEP: [f64; 4] = [100e-9, 100.5e-9, 101e-9, 101.5e-9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Quick,
    Full,
}

impl Level {
    pub fn cells(self) -> usize {
        match self {
            Level::Quick => 4096,
            Level::Full => 16384,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Quick => "quick",
            Level::Full => "full",
        })
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(Error::Config(format!("unknown verification level `{other}` (expected quick or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn failed(name: &str, err: &Error) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

/// `2 pi sigma^2 (1 + gamma^2) / (X gamma)`: period of the far-field cross term.
pub fn fringe_period(config: &ExperimentConfig) -> Result<f64> {
    let g = gamma(config.t_final, config.sigma_s, &config.constants)?;
    let s2 = config.sigma_s * config.sigma_s;
    Ok(2.0 * std::f64::consts::PI * s2 * (1.0 + g * g) / (config.half_separation * g))
}

/// Fitted exponent `p` in `norm ~ t^p` from two samples.
pub fn scaling_exponent(t0: f64, n0: f64, t1: f64, n1: f64) -> f64 {
    (n1 / n0).ln() / (t1 / t0).ln()
}

pub fn run_checks(level: Level, exec: Execution) -> Vec<Check> {
    let mut base = ExperimentConfig {
        grid: Grid::symmetric(10e-6, level.cells()).expect("verification grid is valid"),
        ..Default::default()
    };
    base.solver.exec = exec;

    let mut checks = vec![
        gamma_check(),
        velocity_check(&base),
        width_check(&base),
        short_conservation_check(&base),
    ];

    match sweep_sigma_s(&base, &SPLIT_SWEEP) {
        Ok(runs) => {
            checks.extend(sweep_checks(&runs));
            if let (Some(Ok(born)), Some(Ok(anomalous))) = (runs.first(), runs.last()) {
                checks.push(characteristics_check(born, anomalous));
                checks.push(fringe_check(born));
            }
        }
        Err(e) => checks.push(Check::failed("sweep", &e)),
    }
    checks.push(series_check(&base));
    if level == Level::Full {
        checks.push(convergence_check(&base));
    }
    checks
}

fn gamma_check() -> Check {
    match gamma(2e-9, 100e-9, &PhysicalConstants::electron()) {
        Ok(g) => Check::new(
            "gamma(2 ns, 100 nm)",
            (g - 11.576).abs() <= 1e-3,
            format!("{g:.6} (expected 11.576 +/- 0.001)"),
        ),
        Err(e) => Check::failed("gamma(2 ns, 100 nm)", &e),
    }
}

fn velocity_check(base: &ExperimentConfig) -> Check {
    let name = "single-packet velocity";
    let run = || -> Result<f64> {
        let wave = base.phase_wave()?.with_packets(Packets::Only(Slit::Upper));
        let sampler = VelocitySampler::new(wave, base.solver.node_epsilon)?;
        let (hm, s2, x0) = (base.constants.hbar_over_mass(), base.sigma_s * base.sigma_s, base.half_separation);
        let mut worst = 0.0f64;
        for t in [0.1e-9, 1e-9, 2e-9] {
            let g = gamma(t, base.sigma_s, &base.constants)?;
            for k in -20..=20 {
                let x = x0 + k as f64 * 0.1 * base.sigma_s;
                if x == x0 {
                    continue;
                }
                let expected = hm * g * (x - x0) / (2.0 * s2 * (1.0 + g * g));
                let v = sampler.velocity(x, t)?;
                worst = worst.max(((v - expected) / expected).abs());
            }
        }
        Ok(worst)
    };
    match run() {
        Ok(err) => Check::new(name, err < 1e-8, format!("max relative error {err:.3e} (limit 1e-8)")),
        Err(e) => Check::failed(name, &e),
    }
}

fn width_check(base: &ExperimentConfig) -> Check {
    let name = "single-packet width";
    let run = || -> Result<(f64, f64)> {
        let density_wave = base.density_wave()?.with_packets(Packets::Only(Slit::Upper));
        let phase_wave = base.phase_wave()?.with_packets(Packets::Only(Slit::Upper));
        let rho0 = initial_density(&density_wave, &base.grid)?;
        let sampler = VelocitySampler::new(phase_wave, base.solver.node_epsilon)?;
        let out = propagate_fv(&rho0, &sampler, base.t_final, &base.solver)?;
        let xs = base.grid.centers();
        let v = out.field.values();
        let mass: f64 = v.iter().sum();
        let mean = xs.iter().zip(v).map(|(x, r)| x * r).sum::<f64>() / mass;
        let var = xs.iter().zip(v).map(|(x, r)| (x - mean).powi(2) * r).sum::<f64>() / mass;
        Ok((var.sqrt(), phase_wave.spread_width(base.t_final)?))
    };
    match run() {
        Ok((w, expected)) => {
            let rel = (w / expected - 1.0).abs();
            Check::new(
                name,
                rel < 5e-3,
                format!("{:.6} um vs {:.6} um, relative {rel:.2e} (limit 5e-3)", w * 1e6, expected * 1e6),
            )
        }
        Err(e) => Check::failed(name, &e),
    }
}

/// Mass balance over a few dozen steps, before any blow-up can mask it.
fn short_conservation_check(base: &ExperimentConfig) -> Check {
    let name = "conservation (short run)";
    let run = || -> Result<(f64, usize)> {
        let rho0 = initial_density(&base.density_wave()?, &base.grid)?;
        let out = propagate_fv(&rho0, &base.sampler()?, 0.05e-9, &base.solver)?;
        Ok((out.diagnostics.mass_drift, out.diagnostics.steps))
    };
    match run() {
        Ok((drift, steps)) => Check::new(
            name,
            drift.abs() < 1e-12,
            format!("mass drift {drift:.2e} over {steps} steps (limit 1e-12)"),
        ),
        Err(e) => Check::failed(name, &e),
    }
}

fn sweep_checks(runs: &[Result<RunResult>]) -> Vec<Check> {
    let mut checks = Vec::new();
    let failed: Vec<String> = runs
        .iter()
        .zip(SPLIT_SWEEP)
        .filter_map(|(r, s)| r.as_ref().err().map(|e| format!("{} nm: {e}", s * 1e9)))
        .collect();
    if !failed.is_empty() {
        checks.push(Check::new("sweep runs", false, failed.join("; ")));
        return checks;
    }
    let runs: Vec<&RunResult> = runs.iter().map(|r| r.as_ref().expect("checked above")).collect();

    let drift = runs.iter().map(|r| r.metadata.diagnostics.mass_drift.abs()).fold(0.0, f64::max);
    let leakage = runs.iter().map(|r| r.metadata.diagnostics.leakage).fold(0.0, f64::max);
    checks.push(Check::new(
        "conservation (2 ns runs)",
        drift < 1e-6 && leakage < 1e-6,
        format!("max |mass drift| {drift:.2e}, max leakage {leakage:.2e} (limit 1e-6)"),
    ));

    let asym = runs.iter().map(|r| r.rho_final.mirror_asymmetry()).fold(0.0, f64::max);
    checks.push(Check::new(
        "mirror symmetry",
        asym < 1e-10,
        format!("max |rho(x) - rho(-x)| / peak = {asym:.2e} (limit 1e-10)"),
    ));

    let born = runs[0];
    let d = born_discrepancy(&born.rho_final, &born.born_reference);
    let centre = fringe_analysis(&born.rho_final);
    match d {
        Ok(d) => checks.push(Check::new(
            "Born limit",
            d.linf_relative < 0.01 && centre.central_is_maximum,
            format!(
                "L-inf {:.3e} (limit 1e-2), centre is strict maximum: {}",
                d.linf_relative, centre.central_is_maximum
            ),
        )),
        Err(e) => checks.push(Check::failed("Born limit", &e)),
    }

    let reports: Vec<_> = runs.iter().map(|r| fringe_analysis(&r.rho_final)).collect();
    let last = reports.last().expect("sweep is nonempty");
    checks.push(Check::new(
        "central split",
        last.central_is_minimum,
        format!("sigma_s = 101.5 nm: centre is strict minimum: {}", last.central_is_minimum),
    ));
    let depths: Vec<f64> = reports.iter().map(|r| r.split_depth).collect();
    checks.push(Check::new(
        "split monotone",
        depths.windows(2).all(|w| w[1] >= w[0]),
        format!("split depths {depths:.4?} over sigma_s = 100, 100.5, 101, 101.5 nm"),
    ));
    checks
}

fn characteristics_check(born: &RunResult, anomalous: &RunResult) -> Check {
    let name = "FV vs characteristics";
    let run = |r: &RunResult| -> Result<f64> {
        let config = &r.metadata.config;
        let rho0 = initial_density(&config.density_wave()?, &config.grid)?;
        let opts = TrajectoryOptions {
            exec: config.solver.exec,
            ..Default::default()
        };
        let oracle = propagate_characteristics(&rho0, &config.sampler()?, config.t_final, &opts)?;
        Ok(born_discrepancy(&r.rho_final, &oracle)?.linf_relative)
    };
    match (run(born), run(anomalous)) {
        (Ok(a), Ok(b)) => Check::new(
            name,
            a < 0.01 && b < 0.01,
            format!("L-inf {a:.3e} (sigma_s = 100 nm), {b:.3e} (101.5 nm), limit 1e-2"),
        ),
        (Err(e), _) | (_, Err(e)) => Check::failed(name, &e),
    }
}

fn fringe_check(born: &RunResult) -> Check {
    let name = "fringe spacing";
    let report = fringe_analysis(&born.born_reference);
    match (report.fringe_spacing_estimate, fringe_period(&born.metadata.config)) {
        (Some(s), Ok(p)) => {
            let rel = (s / p - 1.0).abs();
            Check::new(
                name,
                rel < 0.05,
                format!("{:.4} um vs {:.4} um, relative {rel:.3} (limit 0.05)", s * 1e6, p * 1e6),
            )
        }
        (None, _) => Check::new(name, false, "fewer than three minima in the Born reference".into()),
        (_, Err(e)) => Check::failed(name, &e),
    }
}

fn series_check(base: &ExperimentConfig) -> Check {
    let name = "series vs FV";
    let run = || -> Result<(f64, Vec<f64>)> {
        let rho0 = initial_density(&base.density_wave()?, &base.grid)?;
        let sampler = base.sampler()?;
        let t = 0.02e-9;
        let fv = propagate_fv(&rho0, &sampler, t, &base.solver)?;
        let series = propagate_series(&rho0, &sampler, t, 3, 32, base.solver.exec)?;
        let l2 = born_discrepancy(&series.field, &fv.field)?.l2_relative;
        let (t0, t1) = (2e-12, 2e-11);
        let a = propagate_series(&rho0, &sampler, t0, 3, 32, base.solver.exec)?;
        let b = propagate_series(&rho0, &sampler, t1, 3, 32, base.solver.exec)?;
        let slopes = (1..=3)
            .map(|j| scaling_exponent(t0, a.term_norms[j], t1, b.term_norms[j]))
            .collect();
        Ok((l2, slopes))
    };
    match run() {
        Ok((l2, slopes)) => {
            // v itself vanishes linearly at t = 0, so term k + 1 picks up t^(2(k + 1)).
            let scaling = slopes.iter().enumerate().all(|(k, p)| (p - 2.0 * (k + 1) as f64).abs() < 0.1);
            Check::new(
                name,
                l2 < 1e-3 && scaling,
                format!("order 3 at 0.02 ns: L2 {l2:.3e} (limit 1e-3); term exponents {slopes:.3?} (expected 2, 4, 6)"),
            )
        }
        Err(e) => Check::failed(name, &e),
    }
}

fn convergence_check(base: &ExperimentConfig) -> Check {
    let name = "upwind convergence";
    let error_at = |cells: usize| -> Result<f64> {
        let mut config = *base;
        config.grid = Grid::symmetric(10e-6, cells)?;
        config.solver.scheme = Scheme::Upwind;
        let rho0 = initial_density(&config.density_wave()?, &config.grid)?;
        let sampler = config.sampler()?;
        let fv = propagate_fv(&rho0, &sampler, config.t_final, &config.solver)?;
        let opts = TrajectoryOptions {
            exec: config.solver.exec,
            ..Default::default()
        };
        let oracle = propagate_characteristics(&rho0, &sampler, config.t_final, &opts)?;
        Ok(born_discrepancy(&fv.field, &oracle)?.linf_relative)
    };
    match (error_at(2048), error_at(4096)) {
        (Ok(coarse), Ok(fine)) => {
            let ratio = coarse / fine;
            Check::new(
                name,
                ratio >= 1.8,
                format!("L-inf {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3} (limit 1.8)"),
            )
        }
        (Err(e), _) | (_, Err(e)) => Check::failed(name, &e),
    }
}
