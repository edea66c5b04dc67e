use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::wavefield::DoubleSlitWave;
use crate::{Error, Result};

pub const MIN_CELLS: usize = 16;

/// Uniform cell-centred grid on `[x_min, x_max]`.
///
/// Coordinates are generated as `mid + offset * dx` with offsets that are
/// exact multiples of one half, so a grid with `x_min = -x_max` is mirror
/// symmetric to the last bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    cells: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::Config(format!(
                "grid bounds must be finite with x_max > x_min (got [{x_min:e}, {x_max:e}])"
            )));
        }
        if cells < MIN_CELLS {
            return Err(Error::Config(format!("grid needs at least {MIN_CELLS} cells (got {cells})")));
        }
        Ok(Self { x_min, x_max, cells })
    }

    /// `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, cells: usize) -> Result<Self> {
        Self::new(-half_width, half_width, cells)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.cells as f64
    }

    fn mid(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    pub fn center(&self, i: usize) -> f64 {
        self.mid() + (i as f64 + 0.5 - 0.5 * self.cells as f64) * self.dx()
    }

    /// Position of face `k` in `0..=cells`; face `k` is the left face of cell `k`.
    pub fn face(&self, k: usize) -> f64 {
        self.mid() + (k as f64 - 0.5 * self.cells as f64) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    pub fn faces(&self) -> Vec<f64> {
        (0..=self.cells).map(|k| self.face(k)).collect()
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        let k = ((x - self.x_min) / self.dx()).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.cells - 1)
        }
    }
}

/// A probability density sampled as cell averages on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain {
                name: "density",
                value: values[i],
                constraint: "cell values must be finite and >= 0",
            });
        }
        if !time.is_finite() {
            return Err(Error::Domain {
                name: "time",
                value: time,
                constraint: "must be finite",
            });
        }
        Ok(Self { grid, values, time })
    }

    /// Cell averages of `f` by 4-point Gauss-Legendre quadrature.
    pub fn from_fn<F>(grid: Grid, time: f64, exec: Execution, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let mut values = vec![0.0; grid.cells()];
        exec::fill(exec, &mut values, |i| cell_average(&grid, i, &f));
        Self::new(grid, values, time)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Grid quadrature of the density.
    pub fn mass_audit(&self) -> f64 {
        total_mass(self)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Largest `|rho(x) - rho(-x)|` over mirrored cell pairs, relative to the peak.
    pub fn mirror_asymmetry(&self) -> f64 {
        let n = self.values.len();
        let peak = self.peak();
        if peak == 0.0 {
            return 0.0;
        }
        (0..n / 2)
            .map(|i| (self.values[i] - self.values[n - 1 - i]).abs())
            .fold(0.0, f64::max)
            / peak
    }

    pub(crate) fn same_support(&self, other: &DensityField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        if self.time != other.time {
            return Err(Error::GridMismatch(format!("t = {:e} s vs {:e} s", self.time, other.time)));
        }
        Ok(())
    }
}

const GAUSS4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

fn cell_average(grid: &Grid, i: usize, f: &impl Fn(f64) -> f64) -> f64 {
    let c = grid.center(i);
    let h = 0.5 * grid.dx();
    // Pair symmetric nodes so mirrored cells sum identical terms in identical order.
    let mut s = 0.0;
    for k in 0..2 {
        let a = f(c + GAUSS4_NODES[k] * h);
        let b = f(c + GAUSS4_NODES[3 - k] * h);
        s += GAUSS4_WEIGHTS[k] * (a + b);
    }
    0.5 * s
}

/// Midpoint quadrature `sum(rho_i) dx`.
pub fn total_mass(rho: &DensityField) -> f64 {
    rho.values.iter().sum::<f64>() * rho.grid.dx()
}

/// Largest boundary-cell density allowed, relative to the peak.
pub const BOUNDARY_DENSITY_LIMIT: f64 = 1e-12;

/// `rho_0 = |psi(x, 0, sigma_rho)|^2` as cell averages.
///
/// Fails when the boundary cells still carry more than 1e-12 of the peak
/// density, naming the half-width that would satisfy the limit.
pub fn initial_density(wave_rho: &DoubleSlitWave, grid: &Grid) -> Result<DensityField> {
    let snapshot = wave_rho.at(0.0)?;
    let field = DensityField::from_fn(*grid, 0.0, Execution::Parallel, |x| snapshot.density(x))?;
    let peak = field.peak();
    let n = grid.cells();
    let boundary = field.values[0].max(field.values[n - 1]);
    if !(peak > 0.0) || boundary > BOUNDARY_DENSITY_LIMIT * peak {
        // Each packet is Gaussian with standard deviation sigma in density.
        let z = (2.0 * (1.0 / BOUNDARY_DENSITY_LIMIT).ln()).sqrt();
        let required_extent = wave_rho.half_separation() + z * wave_rho.sigma();
        return Err(Error::GridTooNarrow {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            boundary_fraction: if peak > 0.0 { boundary / peak } else { f64::INFINITY },
            limit: BOUNDARY_DENSITY_LIMIT,
            required_extent,
        });
    }
    Ok(field)
}
