//! Extrema of a sampled interference pattern and the central-split metric.

use serde::{Deserialize, Serialize};

use crate::propagator::DensityField;

/// Extrema lower than this fraction of the peak are tail noise.
const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub position: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeReport {
    /// Sorted by position.
    pub maxima: Vec<Extremum>,
    pub minima: Vec<Extremum>,
    /// `rho(0)`, interpolated between the cells bracketing `x = 0`.
    pub central_value: f64,
    pub central_is_minimum: bool,
    pub central_is_maximum: bool,
    /// `1 - rho(0) / (nearest flanking maximum)` when the centre is a minimum, else 0.
    pub split_depth: f64,
    /// Median distance between adjacent minima; `None` with fewer than three minima.
    ///
    /// Dark fringes are used because the envelope pulls bright maxima towards
    /// the centre, while the zeros of the cross term stay put.
    pub fringe_spacing_estimate: Option<f64>,
    /// Median distance between adjacent maxima; `None` with fewer than three maxima.
    pub maxima_spacing: Option<f64>,
}

pub fn fringe_analysis(rho: &DensityField) -> FringeReport {
    let grid = rho.grid();
    let v = rho.values();
    let n = v.len();
    let dx = grid.dx();
    let floor = NOISE_FLOOR * rho.peak();

    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        let rising = v[i] - v[i - 1];
        if rising == 0.0 {
            i += 1;
            continue;
        }
        // Skip a plateau starting at i.
        let mut j = i;
        while j + 1 < n && v[j + 1] == v[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let falling = v[j + 1] - v[j];
        if rising * falling < 0.0 {
            let e = refine(grid.center(i), grid.center(j), dx, v[i - 1], v[i], v[j + 1]);
            // A dark fringe may reach zero; judge it by its walls instead.
            if rising > 0.0 && e.height >= floor {
                maxima.push(e);
            } else if rising < 0.0 && v[i - 1].min(v[j + 1]) >= floor {
                minima.push(e);
            }
        }
        i = j + 1;
    }

    // Cells bracketing x = 0 and the nearest cells strictly beside them.
    let (central_value, left, right) = central_stencil(rho);
    let central_is_minimum = central_value < left && central_value < right;
    let central_is_maximum = central_value > left && central_value > right;
    let split_depth = if central_is_minimum {
        let flank_left = maxima.iter().rev().find(|m| m.position < 0.0).map(|m| m.height);
        let flank_right = maxima.iter().find(|m| m.position > 0.0).map(|m| m.height);
        let flank = match (flank_left, flank_right) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => rho.peak(),
        };
        if flank > 0.0 {
            (1.0 - central_value / flank).clamp(0.0, 1.0)
        } else {
            0.0
        }
    } else {
        0.0
    };

    let fringe_spacing_estimate = median_gap(&minima);
    let maxima_spacing = median_gap(&maxima);

    FringeReport {
        maxima,
        minima,
        central_value,
        central_is_minimum,
        central_is_maximum,
        split_depth,
        fringe_spacing_estimate,
        maxima_spacing,
    }
}

fn median_gap(extrema: &[Extremum]) -> Option<f64> {
    if extrema.len() < 3 {
        return None;
    }
    let mut gaps: Vec<f64> = extrema.windows(2).map(|w| w[1].position - w[0].position).collect();
    gaps.sort_by(f64::total_cmp);
    let m = gaps.len();
    Some(if m % 2 == 1 { gaps[m / 2] } else { 0.5 * (gaps[m / 2 - 1] + gaps[m / 2]) })
}

/// Parabolic vertex through the extremum run `[a, b]` (cell centres) and its neighbours.
fn refine(a: f64, b: f64, dx: f64, before: f64, at: f64, after: f64) -> Extremum {
    if a != b {
        // Flat top spanning several cells: take its middle.
        return Extremum {
            position: 0.5 * (a + b),
            height: at,
        };
    }
    let curvature = before - 2.0 * at + after;
    if curvature == 0.0 {
        return Extremum { position: a, height: at };
    }
    let offset = (0.5 * (before - after) / curvature).clamp(-0.5, 0.5);
    Extremum {
        position: a + offset * dx,
        height: at - 0.25 * (before - after) * offset,
    }
}

/// `(rho(0), rho at the next cell left, rho at the next cell right)`.
fn central_stencil(rho: &DensityField) -> (f64, f64, f64) {
    let grid = rho.grid();
    let v = rho.values();
    let n = v.len();
    let dx = grid.dx();
    // Fractional index of x = 0 in cell-centre coordinates.
    let s = ((0.0 - grid.x_min()) / dx - 0.5).clamp(0.0, (n - 1) as f64);
    let k = (s.floor() as usize).min(n - 2);
    let frac = s - k as f64;
    if frac == 0.0 {
        // x = 0 sits on a cell centre.
        let left = v[k.saturating_sub(1)];
        let right = v[(k + 1).min(n - 1)];
        return (v[k], left, right);
    }
    let value = if frac == 0.5 { 0.5 * (v[k] + v[k + 1]) } else { (1.0 - frac) * v[k] + frac * v[k + 1] };
    (value, v[k.saturating_sub(1)], v[(k + 2).min(n - 1)])
}
