use serde::{Deserialize, Serialize};

use crate::propagator::DensityField;
use crate::{Error, Result};

/// Cells whose reference density exceeds this fraction of the reference peak
/// form the high-density region.
pub const HIGH_DENSITY_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    /// `max |rho - ref| / ref` over the high-density region.
    pub linf_relative: f64,
    /// `||rho - ref||_2 / ||ref||_2` over the whole grid.
    pub l2_relative: f64,
    /// `rho - ref` per cell.
    pub difference: Vec<f64>,
}

pub fn born_discrepancy(rho: &DensityField, reference: &DensityField) -> Result<Discrepancy> {
    rho.same_support(reference)?;
    let r = reference.values();
    let threshold = HIGH_DENSITY_FRACTION * reference.peak();
    let difference: Vec<f64> = rho.values().iter().zip(r).map(|(a, b)| a - b).collect();
    let linf_relative = difference
        .iter()
        .zip(r)
        .filter(|(_, b)| **b > threshold)
        .map(|(d, b)| d.abs() / b)
        .fold(0.0, f64::max);
    let diff_sq: f64 = difference.iter().map(|d| d * d).sum();
    let ref_sq: f64 = r.iter().map(|b| b * b).sum();
    let l2_relative = if ref_sq > 0.0 {
        (diff_sq / ref_sq).sqrt()
    } else if diff_sq == 0.0 {
        0.0
    } else {
        return Err(Error::Config("reference density is identically zero".into()));
    };
    Ok(Discrepancy {
        linf_relative,
        l2_relative,
        difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::Grid;

    #[test]
    fn identical_inputs_give_zero() {
        let g = Grid::symmetric(1.0, 32).unwrap();
        let v: Vec<f64> = (0..32).map(|i| (i as f64 * 0.3).sin().abs()).collect();
        let a = DensityField::new(g, v, 1.0).unwrap();
        let d = born_discrepancy(&a, &a).unwrap();
        assert_eq!(d.linf_relative, 0.0);
        assert_eq!(d.l2_relative, 0.0);
        assert!(d.difference.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn low_density_cells_are_excluded_from_linf() {
        let g = Grid::symmetric(1.0, 16).unwrap();
        let mut r = vec![1.0; 16];
        r[0] = 1e-3;
        let mut x = r.clone();
        x[0] = 2e-3;
        x[5] = 1.02;
        let d = born_discrepancy(
            &DensityField::new(g, x, 0.0).unwrap(),
            &DensityField::new(g, r, 0.0).unwrap(),
        )
        .unwrap();
        assert!((d.linf_relative - 0.02).abs() < 1e-12);
        assert!((d.difference[0] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_or_times_rejected() {
        let a = DensityField::new(Grid::symmetric(1.0, 16).unwrap(), vec![1.0; 16], 0.0).unwrap();
        let b = DensityField::new(Grid::symmetric(2.0, 16).unwrap(), vec![1.0; 16], 0.0).unwrap();
        let c = DensityField::new(Grid::symmetric(1.0, 16).unwrap(), vec![1.0; 16], 1.0).unwrap();
        assert!(matches!(born_discrepancy(&a, &b), Err(Error::GridMismatch(_))));
        assert!(matches!(born_discrepancy(&a, &c), Err(Error::GridMismatch(_))));
    }
}
