use phaseprop::*;
use proptest::prelude::*;

/// Odd, bounded field, identically zero for |x| >= 0.8.
struct Swirl {
    amplitude: f64,
    wavenumber: f64,
}

impl VelocityField for Swirl {
    fn velocity(&self, x: f64, t: f64) -> Result<f64> {
        let taper = (1.0 - (x / 0.8).powi(2)).max(0.0).powi(2);
        Ok(self.amplitude * (1.0 + t) * (self.wavenumber * x).sin() * taper)
    }
}

fn symmetric_pair(cells: usize, offset: f64, width: f64) -> DensityField {
    let grid = Grid::symmetric(1.0, cells).unwrap();
    let bump = |x: f64| (-0.5 * ((x - offset) / width).powi(2)).exp();
    DensityField::from_fn(grid, 0.0, Execution::Sequential, |x| bump(x) + bump(-x)).unwrap()
}

fn solver(scheme: Scheme, exec: Execution) -> SolverOptions {
    SolverOptions {
        scheme,
        exec,
        node_epsilon: 0.0,
        ..Default::default()
    }
}

fn schemes() -> impl Strategy<Value = Scheme> {
    prop_oneof![Just(Scheme::Upwind), Just(Scheme::Muscl)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transport_conserves_mass_positivity_and_symmetry(
        cells in (64usize..=320).prop_map(|n| 2 * n),
        offset in 0.05f64..0.4,
        width in 0.04f64..0.12,
        amplitude in -2.0f64..2.0,
        wavenumber in 1.0f64..12.0,
        t_final in 0.0f64..0.3,
        scheme in schemes(),
    ) {
        let rho0 = symmetric_pair(cells, offset, width);
        let field = Swirl { amplitude, wavenumber };
        let out = propagate_fv(&rho0, &field, t_final, &solver(scheme, Execution::Sequential)).unwrap();
        let mass0 = total_mass(&rho0);
        prop_assert!((total_mass(&out.field) - mass0).abs() <= 1e-12 * mass0);
        prop_assert!(out.field.values().iter().all(|v| *v >= 0.0));
        prop_assert!(out.field.mirror_asymmetry() <= 1e-12);
        prop_assert_eq!(out.field.time(), t_final);
    }

    #[test]
    fn execution_policies_agree(
        cells in (64usize..=256).prop_map(|n| 2 * n),
        amplitude in -2.0f64..2.0,
        scheme in schemes(),
    ) {
        let rho0 = symmetric_pair(cells, 0.3, 0.08);
        let field = Swirl { amplitude, wavenumber: 5.0 };
        let a = propagate_fv(&rho0, &field, 0.2, &solver(scheme, Execution::Sequential)).unwrap();
        let b = propagate_fv(&rho0, &field, 0.2, &solver(scheme, Execution::Parallel)).unwrap();
        prop_assert_eq!(a.field.values(), b.field.values());
    }

    #[test]
    fn fringe_report_is_consistent(
        cells in (32usize..=256).prop_map(|n| 2 * n),
        k in 2.0f64..30.0,
        envelope in 0.2f64..1.0,
    ) {
        let grid = Grid::symmetric(1.0, cells).unwrap();
        let rho = DensityField::from_fn(grid, 0.0, Execution::Sequential, |x| {
            (1.0 + (k * x).cos()) * (-(x / envelope).powi(2)).exp()
        })
        .unwrap();
        let report = fringe_analysis(&rho);
        prop_assert!((0.0..=1.0).contains(&report.split_depth));
        prop_assert!(!(report.central_is_minimum && report.central_is_maximum));
        for w in report.minima.windows(2).chain(report.maxima.windows(2)) {
            prop_assert!(w[0].position < w[1].position);
        }
        // Extrema come in mirrored pairs.
        for set in [&report.minima, &report.maxima] {
            let n = set.len();
            for i in 0..n {
                prop_assert!((set[i].position + set[n - 1 - i].position).abs() <= 1e-9);
            }
        }
        if let Some(s) = report.fringe_spacing_estimate {
            prop_assert!(s > 0.0);
        }
    }

    #[test]
    fn series_order_zero_is_identity(
        cells in (32usize..=128).prop_map(|n| 2 * n),
        t in 0.0f64..0.5,
    ) {
        let rho0 = symmetric_pair(cells, 0.3, 0.08);
        let field = Swirl { amplitude: 1.0, wavenumber: 3.0 };
        let out = propagate_series(&rho0, &field, t, 0, 8, Execution::Sequential).unwrap();
        prop_assert_eq!(out.field.values(), rho0.values());
    }
}
