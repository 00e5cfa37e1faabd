//! Invariants of the kinetic-equation solvers.

use aggrokin_core::equilibria::{equilibria, ModelParams};
use aggrokin_core::grid::{DensityField, DomainGrid};
use aggrokin_core::meso::checks::random_smooth_field;
use aggrokin_core::meso::Kinetic;
use aggrokin_core::potential::Potential;
use proptest::prelude::*;

fn kernel(kind: u8, width: f64, amp: f64) -> Potential {
    match kind % 3 {
        0 => Potential::indicator_box(1, width, amp),
        1 => Potential::triangle(1, width, amp),
        _ => Potential::truncated_gaussian(1, width / 3.0, amp),
    }
    .unwrap()
}

fn grid_for(p: &Potential) -> DomainGrid {
    DomainGrid::new(1, 8.0 * p.cutoff_radius(), 64, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn equilibria_are_preserved(kind in 0u8..3, width in 0.3..1.0f64, m in 0.5..2.0f64, frac in 0.05..0.9f64) {
        let p = kernel(kind, width, 1.0);
        let params = ModelParams::new(m, frac * m / (p.beta() * std::f64::consts::E), 1.0).unwrap();
        let eq = equilibria(&params, p.beta()).unwrap();
        let grid = grid_for(&p);
        let model = Kinetic::new(&params, &p, &grid).unwrap();
        for k in [eq.kappa1.unwrap(), eq.kappa2.unwrap()] {
            let u0 = DensityField::constant(grid.clone(), k).unwrap();
            let traj = model.solve(&u0, 10.0, model.default_dt(), 1.0).unwrap();
            for snap in &traj.snapshots {
                let dev = snap.values.iter().fold(0.0f64, |d, v| d.max((v - k).abs()));
                prop_assert!(dev < 1e-8, "deviation {} from κ = {}", dev, k);
            }
        }
    }

    #[test]
    fn positivity_and_linear_upper_bound(
        kind in 0u8..3, width in 0.3..1.0f64, amp in 0.2..3.0f64,
        m in 0.1..5.0f64, lambda in 0.05..5.0f64, height in 0.0..10.0f64, seed in any::<u64>(),
    ) {
        let p = kernel(kind, width, amp);
        let params = ModelParams::new(m, lambda, 1.0).unwrap();
        let grid = grid_for(&p);
        let shape = random_smooth_field(&grid, seed);
        let u0 = DensityField::new(grid.clone(), shape.iter().map(|s| height * 0.5 * (1.0 + s)).collect(), 0.0).unwrap();
        let model = Kinetic::new(&params, &p, &grid).unwrap();
        let traj = model.solve(&u0, 5.0, model.default_dt(), 0.25).unwrap();
        prop_assert!(traj.positivity_holds());
        for snap in &traj.snapshots {
            prop_assert!(snap.max() <= u0.max() + lambda * snap.time + 1e-6);
            prop_assert!(snap.min() >= -1e-8);
        }
    }

    #[test]
    fn translation_equivariance(kind in 0u8..3, width in 0.3..1.0f64, shift in -63isize..64, seed in any::<u64>()) {
        let p = kernel(kind, width, 1.0);
        let params = ModelParams::new(1.0, 0.7, 1.0).unwrap();
        let grid = grid_for(&p);
        let shape = random_smooth_field(&grid, seed);
        let u0 = DensityField::new(grid.clone(), shape.iter().map(|s| 1.0 + 0.5 * s).collect(), 0.0).unwrap();
        let model = Kinetic::new(&params, &p, &grid).unwrap();
        let a = model.solve(&u0, 2.0, 0.01, 2.0).unwrap();
        let b = model.solve(&u0.translated(shift), 2.0, 0.01, 2.0).unwrap();
        prop_assert_eq!(&a.last().translated(shift).values, &b.last().values);
    }
}
