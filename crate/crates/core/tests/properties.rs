mod common;

use proptest::prelude::*;

use nonlocal_core::kernel::{eval_kernel, tail_mass};
use nonlocal_core::subsolution::{w_eval, SubsolutionParams};
use nonlocal_core::{
    step, AcceptedKernel, BoundaryModel, Field, Grid, KernelFamily, KernelSpec, NearProfile,
    OperatorDiscretization, RightBoundary,
};

fn specs() -> Vec<KernelSpec> {
    vec![
        KernelSpec::cauchy(),
        KernelSpec::pure_fractional(1.0, 0.25, 1.0, 1.0, 2.0).unwrap(),
        KernelSpec::pure_fractional(1.0, 0.75, 1.0, 2.0, 2.0).unwrap(),
        KernelSpec::new(
            KernelFamily::TruncatedFractional {
                amplitude: 1.0,
                cutoff: 10.0,
            },
            0.5,
            1.0,
            1.0,
            2.0,
        )
        .unwrap(),
        *common::gaussian_core().spec(),
        KernelSpec::new(
            KernelFamily::CompactPlusTail {
                profile: NearProfile::Uniform,
                tail_amplitude: 1.0,
            },
            1.0,
            1.0,
            1.0,
            2.0,
        )
        .unwrap(),
    ]
}

fn kernels() -> Vec<AcceptedKernel> {
    vec![
        common::cauchy(),
        common::stable_075(),
        common::gaussian_core(),
        common::truncated(),
    ]
}

fn small_grid() -> Grid {
    Grid::new(-20.0, 20.0, 161).unwrap()
}

fn field_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_and_nonnegative(z in prop_oneof![-1e4f64..-1e-6, 1e-6f64..1e4]) {
        for spec in specs() {
            let a = eval_kernel(&spec, z).unwrap();
            let b = eval_kernel(&spec, -z).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a >= 0.0);
        }
    }

    #[test]
    fn tail_mass_is_nonincreasing(r1 in 1.0f64..500.0, dr in 0.0f64..500.0) {
        for spec in specs() {
            let t1 = tail_mass(&spec, r1).unwrap();
            let t2 = tail_mass(&spec, r1 + dr).unwrap();
            prop_assert!(t1 >= t2 * (1.0 - 1e-10), "{}: {t1} < {t2}", spec.describe());
        }
    }

    #[test]
    fn certified_tail_mass_obeys_integrated_bounds(r in 2.0f64..1e4) {
        for kernel in [common::cauchy(), common::stable_075(), common::gaussian_core()] {
            let spec = kernel.spec();
            let m = tail_mass(spec, r).unwrap();
            let scale = spec.s * r.powf(2.0 * spec.s);
            prop_assert!(m <= spec.j0 / scale * (1.0 + 1e-10));
            prop_assert!(m >= 1.0 / (spec.j0 * scale) * (1.0 - 1e-10));
        }
    }

    #[test]
    fn operator_is_linear(u in field_strategy(161), v in field_strategy(161), alpha in -2.0f64..2.0) {
        let g = small_grid();
        for kernel in kernels() {
            let op = OperatorDiscretization::new(&kernel, g, BoundaryModel::zero()).unwrap();
            let combo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + b).collect();
            let lhs = op.apply(&Field::new(g, 0.0, combo).unwrap()).unwrap();
            let du = op.apply(&Field::new(g, 0.0, u.clone()).unwrap()).unwrap();
            let dv = op.apply(&Field::new(g, 0.0, v.clone()).unwrap()).unwrap();
            let scale = op.row_sum_bound() * 3.0;
            for i in 0..g.len() {
                let rhs = alpha * du.values()[i] + dv.values()[i];
                prop_assert!((lhs.values()[i] - rhs).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn reflection_commutes_with_operator(u in field_strategy(161), left in 0.0f64..1.0, right in 0.0f64..1.0) {
        let g = small_grid();
        let n = g.len();
        for kernel in kernels() {
            let op = OperatorDiscretization::new(
                &kernel,
                g,
                BoundaryModel { left, right: RightBoundary::Constant { value: right } },
            )
            .unwrap();
            let mirrored = op
                .with_boundary(BoundaryModel { left: right, right: RightBoundary::Constant { value: left } })
                .unwrap();
            let reversed: Vec<f64> = u.iter().rev().copied().collect();
            let a = op.apply(&Field::new(g, 0.0, u.clone()).unwrap()).unwrap();
            let b = mirrored.apply(&Field::new(g, 0.0, reversed).unwrap()).unwrap();
            let scale = op.row_sum_bound();
            for i in 0..n {
                prop_assert!((a.values()[i] - b.values()[n - 1 - i]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn euler_step_preserves_order_and_bounds(
        u in field_strategy(161),
        bump in field_strategy(161),
        left in 0.0f64..1.0,
    ) {
        let g = small_grid();
        for kernel in kernels() {
            let op = OperatorDiscretization::new(&kernel, g, BoundaryModel::plateau(left)).unwrap();
            let dt = nonlocal_core::stable_dt(&op, 1.0).unwrap();
            let lower = Field::new(g, 0.0, u.clone()).unwrap();
            let upper_vals: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + 0.1 * b).collect();
            let upper = Field::new(g, 0.0, upper_vals).unwrap();
            let l1 = step(&op, &lower, dt).unwrap();
            let u1 = step(&op, &upper, dt).unwrap();
            for (a, b) in u1.values().iter().zip(l1.values()) {
                prop_assert!(a - b >= -1e-12);
            }
            let lo = lower.inf().min(left);
            let hi = lower.sup().max(left);
            prop_assert!(l1.inf() >= lo.min(0.0) - 1e-12);
            prop_assert!(l1.sup() <= hi + 1e-12);
        }
    }

    #[test]
    fn subsolution_constants_are_consistent(j0 in 0.5f64..5.0, s in 0.1f64..1.5, c in 0.1f64..10.0) {
        let spec = KernelSpec::pure_fractional(1.0, s, j0.max(1.0), 1.0e3, 2.0).unwrap();
        let p = SubsolutionParams::new(&spec, c, 1.0, 0.0).unwrap();
        prop_assert!((p.t_star * p.kappa - 2.0 * c).abs() <= 1e-12 * c);
        let lhs = p.r_c.powf(2.0 * s);
        let rhs = 8.0 * c * spec.j0 * spec.j0;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
    }

    #[test]
    fn barrier_is_bounded_and_monotone(t in 0.01f64..16.0, x in 0.0f64..1e3, dx in 0.0f64..10.0, dt in 0.0f64..5.0) {
        let spec = KernelSpec::pure_fractional(1.0, 0.5, 1.0, 1.0, 2.0).unwrap();
        let p = SubsolutionParams::new(&spec, 2.0, 1.0, 0.0).unwrap();
        let w = w_eval(&p, t, x).unwrap();
        prop_assert!((0.0..=0.5).contains(&w));
        prop_assert!(w_eval(&p, t, x + dx).unwrap() <= w);
        prop_assert!(w_eval(&p, t + dt, x).unwrap() >= w);
    }
}
