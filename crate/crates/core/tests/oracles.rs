mod common;

use std::f64::consts::{FRAC_1_PI, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

use nonlocal_core::kernel::{eval_kernel, near_second_moment, tail_mass};
use nonlocal_core::quadrature::Quadrature;
use nonlocal_core::reference::reference_solution;
use nonlocal_core::subsolution::{operator_on_w, SubsolutionParams};
use nonlocal_core::verification::InitialDatum;
use nonlocal_core::{
    evolve_with, AcceptedKernel, ApplyMethod, BoundaryModel, EvolveOptions, Field, Grid, KernelSpec,
    OperatorDiscretization, RightBoundary,
};

#[test]
fn kernel_symmetry_on_ten_thousand_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let kernels = [
        common::cauchy(),
        common::stable_075(),
        common::gaussian_core(),
        common::truncated(),
    ];
    for _ in 0..10_000 {
        let z: f64 = rng.gen_range(1e-3..1e3) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for k in &kernels {
            assert_eq!(
                eval_kernel(k.spec(), z).unwrap(),
                eval_kernel(k.spec(), -z).unwrap()
            );
        }
    }
}

#[test]
fn gaussian_core_integrals_match_closed_forms() {
    let spec = *common::gaussian_core().spec();
    // ∫_{-1}^{1} z² e^{−z²} dz = (√π/2)·erf(1) − 1/e
    let moment = 0.5 * PI.sqrt() * erf(1.0) - (-1.0f64).exp();
    let got = near_second_moment(&spec).unwrap();
    assert!((got - moment).abs() <= 1e-9 * moment, "{got} vs {moment}");
    // Beyond |z| = 1 the kernel is |z|^{-2}: two-sided tail 2/R.
    let tail = tail_mass(&spec, 2.0).unwrap();
    assert!((tail - 1.0).abs() <= 1e-9, "{tail}");
}

#[test]
fn pure_tail_closed_form_matches_quadrature() {
    let q = Quadrature::with_rel_tol(1e-12);
    for &s in &[0.25, 0.5, 0.75, 1.0] {
        let spec = KernelSpec::pure_fractional(1.3, s, 1.3, 10.0, 2.0).unwrap();
        for &r in &[1.0, 3.0, 250.0] {
            let numeric = 2.0
                * q.integrate_to_infinity(|z| eval_kernel(&spec, z).unwrap(), r)
                    .unwrap()
                    .value;
            let closed = tail_mass(&spec, r).unwrap();
            assert!(
                (numeric - closed).abs() <= 1e-9 * closed,
                "s={s} R={r}: {numeric} vs {closed}"
            );
        }
    }
}

/// `D[cos](x) = −cos(x)` for the unit Cauchy kernel, since its symbol is `|ξ|`.
#[test]
fn cauchy_operator_reproduces_symbol_on_cosine() {
    let kernel = common::cauchy();
    let mut errors = Vec::new();
    for &n in &[8001usize, 16001] {
        let grid = Grid::new(-400.0, 400.0, n).unwrap();
        let op = OperatorDiscretization::new(&kernel, grid, BoundaryModel::zero()).unwrap();
        let u = Field::from_fn(grid, 0.0, f64::cos).unwrap();
        let du = op.apply(&u).unwrap();
        let err = u
            .iter()
            .zip(du.values())
            .filter(|((x, _), _)| x.abs() <= 20.0)
            .map(|((x, _), d)| (d + x.cos()).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    assert!(errors[0] < 2e-2, "{errors:?}");
    assert!(errors[1] < 0.6 * errors[0], "{errors:?}");
}

#[test]
fn fft_matches_direct_for_every_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = Grid::new(1.0, 300.0, 1500).unwrap();
    let boundaries = [
        BoundaryModel::zero(),
        BoundaryModel {
            left: 0.7,
            right: RightBoundary::Constant { value: 0.2 },
        },
        BoundaryModel {
            left: 1.0,
            right: RightBoundary::AlgebraicTail,
        },
    ];
    for kernel in [
        common::cauchy(),
        common::stable_075(),
        common::gaussian_core(),
        common::truncated(),
    ] {
        for b in boundaries {
            let op = OperatorDiscretization::new(&kernel, grid, b).unwrap();
            let values = grid
                .points()
                .iter()
                .map(|x| 1.0 / x + 0.01 * rng.gen_range(0.0..1.0))
                .collect();
            let u = Field::new(grid, 0.0, values).unwrap();
            let d = op.apply_with(&u, ApplyMethod::Direct).unwrap();
            let f = op.apply_with(&u, ApplyMethod::Fft).unwrap();
            let scale = d.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(common::max_abs_diff(d.values(), f.values()) <= 1e-10 * scale);
        }
    }
}

/// Brute-force `D[w]` for `s = 1/2` and `J = |z|^{-2}` from the symmetrized
/// integral on log-spaced panels. On `z < δ` the increment is replaced by
/// `w''(x)·z²` with `w'' = 2k/(x + 2k)³`, `k = κt`, and the far field is
/// folded in analytically.
fn brute_force_dw(spec: &KernelSpec, p: &SubsolutionParams, t: f64, x: f64) -> f64 {
    assert_eq!(p.s, 0.5);
    let k = p.kappa * t;
    let w = |y: f64| if y <= 0.0 { 0.5 } else { k / (y + 2.0 * k) };
    let f = |z: f64| (w(x + z) + w(x - z) - 2.0 * w(x)) * eval_kernel(spec, z).unwrap();
    let q = Quadrature {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_intervals: 2000,
    };
    let delta = 1e-3;
    let far = 1e7;
    let mut edges = vec![delta];
    while *edges.last().unwrap() < far {
        let e = edges.last().unwrap() * 1.5;
        edges.push(e);
    }
    edges.push(x);
    edges.push(1.0);
    edges.push(far);
    edges.retain(|&e| e <= far);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let second = 2.0 * k / (x + 2.0 * k).powi(3);
    let near = second * delta;
    let middle = q.integrate_panels(f, &edges).unwrap().value;
    // Beyond `far`: w(x+z) ≈ 0 and w(x−z) = 1/2.
    near + middle + (0.5 - 2.0 * w(x)) * 0.5 * tail_mass(spec, far).unwrap()
}

#[test]
fn operator_on_barrier_matches_brute_force() {
    let spec = KernelSpec::pure_fractional(1.0, 0.5, 1.0, 1.0, 2.0).unwrap();
    let p = SubsolutionParams::new(&spec, 2.0, 1.0, 0.0).unwrap();
    for &(t, x) in &[(1.0, 18.0), (8.0, 50.0), (15.0, 200.0), (0.5, 30.0)] {
        let lib = operator_on_w(&spec, &p, t, x, 1e-10).unwrap().value;
        let oracle = brute_force_dw(&spec, &p, t, x);
        assert!(
            (lib - oracle).abs() <= 1e-7 * oracle.abs().max(1e-12),
            "t={t} x={x}: {lib} vs {oracle}"
        );
    }
}

/// `(−Δ)^s` has kernel `c_s |z|^{−1−2s}` with
/// `c_s = 4^s Γ(1/2 + s) / (√π |Γ(−s)|)`.
fn fractional_laplacian_constant(s: f64) -> f64 {
    4f64.powf(s) * gamma(0.5 + s) / (PI.sqrt() * gamma(-s).abs())
}

#[test]
fn laplacian_constant_is_one_over_pi_at_half() {
    assert!((fractional_laplacian_constant(0.5) - FRAC_1_PI).abs() < 1e-15);
}

#[test]
fn solver_matches_reference_for_three_quarters() {
    let s = 0.75;
    let c = fractional_laplacian_constant(s);
    let spec = KernelSpec::pure_fractional(c, s, 1.0 / c.min(1.0 / c), 10.0, 2.0).unwrap();
    let kernel = AcceptedKernel::certify(spec, 100).unwrap();
    let mut errors = Vec::new();
    for &n in &[6001usize, 12001] {
        let grid = Grid::new(-100.0, 500.0, n).unwrap();
        let op = OperatorDiscretization::new(&kernel, grid, BoundaryModel::plateau(1.0)).unwrap();
        let u0 = InitialDatum::step(1.0, 0.0).unwrap().sample(&grid).unwrap();
        let options = EvolveOptions {
            safety: 0.05,
            method: ApplyMethod::Auto,
        };
        let traj = evolve_with(&op, &u0, 1.0, &[], &options).unwrap();
        let err = traj
            .last()
            .iter()
            .filter(|&(x, _)| (-20.0..=50.0).contains(&x))
            .step_by(5)
            .map(|(x, u)| (u - reference_solution(s, 1.0, 0.0, 1.0, x).unwrap()).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    assert!(errors[0] < 1e-2, "{errors:?}");
    assert!(errors[1] < errors[0], "{errors:?}");
}
