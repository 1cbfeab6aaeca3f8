#![allow(dead_code)]

use nonlocal_core::{AcceptedKernel, KernelFamily, KernelSpec, NearProfile};

/// `A = 1/π`, `s = 1/2`, `(J0, J1, R0) = (π, 1, 2)`.
pub fn cauchy() -> AcceptedKernel {
    AcceptedKernel::certify(KernelSpec::cauchy(), 100).unwrap()
}

/// `|z|^{-1-2s}` with `s = 0.75`; near moment `∫ z^{-1/2} = 4`.
pub fn stable_075() -> AcceptedKernel {
    AcceptedKernel::certify(
        KernelSpec::pure_fractional(1.0, 0.75, 1.0, 2.0, 2.0).unwrap(),
        100,
    )
    .unwrap()
}

/// Gaussian core with a `|z|^{-2}` tail.
pub fn gaussian_core() -> AcceptedKernel {
    let spec = KernelSpec::new(
        KernelFamily::CompactPlusTail {
            profile: NearProfile::Gaussian,
            tail_amplitude: 1.0,
        },
        0.5,
        1.0,
        1.0,
        2.0,
    )
    .unwrap();
    AcceptedKernel::certify(spec, 100).unwrap()
}

/// Fractional kernel cut off at `|z| = 10`; fails the lower bound, so it is
/// accepted without a certificate.
pub fn truncated() -> AcceptedKernel {
    let spec = KernelSpec::new(
        KernelFamily::TruncatedFractional {
            amplitude: 1.0,
            cutoff: 10.0,
        },
        0.5,
        1.0,
        1.0,
        2.0,
    )
    .unwrap();
    AcceptedKernel::force(spec).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
