//! The explicit barrier
//!
//! ```text
//!     w(t, x) = 1/2                      for x ≤ 0,
//!     w(t, x) = κt / (x^{2s} + 2κt)      for x > 0,
//! ```
//!
//! with `κ = 1/(8·s·J0)`, together with its constants `t* = 2C/κ` and
//! `R_C = (8·C·J0²)^{1/(2s)}` and a continuum certificate of
//! `∂ₜw − D[w] ≤ 0` on `(0, t*) × [R0 + R_C, ∞)`.
//!
//! `D[w]` is evaluated by adaptive quadrature of the symmetrized integral
//! `∫_0^∞ [w(x+z) + w(x−z) − 2w(x)] J(z) dz`, independent of any grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::quadrature::Quadrature;
use crate::report::VerificationReport;

/// `κ = 1/(8·s·J0)`.
pub fn kappa(spec: &KernelSpec) -> f64 {
    1.0 / (8.0 * spec.s * spec.j0)
}

/// `(t*, R_C) = (2C/κ, (8·C·J0²)^{1/(2s)})`.
pub fn scaling_constants(spec: &KernelSpec, c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
    }
    let t_star = 2.0 * c / kappa(spec);
    let r_c = (8.0 * c * spec.j0 * spec.j0).powf(1.0 / (2.0 * spec.s));
    Ok((t_star, r_c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsolutionParams {
    pub s: f64,
    pub j0: f64,
    pub kappa: f64,
    pub c: f64,
    pub t_star: f64,
    pub r_c: f64,
    pub a: f64,
    pub b: f64,
    pub r0: f64,
}

impl SubsolutionParams {
    pub fn new(spec: &KernelSpec, c: f64, a: f64, b: f64) -> Result<Self> {
        spec.validate()?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("a must be positive, got {a}")));
        }
        if !b.is_finite() {
            return Err(Error::InvalidArgument(format!("b must be finite, got {b}")));
        }
        let (t_star, r_c) = scaling_constants(spec, c)?;
        Ok(Self {
            s: spec.s,
            j0: spec.j0,
            kappa: kappa(spec),
            c,
            t_star,
            r_c,
            a,
            b,
            r0: spec.r0,
        })
    }

    /// Left end `R0 + R_C` of the region where the residual sign is certified.
    pub fn region_start(&self) -> f64 {
        self.r0 + self.r_c
    }

    /// `x ↦ w(t, x)` without argument checks; `t > 0`.
    fn profile(&self, t: f64) -> impl Fn(f64) -> f64 + '_ {
        let kt = self.kappa * t;
        let two_s = 2.0 * self.s;
        move |x: f64| {
            if x <= 0.0 {
                0.5
            } else {
                kt / (x.powf(two_s) + 2.0 * kt)
            }
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!(
            "the barrier is defined for t > 0, got t = {t}"
        )));
    }
    Ok(())
}

/// `w(t, x)`.
pub fn w_eval(params: &SubsolutionParams, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok(params.profile(t)(x))
}

/// `∂ₜw(t, x) = κ x^{2s} / (x^{2s} + 2κt)²` for `x > 0`, zero otherwise.
pub fn w_time_derivative(params: &SubsolutionParams, t: f64, x: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be ≥ 0, got {t}")));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let p = x.powf(2.0 * params.s);
    let g = p + 2.0 * params.kappa * t;
    Ok(params.kappa * p / (g * g))
}

/// `∂ₓₓw(t, x)` for `x > 0`.
fn w_second_derivative(params: &SubsolutionParams, t: f64, x: f64) -> f64 {
    let two_s = 2.0 * params.s;
    let kt = params.kappa * t;
    let g = x.powf(two_s) + 2.0 * kt;
    let g1 = two_s * x.powf(two_s - 1.0);
    let g2 = two_s * (two_s - 1.0) * x.powf(two_s - 2.0);
    kt * (2.0 * g1 * g1 / (g * g * g) - g2 / (g * g))
}

/// `w(t, x+z) + w(t, x−z) − 2w(t, x)`.
pub fn symmetric_increment(params: &SubsolutionParams, t: f64, x: f64, z: f64) -> Result<f64> {
    check_time(t)?;
    let w = params.profile(t);
    Ok(w(x + z) + w(x - z) - 2.0 * w(x))
}

/// `a·w(t, x + R0 + R_C + b)`: the barrier placed under a solution whose
/// initial datum dominates `a·1_{(−∞, b]}`. At `t = t*/2` this is
/// `a·C / ((x + R0 + R_C + b)^{2s} + 2C)`.
pub fn shifted_subsolution(params: &SubsolutionParams, t: f64, x: f64) -> Result<f64> {
    Ok(params.a * w_eval(params, t, x + params.r0 + params.r_c + params.b)?)
}

/// Value of `D[w](t, x)` with its accumulated quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorValue {
    pub value: f64,
    pub error: f64,
}

/// `D[w](t, x)` by adaptive quadrature over `z > 0`, split at `|x|`, `R_C`
/// and the kernel's own breakpoints. The innermost `z < δ` is replaced by
/// its Taylor value `w''(x)·∫_0^δ z² J` to avoid cancellation in the second
/// difference.
pub fn operator_on_w(
    spec: &KernelSpec,
    params: &SubsolutionParams,
    t: f64,
    x: f64,
    quad_tol: f64,
) -> Result<OperatorValue> {
    check_time(t)?;
    if !(quad_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "quadrature tolerance must be positive, got {quad_tol}"
        )));
    }
    let w = params.profile(t);
    let wx = w(x);
    let q = Quadrature {
        abs_tol: 1e-300,
        rel_tol: quad_tol,
        max_intervals: 4000,
    };

    let mut value = 0.0;
    let mut error = 0.0;

    let mut start = 0.0;
    if x > 0.0 {
        let delta = 1e-4 * x.min(1.0);
        let moment = spec.second_moment_within(delta)? / 2.0;
        value += w_second_derivative(params, t, x) * moment;
        start = delta;
    }

    let mut breaks: Vec<f64> = vec![x.abs(), params.r_c];
    match spec.family {
        KernelFamily::TruncatedFractional { cutoff, .. } => breaks.push(cutoff),
        KernelFamily::CompactPlusTail { .. } => breaks.push(1.0),
        KernelFamily::PureFractional { .. } => {}
    }
    breaks.retain(|&b| b > start && b.is_finite());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let integrand = |z: f64| (w(x + z) + w(x - z) - 2.0 * wx) * spec.density(z);
    let mut lo = start;
    for &hi in &breaks {
        let r = q.integrate(integrand, lo, hi)?;
        value += r.value;
        error += r.error;
        lo = hi;
    }

    // Beyond every breakpoint (lo ≥ R_C > 0) x − z < 0, so w(x − z) = 1/2
    // and the constant part integrates against the kernel tail directly.
    let far = q.integrate_to_infinity(|z| w(x + z) * spec.density(z), lo)?;
    value += far.value + (0.5 - 2.0 * wx) * spec.interval_mass(lo, f64::INFINITY)?;
    error += far.error;
    Ok(OperatorValue { value, error })
}

/// Default quadrature budget `max(10·quad_tol·|D[w]|, 1e-10)`.
pub fn residual_budget(d_w: f64, quad_tol: f64) -> f64 {
    (10.0 * quad_tol * d_w.abs()).max(1e-10)
}

/// `∂ₜw(t, x) − D[w](t, x)`.
pub fn subsolution_residual(
    spec: &KernelSpec,
    params: &SubsolutionParams,
    t: f64,
    x: f64,
    quad_tol: f64,
) -> Result<f64> {
    let d_w = operator_on_w(spec, params, t, x, quad_tol)?;
    Ok(w_time_derivative(params, t, x)? - d_w.value)
}

/// One row of the residual certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub t: f64,
    pub x: f64,
    pub residual: f64,
    pub budget: f64,
    pub pass: bool,
}

/// Samples the residual on `t_i = t*·i/(n_t+1)`, `i = 1..=n_t`, and `n_x`
/// evenly spaced `x` in `x_range` (inclusive).
pub fn residual_grid(
    spec: &KernelSpec,
    params: &SubsolutionParams,
    t_count: usize,
    x_count: usize,
    x_range: (f64, f64),
    quad_tol: f64,
) -> Result<Vec<ResidualRow>> {
    if t_count == 0 || x_count < 2 || !(x_range.0 < x_range.1) {
        return Err(Error::InvalidArgument(
            "residual grid needs t_count ≥ 1, x_count ≥ 2 and x_lo < x_hi".into(),
        ));
    }
    let samples: Vec<(f64, f64)> = (1..=t_count)
        .flat_map(|i| {
            let t = params.t_star * i as f64 / (t_count + 1) as f64;
            (0..x_count).map(move |j| {
                let x = x_range.0 + (x_range.1 - x_range.0) * j as f64 / (x_count - 1) as f64;
                (t, x)
            })
        })
        .collect();
    samples
        .into_par_iter()
        .map(|(t, x)| {
            let d_w = operator_on_w(spec, params, t, x, quad_tol)?;
            let residual = w_time_derivative(params, t, x)? - d_w.value;
            let budget = residual_budget(d_w.value, quad_tol);
            Ok(ResidualRow {
                t,
                x,
                residual,
                budget,
                pass: residual <= budget,
            })
        })
        .collect()
}

/// Summarizes residual rows inside the certified region
/// `(0, t*) × [R0 + R_C, ∞)`; rows outside it are recorded but not judged.
pub fn residual_report(params: &SubsolutionParams, rows: &[ResidualRow]) -> VerificationReport {
    let in_region = |r: &&ResidualRow| r.t > 0.0 && r.t < params.t_star && r.x >= params.region_start();
    let judged: Vec<&ResidualRow> = rows.iter().filter(in_region).collect();
    let worst = judged
        .iter()
        .max_by(|a, b| (a.residual - a.budget).total_cmp(&(b.residual - b.budget)));
    let (measured, budget, t, x) = match worst {
        Some(r) => (r.residual, r.budget, r.t, r.x),
        None => (f64::NAN, 0.0, f64::NAN, f64::NAN),
    };
    let all_pass = !judged.is_empty() && judged.iter().all(|r| r.pass);
    let mut report = VerificationReport::at_most("subsolution_residual", measured, 0.0, budget)
        .at(t, x)
        .with("kappa", params.kappa)
        .with("t_star", params.t_star)
        .with("R_C", params.r_c)
        .with("C", params.c)
        .with("R0", params.r0)
        .with("samples_judged", judged.len())
        .with("samples_total", rows.len());
    report.pass = all_pass;
    report
}

/// Minimum of the symmetric increment over sampled `(t, x, z)` with
/// `x ≥ R0 + R_C` and `0 < z ≤ R_C`; nonnegative when `w(t, ·)` is convex
/// on the far region.
pub fn convexity_certificate(
    params: &SubsolutionParams,
    t_samples: &[f64],
    x_samples: &[f64],
    z_count: usize,
) -> Result<VerificationReport> {
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    for &t in t_samples {
        for &x in x_samples {
            if x < params.region_start() {
                return Err(Error::InvalidArgument(format!(
                    "convexity is only claimed for x ≥ R0 + R_C = {}, got {x}",
                    params.region_start()
                )));
            }
            for k in 1..=z_count {
                let z = params.r_c * k as f64 / z_count as f64;
                let inc = symmetric_increment(params, t, x, z)?;
                if inc < worst.0 {
                    worst = (inc, t, x);
                }
            }
        }
    }
    Ok(VerificationReport::at_least("subsolution_convexity", worst.0, 0.0, 0.0).at(worst.1, worst.2))
}
