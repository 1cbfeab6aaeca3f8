//! Fractional heat kernels `p_s(t, x)` and step-datum solutions of
//! `∂ₜu = −(−Δ)^s u`, computed independently of the grid solver.
//!
//! Closed forms are used for `s = 1/2` (Cauchy) and `s = 1` (Gaussian).
//! Other exponents go through the self-similar profile `p_s(1, y)`, which
//! is evaluated either from its large-`y` series or by Fourier inversion
//! `(1/π)∫₀^∞ e^{−ξ^{2s}} cos(yξ) dξ`, summed panel by panel between the
//! zeros of the cosine and accelerated with Wynn's epsilon algorithm.

use std::f64::consts::{FRAC_1_PI, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{wynn_epsilon, Quadrature};

const PANEL_LIMIT: usize = 4000;
const WYNN_WINDOW: usize = 40;
const TARGET_REL: f64 = 1e-12;
const SERIES_TERMS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatKernelMethod {
    ClosedForm,
    FourierInversion,
    AsymptoticSeries,
}

/// A single evaluation with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub error: f64,
    pub method: HeatKernelMethod,
}

/// `p_s(t, ·)` sampled on a set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatKernelEval {
    pub s: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub methods: Vec<HeatKernelMethod>,
    /// Largest absolute error estimate over the samples.
    pub error: f64,
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "reference kernels need s in (0, 1], got {s}"
        )));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// Amplitude `c_s = 4^s Γ(1/2 + s) / (√π |Γ(−s)|)` for which the kernel
/// `c_s |z|^{-1-2s}` generates `−(−Δ)^s`, for `s` in `(0, 1)`.
pub fn fractional_laplacian_amplitude(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "the jump-kernel representation needs s in (0, 1), got {s}"
        )));
    }
    Ok(4f64.powf(s) * gamma(0.5 + s) / (PI.sqrt() * gamma(-s).abs()))
}

/// Length scale `t^{1/(2s)}` of the self-similar variable.
pub fn similarity_scale(s: f64, t: f64) -> f64 {
    t.powf(0.5 / s)
}

/// `p_s(t, x)`.
pub fn fractional_heat_kernel(s: f64, t: f64, x: f64) -> Result<f64> {
    Ok(heat_kernel_value(s, t, x)?.value)
}

/// `p_s(t, x)` together with how it was obtained.
pub fn heat_kernel_value(s: f64, t: f64, x: f64) -> Result<KernelValue> {
    check_order(s)?;
    check_time(t)?;
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("x must be finite, got {x}")));
    }
    if s == 0.5 {
        return Ok(KernelValue {
            value: t / (PI * (t * t + x * x)),
            error: 0.0,
            method: HeatKernelMethod::ClosedForm,
        });
    }
    if s == 1.0 {
        return Ok(KernelValue {
            value: (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt(),
            error: 0.0,
            method: HeatKernelMethod::ClosedForm,
        });
    }
    let scale = similarity_scale(s, t);
    let y = (x / scale).abs();
    let unit = match profile_series(s, y) {
        Some(v) => v,
        None => profile_fourier(s, y)?,
    };
    Ok(KernelValue {
        value: unit.value / scale,
        error: unit.error / scale,
        method: unit.method,
    })
}

/// `p_s(t, x)` by Fourier inversion only, whatever the exponent.
pub fn heat_kernel_fourier(s: f64, t: f64, x: f64) -> Result<KernelValue> {
    check_order(s)?;
    check_time(t)?;
    let scale = similarity_scale(s, t);
    let unit = profile_fourier(s, (x / scale).abs())?;
    Ok(KernelValue {
        value: unit.value / scale,
        error: unit.error / scale,
        method: unit.method,
    })
}

/// Evaluates `p_s(t, ·)` at every point of `xs` in parallel.
pub fn heat_kernel_profile(s: f64, t: f64, xs: &[f64]) -> Result<HeatKernelEval> {
    let values: Vec<KernelValue> = xs
        .par_iter()
        .map(|&x| heat_kernel_value(s, t, x))
        .collect::<Result<_>>()?;
    Ok(HeatKernelEval {
        s,
        t,
        x: xs.to_vec(),
        p: values.iter().map(|v| v.value).collect(),
        methods: values.iter().map(|v| v.method).collect(),
        error: values.iter().map(|v| v.error).fold(0.0, f64::max),
    })
}

/// Sum of `Σ_{k≥1} (−1)^{k+1} sin(πsk) exp(ln_c(k)) y^{−2sk}`, stopped at
/// the smallest term. Returns `None` unless the truncation error is
/// negligible and cancellation did not eat the result.
fn power_series(s: f64, y: f64, ln_coeff: impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    if !(y > 0.0) {
        return None;
    }
    let ln_y = y.ln();
    let mut sum: f64 = 0.0;
    let mut largest: f64 = 0.0;
    let mut prev_env = f64::INFINITY;
    for k in 1..=SERIES_TERMS {
        let kf = k as f64;
        let env = (ln_coeff(kf) - 2.0 * s * kf * ln_y).exp();
        if env > prev_env {
            return None;
        }
        prev_env = env;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * (PI * s * kf).sin() * env;
        largest = largest.max(term.abs());
        if env <= 1e-16 * sum.abs() {
            if largest > 1e2 * sum.abs() || !(sum > 0.0) {
                return None;
            }
            return Some((sum, env + 4.0 * f64::EPSILON * largest));
        }
        sum += term;
    }
    None
}

/// `p_s(1, y)` from `(1/π)Σ (−1)^{k+1} Γ(2sk+1)/k! sin(πsk) y^{−2sk−1}`.
pub fn profile_tail_series(s: f64, y: f64) -> Option<f64> {
    profile_series(s, y).map(|v| v.value)
}

fn profile_series(s: f64, y: f64) -> Option<KernelValue> {
    let (sum, err) = power_series(s, y, |k| ln_gamma(2.0 * s * k + 1.0) - ln_gamma(k + 1.0))?;
    Some(KernelValue {
        value: sum / (PI * y),
        error: err / (PI * y),
        method: HeatKernelMethod::AsymptoticSeries,
    })
}

fn panel_rule() -> Quadrature {
    Quadrature {
        abs_tol: 1e-17,
        rel_tol: 1e-13,
        max_intervals: 400,
    }
}

/// `∫₀^∞ f` for an integrand whose sign alternates on the panels
/// `[0, first]`, `[first, first + period]`, ..., with envelope `amplitude`.
fn alternating_integral(
    f: impl Fn(f64) -> f64,
    amplitude: impl Fn(f64) -> f64,
    first: f64,
    period: f64,
) -> Result<(f64, f64)> {
    let q = panel_rule();
    let mut sums = Vec::with_capacity(256);
    let mut quad_err = 0.0;
    let mut lo = 0.0;
    let mut hi = first;
    let mut total = 0.0;
    let mut last_estimate = f64::NAN;
    let mut floor = 0.0;
    for k in 0..PANEL_LIMIT {
        let panel = q.integrate(&f, lo, hi)?;
        quad_err += panel.error;
        total += panel.value;
        sums.push(total);
        if k == 0 {
            floor = 1e-15 * panel.value.abs();
        }
        if amplitude(hi) * period <= 1e-17 * total.abs() {
            return Ok((total, quad_err + amplitude(hi) * period));
        }
        if sums.len() >= 8 {
            let window = &sums[sums.len().saturating_sub(WYNN_WINDOW)..];
            let (estimate, wynn_err) = wynn_epsilon(window);
            let settled = (estimate - last_estimate).abs();
            let tol = (TARGET_REL * estimate.abs()).max(floor);
            if wynn_err.max(settled) <= tol {
                return Ok((estimate, quad_err + wynn_err.max(settled)));
            }
            last_estimate = estimate;
        }
        lo = hi;
        hi = first + (k + 1) as f64 * period;
    }
    Err(Error::Quadrature {
        lo: 0.0,
        hi,
        value: total,
        error: f64::INFINITY,
        intervals: PANEL_LIMIT,
    })
}

fn profile_fourier(s: f64, y: f64) -> Result<KernelValue> {
    let two_s = 2.0 * s;
    let value = if y == 0.0 {
        // (1/π)∫ e^{−ξ^{2s}} dξ = Γ(1 + 1/(2s))/π
        KernelValue {
            value: gamma(1.0 + 1.0 / two_s) * FRAC_1_PI,
            error: 0.0,
            method: HeatKernelMethod::FourierInversion,
        }
    } else {
        let amp = |xi: f64| (-xi.powf(two_s)).exp();
        let (v, e) = alternating_integral(|xi| amp(xi) * (y * xi).cos(), amp, 0.5 * PI / y, PI / y)?;
        KernelValue {
            value: v * FRAC_1_PI,
            error: e * FRAC_1_PI,
            method: HeatKernelMethod::FourierInversion,
        }
    };
    Ok(value)
}

/// `∫_y^∞ p_s(1, z) dz` for `y ≥ 0`.
fn profile_upper_tail(s: f64, y: f64) -> Result<(f64, f64)> {
    if y == 0.0 {
        return Ok((0.5, 0.0));
    }
    let two_s = 2.0 * s;
    // (1/π)Σ (−1)^{k+1} Γ(2sk)/k! sin(πsk) y^{−2sk}
    if let Some((sum, err)) = power_series(s, y, |k| ln_gamma(two_s * k) - ln_gamma(k + 1.0)) {
        return Ok((sum * FRAC_1_PI, err * FRAC_1_PI));
    }
    // 1/2 − (1/π)∫₀^∞ e^{−ξ^{2s}} sin(yξ)/ξ dξ
    let amp = |xi: f64| (-xi.powf(two_s)).exp() / xi.max(f64::MIN_POSITIVE);
    let f = |xi: f64| {
        if xi == 0.0 {
            y
        } else {
            (-xi.powf(two_s)).exp() * (y * xi).sin() / xi
        }
    };
    let (v, e) = alternating_integral(f, amp, PI / y, PI / y)?;
    Ok((0.5 - v * FRAC_1_PI, e * FRAC_1_PI))
}

/// Solution from the step datum `a·1_{(−∞,b]}`: `a·∫_{x−b}^∞ p_s(t, y) dy`.
pub fn reference_solution(s: f64, a: f64, b: f64, t: f64, x: f64) -> Result<f64> {
    check_order(s)?;
    check_time(t)?;
    if !(a.is_finite() && b.is_finite() && x.is_finite()) {
        return Err(Error::InvalidArgument("a, b and x must be finite".into()));
    }
    if s == 0.5 {
        return Ok(a * (0.5 - ((x - b) / t).atan() * FRAC_1_PI));
    }
    if s == 1.0 {
        return Ok(0.5 * a * erfc((x - b) / (2.0 * t.sqrt())));
    }
    let y = (x - b) / similarity_scale(s, t);
    let (upper, _) = profile_upper_tail(s, y.abs())?;
    Ok(if y >= 0.0 { a * upper } else { a * (1.0 - upper) })
}

/// `lim_{x→∞} x^{2s}·u(t, x)/t` for the step datum of height `a`:
/// `a·Γ(2s)·sin(πs)/π`.
pub fn tail_constant(s: f64, a: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    a * gamma(2.0 * s) * (PI * s).sin() * FRAC_1_PI
}

/// Result of fitting the two-sided heat-kernel bound
/// `C⁻¹ ≤ p·t^{1/(2s)}·(1 + |y|^{1+2s}) ≤ C` with `y = x·t^{−1/(2s)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsFit {
    pub s: f64,
    /// Smallest `C ≥ 1` satisfying both inequalities at every sample.
    pub c1: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub worst_t: f64,
    pub worst_x: f64,
    pub samples: usize,
    /// Tail constant of the unit step solution, `lim x^{2s}u/t`.
    pub limit: f64,
    /// `x^{2s}·u(t, x)/t` of the unit step solution at the largest sampled `y`.
    pub limit_sampled: f64,
    /// `1/c1`, the bound the limit is compared against.
    pub limit_bound: f64,
    pub limit_pass: bool,
}

/// Relative slack allowed when comparing the tail constant with `1/c1`.
pub const LIMIT_REL_TOL: f64 = 1e-9;

/// Fits the two-sided bound constant over all `(t, x)` sample pairs.
pub fn heat_kernel_bounds_fit(s: f64, t_samples: &[f64], x_samples: &[f64]) -> Result<BoundsFit> {
    check_order(s)?;
    if t_samples.is_empty() || x_samples.is_empty() {
        return Err(Error::InvalidArgument("bounds fit needs samples".into()));
    }
    for &t in t_samples {
        check_time(t)?;
    }
    let pairs: Vec<(f64, f64)> = t_samples
        .iter()
        .flat_map(|&t| x_samples.iter().map(move |&x| (t, x)))
        .collect();
    let ys: Vec<f64> = pairs
        .iter()
        .map(|&(t, x)| (x / similarity_scale(s, t)).abs())
        .collect();
    let y_max = ys.iter().copied().fold(0.0, f64::max);
    let y_min = ys
        .iter()
        .copied()
        .filter(|&y| y > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(y_max >= 100.0 * y_min) {
        return Err(Error::InvalidArgument(format!(
            "samples span [{y_min}, {y_max}] in x·t^(-1/(2s)); two decades required"
        )));
    }

    let ratios: Vec<f64> = pairs
        .par_iter()
        .zip(ys.par_iter())
        .map(|(&(t, x), &y)| {
            let p = fractional_heat_kernel(s, t, x)?;
            Ok(p * similarity_scale(s, t) * (1.0 + y.powf(1.0 + 2.0 * s)))
        })
        .collect::<Result<_>>()?;

    let mut c1: f64 = 1.0;
    let mut worst = pairs[0];
    for (&r, &pair) in ratios.iter().zip(&pairs) {
        let need = r.max(1.0 / r);
        if need > c1 {
            c1 = need;
            worst = pair;
        }
    }
    let ratio_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let limit = tail_constant(s, 1.0);
    let limit_sampled = y_max.powf(2.0 * s) * reference_solution(s, 1.0, 0.0, 1.0, y_max)?;
    let limit_bound = 1.0 / c1;
    Ok(BoundsFit {
        s,
        c1,
        ratio_min,
        ratio_max,
        worst_t: worst.0,
        worst_x: worst.1,
        samples: pairs.len(),
        limit,
        limit_sampled,
        limit_bound,
        limit_pass: limit >= limit_bound * (1.0 - LIMIT_REL_TOL),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn closed_form_values() {
        assert!(close(
            fractional_heat_kernel(0.5, 1.0, 0.0).unwrap(),
            FRAC_1_PI,
            1e-15
        ));
        assert!(close(
            fractional_heat_kernel(0.5, 2.0, 0.0).unwrap(),
            0.5 * FRAC_1_PI,
            1e-15
        ));
        assert!(close(
            fractional_heat_kernel(1.0, 1.0, 0.0).unwrap(),
            0.282_094_791_773_878_1,
            1e-15
        ));
    }

    #[test]
    fn fourier_inversion_matches_closed_forms() {
        for &y in &[0.0, 0.1, 0.7, 1.0, 3.0, 12.0, 40.0] {
            let cauchy = heat_kernel_fourier(0.5, 1.0, y).unwrap();
            let exact = FRAC_1_PI / (1.0 + y * y);
            assert!(close(cauchy.value, exact, 1e-10), "y={y}: {cauchy:?} vs {exact}");
        }
        for &y in &[0.0, 0.5, 2.0, 5.0] {
            let gauss = heat_kernel_fourier(1.0, 1.0, y).unwrap();
            let exact = (-y * y / 4.0).exp() / (4.0 * PI).sqrt();
            assert!(close(gauss.value, exact, 1e-10), "y={y}: {gauss:?} vs {exact}");
        }
    }

    #[test]
    fn series_and_inversion_agree_where_both_apply() {
        for &s in &[0.3, 0.75, 0.9] {
            for &y in &[8.0f64, 15.0, 30.0] {
                let Some(series) = profile_tail_series(s, y) else {
                    assert!(s > 0.5 && y < 10.0, "s={s} y={y}: series should converge");
                    continue;
                };
                let fourier = heat_kernel_fourier(s, 1.0, y).unwrap().value;
                assert!(close(series, fourier, 1e-8), "s={s} y={y}: {series} vs {fourier}");
            }
        }
    }

    #[test]
    fn cauchy_series_is_arctan_derivative() {
        let y = 5.0;
        assert!(close(
            profile_tail_series(0.5, y).unwrap(),
            FRAC_1_PI / (1.0 + y * y),
            1e-13
        ));
    }

    #[test]
    fn reference_solution_examples() {
        assert!(close(
            reference_solution(0.5, 1.0, 0.0, 1.0, 1.0).unwrap(),
            0.25,
            1e-15
        ));
        assert!(close(
            reference_solution(0.5, 1.0, 0.0, 1.0, -1.0).unwrap(),
            0.75,
            1e-15
        ));
        for &s in &[0.3, 0.5, 0.75, 1.0] {
            assert!(
                close(reference_solution(s, 2.0, 1.5, 0.7, 1.5).unwrap(), 1.0, 1e-12),
                "s={s}"
            );
            let far = 1e4;
            let lo = reference_solution(s, 1.0, 0.0, 1.0, -far).unwrap();
            let hi = reference_solution(s, 1.0, 0.0, 1.0, far).unwrap();
            assert!(close(lo + hi, 1.0, 1e-12), "s={s}");
            // Tail is algebraic for s < 1, so compare against its leading term.
            let lead = tail_constant(s, 1.0) * far.powf(-2.0 * s);
            assert!(hi <= lead.max(1e-300) * 1.01, "s={s}: {hi} vs {lead}");
        }
    }

    #[test]
    fn general_s_solution_is_kernel_tail() {
        // Oracle: direct quadrature of the kernel tail.
        let s = 0.75;
        let q = Quadrature::with_rel_tol(1e-11);
        for &x in &[0.3, 1.0, 4.0] {
            let inner = q
                .integrate(|y| fractional_heat_kernel(s, 1.0, y).unwrap(), 0.0, x)
                .unwrap()
                .value;
            let u = reference_solution(s, 1.0, 0.0, 1.0, x).unwrap();
            assert!((u - (0.5 - inner)).abs() < 1e-9, "x={x}: {u} vs {}", 0.5 - inner);
        }
    }

    #[test]
    fn laplacian_amplitude_at_half_is_cauchy() {
        assert!(close(
            fractional_laplacian_amplitude(0.5).unwrap(),
            FRAC_1_PI,
            1e-14
        ));
        assert!(fractional_laplacian_amplitude(1.0).is_err());
    }

    #[test]
    fn tail_constant_matches_cauchy() {
        assert!(close(tail_constant(0.5, 1.0), FRAC_1_PI, 1e-15));
        assert_eq!(tail_constant(1.0, 1.0), 0.0);
    }

    #[test]
    fn bounds_fit_cauchy() {
        let xs: Vec<f64> = (0..40)
            .map(|k| 10f64.powf(-1.0 + 4.0 * k as f64 / 39.0))
            .collect();
        let fit = heat_kernel_bounds_fit(0.5, &[1.0, 4.0], &xs).unwrap();
        assert!(close(fit.c1, PI, 1e-12), "{fit:?}");
        assert!(fit.limit_pass);
        assert!(close(fit.limit_sampled, FRAC_1_PI, 1e-6));
    }

    #[test]
    fn bounds_fit_requires_two_decades() {
        assert!(heat_kernel_bounds_fit(0.5, &[1.0], &[1.0, 10.0]).is_err());
        assert!(heat_kernel_bounds_fit(0.5, &[], &[1.0, 1000.0]).is_err());
    }

    #[test]
    fn rejects_out_of_range_order() {
        assert!(fractional_heat_kernel(1.5, 1.0, 0.0).is_err());
        assert!(fractional_heat_kernel(0.5, 0.0, 0.0).is_err());
    }
}
