//! Adaptive Gauss-Kronrod quadrature and sequence acceleration.
//!
//! Everything in the crate that needs a continuum integral (kernel cell
//! weights for non-power-law kernels, tail masses, the subsolution residual,
//! Fourier inversion of the fractional heat kernel) goes through
//! [`Quadrature`]. The rule is the 21-point Kronrod extension of the 10-point
//! Gauss rule with the usual QUADPACK error rescaling; intervals are bisected
//! in order of decreasing error estimate until the global tolerance is met.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_977_783_556,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

impl Integral {
    const ZERO: Integral = Integral {
        value: 0.0,
        error: 0.0,
        intervals: 0,
    };

    fn combine(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            error: self.error + other.error,
            intervals: self.intervals + other.intervals,
        }
    }
}

/// Tolerances and limits for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1e-10,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// One application of the 21-point Gauss-Kronrod rule on `[lo, hi]`.
pub fn gauss_kronrod_21<F>(f: &F, lo: f64, hi: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);

    let mut res_kronrod = f_center * WGK[10];
    let mut res_gauss = 0.0;
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let abs_half = half.abs();
    let value = res_kronrod * half;
    let err = rescale_error(
        (res_kronrod - res_gauss) * half,
        res_abs * abs_half,
        res_asc * abs_half,
    );
    (value, err)
}

impl Quadrature {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }

    /// Integrates `f` over the finite interval `[lo, hi]`.
    pub fn integrate<F>(&self, f: F, lo: f64, hi: f64) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "finite bounds required, got [{lo}, {hi}]"
            )));
        }
        if lo == hi {
            return Ok(Integral::ZERO);
        }
        if lo > hi {
            let r = self.integrate(f, hi, lo)?;
            return Ok(Integral { value: -r.value, ..r });
        }

        let (value, error) = gauss_kronrod_21(&f, lo, hi);
        if !value.is_finite() {
            return Err(Error::Quadrature {
                lo,
                hi,
                value,
                error,
                intervals: 1,
            });
        }
        let mut heap = BinaryHeap::new();
        heap.push(Segment { lo, hi, value, error });
        let mut total = value;
        let mut total_err = error;
        let mut intervals = 1usize;
        // Segments too narrow to bisect further; their error is final.
        let mut frozen_err = 0.0;
        let mut frozen_val = 0.0;

        while total_err > self.tolerance(total) {
            if intervals >= self.max_intervals {
                return Err(Error::Quadrature {
                    lo,
                    hi,
                    value: total,
                    error: total_err,
                    intervals,
                });
            }
            let Some(seg) = heap.pop() else { break };
            let mid = 0.5 * (seg.lo + seg.hi);
            if !(seg.lo < mid && mid < seg.hi) {
                frozen_err += seg.error;
                frozen_val += seg.value;
                if heap.is_empty() {
                    break;
                }
                continue;
            }
            let (v1, e1) = gauss_kronrod_21(&f, seg.lo, mid);
            let (v2, e2) = gauss_kronrod_21(&f, mid, seg.hi);
            if !(v1.is_finite() && v2.is_finite()) {
                return Err(Error::Quadrature {
                    lo: seg.lo,
                    hi: seg.hi,
                    value: v1 + v2,
                    error: f64::INFINITY,
                    intervals,
                });
            }
            intervals += 1;
            heap.push(Segment {
                lo: seg.lo,
                hi: mid,
                value: v1,
                error: e1,
            });
            heap.push(Segment {
                lo: mid,
                hi: seg.hi,
                value: v2,
                error: e2,
            });
            // Re-summing avoids drift from incremental updates.
            total = frozen_val + heap.iter().map(|s| s.value).sum::<f64>();
            total_err = frozen_err + heap.iter().map(|s| s.error).sum::<f64>();
        }

        if total_err > self.tolerance(total) && frozen_err > self.tolerance(total) {
            return Err(Error::Quadrature {
                lo,
                hi,
                value: total,
                error: total_err,
                intervals,
            });
        }
        Ok(Integral {
            value: total,
            error: total_err,
            intervals,
        })
    }

    /// Integrates over consecutive panels `[p0, p1], [p1, p2], ...`; the
    /// points mark kinks or singularities the rule should not straddle.
    pub fn integrate_panels<F>(&self, f: F, points: &[f64]) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        let mut acc = Integral::ZERO;
        for pair in points.windows(2) {
            acc = acc.combine(self.integrate(&f, pair[0], pair[1])?);
        }
        Ok(acc)
    }

    /// Integrates `f` over `[lo, +inf)` through `z = lo + L (1 - u) / u`
    /// with `L = max(|lo|, 1)`, which keeps algebraic tails resolvable.
    pub fn integrate_to_infinity<F>(&self, f: F, lo: f64) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        let scale = lo.abs().max(1.0);
        let mapped = |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let z = lo + scale * (1.0 - u) / u;
            f(z) * scale / (u * u)
        };
        self.integrate(mapped, 0.0, 1.0)
    }
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums.
///
/// Returns the accelerated limit and an error estimate taken from the
/// difference between the two most recent even-column diagonal entries.
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let m = partial_sums.len();
    match m {
        0 => return (0.0, f64::INFINITY),
        1 => return (partial_sums[0], f64::INFINITY),
        2 => return (partial_sums[1], (partial_sums[1] - partial_sums[0]).abs()),
        _ => {}
    }

    // columns[k][n] = eps_k^{(n)}, with eps_{-1} = 0 implicit.
    let mut prev: Vec<f64> = vec![0.0; m + 1];
    let mut curr: Vec<f64> = partial_sums.to_vec();
    let mut estimates = vec![partial_sums[m - 1]];
    let mut k = 0usize;
    while curr.len() > 1 {
        let mut next = Vec::with_capacity(curr.len() - 1);
        for n in 0..curr.len() - 1 {
            let diff = curr[n + 1] - curr[n];
            if diff == 0.0 {
                // Sequence has converged exactly at this level.
                return (curr[n + 1], 0.0);
            }
            next.push(prev[n + 1] + 1.0 / diff);
        }
        k += 1;
        if k.is_multiple_of(2) {
            if let Some(&last) = next.last() {
                if last.is_finite() {
                    estimates.push(last);
                }
            }
        }
        prev = curr;
        curr = next;
    }
    let best = *estimates.last().unwrap_or(&partial_sums[m - 1]);
    let err = if estimates.len() >= 2 {
        (estimates[estimates.len() - 1] - estimates[estimates.len() - 2]).abs()
    } else {
        (partial_sums[m - 1] - partial_sums[m - 2]).abs()
    };
    (best, err)
}
