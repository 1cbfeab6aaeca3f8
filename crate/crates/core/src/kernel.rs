//! Jump-kernel families and the certification of their hypothesis constants.
//!
//! A kernel `J` is admissible when it is symmetric, nonnegative, has a
//! controlled second moment near the origin,
//!
//! ```text
//!     ∫_{|z|≤1} z² J(z) dz ≤ 2·J1,
//! ```
//!
//! and is squeezed between two power laws away from it:
//!
//! ```text
//!     J0 / |z|^{1+2s}  ≥  J(z)  for |z| > 1,
//!     J(z)  ≥  J0⁻¹ / |z|^{1+2s}  for |z| ≥ R0.
//! ```
//!
//! The constants `(J0, J1, R0)` are declared by the user and checked by
//! dense sampling in [`validate_hypothesis`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::Quadrature;

/// Bounded profile used for `|z| ≤ 1` by [`KernelFamily::CompactPlusTail`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearProfile {
    /// `1` on `|z| ≤ 1`.
    Uniform,
    /// `exp(-z²)` on `|z| ≤ 1`.
    Gaussian,
}

impl NearProfile {
    fn eval(self, z: f64) -> f64 {
        match self {
            NearProfile::Uniform => 1.0,
            NearProfile::Gaussian => (-z * z).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// `A |z|^{-1-2s}` on all of ℝ∖{0}.
    PureFractional { amplitude: f64 },
    /// `A |z|^{-1-2s}` for `|z| ≤ cutoff`, zero beyond.
    TruncatedFractional { amplitude: f64, cutoff: f64 },
    /// A bounded profile on `|z| ≤ 1` glued to `A |z|^{-1-2s}` for `|z| > 1`.
    CompactPlusTail {
        profile: NearProfile,
        tail_amplitude: f64,
    },
}

/// A jump kernel together with its declared hypothesis constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub s: f64,
    pub j0: f64,
    pub j1: f64,
    pub r0: f64,
}

/// `|z|^{-1-2s}`. Shared by the kernel evaluation and the hypothesis bounds
/// so that equal amplitudes round identically.
#[inline]
fn power_tail(z: f64, s: f64) -> f64 {
    z.abs().powf(-1.0 - 2.0 * s)
}

/// `∫_lo^hi z^{-1-2s} dz` for `0 < lo ≤ hi ≤ ∞`, without cancellation for
/// neighbouring bounds.
fn power_integral(lo: f64, hi: f64, s: f64) -> f64 {
    let two_s = 2.0 * s;
    if hi.is_infinite() {
        return lo.powf(-two_s) / two_s;
    }
    let log_ratio = ((hi - lo) / lo).ln_1p();
    -lo.powf(-two_s) * (-two_s * log_ratio).exp_m1() / two_s
}

/// `∫_0^r z^{1-2s} dz`, finite only for `s < 1`.
fn power_second_moment(r: f64, s: f64) -> Result<f64> {
    if s >= 1.0 {
        return Err(Error::HypothesisViolation(format!(
            "near-field second moment diverges for a pure power kernel with s = {s} ≥ 1"
        )));
    }
    Ok(r.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s))
}

impl KernelSpec {
    pub fn new(family: KernelFamily, s: f64, j0: f64, j1: f64, r0: f64) -> Result<Self> {
        let spec = Self {
            family,
            s,
            j0,
            j1,
            r0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Pure power kernel `A |z|^{-1-2s}`.
    pub fn pure_fractional(amplitude: f64, s: f64, j0: f64, j1: f64, r0: f64) -> Result<Self> {
        Self::new(KernelFamily::PureFractional { amplitude }, s, j0, j1, r0)
    }

    /// `|z|^{-2}/π`, the `s = 1/2` kernel whose heat kernel is the Cauchy
    /// density, with constants `(J0, J1, R0) = (π, 1, 2)`.
    pub fn cauchy() -> Self {
        Self::pure_fractional(1.0 / std::f64::consts::PI, 0.5, std::f64::consts::PI, 1.0, 2.0)
            .expect("valid constants")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.s > 0.0 && self.s.is_finite()) {
            return bad(format!("s must be positive, got {}", self.s));
        }
        if !(self.j0 > 0.0 && self.j0.is_finite()) {
            return bad(format!("J0 must be positive, got {}", self.j0));
        }
        if !(self.j1 > 0.0 && self.j1.is_finite()) {
            return bad(format!("J1 must be positive, got {}", self.j1));
        }
        if !(self.r0 > 1.0 && self.r0.is_finite()) {
            return bad(format!("R0 must exceed 1, got {}", self.r0));
        }
        let amplitude = self.amplitude();
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return bad(format!("amplitude must be nonnegative, got {amplitude}"));
        }
        if let KernelFamily::TruncatedFractional { cutoff, .. } = self.family {
            if !(cutoff > 0.0) {
                return bad(format!("cutoff must be positive, got {cutoff}"));
            }
        }
        Ok(())
    }

    /// Amplitude of the power-law part.
    pub fn amplitude(&self) -> f64 {
        match self.family {
            KernelFamily::PureFractional { amplitude } => amplitude,
            KernelFamily::TruncatedFractional { amplitude, .. } => amplitude,
            KernelFamily::CompactPlusTail { tail_amplitude, .. } => tail_amplitude,
        }
    }

    /// Short human-readable description, used in report metadata.
    pub fn describe(&self) -> String {
        match self.family {
            KernelFamily::PureFractional { amplitude } => {
                format!("pure_fractional(A={amplitude}, s={})", self.s)
            }
            KernelFamily::TruncatedFractional { amplitude, cutoff } => {
                format!(
                    "truncated_fractional(A={amplitude}, cutoff={cutoff}, s={})",
                    self.s
                )
            }
            KernelFamily::CompactPlusTail {
                profile,
                tail_amplitude,
            } => format!("compact_plus_tail({profile:?}, A={tail_amplitude}, s={})", self.s),
        }
    }

    /// Kernel density at `z ≠ 0`; the value at the origin is never needed.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if z == 0.0 || z.is_nan() {
            return Err(Error::Domain(format!(
                "kernel is singular at z = 0 (got z = {z})"
            )));
        }
        Ok(self.density(z))
    }

    /// Unchecked density; callers guarantee `z ≠ 0`.
    pub(crate) fn density(&self, z: f64) -> f64 {
        let r = z.abs();
        match self.family {
            KernelFamily::PureFractional { amplitude } => amplitude * power_tail(r, self.s),
            KernelFamily::TruncatedFractional { amplitude, cutoff } => {
                if r <= cutoff {
                    amplitude * power_tail(r, self.s)
                } else {
                    0.0
                }
            }
            KernelFamily::CompactPlusTail {
                profile,
                tail_amplitude,
            } => {
                if r <= 1.0 {
                    profile.eval(r)
                } else {
                    tail_amplitude * power_tail(r, self.s)
                }
            }
        }
    }

    /// Whether cell integrals are available in closed form.
    pub fn has_closed_form(&self) -> bool {
        !matches!(self.family, KernelFamily::CompactPlusTail { .. })
    }

    /// `∫_lo^hi J(z) dz` for `0 < lo ≤ hi ≤ ∞`.
    ///
    /// Closed form for the power-law families; adaptive quadrature split at
    /// `|z| = 1` for the glued family.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidArgument(format!(
                "interval_mass needs 0 < lo ≤ hi, got [{lo}, {hi}]"
            )));
        }
        if lo == hi {
            return Ok(0.0);
        }
        let s = self.s;
        match self.family {
            KernelFamily::PureFractional { amplitude } => Ok(amplitude * power_integral(lo, hi, s)),
            KernelFamily::TruncatedFractional { amplitude, cutoff } => {
                if lo >= cutoff {
                    Ok(0.0)
                } else {
                    Ok(amplitude * power_integral(lo, hi.min(cutoff), s))
                }
            }
            KernelFamily::CompactPlusTail { .. } => {
                let q = Quadrature::with_rel_tol(1e-12);
                let f = |z: f64| self.density(z);
                let mut total = 0.0;
                if lo < 1.0 {
                    total += q.integrate(f, lo, hi.min(1.0))?.value;
                }
                if hi > 1.0 {
                    let start = lo.max(1.0);
                    total += if hi.is_infinite() {
                        q.integrate_to_infinity(f, start)?.value
                    } else {
                        q.integrate(f, start, hi)?.value
                    };
                }
                Ok(total)
            }
        }
    }

    /// `∫_{|z|≤r} z² J(z) dz`.
    pub fn second_moment_within(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius must be positive, got {r}"
            )));
        }
        let s = self.s;
        match self.family {
            KernelFamily::PureFractional { amplitude } => Ok(2.0 * amplitude * power_second_moment(r, s)?),
            KernelFamily::TruncatedFractional { amplitude, cutoff } => {
                Ok(2.0 * amplitude * power_second_moment(r.min(cutoff), s)?)
            }
            KernelFamily::CompactPlusTail { .. } => {
                let q = Quadrature::with_rel_tol(1e-12);
                let f = |z: f64| z * z * self.density(z);
                let mut points = vec![0.0];
                if r > 1.0 {
                    points.push(1.0);
                }
                points.push(r);
                let half = q
                    .integrate_panels(f, &points)
                    .map_err(|e| Error::HypothesisViolation(format!("near-field moment diverges: {e}")))?;
                Ok(2.0 * half.value)
            }
        }
    }
}

/// `J(z)`; errors at `z = 0`.
pub fn eval_kernel(spec: &KernelSpec, z: f64) -> Result<f64> {
    spec.eval(z)
}

/// Two-sided tail mass `∫_{|z|≥R} J(z) dz` for `R ≥ 1`.
///
/// Closed form `A / (s R^{2s})` for the pure power family, adaptive
/// quadrature to relative tolerance `1e-10` otherwise.
pub fn tail_mass(spec: &KernelSpec, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail mass is only controlled for R ≥ 1, got {r}"
        )));
    }
    match spec.family {
        KernelFamily::PureFractional { amplitude } => Ok(amplitude / (spec.s * r.powf(2.0 * spec.s))),
        KernelFamily::TruncatedFractional { cutoff, .. } => {
            if r >= cutoff {
                return Ok(0.0);
            }
            let q = Quadrature::with_rel_tol(1e-10);
            Ok(2.0 * q.integrate(|z| spec.density(z), r, cutoff)?.value)
        }
        KernelFamily::CompactPlusTail { .. } => {
            let q = Quadrature::with_rel_tol(1e-10);
            Ok(2.0 * q.integrate_to_infinity(|z| spec.density(z), r)?.value)
        }
    }
}

/// `∫_{|z|≤1} z² J(z) dz`.
pub fn near_second_moment(spec: &KernelSpec) -> Result<f64> {
    spec.second_moment_within(1.0)
}

/// Outcome of sampling the hypothesis inequalities for one kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCertificate {
    pub spec_id: String,
    pub verified: bool,
    /// `min (J0 |z|^{-1-2s} − J(z))` over sampled `|z| > 1`.
    pub upper_margin: f64,
    /// `min (J(z) − J0⁻¹ |z|^{-1-2s})` over sampled `|z| ≥ R0`.
    pub lower_margin: f64,
    /// `∫_{|z|≤1} z² J(z) dz`; infinite when the integral diverges.
    pub near_moment: f64,
    pub sample_count: usize,
}

/// Minimum number of log-uniform samples per decade of `|z|`.
pub const SAMPLES_PER_DECADE: usize = 100;

/// Samples the pointwise bounds on `(1, 100·R0]` (log-uniform, at least
/// [`SAMPLES_PER_DECADE`] points per decade, plus `R0` itself) and computes
/// the near-field moment. A kernel that fails yields `verified = false`.
pub fn validate_hypothesis(spec: &KernelSpec, sample_count: usize) -> Result<HypothesisCertificate> {
    if sample_count < 100 {
        return Err(Error::InvalidArgument(format!(
            "at least 100 samples are required, got {sample_count}"
        )));
    }
    spec.validate()?;
    let z_max = 100.0 * spec.r0;
    let decades = z_max.log10();
    let count = sample_count.max((SAMPLES_PER_DECADE as f64 * decades).ceil() as usize);
    let log_max = z_max.ln();

    let inv_j0 = 1.0 / spec.j0;
    let mut upper_margin = f64::INFINITY;
    let mut lower_margin = f64::INFINITY;
    let mut check = |z: f64| {
        let p = power_tail(z, spec.s);
        for zz in [z, -z] {
            let j = spec.density(zz);
            upper_margin = upper_margin.min(spec.j0 * p - j);
            if z >= spec.r0 {
                lower_margin = lower_margin.min(j - inv_j0 * p);
            }
        }
    };
    for i in 1..=count {
        check((log_max * i as f64 / count as f64).exp());
    }
    check(spec.r0);

    let near_moment = match near_second_moment(spec) {
        Ok(m) => m,
        Err(Error::HypothesisViolation(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let verified = upper_margin >= 0.0 && lower_margin >= 0.0 && near_moment <= 2.0 * spec.j1;
    Ok(HypothesisCertificate {
        spec_id: spec.describe(),
        verified,
        upper_margin,
        lower_margin,
        near_moment,
        sample_count: count + 1,
    })
}

/// A kernel cleared for discretization: either certified by sampling or
/// explicitly force-accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedKernel {
    spec: KernelSpec,
    certificate: Option<HypothesisCertificate>,
}

impl AcceptedKernel {
    /// Certifies `spec` with [`validate_hypothesis`]; refuses kernels that fail.
    pub fn certify(spec: KernelSpec, sample_count: usize) -> Result<Self> {
        let certificate = validate_hypothesis(&spec, sample_count)?;
        if !certificate.verified {
            return Err(Error::NotCertified);
        }
        Ok(Self {
            spec,
            certificate: Some(certificate),
        })
    }

    /// Accepts `spec` without certification.
    pub fn force(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            certificate: None,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn certificate(&self) -> Option<&HypothesisCertificate> {
        self.certificate.as_ref()
    }
}
