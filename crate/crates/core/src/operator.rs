//! Discretization of `D[u](x) = P.V.∫ [u(x+z) − u(x)] J(z) dz` on a uniform grid.
//!
//! The real line is tiled by lattice cells `[(k − ½)h, (k + ½)h]` around the
//! offsets `k·h`:
//!
//! * `k ≠ 0`, target inside the grid: weight `w_k = ∫_cell J`, applied to
//!   `u(x_i + kh) − u(x_i)`;
//! * `k = 0`: the principal-value cell, replaced by the symmetric second
//!   difference `(c₀/2)·(u_{i+1} + u_{i−1} − 2u_i)` with
//!   `c₀ = h⁻² ∫_{|z|≤h/2} z² J(z) dz`;
//! * targets beyond either end of the grid: folded into one exterior
//!   coefficient per side, `∫_{(m+½)h}^∞ J` with `m` the distance to the
//!   edge, applied against the [`BoundaryModel`] extension.
//!
//! Every coefficient is nonnegative, so the explicit Euler update built on
//! top of this operator is monotone whenever `dt·W ≤ 1` (see
//! [`OperatorDiscretization::row_sum_bound`]).

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::{AcceptedKernel, KernelSpec};
use crate::quadrature::Quadrature;

/// Extension of the right end of the field beyond `x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RightBoundary {
    Zero,
    Constant {
        value: f64,
    },
    /// `A·x^{-2s}` with `A ≥ 0` least-squares fitted on the last decade of
    /// the grid (`x ≥ x_max/10`) at every application.
    AlgebraicTail,
}

/// How the field is extended outside `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryModel {
    /// Constant value for `x < x_min`.
    pub left: f64,
    pub right: RightBoundary,
}

impl BoundaryModel {
    /// Constant `a` on the left, zero on the right: a plateau of height `a`
    /// and a lower-bounding right extension for nonnegative data.
    pub fn plateau(a: f64) -> Self {
        Self {
            left: a,
            right: RightBoundary::Zero,
        }
    }

    pub fn zero() -> Self {
        Self::plateau(0.0)
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.left.is_finite() && self.left >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "left extension must be finite and nonnegative, got {}",
                self.left
            )));
        }
        match self.right {
            RightBoundary::Constant { value } if !(value.is_finite() && value >= 0.0) => {
                Err(Error::InvalidArgument(format!(
                    "right extension must be finite and nonnegative, got {value}"
                )))
            }
            RightBoundary::AlgebraicTail if grid.x_max() <= 0.0 => Err(Error::InvalidArgument(
                "algebraic tail extension needs x_max > 0".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Which summation route [`OperatorDiscretization::apply_with`] takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyMethod {
    Direct,
    Fft,
    /// FFT for grids of at least [`FFT_THRESHOLD`] points, direct otherwise.
    #[default]
    Auto,
}

pub const FFT_THRESHOLD: usize = 1024;

struct FftKernel {
    len: usize,
    spectrum: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Boundary-independent part of the discretization.
struct Stencil {
    /// `w_k`, `k = 0..n`, with `w_0 = 0`.
    weights: Vec<f64>,
    /// `c₀`.
    near: f64,
    /// `∫_{(m+½)h}^∞ J`, `m = 0..n`.
    exterior: Vec<f64>,
    /// Coefficient of `−u_i` in row `i`.
    diag: Vec<f64>,
    fft: OnceLock<FftKernel>,
}

/// Precomputed weights, exterior coefficients and boundary model for `D[·]`.
#[derive(Clone)]
pub struct OperatorDiscretization {
    kernel: KernelSpec,
    grid: Grid,
    boundary: BoundaryModel,
    stencil: Arc<Stencil>,
    /// `∫_{x_max+h/2}^∞ y^{-2s} J(y − x_i) dy` for the algebraic tail model.
    tail_profile: Option<Arc<Vec<f64>>>,
}

impl std::fmt::Debug for OperatorDiscretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorDiscretization")
            .field("kernel", &self.kernel)
            .field("grid", &self.grid)
            .field("boundary", &self.boundary)
            .field("near", &self.stencil.near)
            .field("row_sum", &self.row_sum_bound())
            .finish()
    }
}

/// Builds the discretization of `D[·]` for an accepted kernel.
pub fn discretize(
    kernel: &AcceptedKernel,
    grid: Grid,
    boundary: BoundaryModel,
) -> Result<OperatorDiscretization> {
    OperatorDiscretization::new(kernel, grid, boundary)
}

impl OperatorDiscretization {
    pub fn new(kernel: &AcceptedKernel, grid: Grid, boundary: BoundaryModel) -> Result<Self> {
        boundary.validate(&grid)?;
        let spec = *kernel.spec();
        let stencil = Arc::new(build_stencil(&spec, &grid)?);
        let mut op = Self {
            kernel: spec,
            grid,
            boundary,
            stencil,
            tail_profile: None,
        };
        op.tail_profile = op.build_tail_profile()?;
        Ok(op)
    }

    /// Same weights under a different boundary model.
    pub fn with_boundary(&self, boundary: BoundaryModel) -> Result<Self> {
        boundary.validate(&self.grid)?;
        let mut op = Self {
            boundary,
            tail_profile: None,
            ..self.clone()
        };
        op.tail_profile = op.build_tail_profile()?;
        Ok(op)
    }

    fn build_tail_profile(&self) -> Result<Option<Arc<Vec<f64>>>> {
        if self.boundary.right != RightBoundary::AlgebraicTail {
            return Ok(None);
        }
        let spec = self.kernel;
        let start = self.grid.x_max() + 0.5 * self.grid.h();
        let q = Quadrature::with_rel_tol(1e-10);
        let profile = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let xi = self.grid.point(i);
                q.integrate_to_infinity(|y| y.powf(-2.0 * spec.s) * spec.density(y - xi), start)
                    .map(|r| r.value)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(Arc::new(profile)))
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boundary(&self) -> &BoundaryModel {
        &self.boundary
    }

    /// `w_k` for `k = 0..n` (`w_0 = 0`); `w_{−k} = w_k`.
    pub fn weights(&self) -> &[f64] {
        &self.stencil.weights
    }

    /// `c₀ = h⁻² ∫_{|z|≤h/2} z² J(z) dz`.
    pub fn near_coefficient(&self) -> f64 {
        self.stencil.near
    }

    /// Left and right exterior coefficients of row `i`.
    pub fn exterior_coefficients(&self, i: usize) -> (f64, f64) {
        let n = self.grid.len();
        (self.stencil.exterior[i], self.stencil.exterior[n - 1 - i])
    }

    /// Coefficient multiplying `−u_i` in row `i`.
    pub fn diagonal(&self) -> &[f64] {
        &self.stencil.diag
    }

    /// `W = max_i (Σ_{j≠i} w_{|j−i|} + c₀ + exterior_left_i + exterior_right_i)`,
    /// the largest coefficient multiplying `−u_i` in [`apply`](Self::apply).
    pub fn row_sum_bound(&self) -> f64 {
        self.stencil.diag.iter().copied().fold(0.0, f64::max)
    }

    /// Amplitude of the fitted right tail `A x^{-2s}`, for the algebraic model.
    pub fn fitted_tail_amplitude(&self, values: &[f64]) -> Option<f64> {
        if self.boundary.right != RightBoundary::AlgebraicTail {
            return None;
        }
        let two_s = 2.0 * self.kernel.s;
        let from = self.grid.x_max() / 10.0;
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &u) in values.iter().enumerate() {
            let x = self.grid.point(i);
            if x >= from && x > 0.0 {
                let phi = x.powf(-two_s);
                num += u * phi;
                den += phi * phi;
            }
        }
        Some(if den > 0.0 { (num / den).max(0.0) } else { 0.0 })
    }

    fn check_grid(&self, field: &Field) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch(format!(
                "field lives on {:?}, operator on {:?}",
                field.grid(),
                self.grid
            )));
        }
        Ok(())
    }

    /// `D[u]` at every grid point by direct summation.
    pub fn apply(&self, field: &Field) -> Result<Field> {
        self.apply_with(field, ApplyMethod::Direct)
    }

    /// `D[u]` with the convolution evaluated by zero-padded FFT.
    pub fn apply_fft(&self, field: &Field) -> Result<Field> {
        self.apply_with(field, ApplyMethod::Fft)
    }

    pub fn apply_with(&self, field: &Field, method: ApplyMethod) -> Result<Field> {
        self.check_grid(field)?;
        let values = self.apply_values(field.values(), method);
        Ok(field.with_values(field.t(), values))
    }

    pub(crate) fn apply_values(&self, u: &[f64], method: ApplyMethod) -> Vec<f64> {
        let n = u.len();
        let use_fft = match method {
            ApplyMethod::Direct => false,
            ApplyMethod::Fft => true,
            ApplyMethod::Auto => n >= FFT_THRESHOLD,
        };
        let mut out = if use_fft {
            self.convolve_fft(u)
        } else {
            self.convolve_direct(u)
        };
        self.add_local_terms(u, &mut out);
        out
    }

    /// `Σ_{j≠i} w_{|j−i|} u_j`.
    fn convolve_direct(&self, u: &[f64]) -> Vec<f64> {
        let w = &self.stencil.weights;
        let n = u.len();
        let row = |i: usize| -> f64 {
            let left: f64 = u[..i].iter().rev().zip(&w[1..=i]).map(|(a, b)| a * b).sum();
            let right: f64 = u[i + 1..].iter().zip(&w[1..n - i]).map(|(a, b)| a * b).sum();
            left + right
        };
        if n >= 256 {
            (0..n).into_par_iter().map(row).collect()
        } else {
            (0..n).map(row).collect()
        }
    }

    fn fft_kernel(&self) -> &FftKernel {
        self.stencil.fft.get_or_init(|| {
            let n = self.grid.len();
            let len = (2 * n - 1).next_power_of_two();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(len);
            let inverse = planner.plan_fft_inverse(len);
            let w = &self.stencil.weights;
            let mut spectrum = vec![Complex::new(0.0, 0.0); len];
            for k in 1..n {
                spectrum[k] = Complex::new(w[k], 0.0);
                spectrum[len - k] = Complex::new(w[k], 0.0);
            }
            forward.process(&mut spectrum);
            let scale = 1.0 / len as f64;
            for c in &mut spectrum {
                *c *= scale;
            }
            FftKernel {
                len,
                spectrum,
                forward,
                inverse,
            }
        })
    }

    fn convolve_fft(&self, u: &[f64]) -> Vec<f64> {
        let fk = self.fft_kernel();
        let mut buf = vec![Complex::new(0.0, 0.0); fk.len];
        for (b, &x) in buf.iter_mut().zip(u) {
            b.re = x;
        }
        fk.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&fk.spectrum) {
            *b *= k;
        }
        fk.inverse.process(&mut buf);
        buf[..u.len()].iter().map(|c| c.re).collect()
    }

    /// Adds the near-cell second difference, the exterior contributions and
    /// the diagonal to a precomputed convolution.
    fn add_local_terms(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        let st = &*self.stencil;
        let half_near = 0.5 * st.near;
        let left_ext = self.boundary.left;
        let h = self.grid.h();
        let (right_ext_point, right_mass): (f64, Box<dyn Fn(usize) -> f64 + '_>) = match self.boundary.right {
            RightBoundary::Zero => (0.0, Box::new(|_| 0.0)),
            RightBoundary::Constant { value } => (value, Box::new(move |i| st.exterior[n - 1 - i] * value)),
            RightBoundary::AlgebraicTail => {
                let amp = self.fitted_tail_amplitude(u).unwrap_or(0.0);
                let profile = self
                    .tail_profile
                    .as_ref()
                    .expect("tail profile built with the algebraic model");
                let x_next = self.grid.x_max() + h;
                (
                    amp * x_next.powf(-2.0 * self.kernel.s),
                    Box::new(move |i| amp * profile[i]),
                )
            }
        };
        for i in 0..n {
            let below = if i == 0 { left_ext } else { u[i - 1] };
            let above = if i + 1 == n { right_ext_point } else { u[i + 1] };
            out[i] +=
                half_near * (below + above) + st.exterior[i] * left_ext + right_mass(i) - st.diag[i] * u[i];
        }
    }
}

fn build_stencil(spec: &KernelSpec, grid: &Grid) -> Result<Stencil> {
    let n = grid.len();
    let h = grid.h();
    let cell = |k: usize| spec.interval_mass((k as f64 - 0.5) * h, (k as f64 + 0.5) * h);

    let mut weights = vec![0.0; n];
    if spec.has_closed_form() {
        for (k, w) in weights.iter_mut().enumerate().skip(1) {
            *w = cell(k)?;
        }
    } else {
        let computed = (1..n).into_par_iter().map(cell).collect::<Result<Vec<_>>>()?;
        weights[1..].copy_from_slice(&computed);
    }

    let near = spec.second_moment_within(0.5 * h)? / (h * h);

    let mut exterior = vec![0.0; n];
    if spec.has_closed_form() {
        for (m, e) in exterior.iter_mut().enumerate() {
            *e = spec.interval_mass((m as f64 + 0.5) * h, f64::INFINITY)?;
        }
    } else {
        exterior[n - 1] = spec.interval_mass((n as f64 - 0.5) * h, f64::INFINITY)?;
        for m in (0..n - 1).rev() {
            exterior[m] = exterior[m + 1] + weights[m + 1];
        }
    }

    let mut prefix = vec![0.0; n];
    for k in 1..n {
        prefix[k] = prefix[k - 1] + weights[k];
    }
    let diag = (0..n)
        .map(|i| prefix[i] + prefix[n - 1 - i] + near + exterior[i] + exterior[n - 1 - i])
        .collect();

    Ok(Stencil {
        weights,
        near,
        exterior,
        diag,
        fft: OnceLock::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelFamily, NearProfile};

    fn forced(spec: KernelSpec) -> AcceptedKernel {
        AcceptedKernel::force(spec).unwrap()
    }

    fn pure(a: f64, s: f64) -> AcceptedKernel {
        forced(KernelSpec::pure_fractional(a, s, 1.0, 1.0, 2.0).unwrap())
    }

    #[test]
    fn cell_weight_around_unit_offset() {
        let grid = Grid::new(-5.0, 5.0, 101).unwrap();
        let op = discretize(&pure(1.0, 0.5), grid, BoundaryModel::zero()).unwrap();
        let expected = 1.0 / 0.95 - 1.0 / 1.05;
        let w10 = op.weights()[10];
        assert!((w10 - expected).abs() < 1e-14, "{w10} vs {expected}");
        assert!((w10 - 0.100_250_626_566_416).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_kernel_has_no_weights() {
        let grid = Grid::new(-1.0, 1.0, 33).unwrap();
        let op = discretize(&pure(0.0, 0.5), grid, BoundaryModel::zero()).unwrap();
        assert!(op.weights().iter().all(|&w| w == 0.0));
        assert_eq!(op.row_sum_bound(), 0.0);
    }

    #[test]
    fn row_sum_equals_resolved_mass_plus_near_coefficient() {
        let grid = Grid::new(-50.0, 50.0, 1001).unwrap();
        let h = grid.h();
        let op = discretize(&pure(1.0, 0.5), grid, BoundaryModel::zero()).unwrap();
        // Every row sees the full lattice: 2∫_{h/2}^∞ z^{-2} dz = 4/h.
        let analytic = 4.0 / h + op.near_coefficient();
        assert!((op.row_sum_bound() - analytic).abs() < 1e-10 * analytic);
        let mid = 500;
        let (l, r) = op.exterior_coefficients(mid);
        let direct: f64 = 2.0 * op.weights()[1..=500].iter().sum::<f64>() + l + r + op.near_coefficient();
        assert_eq!(op.diagonal()[mid], direct);
    }

    #[test]
    fn row_sum_grows_under_refinement() {
        let mut last = 0.0;
        for n in [101, 201, 401] {
            let grid = Grid::new(-10.0, 10.0, n).unwrap();
            let op = discretize(&pure(1.0, 0.5), grid, BoundaryModel::zero()).unwrap();
            assert!(op.row_sum_bound() >= last);
            last = op.row_sum_bound();
        }
    }

    #[test]
    fn constant_field_is_stationary() {
        let grid = Grid::new(-20.0, 20.0, 161).unwrap();
        let bc = BoundaryModel {
            left: 0.7,
            right: RightBoundary::Constant { value: 0.7 },
        };
        let op = discretize(&pure(1.0, 0.5), grid, bc).unwrap();
        let u = Field::constant(grid, 0.0, 0.7).unwrap();
        for out in [op.apply(&u).unwrap(), op.apply_fft(&u).unwrap()] {
            assert!(out.values().iter().all(|v| v.abs() < 1e-12), "{:?}", out.inf());
        }
    }

    #[test]
    fn odd_data_vanishes_at_center() {
        let grid = Grid::new(-10.0, 10.0, 201).unwrap();
        let op = discretize(&pure(1.0, 0.75), grid, BoundaryModel::zero()).unwrap();
        let u = Field::from_fn(grid, 0.0, |x| x).unwrap();
        // Zero extension is not odd, but the two exterior terms cancel at the
        // center since u vanishes there.
        let out = op.apply(&u).unwrap();
        assert!(out.values()[100].abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let grid = Grid::new(-1.0, 1.0, 33).unwrap();
        let other = Grid::new(-1.0, 1.0, 35).unwrap();
        let op = discretize(&pure(1.0, 0.5), grid, BoundaryModel::zero()).unwrap();
        let u = Field::constant(other, 0.0, 1.0).unwrap();
        assert!(matches!(op.apply(&u), Err(Error::GridMismatch(_))));
        assert!(matches!(op.apply_fft(&u), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn delta_field_reads_off_the_stencil() {
        let grid = Grid::new(-10.0, 10.0, 257).unwrap();
        let op = discretize(&pure(1.0, 0.5), grid, BoundaryModel::zero()).unwrap();
        let j = 100;
        let mut v = vec![0.0; grid.len()];
        v[j] = 1.0;
        let u = Field::new(grid, 0.0, v).unwrap();
        let out = op.apply_fft(&u).unwrap();
        let w = op.weights();
        let c = 0.5 * op.near_coefficient();
        for (i, &o) in out.values().iter().enumerate() {
            let expected = if i == j {
                -op.diagonal()[j]
            } else {
                let k = i.abs_diff(j);
                w[k] + if k == 1 { c } else { 0.0 }
            };
            assert!((o - expected).abs() < 1e-12 * op.row_sum_bound(), "i={i}");
        }
    }

    #[test]
    fn compact_kernel_weights_match_quadrature_of_density() {
        let spec = KernelSpec::new(
            KernelFamily::CompactPlusTail {
                profile: NearProfile::Gaussian,
                tail_amplitude: 1.0,
            },
            1.0,
            1.0,
            1.0,
            2.0,
        )
        .unwrap();
        let grid = Grid::new(-4.0, 4.0, 81).unwrap();
        let op = discretize(&forced(spec), grid, BoundaryModel::zero()).unwrap();
        // Cell k = 10 straddles |z| = 1: ∫_{0.95}^{1} e^{-z²} + ∫_1^{1.05} z^{-3}.
        let n = 20000;
        let dz = 0.05 / n as f64;
        let gauss: f64 = (0..n)
            .map(|i| {
                let z = 0.95 + (i as f64 + 0.5) * dz;
                (-z * z).exp() * dz
            })
            .sum();
        let tail = 0.5 * (1.0 - 1.05f64.powi(-2));
        assert!((op.weights()[10] - (gauss + tail)).abs() < 1e-10);
        // Gaussian profile is bounded, so the near coefficient is finite for s = 1.
        assert!(op.near_coefficient().is_finite() && op.near_coefficient() > 0.0);
    }

    #[test]
    fn divergent_near_field_refuses_discretization() {
        let spec = KernelSpec::pure_fractional(1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        let grid = Grid::new(-1.0, 1.0, 33).unwrap();
        assert!(matches!(
            discretize(&forced(spec), grid, BoundaryModel::zero()),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn algebraic_tail_fit_recovers_power_law() {
        let spec = KernelSpec::cauchy();
        let grid = Grid::new(-10.0, 200.0, 211).unwrap();
        let bc = BoundaryModel {
            left: 1.0,
            right: RightBoundary::AlgebraicTail,
        };
        let op = discretize(&forced(spec), grid, bc).unwrap();
        let u = Field::from_fn(grid, 0.0, |x| if x > 0.0 { 3.0 / x } else { 1.0 }).unwrap();
        let amp = op.fitted_tail_amplitude(u.values()).unwrap();
        assert!((amp - 3.0).abs() < 1e-12);
        // Tail extension adds mass compared with the zero extension.
        let zero = op.with_boundary(BoundaryModel::plateau(1.0)).unwrap();
        let a = op.apply(&u).unwrap();
        let z = zero.apply(&u).unwrap();
        assert!(a.values().iter().zip(z.values()).all(|(x, y)| x >= y));
        assert!(a.values()[210] > z.values()[210]);
    }

    #[test]
    fn algebraic_tail_needs_positive_right_end() {
        let grid = Grid::new(-10.0, -1.0, 33).unwrap();
        let bc = BoundaryModel {
            left: 1.0,
            right: RightBoundary::AlgebraicTail,
        };
        assert!(discretize(&pure(1.0, 0.5), grid, bc).is_err());
    }
}
