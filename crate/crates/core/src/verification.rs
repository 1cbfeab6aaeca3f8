//! Pass/fail checks over solver trajectories: the half-line lower bound
//! `u > a/2` left of the plateau edge, the mirror identity for the
//! symmetrized step, algebraic flattening `x^{2s}u(t, x)/t ≥ κa`, and
//! log-log tail fits.

use std::f64::consts::FRAC_1_PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::integrate::{evolve_with, EvolveOptions, Trajectory};
use crate::kernel::{AcceptedKernel, KernelSpec};
use crate::operator::{BoundaryModel, OperatorDiscretization};
use crate::quadrature::Quadrature;
use crate::report::VerificationReport;
use crate::subsolution::{kappa, scaling_constants};

/// Default half-line tolerance, as a fraction of `a`.
pub const HALFLINE_TOL: f64 = 0.02;
/// Default relative slack of the flattening check.
pub const FLATTENING_TOL_REL: f64 = 0.1;
/// Default mollifier radius.
pub const MOLLIFIER_RADIUS: f64 = 0.5;

/// Initial data bounded below by a plateau `a·1_{(−∞, b]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDatum {
    Step { a: f64, b: f64 },
    MollifiedStep { a: f64, b: f64, epsilon: f64 },
    Custom { a: f64, b: f64, values: Vec<f64> },
}

impl InitialDatum {
    pub fn step(a: f64, b: f64) -> Result<Self> {
        let d = Self::Step { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn mollified_step(a: f64, b: f64, epsilon: f64) -> Result<Self> {
        let d = Self::MollifiedStep { a, b, epsilon };
        d.validate()?;
        Ok(d)
    }

    /// Grid values that must dominate `a` at every grid point `x ≤ b`.
    pub fn custom(grid: &Grid, a: f64, b: f64, values: Vec<f64>) -> Result<Self> {
        let d = Self::Custom { a, b, values };
        d.validate()?;
        d.check_plateau(grid)?;
        Ok(d)
    }

    pub fn a(&self) -> f64 {
        match *self {
            Self::Step { a, .. } | Self::MollifiedStep { a, .. } | Self::Custom { a, .. } => a,
        }
    }

    pub fn b(&self) -> f64 {
        match *self {
            Self::Step { b, .. } | Self::MollifiedStep { b, .. } | Self::Custom { b, .. } => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.a(), self.b());
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "plateau height must be positive, got {a}"
            )));
        }
        if !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "plateau edge must be finite, got {b}"
            )));
        }
        match self {
            Self::MollifiedStep { epsilon, .. } if !(*epsilon > 0.0 && epsilon.is_finite()) => Err(
                Error::InvalidArgument(format!("mollifier radius must be positive, got {epsilon}")),
            ),
            Self::Custom { values, .. } if values.iter().any(|v| !v.is_finite()) => {
                Err(Error::InvalidArgument("custom datum must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    fn check_plateau(&self, grid: &Grid) -> Result<()> {
        let Self::Custom { a, b, values } = self else {
            return Ok(());
        };
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = (0..grid.len()).find(|&i| grid.point(i) <= *b && values[i] < *a) {
            return Err(Error::InvalidArgument(format!(
                "custom datum {} at x = {} is below the plateau height {a}",
                values[i],
                grid.point(i)
            )));
        }
        Ok(())
    }

    /// Samples the datum on `grid` at `t = 0`.
    ///
    /// The step is sampled by cell averages, so a node exactly at `b` gets
    /// `a/2`; the mollified step is sampled pointwise.
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        self.validate()?;
        match self {
            Self::Step { a, b } => {
                let h = grid.h();
                Field::from_fn(*grid, 0.0, |x| a * ((b - x) / h + 0.5).clamp(0.0, 1.0))
            }
            Self::MollifiedStep { a, b, epsilon } => {
                Field::from_fn(*grid, 0.0, |x| a * mollified_step_unit((x - b) / epsilon))
            }
            Self::Custom { values, .. } => {
                self.check_plateau(grid)?;
                Field::new(*grid, 0.0, values.clone())
            }
        }
    }
}

/// Unnormalized bump `exp(−1/(1 − u²))` on `|u| < 1`.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

fn bump_rule() -> Quadrature {
    Quadrature {
        abs_tol: 1e-17,
        rel_tol: 1e-13,
        max_intervals: 200,
    }
}

fn bump_half_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        bump_rule()
            .integrate(bump, 0.0, 1.0)
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    })
}

/// `∫_0^{|u|} ρ` for the unit-mass bump `ρ` of radius 1.
fn bump_partial_mass(u: f64) -> f64 {
    let u = u.abs().min(1.0);
    if u == 1.0 {
        return 0.5;
    }
    let partial = bump_rule()
        .integrate(bump, 0.0, u)
        .map(|r| r.value)
        .unwrap_or(f64::NAN);
    0.5 * partial / bump_half_mass()
}

/// `(ρ ⋆ 1_{(−∞, 0]})(u)` for the unit-radius bump, written as `1/2 ∓ I(|u|)`
/// so that `f(u) + f(−u) = 1` holds to rounding.
pub fn mollified_step_unit(u: f64) -> f64 {
    if u <= -1.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else if u >= 0.0 {
        0.5 - bump_partial_mass(u)
    } else {
        0.5 + bump_partial_mass(u)
    }
}

/// Checks `u(t, x) ≥ a/2 − tol` at every snapshot and grid point `x < b`.
pub fn halfline_bound_check(traj: &Trajectory, a: f64, b: f64, tol: f64) -> Result<VerificationReport> {
    let grid = traj.grid();
    let left: Vec<usize> = (0..grid.len()).take_while(|&i| grid.point(i) < b).collect();
    if left.is_empty() {
        return Err(Error::InvalidArgument(format!("no grid points left of b = {b}")));
    }
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    for state in traj.states() {
        for &i in &left {
            let u = state.values()[i];
            if u < worst.0 {
                worst = (u, state.t(), grid.point(i));
            }
        }
    }
    Ok(
        VerificationReport::at_least("halfline_bound", worst.0, 0.5 * a, tol)
            .at(worst.1, worst.2)
            .with("a", a)
            .with("b", b)
            .with("snapshots", traj.len())
            .with("n", grid.len())
            .with("h", grid.h()),
    )
}

fn mirror_pairs(grid: &Grid, b: f64) -> Result<()> {
    let centre = grid.midpoint();
    if (centre - b).abs() > 1e-9 * grid.h() {
        return Err(Error::InvalidArgument(format!(
            "grid [{}, {}] is not symmetric about b = {b}",
            grid.x_min(),
            grid.x_max()
        )));
    }
    Ok(())
}

/// `max |v(t, b+x) + v(t, b−x) − a|` over the snapshots of `traj`.
pub fn mirror_identity_report(traj: &Trajectory, a: f64, b: f64, tol: f64) -> Result<VerificationReport> {
    let grid = traj.grid();
    mirror_pairs(grid, b)?;
    let n = grid.len();
    let mut worst = (0.0, 0.0, 0.0);
    for state in traj.states() {
        let v = state.values();
        for i in 0..n / 2 + 1 {
            let dev = (v[i] + v[n - 1 - i] - a).abs();
            if dev > worst.0 {
                worst = (dev, state.t(), grid.point(n - 1 - i) - b);
            }
        }
    }
    Ok(VerificationReport::at_most("mirror_identity", worst.0, 0.0, tol)
        .at(worst.1, worst.2)
        .with("a", a)
        .with("b", b)
        .with("snapshots", traj.len())
        .with("n", n)
        .with("h", grid.h()))
}

/// Evolves the mollified step `a·ρ_ε ⋆ 1_{(−∞, b]}` on a grid symmetric
/// about `b`, extended by `a` on the left and `0` on the right, and checks
/// the mirror identity at `t_final/4`, `t_final/2` and `t_final`.
#[allow(clippy::too_many_arguments)]
pub fn mirror_identity_check(
    kernel: &AcceptedKernel,
    grid: Grid,
    a: f64,
    b: f64,
    epsilon: f64,
    t_final: f64,
    tol: f64,
    options: &EvolveOptions,
) -> Result<VerificationReport> {
    mirror_pairs(&grid, b)?;
    let datum = InitialDatum::mollified_step(a, b, epsilon)?;
    let op = OperatorDiscretization::new(kernel, grid, BoundaryModel::plateau(a))?;
    let u0 = datum.sample(&grid)?;
    let snapshots = [0.25 * t_final, 0.5 * t_final];
    let traj = evolve_with(&op, &u0, t_final, &snapshots, options)?;
    Ok(mirror_identity_report(&traj, a, b, tol)?
        .with("epsilon", epsilon)
        .with("kernel", kernel.spec().describe()))
}

/// Default flattening window `[max(R0 + R_C + b, 50·t^{1/(2s)}), 0.8·x_max]`,
/// with `R_C` taken for `C = κt`.
pub fn default_flattening_window(spec: &KernelSpec, grid: &Grid, t: f64, b: f64) -> Result<(f64, f64)> {
    let (_, r_c) = scaling_constants(spec, kappa(spec) * t)?;
    let lo = (spec.r0 + r_c + b).max(50.0 * t.powf(0.5 / spec.s));
    Ok((lo, 0.8 * grid.x_max()))
}

/// Measures `min_{x ∈ window} x^{2s}·u(t, x)/t` against `κ·a`.
pub fn flattening_ratio(
    traj: &Trajectory,
    spec: &KernelSpec,
    t: f64,
    window: Option<(f64, f64)>,
    a: f64,
    b: f64,
    tol_rel: f64,
) -> Result<VerificationReport> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "flattening needs a positive snapshot time, got {t}"
        )));
    }
    let state = traj
        .at(t)
        .ok_or_else(|| Error::InvalidArgument(format!("no snapshot at t = {t}")))?;
    let grid = traj.grid();
    let (lo, hi) = match window {
        Some(w) => w,
        None => default_flattening_window(spec, grid, t, b)?,
    };
    let c = kappa(spec) * t;
    let (_, r_c) = scaling_constants(spec, c)?;
    let start = spec.r0 + r_c + b;
    if lo < start {
        return Err(Error::InvalidArgument(format!(
            "window starts at {lo}, before R0 + R_C + b = {start}"
        )));
    }
    if hi > 0.8 * grid.x_max() {
        return Err(Error::InvalidArgument(format!(
            "window ends at {hi}, beyond 0.8·x_max = {}",
            0.8 * grid.x_max()
        )));
    }
    let two_s = 2.0 * spec.s;
    let mut worst = (f64::INFINITY, f64::NAN);
    let mut count = 0usize;
    for (x, u) in state.iter().filter(|&(x, _)| x >= lo && x <= hi) {
        count += 1;
        let r = x.powf(two_s) * u / t;
        if r < worst.0 {
            worst = (r, x);
        }
    }
    if count == 0 {
        return Err(Error::InvalidArgument(format!(
            "window [{lo}, {hi}] holds no grid points"
        )));
    }
    let bound = kappa(spec) * a;
    Ok(
        VerificationReport::at_least_relative("flattening_ratio", worst.0, bound, tol_rel)
            .at(t, worst.1)
            .with("kappa", kappa(spec))
            .with("a", a)
            .with("x_lo", lo)
            .with("x_hi", hi)
            .with("R_C", r_c)
            .with("points", count)
            .with("n", grid.len())
            .with("h", grid.h())
            .with("kernel", spec.describe()),
    )
}

/// Least-squares line through `(ln x, ln u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    /// `exp(intercept)`, so that `u ≈ amplitude·x^slope`.
    pub amplitude: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `u ≈ A·x^slope` on the grid points of `field` inside `window`.
pub fn tail_exponent_fit(field: &Field, window: (f64, f64)) -> Result<TailFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi >= 10.0 * lo) {
        return Err(Error::InvalidArgument(format!(
            "tail window [{lo}, {hi}] must be positive and span a decade"
        )));
    }
    let pts: Vec<(f64, f64)> = field.iter().filter(|&(x, _)| x >= lo && x <= hi).collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "window [{lo}, {hi}] holds fewer than two points"
        )));
    }
    if let Some(&(x, u)) = pts.iter().find(|&&(_, u)| !(u > 0.0)) {
        return Err(Error::Domain(format!(
            "nonpositive value {u} at x = {x}; no power law to fit"
        )));
    }
    let m = pts.len() as f64;
    let (lx, lu): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(x, u)| (x.ln(), u.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / m;
    let mu = lu.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&lu).map(|(x, u)| (x - mx) * (u - mu)).sum();
    let syy: f64 = lu.iter().map(|u| (u - mu).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = mu - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(TailFit {
        slope,
        amplitude: intercept.exp(),
        r_squared,
        points: pts.len(),
    })
}

/// Largest upward step `max (u_{i+1} − u_i)` over all snapshots; data that
/// start nonincreasing should keep this at or below `tol`.
pub fn monotonicity_check(traj: &Trajectory, tol: f64) -> VerificationReport {
    let grid = traj.grid();
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
    for state in traj.states() {
        for (i, w) in state.values().windows(2).enumerate() {
            let rise = w[1] - w[0];
            if rise > worst.0 {
                worst = (rise, state.t(), grid.point(i));
            }
        }
    }
    VerificationReport::at_most("monotone_profile", worst.0, 0.0, tol)
        .at(worst.1, worst.2)
        .with("snapshots", traj.len())
        .with("n", grid.len())
}

/// `a·(1/2 − arctan((x − b)/t)/π)`, the step solution for the unit Cauchy kernel.
pub fn cauchy_step_solution(a: f64, b: f64, t: f64, x: f64) -> f64 {
    a * (0.5 - ((x - b) / t).atan() * FRAC_1_PI)
}
