//! Monotone explicit Euler integration of `∂ₜu = D[u]`.
//!
//! With `dt·W ≤ 1` the update `u + dt·D[u]` writes every new value as a
//! combination with nonnegative coefficients of old values and boundary
//! data, so ordering, positivity and monotone profiles are preserved exactly
//! in exact arithmetic. The comparison checks in this crate rely on that.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::operator::{ApplyMethod, OperatorDiscretization};
use crate::report::VerificationReport;

/// Relative slack on `dt·W ≤ 1` absorbing the rounding of `dt = 1/W`.
const STABILITY_SLACK: f64 = 1e-12;

/// `safety / W` with `W` the operator's row-sum bound.
pub fn stable_dt(op: &OperatorDiscretization, safety: f64) -> Result<f64> {
    dt_for_row_sum(op.row_sum_bound(), safety)
}

/// `safety / row_sum`.
pub fn dt_for_row_sum(row_sum: f64, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "safety factor must lie in (0, 1], got {safety}"
        )));
    }
    if !(row_sum > 0.0) {
        return Err(Error::Degenerate(
            "row-sum bound is zero; the kernel carries no mass".into(),
        ));
    }
    Ok(safety / row_sum)
}

/// One Euler step `u + dt·D[u]`.
pub fn step(op: &OperatorDiscretization, field: &Field, dt: f64) -> Result<Field> {
    step_with(op, field, dt, ApplyMethod::Auto)
}

pub fn step_with(op: &OperatorDiscretization, field: &Field, dt: f64, method: ApplyMethod) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let bound = stable_dt(op, 1.0).unwrap_or(f64::INFINITY);
    if dt > bound * (1.0 + STABILITY_SLACK) {
        return Err(Error::UnstableStep { dt, bound });
    }
    let t = field.t() + dt;
    let rate = op.apply_with(field, method)?;
    let values: Vec<f64> = field
        .values()
        .iter()
        .zip(rate.values())
        .map(|(u, d)| u + dt * d)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            t,
            x: field.grid().point(i),
        });
    }
    Ok(field.with_values(t, values))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Fraction of the stability bound used as the nominal step.
    pub safety: f64,
    pub method: ApplyMethod,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            safety: 0.9,
            method: ApplyMethod::Auto,
        }
    }
}

/// Snapshots of one solution at increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    times: Vec<f64>,
    states: Vec<Field>,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Field] {
        &self.states
    }

    pub fn initial(&self) -> &Field {
        &self.states[0]
    }

    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Snapshot whose time stamp matches `t` to within `1e-12·max(1, t)`.
    pub fn at(&self, t: f64) -> Option<&Field> {
        let tol = 1e-12 * t.abs().max(1.0);
        self.states.iter().find(|f| (f.t() - t).abs() <= tol)
    }
}

/// Evolves `u0` for a duration `t_final`, recording the initial state and a
/// snapshot at each elapsed time in `output_times` (and at `t_final`).
pub fn evolve(
    op: &OperatorDiscretization,
    u0: &Field,
    t_final: f64,
    output_times: &[f64],
) -> Result<Trajectory> {
    evolve_with(op, u0, t_final, output_times, &EvolveOptions::default())
}

pub fn evolve_with(
    op: &OperatorDiscretization,
    u0: &Field,
    t_final: f64,
    output_times: &[f64],
    options: &EvolveOptions,
) -> Result<Trajectory> {
    if u0.grid() != op.grid() {
        return Err(Error::GridMismatch(
            "initial datum and operator live on different grids".into(),
        ));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_final must be finite and ≥ 0, got {t_final}"
        )));
    }
    if output_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("output times must be sorted".into()));
    }
    if let Some(&bad) = output_times.iter().find(|&&t| !(0.0..=t_final).contains(&t)) {
        return Err(Error::InvalidArgument(format!(
            "output time {bad} outside [0, {t_final}]"
        )));
    }

    let mut targets: Vec<f64> = Vec::with_capacity(output_times.len() + 1);
    for &t in output_times.iter().chain(std::iter::once(&t_final)) {
        if t > 0.0 && targets.last().is_none_or(|&last| t > last) {
            targets.push(t);
        }
    }

    let t0 = u0.t();
    let mut times = vec![t0];
    let mut states = vec![u0.clone()];
    if targets.is_empty() {
        return Ok(Trajectory {
            grid: *u0.grid(),
            times,
            states,
        });
    }

    let dt_nominal = stable_dt(op, options.safety)?;
    let mut current = u0.clone();
    let mut elapsed = 0.0;
    for &target in &targets {
        while elapsed < target {
            let remaining = target - elapsed;
            let dt = if remaining <= dt_nominal {
                remaining
            } else {
                dt_nominal
            };
            let next = step_with(op, &current, dt, options.method)?;
            elapsed = if remaining <= dt_nominal {
                target
            } else {
                elapsed + dt_nominal
            };
            current = next.retimed(t0 + elapsed);
        }
        times.push(current.t());
        states.push(current.clone());
    }
    Ok(Trajectory {
        grid: *u0.grid(),
        times,
        states,
    })
}

/// Discrete standard comparison: `upper(t, x) ≥ lower(t, x) − tol` at every
/// snapshot. Reports the worst margin `min (upper − lower)` and where it
/// occurs.
pub fn discrete_comparison_check(
    upper: &Trajectory,
    lower: &Trajectory,
    tol: f64,
) -> Result<VerificationReport> {
    if upper.grid() != lower.grid() {
        return Err(Error::GridMismatch(
            "comparison needs trajectories on the same grid".into(),
        ));
    }
    if upper.times().len() != lower.times().len()
        || upper
            .times()
            .iter()
            .zip(lower.times())
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::InvalidArgument(
            "comparison needs trajectories with the same snapshot times".into(),
        ));
    }
    let initial_gap = ordering_margin(upper.initial(), lower.initial()).0;
    if initial_gap < -tol {
        return Err(Error::InvalidArgument(format!(
            "initial data are not ordered: min(upper − lower) = {initial_gap}"
        )));
    }

    let mut worst = (f64::INFINITY, 0.0, 0.0);
    for (u, v) in upper.states().iter().zip(lower.states()) {
        let (margin, x) = ordering_margin(u, v);
        if margin < worst.0 {
            worst = (margin, u.t(), x);
        }
    }
    Ok(
        VerificationReport::at_least("discrete_comparison", worst.0, 0.0, tol)
            .at(worst.1, worst.2)
            .with("snapshots", upper.len())
            .with("n", upper.grid().len())
            .with("h", upper.grid().h()),
    )
}

fn ordering_margin(upper: &Field, lower: &Field) -> (f64, f64) {
    upper
        .iter()
        .zip(lower.values())
        .map(|((x, u), v)| (u - v, x))
        .fold((f64::INFINITY, 0.0), |acc, m| if m.0 < acc.0 { m } else { acc })
}
