use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use nonlocal_core::reference::{fractional_laplacian_amplitude, reference_solution};
use nonlocal_core::subsolution::{residual_grid, residual_report, SubsolutionParams};
use nonlocal_core::verification::{flattening_ratio, halfline_bound_check, mirror_identity_check};
use nonlocal_core::{
    evolve_with, stable_dt, ApplyMethod, Field, Grid, OperatorDiscretization, Trajectory, VerificationReport,
};

use crate::config::{Format, KernelConfig, Setup};
use crate::error::CliError;
use crate::output::{float, write_csv, write_json, write_trajectory_csv, write_trajectory_json};

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    kernel: String,
    config: &'a crate::config::RunConfig,
    certificate: &'a nonlocal_core::HypothesisCertificate,
    h: f64,
    row_sum_bound: f64,
    dt: f64,
}

fn write_metadata(
    setup: &Setup,
    op: &OperatorDiscretization,
    command: &str,
    out: &Path,
) -> Result<(), CliError> {
    let meta = Metadata {
        command,
        version: env!("CARGO_PKG_VERSION"),
        kernel: setup.spec.describe(),
        config: &setup.config,
        certificate: &setup.certificate,
        h: setup.grid.h(),
        row_sum_bound: op.row_sum_bound(),
        dt: stable_dt(op, setup.options.safety)?,
    };
    write_json(&out.join("metadata.json"), &meta)
}

fn operator(setup: &Setup) -> Result<OperatorDiscretization, CliError> {
    Ok(OperatorDiscretization::new(
        &setup.kernel,
        setup.grid,
        setup.boundary,
    )?)
}

fn run(setup: &Setup, op: &OperatorDiscretization, extra_times: &[f64]) -> Result<Trajectory, CliError> {
    let u0 = setup.config.initial.sample(&setup.grid)?;
    let mut times = setup.config.times.snapshots.clone();
    times.extend_from_slice(extra_times);
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(evolve_with(
        op,
        &u0,
        setup.config.times.t_final,
        &times,
        &setup.options,
    )?)
}

fn write_reports(out: &Path, reports: &[VerificationReport]) -> Result<bool, CliError> {
    write_json(&out.join("report.json"), reports)?;
    for r in reports {
        eprintln!("{}", r.summary());
    }
    Ok(reports.iter().all(|r| r.pass))
}

pub fn simulate(setup: &Setup, out: &Path, format: Format) -> Result<bool, CliError> {
    let op = operator(setup)?;
    let traj = run(setup, &op, &[])?;
    if format.csv() {
        write_trajectory_csv(&out.join("trajectory.csv"), &traj)?;
    }
    if format.json() {
        write_trajectory_json(&out.join("trajectory.json"), &traj)?;
    }
    write_metadata(setup, &op, "simulate", out)?;
    Ok(true)
}

pub fn verify_flattening(setup: &Setup, out: &Path) -> Result<bool, CliError> {
    let cfg = setup.config.checks.flattening;
    let t = cfg.t.unwrap_or(setup.config.times.t_final);
    if !(t > 0.0 && t <= setup.config.times.t_final) {
        return Err(CliError::Config(format!(
            "checks.flattening.t must lie in (0, t_final], got {t}"
        )));
    }
    let op = operator(setup)?;
    let traj = run(setup, &op, &[t])?;
    let init = &setup.config.initial;
    let report = flattening_ratio(&traj, &setup.spec, t, cfg.window, init.a(), init.b(), cfg.tol_rel)
        .map_err(|e| CliError::Config(format!("flattening: {e}")))?;
    write_metadata(setup, &op, "verify-flattening", out)?;
    write_reports(out, &[report])
}

pub fn verify_proposition(setup: &Setup, out: &Path) -> Result<bool, CliError> {
    let op = operator(setup)?;
    let traj = run(setup, &op, &[])?;
    let init = &setup.config.initial;
    let (a, b) = (init.a(), init.b());
    let halfline = halfline_bound_check(&traj, a, b, setup.halfline_tol())
        .map_err(|e| CliError::Config(format!("halfline: {e}")))?;
    let mirror_grid = setup.mirror_grid()?;
    let mirror = mirror_identity_check(
        &setup.kernel,
        mirror_grid,
        a,
        b,
        setup.config.checks.mirror.epsilon,
        setup.config.times.t_final,
        setup.mirror_tol(),
        &setup.options,
    )
    .map_err(|e| CliError::Config(format!("mirror: {e}")))?;
    write_metadata(setup, &op, "verify-proposition", out)?;
    write_reports(out, &[halfline, mirror])
}

pub fn verify_subsolution(setup: &Setup, out: &Path, format: Format) -> Result<bool, CliError> {
    let cfg = setup.config.checks.subsolution;
    let init = &setup.config.initial;
    let params = SubsolutionParams::new(&setup.spec, cfg.c, init.a(), init.b())
        .map_err(|e| CliError::Config(format!("subsolution: {e}")))?;
    let start = params.region_start();
    let range = cfg.x_range.unwrap_or((start, 10.0 * start));
    let rows = residual_grid(
        &setup.spec,
        &params,
        cfg.t_count,
        cfg.x_count,
        range,
        cfg.quad_tol,
    )
    .map_err(|e| match e {
        nonlocal_core::Error::InvalidArgument(m) => CliError::Config(format!("subsolution: {m}")),
        other => other.into(),
    })?;
    let report = residual_report(&params, &rows);
    if format.json() {
        write_json(&out.join("residuals.json"), &rows)?;
    }
    if format.csv() {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    float(r.t),
                    float(r.x),
                    float(r.residual),
                    float(r.budget),
                    r.pass.to_string(),
                ]
            })
            .collect();
        write_csv(
            &out.join("residuals.csv"),
            &["t", "x", "residual", "budget", "pass"],
            &table,
        )?;
    }
    write_reports(out, &[report])
}

#[derive(Serialize)]
struct ErrorRow {
    h: f64,
    domain_size: f64,
    linf_error: f64,
}

pub fn reference_compare(setup: &Setup, out: &Path, format: Format) -> Result<bool, CliError> {
    let (amplitude, s) = match setup.config.kernel {
        KernelConfig::PureFractional { amplitude, s, .. } => (amplitude, s),
        _ => {
            return Err(CliError::Config(
                "reference-compare needs a pure_fractional kernel".into(),
            ))
        }
    };
    let expected = fractional_laplacian_amplitude(s).map_err(|e| CliError::Config(e.to_string()))?;
    if (amplitude - expected).abs() > 1e-12 * expected {
        return Err(CliError::Config(format!(
            "reference-compare needs amplitude 4^s Γ(1/2+s)/(√π|Γ(−s)|) = {expected:.17} for s = {s}"
        )));
    }
    let (a, b) = match setup.config.initial {
        nonlocal_core::verification::InitialDatum::Step { a, b } => (a, b),
        _ => {
            return Err(CliError::Config(
                "reference-compare needs a step initial datum".into(),
            ))
        }
    };
    let t = setup.config.times.t_final;
    if !(t > 0.0) {
        return Err(CliError::Config("reference-compare needs t_final > 0".into()));
    }
    let cfg = setup.config.checks.reference;
    if cfg.levels < 2 {
        return Err(CliError::Config(
            "checks.reference.levels must be at least 2".into(),
        ));
    }
    let base = setup.grid;
    let window = cfg.window.unwrap_or((0.5 * base.x_min(), 0.25 * base.x_max()));

    let mut rows = Vec::with_capacity(cfg.levels);
    for level in 0..cfg.levels {
        let scale = (1u64 << level) as f64;
        let n = (base.len() - 1) * (1usize << (2 * level)) + 1;
        let grid = Grid::new(base.x_min() * scale, base.x_max() * scale, n)?;
        let op = OperatorDiscretization::new(&setup.kernel, grid, setup.boundary)?;
        let u0 = setup.config.initial.sample(&grid)?;
        let traj = evolve_with(&op, &u0, t, &[], &setup.options)?;
        let pts: Vec<(f64, f64)> = traj
            .last()
            .iter()
            .filter(|&(x, _)| x >= window.0 && x <= window.1)
            .collect();
        let linf = pts
            .par_iter()
            .map(|&(x, u)| Ok((u - reference_solution(s, a, b, t, x)?).abs()))
            .collect::<nonlocal_core::Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push(ErrorRow {
            h: grid.h(),
            domain_size: grid.x_max() - grid.x_min(),
            linf_error: linf,
        });
    }
    if format.csv() {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![float(r.h), float(r.domain_size), float(r.linf_error)])
            .collect();
        write_csv(
            &out.join("reference.csv"),
            &["h", "domain_size", "linf_error"],
            &table,
        )?;
    }
    if format.json() {
        write_json(&out.join("reference.json"), &rows)?;
    }
    let ratio = rows
        .windows(2)
        .map(|w| w[0].linf_error / w[1].linf_error)
        .fold(f64::INFINITY, f64::min);
    let report = VerificationReport::at_least("reference_refinement", ratio, 1.0, 0.0)
        .with("levels", cfg.levels)
        .with("base_linf", rows[0].linf_error)
        .with("finest_linf", rows[rows.len() - 1].linf_error)
        .with("x_lo", window.0)
        .with("x_hi", window.1)
        .with("t", t);
    write_reports(out, &[report])
}

fn best_of(repeats: usize, f: impl Fn() -> nonlocal_core::Result<Field>) -> Result<Duration, CliError> {
    let mut best = Duration::MAX;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        std::hint::black_box(f()?);
        best = best.min(start.elapsed());
    }
    Ok(best)
}

pub fn bench(setup: &Setup, out: &Path, format: Format, seed: u64) -> Result<bool, CliError> {
    let cfg = &setup.config.checks.bench;
    if cfg.sizes.iter().any(|&n| n < Grid::MIN_POINTS) {
        return Err(CliError::Config(format!(
            "bench sizes must be at least {}",
            Grid::MIN_POINTS
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = setup.grid.h();
    let mut table = Vec::new();
    let mut worst_rel: f64 = 0.0;
    for &n in &cfg.sizes {
        let half = 0.5 * h * (n - 1) as f64;
        let grid = Grid::new(-half, half, n)?;
        let op = OperatorDiscretization::new(&setup.kernel, grid, setup.boundary)?;
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let u = Field::new(grid, 0.0, values)?;
        let direct = op.apply_with(&u, ApplyMethod::Direct)?;
        let fft = op.apply_with(&u, ApplyMethod::Fft)?;
        let scale = direct
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let diff = direct
            .values()
            .iter()
            .zip(fft.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_rel = worst_rel.max(diff / scale);
        let d = best_of(cfg.repeats, || op.apply_with(&u, ApplyMethod::Direct))?;
        let f = best_of(cfg.repeats, || op.apply_with(&u, ApplyMethod::Fft))?;
        let d_ms = d.as_secs_f64() * 1e3;
        let f_ms = f.as_secs_f64() * 1e3;
        table.push((n, d_ms, f_ms, d_ms / f_ms));
    }
    if format.csv() {
        let rows: Vec<Vec<String>> = table
            .iter()
            .map(|&(n, d, f, s)| vec![n.to_string(), float(d), float(f), float(s)])
            .collect();
        write_csv(
            &out.join("bench.csv"),
            &["n", "direct_ms", "fft_ms", "speedup"],
            &rows,
        )?;
    }
    if format.json() {
        #[derive(Serialize)]
        struct Row {
            n: usize,
            direct_ms: f64,
            fft_ms: f64,
            speedup: f64,
        }
        let rows: Vec<Row> = table
            .iter()
            .map(|&(n, direct_ms, fft_ms, speedup)| Row {
                n,
                direct_ms,
                fft_ms,
                speedup,
            })
            .collect();
        write_json(&out.join("bench.json"), &rows)?;
    }
    let report = VerificationReport::at_most("fft_consistency", worst_rel, 0.0, 1e-10)
        .with("sizes", cfg.sizes.len())
        .with("seed", seed as f64);
    write_reports(out, &[report])
}
