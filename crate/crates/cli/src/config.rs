//! JSON run configuration and its validation into solver objects.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nonlocal_core::kernel::validate_hypothesis;
use nonlocal_core::verification::{InitialDatum, FLATTENING_TOL_REL, HALFLINE_TOL, MOLLIFIER_RADIUS};
use nonlocal_core::{
    AcceptedKernel, ApplyMethod, BoundaryModel, EvolveOptions, Grid, HypothesisCertificate, KernelFamily,
    KernelSpec, NearProfile, RightBoundary,
};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub boundary: Option<BoundaryConfig>,
    pub initial: InitialDatum,
    pub times: TimesConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    PureFractional {
        amplitude: f64,
        s: f64,
        j0: f64,
        j1: f64,
        r0: f64,
    },
    TruncatedFractional {
        amplitude: f64,
        cutoff: f64,
        s: f64,
        j0: f64,
        j1: f64,
        r0: f64,
    },
    CompactPlusTail {
        profile: NearProfile,
        tail_amplitude: f64,
        s: f64,
        j0: f64,
        j1: f64,
        r0: f64,
    },
}

impl KernelConfig {
    pub fn to_spec(&self) -> nonlocal_core::Result<KernelSpec> {
        match *self {
            KernelConfig::PureFractional {
                amplitude,
                s,
                j0,
                j1,
                r0,
            } => KernelSpec::new(KernelFamily::PureFractional { amplitude }, s, j0, j1, r0),
            KernelConfig::TruncatedFractional {
                amplitude,
                cutoff,
                s,
                j0,
                j1,
                r0,
            } => KernelSpec::new(
                KernelFamily::TruncatedFractional { amplitude, cutoff },
                s,
                j0,
                j1,
                r0,
            ),
            KernelConfig::CompactPlusTail {
                profile,
                tail_amplitude,
                s,
                j0,
                j1,
                r0,
            } => KernelSpec::new(
                KernelFamily::CompactPlusTail {
                    profile,
                    tail_amplitude,
                },
                s,
                j0,
                j1,
                r0,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub left: f64,
    pub right: RightBoundary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    pub t_final: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub safety: f64,
    pub method: ApplyMethod,
    pub validation_samples: usize,
    /// Run with kernels that fail hypothesis validation.
    pub allow_unverified: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            safety: EvolveOptions::default().safety,
            method: ApplyMethod::Auto,
            validation_samples: 1000,
            allow_unverified: false,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    pub halfline: HalflineConfig,
    pub mirror: MirrorConfig,
    pub flattening: FlatteningConfig,
    pub subsolution: SubsolutionConfig,
    pub reference: ReferenceConfig,
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HalflineConfig {
    /// Absolute tolerance; defaults to `0.02·a`.
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MirrorConfig {
    pub epsilon: f64,
    /// Absolute tolerance; defaults to `0.02·a`.
    pub tol: Option<f64>,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        Self {
            epsilon: MOLLIFIER_RADIUS,
            tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlatteningConfig {
    /// Snapshot time; defaults to `t_final`.
    pub t: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub tol_rel: f64,
}

impl Default for FlatteningConfig {
    fn default() -> Self {
        Self {
            t: None,
            window: None,
            tol_rel: FLATTENING_TOL_REL,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubsolutionConfig {
    pub c: f64,
    pub t_count: usize,
    pub x_count: usize,
    /// Defaults to `[R0 + R_C, 10·(R0 + R_C)]`.
    pub x_range: Option<(f64, f64)>,
    pub quad_tol: f64,
}

impl Default for SubsolutionConfig {
    fn default() -> Self {
        Self {
            c: 2.0,
            t_count: 20,
            x_count: 20,
            x_range: None,
            quad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    /// Number of grids; each halves `h` and doubles the domain.
    pub levels: usize,
    /// Error window; defaults to `[x_min/2, x_max/4]` of the base grid.
    pub window: Option<(f64, f64)>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            levels: 2,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![256, 1024, 4096, 16384],
            repeats: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: Format::Both,
        }
    }
}

/// A configuration turned into validated solver objects.
pub struct Setup {
    pub config: RunConfig,
    pub spec: KernelSpec,
    pub kernel: AcceptedKernel,
    pub certificate: HypothesisCertificate,
    pub grid: Grid,
    pub boundary: BoundaryModel,
    pub options: EvolveOptions,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| bad(format!("invalid config: {e}")))
    }

    /// Validates every section and builds the solver objects.
    pub fn validate(self) -> Result<Setup, CliError> {
        let spec = self.kernel.to_spec().map_err(|e| bad(format!("kernel: {e}")))?;
        let grid = Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n)
            .map_err(|e| bad(format!("grid: {e}")))?;
        self.initial
            .validate()
            .map_err(|e| bad(format!("initial: {e}")))?;
        if let InitialDatum::Custom { .. } = self.initial {
            self.initial
                .sample(&grid)
                .map_err(|e| bad(format!("initial: {e}")))?;
        }
        let t = &self.times;
        if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
            return Err(bad(format!("times: t_final must be ≥ 0, got {}", t.t_final)));
        }
        if t.snapshots.iter().any(|&s| !(0.0..=t.t_final).contains(&s)) {
            return Err(bad("times: snapshots must lie in [0, t_final]"));
        }
        if !(self.solver.safety > 0.0 && self.solver.safety <= 1.0) {
            return Err(bad(format!(
                "solver: safety must be in (0, 1], got {}",
                self.solver.safety
            )));
        }
        let certificate = validate_hypothesis(&spec, self.solver.validation_samples)
            .map_err(|e| bad(format!("kernel validation: {e}")))?;
        let kernel = if certificate.verified {
            AcceptedKernel::certify(spec, self.solver.validation_samples)
        } else if self.solver.allow_unverified {
            AcceptedKernel::force(spec)
        } else {
            return Err(bad(format!(
                "kernel {} fails hypothesis validation (upper margin {:e}, lower margin {:e}, near moment {}); \
                 set solver.allow_unverified to run anyway",
                spec.describe(),
                certificate.upper_margin,
                certificate.lower_margin,
                certificate.near_moment
            )));
        }
        .map_err(|e| bad(format!("kernel: {e}")))?;
        let boundary = match self.boundary {
            Some(b) => BoundaryModel {
                left: b.left,
                right: b.right,
            },
            None => BoundaryModel::plateau(self.initial.a()),
        };
        let options = EvolveOptions {
            safety: self.solver.safety,
            method: self.solver.method,
        };
        Ok(Setup {
            config: self,
            spec,
            kernel,
            certificate,
            grid,
            boundary,
            options,
        })
    }
}

impl Setup {
    pub fn halfline_tol(&self) -> f64 {
        self.config
            .checks
            .halfline
            .tol
            .unwrap_or(HALFLINE_TOL * self.config.initial.a())
    }

    pub fn mirror_tol(&self) -> f64 {
        self.config
            .checks
            .mirror
            .tol
            .unwrap_or(HALFLINE_TOL * self.config.initial.a())
    }

    /// The configured grid when it is symmetric about `b`, otherwise the
    /// smallest grid with the same spacing that covers it symmetrically.
    pub fn mirror_grid(&self) -> nonlocal_core::Result<Grid> {
        let b = self.config.initial.b();
        let g = self.grid;
        if (g.midpoint() - b).abs() <= 1e-9 * g.h() {
            return Ok(g);
        }
        let half = (b - g.x_min()).max(g.x_max() - b);
        let cells = (half / g.h()).ceil() as usize;
        let half = cells as f64 * g.h();
        Grid::new(b - half, b + half, 2 * cells + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "kernel": {"family": "pure_fractional", "amplitude": 1.0, "s": 0.5, "j0": 1.0, "j1": 1.0, "r0": 2.0},
        "grid": {"x_min": -10.0, "x_max": 10.0, "n": 201},
        "initial": {"kind": "step", "a": 1.0, "b": 0.0},
        "times": {"t_final": 0.5}
    }"#;

    #[test]
    fn minimal_config_validates_with_defaults() {
        let setup = RunConfig::parse(MINIMAL).unwrap().validate().unwrap();
        assert!(setup.certificate.verified);
        assert_eq!(setup.boundary, BoundaryModel::plateau(1.0));
        assert_eq!(setup.options.safety, 0.9);
        assert_eq!(setup.halfline_tol(), 0.02);
        assert_eq!(setup.config.checks.bench.sizes, vec![256, 1024, 4096, 16384]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"t_final\": 0.5", "\"t_final\": 0.5, \"dt\": 0.1");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("\"r0\": 2.0", "\"r0\": 2.0, \"cutoff\": 3.0");
        assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let text = MINIMAL.replace("\"n\": 201", "\"n\": 3");
        assert!(matches!(
            RunConfig::parse(&text).unwrap().validate(),
            Err(CliError::Config(_))
        ));
        let text = MINIMAL.replace("\"j0\": 1.0", "\"j0\": 0.5");
        assert!(matches!(
            RunConfig::parse(&text).unwrap().validate(),
            Err(CliError::Config(_))
        ));
        let text = MINIMAL.replace("\"a\": 1.0", "\"a\": -1.0");
        assert!(matches!(
            RunConfig::parse(&text).unwrap().validate(),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn mirror_grid_is_symmetric_about_b() {
        let text = MINIMAL.replace("\"x_max\": 10.0", "\"x_max\": 30.0");
        let setup = RunConfig::parse(&text).unwrap().validate().unwrap();
        let g = setup.mirror_grid().unwrap();
        assert_eq!(g.x_min(), -30.0);
        assert_eq!(g.x_max(), 30.0);
        assert!((g.h() - setup.grid.h()).abs() < 1e-12);
    }
}
