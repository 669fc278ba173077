//! Scenario files: JSON documents with unknown keys rejected.
//!
//! Everything is checked up front by [`ScenarioConfig::validate`], which
//! returns a [`Scenario`] with every numerical object already constructed.

use std::f64::consts::PI;
use std::path::Path;

use modbohm::funcdyn::Scheme;
use modbohm::funcspace::ConfigGrid;
use modbohm::modschrod::EvolutionMode;
use modbohm::qcorr::{Convention, CorrectionMode, QbarMode};
use modbohm::trajectories::SpaceInterpolation;
use modbohm::{Boundary, LatticeField, PhysicsParams, PotentialSpec, SpatialGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Largest ensemble a single run accepts.
pub const MAX_PARTICLES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridSection,
    #[serde(default)]
    pub physics: PhysicsParams,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub initial: InitialSection,
    #[serde(default)]
    pub functional: Option<FunctionalSection>,
    pub stepping: SteppingSection,
    #[serde(default)]
    pub trajectories: Option<TrajectorySection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub sites: usize,
    pub spacing: f64,
    /// Defaults to a box centred on zero.
    #[serde(default)]
    pub origin: Option<f64>,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketKind {
    #[default]
    Gaussian,
}

/// `psi(x) ∝ exp(-(x - center)^2 / (4 width^2) + i momentum x / hbar + i phase)`,
/// normalized on the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub kind: PacketKind,
    #[serde(default)]
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub phase: f64,
}

fn default_true() -> bool {
    true
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSection {
    /// Either 1 (site-factorized functional) or the number of grid sites.
    #[serde(default = "default_one")]
    pub sites: usize,
    pub half_width: f64,
    pub points: usize,
    /// Centre of the initial Gaussian functional as `[re, im]`, shared by all sites.
    #[serde(default)]
    pub center: [f64; 2],
    pub width: f64,
    #[serde(default)]
    pub coupling: CorrectionMode,
    #[serde(default)]
    pub qbar_mode: QbarMode,
    #[serde(default)]
    pub convention: Convention,
    /// Evolve the functional alongside the field; otherwise it stays frozen.
    #[serde(default = "default_true")]
    pub evolve: bool,
    #[serde(default)]
    pub scheme: Scheme,
    /// Functional clock step; defaults to `stepping.dt`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Field steps between refreshes of the correction functional.
    #[serde(default = "default_one")]
    pub refresh_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_one")]
    pub output_stride: usize,
    #[serde(default)]
    pub mode: EvolutionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub interpolation: SpaceInterpolation,
    /// Integrator step; defaults to `stepping.dt`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Record every n-th field step; defaults to `stepping.output_stride`.
    #[serde(default)]
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
}

fn default_directory() -> String {
    "out".into()
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// Functional side of a validated scenario.
#[derive(Debug, Clone)]
pub struct FunctionalSetup {
    pub domain: ConfigGrid,
    pub center: LatticeField,
    pub width: f64,
    pub coupling: CorrectionMode,
    pub qbar_mode: QbarMode,
    pub convention: Convention,
    pub evolve: bool,
    pub scheme: Scheme,
    pub dt: f64,
    pub refresh_stride: usize,
}

#[derive(Debug, Clone)]
pub struct TrajectorySetup {
    pub count: usize,
    pub seed: u64,
    pub interpolation: SpaceInterpolation,
    pub dt: f64,
    pub record_stride: usize,
}

/// A fully validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: SpatialGrid,
    pub params: PhysicsParams,
    pub potential: PotentialSpec,
    pub initial: LatticeField,
    pub functional: Option<FunctionalSetup>,
    pub dt: f64,
    pub steps: usize,
    pub output_stride: usize,
    pub mode: EvolutionMode,
    pub trajectories: Option<TrajectorySetup>,
}

fn bad(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, "must be finite"))
    }
}

/// Re-labels a core configuration error with its section prefix.
fn in_section(section: &str) -> impl Fn(modbohm::Error) -> CliError + '_ {
    move |e| match e {
        modbohm::Error::Config { field, message } => bad(format!("{section}.{field}"), message),
        other => bad(section, other.to_string()),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| bad("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("config", format!("cannot read {}: {e}", path.display())))?;
        Ok((Self::from_json(&text)?, text))
    }

    /// Checks every field and cross-constraint and builds the run objects.
    pub fn validate(&self) -> Result<Scenario, CliError> {
        let g = &self.grid;
        if g.sites < 2 {
            return Err(bad("grid.sites", format!("need at least 2 sites, got {}", g.sites)));
        }
        positive("grid.spacing", g.spacing)?;
        let origin = g.origin.unwrap_or(-0.5 * g.sites as f64 * g.spacing);
        finite("grid.origin", origin)?;
        let grid = SpatialGrid::new(g.sites, g.spacing, origin, g.boundary).map_err(in_section("grid"))?;

        let params = PhysicsParams::new(self.physics.hbar, self.physics.mass).map_err(in_section("physics"))?;
        self.potential.validate(&grid).map_err(in_section("potential"))?;

        let init = &self.initial;
        finite("initial.center", init.center)?;
        positive("initial.width", init.width)?;
        finite("initial.momentum", init.momentum)?;
        finite("initial.phase", init.phase)?;
        let (lo, hi) = (grid.coordinate(0), grid.coordinate(g.sites - 1));
        if init.center - 3.0 * init.width < lo || init.center + 3.0 * init.width > hi {
            return Err(bad(
                "initial.center",
                format!("packet (center ± 3 widths) must fit inside the lattice [{lo}, {hi}]"),
            ));
        }
        let kmax = PI / g.spacing;
        if init.momentum.abs() / params.hbar > 0.5 * kmax {
            return Err(bad(
                "initial.momentum",
                format!("wavenumber exceeds half the lattice Nyquist limit {kmax}"),
            ));
        }
        let initial = gaussian_packet(&grid, init, &params);

        let s = &self.stepping;
        positive("stepping.dt", s.dt)?;
        positive("stepping.t_end", s.t_end)?;
        let steps = (s.t_end / s.dt).round();
        if steps < 1.0 || (steps * s.dt - s.t_end).abs() > 1e-9 * s.t_end {
            return Err(bad("stepping.t_end", "must be a positive integer multiple of stepping.dt"));
        }
        let steps = steps as usize;
        if s.output_stride == 0 {
            return Err(bad("stepping.output_stride", "must be at least 1"));
        }
        // The packet's significant wavenumbers (six spreads out) must not
        // rotate by more than pi per step.
        let k_sig = init.momentum.abs() / params.hbar + 6.0 / (2.0 * init.width);
        let phase = s.dt * params.hbar * k_sig * k_sig / (2.0 * params.mass);
        if phase > PI {
            return Err(bad(
                "stepping.dt",
                format!("kinetic phase per step at the packet's wavenumber band is {phase:.3} rad (> pi); reduce dt"),
            ));
        }

        let functional = match (&self.functional, s.mode) {
            (None, EvolutionMode::Standard) => None,
            (None, _) => return Err(bad("functional", "modified modes need a functional section")),
            (Some(f), _) => Some(self.validate_functional(f, &grid, &initial, s.dt)?),
        };

        let trajectories = match &self.trajectories {
            None => None,
            Some(t) => {
                if t.count == 0 || t.count > MAX_PARTICLES {
                    return Err(bad(
                        "trajectories.count",
                        format!("must be between 1 and {MAX_PARTICLES}, got {}", t.count),
                    ));
                }
                let dt = t.dt.unwrap_or(s.dt);
                positive("trajectories.dt", dt)?;
                let record_stride = t.record_stride.unwrap_or(s.output_stride);
                if record_stride == 0 {
                    return Err(bad("trajectories.record_stride", "must be at least 1"));
                }
                Some(TrajectorySetup {
                    count: t.count,
                    seed: t.seed,
                    interpolation: t.interpolation,
                    dt,
                    record_stride,
                })
            }
        };

        if self.output.directory.is_empty() {
            return Err(bad("output.directory", "must not be empty"));
        }
        if self.output.formats.is_empty() {
            return Err(bad("output.formats", "at least one format is required"));
        }

        Ok(Scenario {
            config: self.clone(),
            grid,
            params,
            potential: self.potential.clone(),
            initial,
            functional,
            dt: s.dt,
            steps,
            output_stride: s.output_stride,
            mode: s.mode,
            trajectories,
        })
    }

    fn validate_functional(
        &self,
        f: &FunctionalSection,
        grid: &SpatialGrid,
        initial: &LatticeField,
        field_dt: f64,
    ) -> Result<FunctionalSetup, CliError> {
        if f.sites != 1 && f.sites != grid.sites() {
            return Err(bad(
                "functional.sites",
                format!("must be 1 or the grid site count {}, got {}", grid.sites(), f.sites),
            ));
        }
        positive("functional.width", f.width)?;
        finite("functional.center", f.center[0])?;
        finite("functional.center", f.center[1])?;
        let origin = if f.sites == 1 { 0.0 } else { grid.origin() };
        let lattice = SpatialGrid::new(f.sites, grid.spacing(), origin, grid.boundary()).map_err(in_section("functional"))?;
        let domain = ConfigGrid::new(lattice, f.half_width, f.points).map_err(in_section("functional"))?;
        let h = domain.step();
        let l = domain.half_width();
        // Derivative stencils reach two cells plus the perturbation step.
        let margin = 3.0 * h;
        if f.center[0].abs().max(f.center[1].abs()) + 4.0 * f.width > l {
            return Err(bad(
                "functional.half_width",
                format!("the functional Gaussian (center ± 4 widths) must fit inside ±{l}"),
            ));
        }
        if 2.0 * h > f.width {
            return Err(bad(
                "functional.points",
                format!("cell size {h:.4} does not resolve the functional width {}", f.width),
            ));
        }
        let peak = initial.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak > l - margin {
            return Err(bad(
                "functional.half_width",
                format!(
                    "initial field amplitude {peak:.4} leaves less than three cells of margin inside ±{l}"
                ),
            ));
        }
        let dt = f.dt.unwrap_or(field_dt);
        positive("functional.dt", dt)?;
        if f.refresh_stride == 0 {
            return Err(bad("functional.refresh_stride", "must be at least 1"));
        }
        let center = LatticeField::new(lattice, vec![Complex64::new(f.center[0], f.center[1]); f.sites])
            .map_err(in_section("functional"))?;
        Ok(FunctionalSetup {
            domain,
            center,
            width: f.width,
            coupling: f.coupling,
            qbar_mode: f.qbar_mode,
            convention: f.convention,
            evolve: f.evolve,
            scheme: f.scheme,
            dt,
            refresh_stride: f.refresh_stride,
        })
    }
}

/// Lattice-normalized Gaussian packet.
pub fn gaussian_packet(grid: &SpatialGrid, init: &InitialSection, params: &PhysicsParams) -> LatticeField {
    let k = init.momentum / params.hbar;
    let inv = 1.0 / (4.0 * init.width * init.width);
    let raw = LatticeField::from_fn(*grid, |x| {
        let dx = x - init.center;
        Complex64::from_polar((-dx * dx * inv).exp(), k * x + init.phase)
    });
    let norm = raw.norm();
    raw.scaled(Complex64::new(1.0 / norm.sqrt(), 0.0))
}
