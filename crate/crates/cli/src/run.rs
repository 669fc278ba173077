//! Orchestration: co-evolves the field and (optionally) the functional,
//! samples diagnostics at output times and drives the trajectory ensemble.

use std::time::Instant;

use log::{debug, info};
use modbohm::funcdyn::{build_functional_hamiltonian, FunctionalStepper, TimeStepperConfig};
use modbohm::funcspace::{functional_polar_split, init_wave_functional, WaveFunctional};
use modbohm::modschrod::{continuity_residual, hj_residual, EvolutionMode, EvolutionState, Propagator, Snapshot};
use modbohm::polar::{standard_quantum_potential, to_polar, velocity_field, PolarField};
use modbohm::qcorr::{correction, CorrectionFunctional};
use modbohm::trajectories::{
    equivariance_check, integrate, sample_initial, EquivarianceReport, TrajectoryEnsemble, VelocitySnapshot,
};
use modbohm::{LatticeField, PhysicsParams, SpatialGrid};
use num_complex::Complex64;

use crate::config::{FunctionalSetup, Scenario};
use crate::error::CliError;

/// One row of the time series written at every output step.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub step: usize,
    pub norm: f64,
    pub survival_norm: f64,
    pub antiparticle_norm: Option<f64>,
    /// `sum_j a * source_j` for the particle branch.
    pub integrated_source: f64,
    /// Central-difference `dN/dt` (absent at the first and last rows).
    pub norm_rate: Option<f64>,
    /// Lattice L2 norm of the continuity residual.
    pub continuity_residual: Option<f64>,
    /// Density-weighted RMS of the Hamilton-Jacobi residual.
    pub hj_residual: Option<f64>,
    pub annihilated_sites: usize,
}

/// Site fields at one output time; `None` marks masked entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub q_std: Vec<Option<f64>>,
    pub q_modified: Vec<Option<f64>>,
    pub q_density: Vec<Option<f64>>,
    pub extra_term: Vec<Option<Complex64>>,
    pub source: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceRow {
    pub t: f64,
    pub report: EquivarianceReport,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub mode: EvolutionMode,
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<FieldSnapshot>,
    /// The particle-branch field at each output time.
    pub fields: Vec<LatticeField>,
    pub trajectories: Option<TrajectoryEnsemble>,
    pub equivariance: Vec<EquivarianceRow>,
    pub functional_steps: usize,
    pub wall_seconds: f64,
}

/// Functional state and the correction functional derived from it.
struct FunctionalTrack<'a> {
    setup: &'a FunctionalSetup,
    psi: WaveFunctional,
    stepper: Option<FunctionalStepper>,
    time: f64,
    rf: CorrectionFunctional,
}

impl<'a> FunctionalTrack<'a> {
    fn new(setup: &'a FunctionalSetup, scenario: &Scenario) -> Result<Self, CliError> {
        let psi = init_wave_functional(&setup.domain, &setup.center, setup.width)?;
        let stepper = if setup.evolve {
            let ham = build_functional_hamiltonian(&scenario.potential, &scenario.grid, &setup.domain, 0.0)?;
            Some(FunctionalStepper::new(ham, TimeStepperConfig::new(setup.dt, setup.scheme))?)
        } else {
            None
        };
        let rf = Self::derive(setup, &psi);
        Ok(Self {
            setup,
            psi,
            stepper,
            time: 0.0,
            rf,
        })
    }

    fn derive(setup: &FunctionalSetup, psi: &WaveFunctional) -> CorrectionFunctional {
        CorrectionFunctional::new(&functional_polar_split(psi)).with_qbar_mode(setup.qbar_mode)
    }

    /// Advances the functional clock up to `t` and re-derives the correction.
    fn catch_up(&mut self, t: f64, scenario: &Scenario) -> Result<usize, CliError> {
        let Some(stepper) = self.stepper.as_mut() else {
            return Ok(0);
        };
        let dt = self.setup.dt;
        let mut taken = 0;
        while self.time + 0.5 * dt <= t {
            if !scenario.potential.is_static() {
                let ham = build_functional_hamiltonian(&scenario.potential, &scenario.grid, &self.setup.domain, self.time)?;
                *stepper = FunctionalStepper::new(ham, TimeStepperConfig::new(dt, self.setup.scheme))?;
            }
            stepper.step(&mut self.psi)?;
            self.time += dt;
            taken += 1;
        }
        if taken > 0 {
            self.rf = Self::derive(self.setup, &self.psi);
            debug!("functional refreshed at t = {:.6} ({} steps)", self.time, taken);
        }
        Ok(taken)
    }
}

/// Per-output diagnostics that need the following step before they are final.
struct Pending {
    row: usize,
    q: Vec<Option<f64>>,
    source: Vec<Option<f64>>,
}

fn density_weighted_rms(values: &[Option<f64>], rho: &[f64]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (v, &w) in values.iter().zip(rho) {
        if let Some(v) = v {
            num += w * v * v;
            den += w;
        }
    }
    (den > 0.0).then(|| (num / den).sqrt())
}

fn lattice_l2(grid: &SpatialGrid, values: &[Option<f64>]) -> f64 {
    (grid.spacing() * values.iter().flatten().map(|v| v * v).sum::<f64>()).sqrt()
}

fn snapshot_fields(
    polar: &PolarField,
    t: f64,
    scenario: &Scenario,
    track: Option<&FunctionalTrack>,
) -> Result<(FieldSnapshot, Vec<Option<f64>>), CliError> {
    let params = &scenario.params;
    let q_std = standard_quantum_potential(polar, params);
    let n = polar.grid().sites();
    let (q_modified, q_density, extra, source) = match track {
        Some(track) if scenario.mode != EvolutionMode::Standard => {
            let c = correction(&track.rf, polar, &scenario.potential, t, params, track.setup.coupling)?;
            let kp = track.setup.convention.potential_factor();
            let ks = track.setup.convention.source_factor();
            let total = (0..n)
                .map(|j| match (q_std[j], c.dq_dr_over_r[j]) {
                    (Some(q), Some(d)) if !polar.is_node(j) => Some(q + kp * d),
                    _ => None,
                })
                .collect();
            let source = c.dq_ds.iter().map(|d| d.map(|v| ks * v)).collect();
            (total, c.q_density, c.extra_term, source)
        }
        _ => (q_std.clone(), vec![None; n], vec![None; n], vec![Some(0.0); n]),
    };
    let snap = FieldSnapshot {
        t,
        x: polar.grid().coordinates(),
        amplitude: polar.amplitude().to_vec(),
        phase: polar.phase().to_vec(),
        q_std,
        q_modified,
        q_density,
        extra_term: extra,
        source: source.clone(),
    };
    Ok((snap, source))
}

/// Runs `scenario` in `mode` (normally `scenario.mode`).
pub fn run(scenario: &Scenario, mode: EvolutionMode) -> Result<RunOutput, CliError> {
    let start = Instant::now();
    let mut scenario = scenario.clone();
    scenario.mode = mode;
    let scenario = &scenario;
    let params: PhysicsParams = scenario.params;
    let grid = scenario.grid;
    let prop = Propagator::new(grid, params, scenario.dt)?;
    let mut state = EvolutionState::new(scenario.initial.clone(), mode);
    let mut track = match (&scenario.functional, mode) {
        (Some(setup), m) if m != EvolutionMode::Standard => Some(FunctionalTrack::new(setup, scenario)?),
        _ => None,
    };
    let refresh = scenario.functional.as_ref().map_or(1, |f| f.refresh_stride);
    let coupling = scenario.functional.as_ref().map(|f| f.coupling).unwrap_or_default();
    let want_traj = scenario.trajectories.is_some();

    let mut series: Vec<SeriesRow> = Vec::new();
    let mut snapshots: Vec<FieldSnapshot> = Vec::new();
    let mut fields = Vec::new();
    let mut velocities = Vec::new();
    let mut densities = Vec::new();
    let mut functional_steps = 0;

    let mut window: Vec<Snapshot> = Vec::with_capacity(3);
    let mut pending: Option<Pending> = None;
    let mut norms: Vec<f64> = Vec::with_capacity(3);

    for k in 0..=scenario.steps {
        if k > 0 {
            if let Some(tr) = track.as_mut() {
                if (k - 1) % refresh == 0 {
                    functional_steps += tr.catch_up(state.time, scenario)?;
                }
            }
            prop.step(&mut state, &scenario.potential, track.as_ref().map(|t| &t.rf), coupling)?;
        }
        let polar = to_polar(&state.psi, &params)?;
        if want_traj {
            velocities.push(VelocitySnapshot {
                time: state.time,
                velocity: velocity_field(&polar, &params),
            });
            densities.push(polar.density());
        }
        if window.len() == 3 {
            window.remove(0);
            norms.remove(0);
        }
        window.push(Snapshot {
            time: state.time,
            polar: polar.clone(),
        });
        norms.push(state.norm);

        if let Some(p) = pending.take() {
            if window.len() == 3 {
                let rho = window[1].polar.density();
                let hj = hj_residual(&window, &scenario.potential, &p.q, &params)?;
                let cont = continuity_residual(&window, &p.source, &params)?;
                let row = &mut series[p.row];
                row.hj_residual = density_weighted_rms(&hj, &rho);
                row.continuity_residual = Some(lattice_l2(&grid, &cont.pointwise));
                row.norm_rate = Some((norms[2] - norms[0]) / (window[2].time - window[0].time));
            }
        }

        if k % scenario.output_stride == 0 || k == scenario.steps {
            let (snap, source) = snapshot_fields(&polar, state.time, scenario, track.as_ref())?;
            let integrated_source = grid.spacing() * source.iter().flatten().sum::<f64>();
            series.push(SeriesRow {
                t: state.time,
                step: k,
                norm: state.norm,
                survival_norm: state.survival_norm,
                antiparticle_norm: state.antiparticle_norm(),
                integrated_source,
                norm_rate: None,
                continuity_residual: None,
                hj_residual: None,
                annihilated_sites: state.annihilated,
            });
            pending = Some(Pending {
                row: series.len() - 1,
                q: snap.q_modified.clone(),
                source,
            });
            fields.push(state.psi.clone());
            snapshots.push(snap);
            info!("t = {:.6}  norm = {:.12}", state.time, state.norm);
        }
    }

    let (trajectories, equivariance) = match &scenario.trajectories {
        Some(ts) => {
            let initial = sample_initial(&grid, &densities[0], ts.count, ts.seed)?;
            let ens = TrajectoryEnsemble::new(grid, initial, 0.0, ts.seed, ts.interpolation);
            let ens = integrate(&ens, &velocities, ts.dt, ts.record_stride)?;
            let mut rows = Vec::with_capacity(ens.times.len());
            for (k, &t) in ens.times.iter().enumerate() {
                let step = ((t / scenario.dt).round() as usize).min(densities.len() - 1);
                let active = ens.active_positions(k);
                if active.is_empty() {
                    continue;
                }
                rows.push(EquivarianceRow {
                    t,
                    report: equivariance_check(&active, &grid, &densities[step], None)?,
                });
            }
            (Some(ens), rows)
        }
        None => (None, Vec::new()),
    };

    Ok(RunOutput {
        mode,
        series,
        snapshots,
        fields,
        trajectories,
        equivariance,
        functional_steps,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Per-output-time comparison of a standard and a modified run.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    /// `sqrt(sum_j a |psi_mod - psi_std|^2)`
    pub psi_distance: f64,
    /// Density-weighted RMS of `Q_modified - Q_std` in the modified run.
    pub q_rms_difference: Option<f64>,
    pub q_max_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementRow {
    pub t: f64,
    pub mean: f64,
    pub rms: f64,
    pub max: f64,
    pub particles: usize,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub standard: RunOutput,
    pub modified: RunOutput,
    pub fields: Vec<ComparisonRow>,
    pub displacement: Vec<DisplacementRow>,
}

/// Runs the scenario in standard and modified mode with identical seeds.
pub fn compare_modes(scenario: &Scenario) -> Result<Comparison, CliError> {
    if scenario.functional.is_none() {
        return Err(CliError::Config {
            field: "functional".into(),
            message: "compare-modes needs a functional section".into(),
        });
    }
    let modified_mode = match scenario.mode {
        EvolutionMode::Standard => EvolutionMode::Modified,
        m => m,
    };
    let standard = run(scenario, EvolutionMode::Standard)?;
    let modified = run(scenario, modified_mode)?;
    let a = scenario.grid.spacing();

    let fields = standard
        .fields
        .iter()
        .zip(&modified.fields)
        .zip(&modified.snapshots)
        .map(|((s, m), snap)| {
            let psi_distance = (a * s
                .values()
                .iter()
                .zip(m.values())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>())
            .sqrt();
            let diff: Vec<Option<f64>> = snap
                .q_modified
                .iter()
                .zip(&snap.q_std)
                .map(|(m, s)| Some((*m)? - (*s)?))
                .collect();
            let rho: Vec<f64> = snap.amplitude.iter().map(|r| r * r).collect();
            ComparisonRow {
                t: snap.t,
                psi_distance,
                q_rms_difference: density_weighted_rms(&diff, &rho),
                q_max_difference: diff.iter().flatten().map(|v| v.abs()).reduce(f64::max),
            }
        })
        .collect();

    let displacement = match (&standard.trajectories, &modified.trajectories) {
        (Some(s), Some(m)) => s
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let d: Vec<f64> = (0..s.len())
                    .filter(|&i| s.absorbed[i].is_none_or(|at| at > k) && m.absorbed[i].is_none_or(|at| at > k))
                    .map(|i| (m.unwrapped[k][i] - s.unwrapped[k][i]).abs())
                    .collect();
                let n = d.len().max(1) as f64;
                DisplacementRow {
                    t,
                    mean: d.iter().sum::<f64>() / n,
                    rms: (d.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
                    max: d.iter().copied().fold(0.0, f64::max),
                    particles: d.len(),
                }
            })
            .collect(),
        _ => Vec::new(),
    };

    Ok(Comparison {
        standard,
        modified,
        fields,
        displacement,
    })
}
