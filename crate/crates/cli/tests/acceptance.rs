//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use modbohm::funcdyn::{build_functional_hamiltonian, FunctionalStepper, Scheme, TimeStepperConfig};
use modbohm::funcspace::{init_wave_functional, tabulate, ConfigGrid, FunctionalPolar};
use modbohm::modschrod::{chain_rule_check, truncation_bound, EvolutionMode, EvolutionState, Propagator};
use modbohm::polar::{to_polar, velocity_field};
use modbohm::qcorr::{
    antiparticle_source, continuity_source, modified_quantum_potential, Convention, CorrectionFunctional,
    CorrectionMode, QbarMode,
};
use modbohm::trajectories::{integrate, SpaceInterpolation, TrajectoryEnsemble, VelocitySnapshot};
use modbohm::{Boundary, LatticeField, PhysicsParams, PotentialSpec, SpatialGrid};
use modbohm_cli::commands::simulate;
use modbohm_cli::identities::gradient_suite;
use modbohm_cli::run::run;
use modbohm_cli::ScenarioConfig;
use num_complex::Complex64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 64 sites, a = 0.5, box [-16, 16).
fn reference_grid() -> SpatialGrid {
    SpatialGrid::new(64, 0.5, -16.0, Boundary::Periodic).unwrap()
}

/// `(2 pi)^(-1/4) exp(-x^2/4)` times `exp(i (k x + phase))`.
fn gaussian(grid: SpatialGrid, k: f64, phase: f64) -> LatticeField {
    let norm = (2.0 * PI).powf(-0.25);
    LatticeField::from_fn(grid, |x| Complex64::from_polar(norm * (-x * x / 4.0).exp(), k * x + phase))
}

/// Site-factorized Gaussian magnitude functional centred at `(c, 0)`.
fn gaussian_rf(spacing: f64, points: usize, c: f64) -> CorrectionFunctional {
    let lattice = SpatialGrid::new(1, spacing, 0.0, Boundary::Periodic).unwrap();
    let domain = ConfigGrid::new(lattice, 6.0, points).unwrap();
    let mag = tabulate(&domain, |x| (-((x[0] - c).powi(2) + x[1] * x[1]) / 2.0).exp());
    CorrectionFunctional::new(&FunctionalPolar::from_magnitude(domain, mag).unwrap())
}

fn max_site_diff(a: &LatticeField, b: &LatticeField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let params = PhysicsParams::default();
    let grid = reference_grid();
    let psi0 = gaussian(grid, 0.7, 0.3);
    let rf = gaussian_rf(grid.spacing(), 256, 1.0);
    let prop = Propagator::new(grid, params, 0.01).unwrap();
    let u = PotentialSpec::Free;
    let mut s = EvolutionState::new(psi0.clone(), EvolutionMode::Standard);
    let mut m = EvolutionState::new(psi0, EvolutionMode::Modified);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        prop.step_standard(&mut s, &u).unwrap();
        prop.step_modified(&mut m, &u, &rf, CorrectionMode::Integral).unwrap();
        worst = worst.max(max_site_diff(&s.psi, &m.psi));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 10.0,
        format!("max |psi_mod - psi_std| over 500 steps = {worst:.3e} (tol 1e-12), {secs:.2} s"),
    )
}

/// Free-Gaussian trajectories from 16 starts in [-2, 2], positions at t = 2.
fn free_gaussian_flow(sites: usize, dt: f64) -> Vec<f64> {
    let params = PhysicsParams::default();
    let grid = SpatialGrid::new(sites, 40.0 / sites as f64, -20.0, Boundary::Periodic).unwrap();
    let psi = gaussian(grid, 0.0, 0.0);
    let prop = Propagator::new(grid, params, dt).unwrap();
    let mut state = EvolutionState::new(psi, EvolutionMode::Standard);
    let steps = (2.0 / dt).round() as usize;
    let mut history = Vec::with_capacity(steps + 1);
    let record = |st: &EvolutionState| VelocitySnapshot {
        time: st.time,
        velocity: velocity_field(&to_polar(&st.psi, &params).unwrap(), &params),
    };
    history.push(record(&state));
    for _ in 0..steps {
        prop.step_standard(&mut state, &PotentialSpec::Free).unwrap();
        history.push(record(&state));
    }
    let starts: Vec<f64> = (0..16).map(|i| -2.0 + 4.0 * i as f64 / 15.0).collect();
    let ens = TrajectoryEnsemble::new(grid, starts, 0.0, 0, SpaceInterpolation::Cubic);
    let ens = integrate(&ens, &history, dt, steps).unwrap();
    ens.unwrapped.last().unwrap().clone()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let coarse = free_gaussian_flow(512, 0.01);
    let fine = free_gaussian_flow(1024, 0.0025);
    let spread = (1.0f64 + 1.0).sqrt(); // sigma(2)/sigma0 = sqrt(1 + (2/2)^2)
    let starts: Vec<f64> = (0..16).map(|i| -2.0 + 4.0 * i as f64 / 15.0).collect();
    let err = |xs: &[f64]| {
        xs.iter()
            .zip(&starts)
            .map(|(x, x0)| (x - x0 * spread).abs() / (x0 * spread).abs())
            .fold(0.0, f64::max)
    };
    let (e_coarse, e_fine) = (err(&coarse), err(&fine));
    let cross = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        e_coarse < 1e-3 && e_fine < 1e-3 && cross < 1e-3 && secs < 30.0,
        format!(
            "max relative error at t = 2: {e_coarse:.3e} (refined run {e_fine:.3e}, runs differ by {cross:.3e}), {secs:.2} s"
        ),
    )
}

fn criterion_3() -> Outcome {
    let params = PhysicsParams::default();
    let mut drifts = Vec::new();
    for boundary in [Boundary::Periodic, Boundary::Dirichlet] {
        let grid = SpatialGrid::new(64, 0.5, -16.0, boundary).unwrap();
        let u = PotentialSpec::Harmonic {
            stiffness: 0.2,
            center: 0.0,
        };
        let prop = Propagator::new(grid, params, 0.01).unwrap();
        let mut s = EvolutionState::new(gaussian(grid, 0.8, 0.0), EvolutionMode::Standard);
        let n0 = s.norm;
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            prop.step_standard(&mut s, &u).unwrap();
            worst = worst.max((s.norm - n0).abs());
        }
        drifts.push(worst);
    }
    let mut fdrifts = Vec::new();
    for scheme in [Scheme::StrangSpectral, Scheme::CrankNicolson] {
        let lattice = SpatialGrid::new(1, 1.0, 0.0, Boundary::Dirichlet).unwrap();
        let domain = ConfigGrid::new(lattice, 6.0, 64).unwrap();
        let center = LatticeField::new(lattice, vec![Complex64::new(0.8, -0.3)]).unwrap();
        let mut psi = init_wave_functional(&domain, &center, 1.0).unwrap();
        let ham = build_functional_hamiltonian(&PotentialSpec::Constant { value: 1.0 }, &lattice, &domain, 0.0).unwrap();
        let mut stepper = FunctionalStepper::new(ham, TimeStepperConfig::new(0.01, scheme)).unwrap();
        let n0 = psi.norm();
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            stepper.step(&mut psi).unwrap();
            worst = worst.max((psi.norm() - n0).abs());
        }
        fdrifts.push(worst);
    }
    let all = drifts.iter().chain(&fdrifts).all(|d| *d < 1e-8);
    outcome(
        all,
        format!(
            "spatial drift periodic {:.2e} / dirichlet {:.2e}; functional drift strang {:.2e} / crank-nicolson {:.2e} (tol 1e-8, 1e3 steps)",
            drifts[0], drifts[1], fdrifts[0], fdrifts[1]
        ),
    )
}

/// Rates at coincidence: `(survival rate, particle-branch rate, integrated source, bound)`.
struct SurvivalProbe {
    survival_rate: f64,
    branch_rate: f64,
    source: f64,
    printed_source: f64,
    bound: f64,
}

fn survival_probe(dt: f64, points: usize) -> SurvivalProbe {
    let params = PhysicsParams::default();
    let grid = reference_grid();
    let psi0 = gaussian(grid, 0.0, PI / 2.0);
    let u = PotentialSpec::Constant { value: 1.0 };
    let rf = gaussian_rf(grid.spacing(), points, 1.0);
    let fwd = Propagator::new(grid, params, dt).unwrap();
    let bwd = Propagator::new(grid, params, -dt).unwrap();
    let mut plus = EvolutionState::new(psi0.clone(), EvolutionMode::ModifiedWithAntiparticle);
    let mut minus = plus.clone();
    fwd.step_modified(&mut plus, &u, &rf, CorrectionMode::Integral).unwrap();
    bwd.step_modified(&mut minus, &u, &rf, CorrectionMode::Integral).unwrap();
    let polar = to_polar(&psi0, &params).unwrap();
    let integrate = |c: Convention| {
        let src = continuity_source(&polar, &rf, &u, 0.0, &params, c).unwrap();
        grid.spacing() * src.iter().flatten().sum::<f64>()
    };
    SurvivalProbe {
        survival_rate: (plus.survival_norm - minus.survival_norm) / (2.0 * dt),
        branch_rate: (plus.norm - minus.norm) / (2.0 * dt),
        source: integrate(Convention::Exact),
        printed_source: integrate(Convention::AsPrinted),
        bound: truncation_bound(&[dt, rf.domain().step()]),
    }
}

const LADDER: [(f64, usize); 3] = [(0.01, 256), (0.005, 512), (0.0025, 1024)];

fn criterion_4(probes: &[SurvivalProbe]) -> Outcome {
    // Source cancellation on the scenario's own source field.
    let params = PhysicsParams::default();
    let grid = reference_grid();
    let polar = to_polar(&gaussian(grid, 0.0, PI / 2.0), &params).unwrap();
    let rf = gaussian_rf(grid.spacing(), 256, 1.0);
    let particle =
        continuity_source(&polar, &rf, &PotentialSpec::Constant { value: 1.0 }, 0.0, &params, Convention::Exact).unwrap();
    let bar = antiparticle_source(&particle, QbarMode::Anticommutator);
    let cancel = particle
        .iter()
        .zip(&bar)
        .filter_map(|(p, b)| Some((p.as_ref()? + b.as_ref()?).abs()))
        .fold(0.0, f64::max);

    let mut ok = cancel == 0.0;
    let mut parts = vec![format!("max |source + source_bar| = {cancel:.1e}")];
    for p in probes {
        ok &= p.survival_rate.abs() < p.bound && p.branch_rate.abs() >= 10.0 * p.bound;
        parts.push(format!(
            "|dS/dt| {:.2e} < bound {:.2e}, |dN/dt| {:.3}",
            p.survival_rate.abs(),
            p.bound,
            p.branch_rate.abs()
        ));
    }
    let bound_ratio = probes[0].bound / probes[1].bound;
    let rate_ratio = probes[0].survival_rate.abs() / probes[1].survival_rate.abs();
    ok &= (3.0..=5.0).contains(&bound_ratio);
    parts.push(format!("bound shrinks {bound_ratio:.2}x, survival rate {rate_ratio:.2}x"));
    outcome(ok, parts.join("; "))
}

fn criterion_5(probes: &[SurvivalProbe]) -> Outcome {
    let diffs: Vec<f64> = probes.iter().map(|p| (p.branch_rate - p.source).abs()).collect();
    let mut ok = true;
    for (p, d) in probes.iter().zip(&diffs) {
        ok &= *d < p.bound;
    }
    let r1 = diffs[0] / diffs[1];
    let r2 = diffs[1] / diffs[2];
    ok &= (3.0..=5.0).contains(&r1) && (3.0..=5.0).contains(&r2);
    outcome(
        ok,
        format!(
            "dN/dt {:.6} vs sum a*dQ/dS {:.6}: |diff| {:.2e} / {:.2e} / {:.2e} (bounds {:.1e} / {:.1e} / {:.1e}), refinement {r1:.2}x, {r2:.2}x; \
             with the -2 dQ/dS form the ratio dN/dt / source is {:.3} (not a match)",
            probes[0].branch_rate,
            probes[0].source,
            diffs[0],
            diffs[1],
            diffs[2],
            probes[0].bound,
            probes[1].bound,
            probes[2].bound,
            probes[0].branch_rate / probes[0].printed_source,
        ),
    )
}

fn criterion_6() -> Outcome {
    let params = PhysicsParams::default();
    let grid = reference_grid();
    let psi0 = gaussian(grid, 0.0, PI / 2.0);
    let u = PotentialSpec::Constant { value: 1.0 };
    let rf = gaussian_rf(grid.spacing(), 1024, 0.0);
    let polar = to_polar(&psi0, &params).unwrap();
    let src = continuity_source(&polar, &rf, &u, 0.0, &params, Convention::Exact).unwrap();
    let max_src = src.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let h2 = truncation_bound(&[rf.domain().step()]);
    let prop = Propagator::new(grid, params, 0.01).unwrap();
    let mut s = EvolutionState::new(psi0, EvolutionMode::Modified);
    let n0 = s.norm;
    let mut drift: f64 = 0.0;
    for _ in 0..500 {
        prop.step_modified(&mut s, &u, &rf, CorrectionMode::Integral).unwrap();
        drift = drift.max((s.norm - n0).abs());
    }
    outcome(
        max_src <= h2 && drift < 1e-7,
        format!("max |source| {max_src:.2e} (bound 10 h_c^2 = {h2:.2e}); norm drift over 500 steps {drift:.2e} (tol 1e-7)"),
    )
}

fn criterion_7() -> Outcome {
    let coarse = gradient_suite(1024, 6.0).unwrap();
    let fine = gradient_suite(2048, 6.0).unwrap();
    let ratios = [
        coarse.extra_term / fine.extra_term,
        coarse.dq_dr / fine.dq_dr,
        coarse.dq_ds / fine.dq_ds,
        coarse.mixed_second / fine.mixed_second,
    ];
    let chain = chain_rule_check(1.0).max_exact_deviation();
    let ok = coarse.max() < 1e-4 && ratios.iter().all(|r| (3.0..=5.0).contains(r)) && chain < 1e-10;
    outcome(
        ok,
        format!(
            "relative errors E {:.2e}, dQ/dR {:.2e}, dQ/dS {:.2e}, mixed {:.2e} (tol 1e-4); halving ratios {:.2} {:.2} {:.2} {:.2}; chain rule {chain:.1e}",
            coarse.extra_term, coarse.dq_dr, coarse.dq_ds, coarse.mixed_second, ratios[0], ratios[1], ratios[2], ratios[3]
        ),
    )
}

fn criterion_8() -> Outcome {
    let params = PhysicsParams::default();
    let sigma = 2.0;
    let grid = SpatialGrid::new(64, 1.0, -32.0, Boundary::Periodic).unwrap();
    let psi = LatticeField::from_fn(grid, |x| {
        Complex64::new((2.0 * PI * sigma * sigma).powf(-0.25) * (-x * x / (4.0 * sigma * sigma)).exp(), 0.0)
    });
    let polar = to_polar(&psi, &params).unwrap();
    let rf = gaussian_rf(1.0, 1024, 0.0);
    let u = PotentialSpec::Constant { value: 1.0 };
    let printed = modified_quantum_potential(&polar, &rf, &u, 0.0, &params, Convention::AsPrinted).unwrap();
    let exact = modified_quantum_potential(&polar, &rf, &u, 0.0, &params, Convention::Exact).unwrap();
    let (mut q_err, mut add_err, mut exact_add): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (j, x) in grid.coordinates().into_iter().enumerate() {
        if x.abs() > 3.0 * sigma {
            continue;
        }
        let q_oracle = 1.0 / (4.0 * sigma * sigma) - x * x / (8.0 * sigma.powi(4));
        let q_std = printed.standard[j].unwrap();
        q_err = q_err.max((q_std - q_oracle).abs());
        add_err = add_err.max((printed.total[j].unwrap() - q_oracle - 0.5).abs());
        exact_add = exact_add.max((exact.total[j].unwrap() - exact.standard[j].unwrap() - 0.25).abs());
    }
    let zero = modified_quantum_potential(&polar, &rf, &PotentialSpec::Free, 0.0, &params, Convention::AsPrinted).unwrap();
    let identical = zero.total == zero.standard;
    outcome(
        q_err < 1e-3 && add_err < 1e-3 && identical,
        format!(
            "|Q_std - oracle| {q_err:.2e}, |Q_mod - (oracle + 0.5)| {add_err:.2e} (tol 1e-3); Q_mod == Q_std with zero correction: {identical}; \
             exact convention gives Q_std + 0.25 (max deviation {exact_add:.2e})"
        ),
    )
}

fn criterion_9() -> Outcome {
    let cfg = ScenarioConfig::from_json(
        r#"{
            "grid": { "sites": 512, "spacing": 0.078125, "origin": -20.0 },
            "initial": { "width": 1.0, "momentum": 0.5 },
            "stepping": { "dt": 0.01, "t_end": 2.0, "output_stride": 100 },
            "trajectories": { "count": 100000, "seed": 2024, "record_stride": 100 }
        }"#,
    )
    .unwrap();
    let scenario = cfg.validate().unwrap();
    let out = run(&scenario, EvolutionMode::Standard).unwrap();
    let ens = out.trajectories.as_ref().unwrap();
    let no_crossing = ens.no_crossing();
    let mut ok = no_crossing && out.equivariance.len() == 3;
    let mut parts = Vec::new();
    for e in &out.equivariance {
        ok &= e.report.passed;
        parts.push(format!("t = {:.0}: D = {:.2e} (thr {:.2e})", e.t, e.report.statistic, e.report.threshold));
    }
    parts.push(format!("no crossing: {no_crossing}"));
    outcome(ok, format!("N = {}; {}", ens.len(), parts.join(", ")))
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().is_some_and(|x| x == "csv"))
                .then(|| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("scenario.json");
    std::fs::write(
        &config,
        r#"{
            "grid": { "sites": 64, "spacing": 0.5, "origin": -16.0 },
            "potential": { "kind": "constant", "value": 0.3 },
            "initial": { "width": 1.0, "momentum": 0.3, "phase": 1.5707963267948966 },
            "functional": { "half_width": 6.0, "points": 128, "center": [1.0, 0.0], "width": 1.0, "refresh_stride": 5 },
            "stepping": { "dt": 0.01, "t_end": 0.3, "output_stride": 5, "mode": "modified_with_antiparticle" },
            "trajectories": { "count": 5000, "seed": 99 }
        }"#,
    )
    .unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    let c = root.path().join("c");
    simulate(&config, Some(&a), None).unwrap();
    simulate(&config, Some(&b), None).unwrap();
    // re-run from the copy persisted inside the first bundle, single-threaded
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    serial.install(|| simulate(&a.join("config.json"), Some(&c), None)).unwrap();
    let (fa, fb, fc) = (read_csvs(&a), read_csvs(&b), read_csvs(&c));
    let identical = !fa.is_empty() && fa == fb && fa == fc;
    let bytes: usize = fa.iter().map(|(_, d)| d.len()).sum();
    outcome(
        identical,
        format!("{} CSV files ({bytes} bytes) byte-identical across three runs (one re-run from the persisted config on a single thread): {identical}", fa.len()),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let probes: Vec<SurvivalProbe> = LADDER.iter().map(|&(dt, n)| survival_probe(dt, n)).collect();
    let results = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(&probes),
        criterion_5(&probes),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        println!("criterion {}: {} {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
