//! Built-in identity suite behind `check-identities`.
//!
//! Every numerical functional derivative is compared with the closed forms
//! for the Gaussian magnitude `R[psi] = exp(-|psi - c|^2 / 2)` on a single
//! site with `U = 1`, `a = 1`, where
//!
//! - `Q = ((q - c)^2 + p^2 - 2) / 4`
//! - `E = dQ/dpsi* = ((q - c) + i p) / 4`
//! - `dQ/dR = (R - c cos theta) / 2`, `dQ/dS = c R sin theta / (2 hbar)`
//! - `(d^2 R / dpsi dpsi*) / R = Q`

use std::f64::consts::PI;
use std::fmt;

use modbohm::funcspace::{functional_derivative, tabulate, ConfigGrid, DerivativeKind, FunctionalPolar};
use modbohm::modschrod::{chain_rule_check, truncation_bound, EvolutionMode, EvolutionState, Propagator};
use modbohm::polar::{to_polar, PolarField};
use modbohm::qcorr::{
    antiparticle_source, modified_quantum_potential, Convention, CorrectionFunctional, CorrectionMode, QbarMode,
};
use modbohm::{Boundary, LatticeField, PhysicsParams, PotentialSpec, SpatialGrid};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::CliError;

pub const DEFAULT_POINTS: usize = 1024;
pub const DEFAULT_HALF_WIDTH: f64 = 6.0;
/// Relative tolerance for the gradient checks at default resolution.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const CHAIN_RULE_TOLERANCE: f64 = 1e-10;
pub const REDUCTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Reported only; never fails the suite.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        write!(f, "[{tag}] {:<28} {:.3e}", self.name, self.value)?;
        if let Some(tol) = self.tolerance {
            write!(f, " (tol {tol:.1e})")?;
        }
        write!(f, "  {}", self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<CheckResult>,
}

impl IdentityReport {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityOptions {
    pub convention: Convention,
    pub qbar_mode: QbarMode,
    pub points: usize,
    pub half_width: f64,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self {
            convention: Convention::Exact,
            qbar_mode: QbarMode::Anticommutator,
            points: DEFAULT_POINTS,
            half_width: DEFAULT_HALF_WIDTH,
        }
    }
}

fn single_site() -> SpatialGrid {
    SpatialGrid::new(1, 1.0, 0.0, Boundary::Periodic).expect("unit lattice")
}

/// Correction functional for the Gaussian magnitude centred at `(c, 0)`.
pub fn gaussian_functional(points: usize, half_width: f64, c: f64, qbar: QbarMode) -> Result<CorrectionFunctional, CliError> {
    let domain = ConfigGrid::new(single_site(), half_width, points)?;
    let mag = tabulate(&domain, |x| (-((x[0] - c).powi(2) + x[1] * x[1]) / 2.0).exp());
    Ok(CorrectionFunctional::new(&FunctionalPolar::from_magnitude(domain, mag)?).with_qbar_mode(qbar))
}

/// Maximum relative errors of the numerical derivatives against the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradientErrors {
    pub extra_term: f64,
    pub dq_dr: f64,
    pub dq_ds: f64,
    pub mixed_second: f64,
    pub step: f64,
}

impl GradientErrors {
    pub fn max(&self) -> f64 {
        self.extra_term.max(self.dq_dr).max(self.dq_ds).max(self.mixed_second)
    }
}

/// `(R, theta)` probes, chosen so every oracle is well away from zero.
const PROBES: [(f64, f64); 3] = [(0.8, 2.0), (1.5, -0.7), (1.0, 1.87)];
const CENTER: f64 = 1.0;

fn polar_point(r: f64, theta: f64) -> (PolarField, LatticeField) {
    let g = single_site();
    let polar = PolarField::from_parts(g, vec![r], vec![theta]).expect("valid polar point");
    let field = LatticeField::new(g, vec![Complex64::from_polar(r, theta)]).expect("one site");
    (polar, field)
}

fn rel(num: f64, exact: f64) -> f64 {
    (num - exact).abs() / exact.abs()
}

/// Runs the gradient suite on a `points`^2 functional grid.
pub fn gradient_suite(points: usize, half_width: f64) -> Result<GradientErrors, CliError> {
    let params = PhysicsParams::default();
    let rf = gaussian_functional(points, half_width, CENTER, QbarMode::Anticommutator)?;
    let u = [1.0];
    let mut err = GradientErrors {
        extra_term: 0.0,
        dq_dr: 0.0,
        dq_ds: 0.0,
        mixed_second: 0.0,
        step: rf.domain().step(),
    };
    for (r, theta) in PROBES {
        let (polar, field) = polar_point(r, theta);
        let (q, p) = (r * theta.cos(), r * theta.sin());
        let e_exact = Complex64::new(q - CENTER, p) * 0.25;
        let e = rf.extra_term(&field, &u, CorrectionMode::Integral)?[0].ok_or(modbohm::Error::DegenerateField)?;
        err.extra_term = err.extra_term.max((e - e_exact).norm() / e_exact.norm());
        let dr = rf.dq_dr(&polar, &u, &params)?[0].ok_or(modbohm::Error::DegenerateField)?;
        err.dq_dr = err.dq_dr.max(rel(dr, 0.5 * (r - CENTER * theta.cos())));
        let ds = rf.dq_ds(&polar, &u, &params)?[0].ok_or(modbohm::Error::DegenerateField)?;
        err.dq_ds = err.dq_ds.max(rel(ds, 0.5 * CENTER * r * theta.sin() / params.hbar));
    }
    // Mixed second derivative at grid points, where the stencil is exact up to truncation.
    let domain = rf.domain().clone();
    let mag = tabulate(&domain, |x| (-((x[0] - CENTER).powi(2) + x[1] * x[1]) / 2.0).exp());
    let mixed = functional_derivative(&domain, &mag, 0, DerivativeKind::MixedSecond)?;
    for target in [[0.0, 0.0], [CENTER, 0.0], [-1.0, 1.0]] {
        let idx = domain.nearest_index(&target);
        let x = domain.point(idx);
        let exact = 0.25 * ((x[0] - CENTER).powi(2) + x[1] * x[1] - 2.0);
        err.mixed_second = err.mixed_second.max(rel(mixed[idx].re / mag[idx], exact));
    }
    Ok(err)
}

fn check(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: if value <= tolerance { Status::Pass } else { Status::Fail },
        value,
        tolerance: Some(tolerance),
        detail: detail.into(),
    }
}

fn info(name: &str, value: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        status: Status::Info,
        value,
        tolerance: None,
        detail: detail.into(),
    }
}

/// Reference field for the zero-potential reductions: a moving Gaussian on 64 sites.
fn reference_field() -> LatticeField {
    let g = SpatialGrid::new(64, 0.5, -16.0, Boundary::Periodic).expect("reference lattice");
    let norm = (2.0 * PI).powf(-0.25);
    LatticeField::from_fn(g, |x| Complex64::from_polar(norm * (-x * x / 4.0).exp(), 0.5 * x))
}

fn zero_potential_checks(opts: &IdentityOptions, out: &mut Vec<CheckResult>) -> Result<(), CliError> {
    let params = PhysicsParams::default();
    let psi0 = reference_field();
    let grid = *psi0.grid();
    let rf = {
        let domain = ConfigGrid::new(SpatialGrid::new(1, grid.spacing(), 0.0, grid.boundary())?, opts.half_width, 128)?;
        let mag = tabulate(&domain, |x| (-((x[0] - CENTER).powi(2) + x[1] * x[1]) / 2.0).exp());
        CorrectionFunctional::new(&FunctionalPolar::from_magnitude(domain, mag)?).with_qbar_mode(opts.qbar_mode)
    };
    let free = PotentialSpec::Free;
    let prop = Propagator::new(grid, params, 0.01)?;
    let mut std_state = EvolutionState::new(psi0.clone(), EvolutionMode::Standard);
    let mut mod_state = EvolutionState::new(psi0.clone(), EvolutionMode::Modified);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        prop.step_standard(&mut std_state, &free)?;
        prop.step_modified(&mut mod_state, &free, &rf, CorrectionMode::Integral)?;
        let d = std_state
            .psi
            .values()
            .iter()
            .zip(mod_state.psi.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst = worst.max(d);
    }
    out.push(check(
        "zero_potential_evolution",
        worst,
        REDUCTION_TOLERANCE,
        "max |psi_mod - psi_std| per site over 100 steps with U = 0",
    ));

    let polar = to_polar(&mod_state.psi, &params)?;
    let mq = modified_quantum_potential(&polar, &rf, &free, 0.0, &params, opts.convention)?;
    let gap = mq
        .total
        .iter()
        .zip(&mq.standard)
        .filter_map(|(t, s)| Some((t.as_ref()? - s.as_ref()?).abs()))
        .fold(0.0, f64::max);
    out.push(check(
        "zero_potential_q_reduction",
        gap,
        0.0,
        "max |Q_modified - Q_std| with U = 0 (exact)",
    ));
    Ok(())
}

/// Runs the full suite.
pub fn check_identities(opts: &IdentityOptions) -> Result<IdentityReport, CliError> {
    let mut checks = Vec::new();
    let params = PhysicsParams::default();

    let chain = chain_rule_check(params.hbar);
    checks.push(check(
        "chain_rule_exact",
        chain.max_exact_deviation(),
        CHAIN_RULE_TOLERANCE,
        "(1/psi) d/dpsi* = (1/2R) d/dR + (i hbar/2R^2) d/dS on the dual-number suite",
    ));
    if opts.convention == Convention::AsPrinted {
        let printed = chain.cases.iter().map(|c| c.printed_deviation).fold(0.0, f64::max);
        checks.push(info(
            "chain_rule_as_printed",
            printed,
            "coefficients without the 1/2 double the right-hand side (deviation ≈ factor 2); informational",
        ));
    }

    let rf = gaussian_functional(opts.points, opts.half_width, CENTER, opts.qbar_mode)?;
    let mut sum: f64 = 0.0;
    let mut diff: f64 = 0.0;
    for (r, theta) in PROBES {
        let (_, field) = polar_point(r, theta);
        let q = rf.q_density(&field, &[1.0])?[0].ok_or(modbohm::Error::DegenerateField)?;
        let qb = rf.q_bar(&field, &[1.0])?[0].ok_or(modbohm::Error::DegenerateField)?;
        sum = sum.max((qb + q).abs());
        diff = diff.max((qb - q).abs() / q.abs().max(1.0));
    }
    let h2 = truncation_bound(&[rf.domain().step()]);
    match opts.qbar_mode {
        QbarMode::Anticommutator => {
            checks.push(check("qbar_antisymmetry", sum, REDUCTION_TOLERANCE, "max |Qbar + Q| at the probes"));
            let particle = [Some(0.3), Some(-1.2), None, Some(2.5)];
            let bar = antiparticle_source(&particle, opts.qbar_mode);
            let cancel = particle
                .iter()
                .zip(&bar)
                .filter_map(|(p, b)| Some((p.as_ref()? + b.as_ref()?).abs()))
                .fold(0.0, f64::max);
            checks.push(check(
                "source_cancellation",
                cancel,
                0.0,
                "particle and antiparticle continuity sources cancel site by site",
            ));
        }
        QbarMode::Direct => {
            checks.push(info(
                "qbar_antisymmetry",
                diff,
                format!("Qbar = +Q within {h2:.1e}: the antisymmetry postulate is inactive in direct mode"),
            ));
        }
    }

    let centred = gaussian_functional(opts.points, opts.half_width, 0.0, opts.qbar_mode)?;
    let mut src: f64 = 0.0;
    for (r, theta) in PROBES {
        let (polar, _) = polar_point(r, theta);
        let ds = centred.dq_ds(&polar, &[1.0], &params)?[0].ok_or(modbohm::Error::DegenerateField)?;
        src = src.max(ds.abs() * opts.convention.source_factor().abs());
    }
    checks.push(check(
        "phase_invariance_source",
        src,
        h2,
        "max |source| for a functional of |psi| only (bound 10 h_c^2)",
    ));

    zero_potential_checks(opts, &mut checks)?;

    let g = gradient_suite(opts.points, opts.half_width)?;
    let h = g.step;
    for (name, v) in [
        ("gradient_extra_term", g.extra_term),
        ("gradient_dq_dr", g.dq_dr),
        ("gradient_dq_ds", g.dq_ds),
        ("gradient_mixed_second", g.mixed_second),
    ] {
        checks.push(check(name, v, GRADIENT_TOLERANCE, format!("max relative error, h_c = {h:.4e}")));
    }

    // Decomposition of the modified potential at the Gaussian/Gaussian point.
    let origin_rf = gaussian_functional(opts.points, opts.half_width, 0.0, opts.qbar_mode)?;
    let (polar, _) = polar_point(1.0, 0.0);
    let mq = modified_quantum_potential(&polar, &origin_rf, &PotentialSpec::Constant { value: 1.0 }, 0.0, &params, opts.convention)?;
    let added = mq.correction[0].ok_or(modbohm::Error::DegenerateField)?;
    let expected = 0.5 * opts.convention.potential_factor() / Convention::AsPrinted.potential_factor();
    checks.push(check(
        "modified_potential_addend",
        (added - expected).abs(),
        1e-3,
        format!("Q_modified - Q_std = {added:.6} at R = 1, expected {expected} for this convention"),
    ));

    Ok(IdentityReport { checks })
}
