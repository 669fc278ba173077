//! First-quantized propagation.
//!
//! All propagators are Strang splittings of `i hbar dpsi/dt = H psi (+ E)`:
//! potential half steps around a kinetic step that is spectral on periodic
//! lattices and Crank-Nicolson on Dirichlet lattices. The modified equation
//! inserts the correction term `E = dQ/dpsi*` additively between two kinetic
//! half steps, integrated with the implicit midpoint rule. No renormalization
//! is performed: norm drift of a modified branch is part of the dynamics.

mod diagnostics;
mod identity;

pub use diagnostics::{continuity_residual, hj_residual, truncation_bound, ContinuityResidual, Snapshot};
pub use identity::{chain_rule_check, chain_rule_check_with, ChainRuleCase, ChainRuleReport, TestFunction};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::fft::fft_1d;
use crate::grid::{Boundary, LatticeField, PhysicsParams, SpatialGrid};
use crate::potential::PotentialSpec;
use crate::qcorr::{CorrectionFunctional, CorrectionMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMode {
    #[default]
    Standard,
    Modified,
    ModifiedWithAntiparticle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub time: f64,
    pub psi: LatticeField,
    pub psi_bar: Option<LatticeField>,
    pub norm: f64,
    pub survival_norm: f64,
    pub mode: EvolutionMode,
    pub steps: usize,
    /// Sites without a pilot wave during the most recent correction evaluation.
    pub annihilated: usize,
}

impl EvolutionState {
    /// Starts a run; the antiparticle branch, when present, starts as a copy of `psi`.
    pub fn new(psi: LatticeField, mode: EvolutionMode) -> Self {
        let psi_bar = (mode == EvolutionMode::ModifiedWithAntiparticle).then(|| psi.clone());
        let mut s = Self {
            time: 0.0,
            psi,
            psi_bar,
            norm: 0.0,
            survival_norm: 0.0,
            mode,
            steps: 0,
            annihilated: 0,
        };
        s.refresh();
        s
    }

    /// Recomputes `norm` and `survival_norm`.
    pub fn refresh(&mut self) {
        self.norm = self.psi.norm();
        self.survival_norm = self.norm + self.psi_bar.as_ref().map_or(0.0, |b| b.norm());
    }

    pub fn antiparticle_norm(&self) -> Option<f64> {
        self.psi_bar.as_ref().map(|b| b.norm())
    }
}

/// Constant-coefficient tridiagonal system `(1 + 2b) x_j - b (x_{j-1} + x_{j+1}) = d_j`
/// with zero ghosts.
#[derive(Debug, Clone)]
struct Tridiagonal {
    beta: Complex64,
    c_prime: Vec<Complex64>,
    inv_denom: Vec<Complex64>,
}

impl Tridiagonal {
    fn new(n: usize, beta: Complex64) -> Self {
        let diag = Complex64::new(1.0, 0.0) + beta * 2.0;
        let off = -beta;
        let mut c_prime = vec![Complex64::default(); n];
        let mut inv_denom = vec![Complex64::default(); n];
        for i in 0..n {
            let den = if i == 0 { diag } else { diag - off * c_prime[i - 1] };
            inv_denom[i] = 1.0 / den;
            c_prime[i] = off * inv_denom[i];
        }
        Self { beta, c_prime, inv_denom }
    }

    /// `x <- (1 - b L)^{-1} (1 + b L) x` with `L` the zero-ghost second difference.
    fn cayley(&self, x: &mut [Complex64]) {
        let n = x.len();
        let zero = Complex64::default();
        let mut d: Vec<Complex64> = (0..n)
            .map(|j| {
                let l = if j == 0 { zero } else { x[j - 1] };
                let r = if j + 1 == n { zero } else { x[j + 1] };
                x[j] + self.beta * (l - x[j] * 2.0 + r)
            })
            .collect();
        let off = -self.beta;
        d[0] *= self.inv_denom[0];
        for i in 1..n {
            d[i] = (d[i] - off * d[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            let next = d[i + 1];
            d[i] -= self.c_prime[i] * next;
        }
        x.copy_from_slice(&d);
    }
}

#[derive(Debug, Clone)]
enum Kinetic {
    Spectral { full: Vec<Complex64>, half: Vec<Complex64> },
    CrankNicolson { full: Tridiagonal, half: Tridiagonal },
}

/// Split-step propagator for a fixed grid, physics and time step.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: SpatialGrid,
    params: PhysicsParams,
    dt: f64,
    kinetic: Kinetic,
}

impl Propagator {
    pub fn new(grid: SpatialGrid, params: PhysicsParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !dt.is_finite() {
            return Err(config("dt", "must be finite"));
        }
        let (hbar, m) = (params.hbar, params.mass);
        let kinetic = match grid.boundary() {
            Boundary::Periodic => {
                let k = grid.wavenumbers();
                let factor = |tau: f64| -> Vec<Complex64> {
                    k.iter()
                        .map(|k| Complex64::from_polar(1.0, -hbar * k * k * tau / (2.0 * m)))
                        .collect()
                };
                Kinetic::Spectral {
                    full: factor(dt),
                    half: factor(dt / 2.0),
                }
            }
            Boundary::Dirichlet => {
                let a2 = grid.spacing() * grid.spacing();
                let beta = |tau: f64| Complex64::new(0.0, hbar * tau / (4.0 * m * a2));
                Kinetic::CrankNicolson {
                    full: Tridiagonal::new(grid.sites(), beta(dt)),
                    half: Tridiagonal::new(grid.sites(), beta(dt / 2.0)),
                }
            }
        };
        Ok(Self {
            grid,
            params,
            dt,
            kinetic,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn params(&self) -> &PhysicsParams {
        &self.params
    }

    fn check(&self, psi: &LatticeField) -> Result<()> {
        if psi.grid() != &self.grid {
            return Err(Error::Shape {
                expected: self.grid.sites(),
                got: psi.len(),
            });
        }
        Ok(())
    }

    fn potential_half(&self, psi: &mut [Complex64], u: &[f64]) {
        let s = -self.dt / (2.0 * self.params.hbar);
        for (p, &v) in psi.iter_mut().zip(u) {
            if v != 0.0 {
                *p *= Complex64::from_polar(1.0, v * s);
            }
        }
    }

    fn kinetic(&self, psi: &mut [Complex64], half: bool) {
        match &self.kinetic {
            Kinetic::Spectral { full, half: h } => {
                let f = if half { h } else { full };
                fft_1d(psi, false);
                psi.iter_mut().zip(f).for_each(|(p, f)| *p *= f);
                fft_1d(psi, true);
            }
            Kinetic::CrankNicolson { full, half: h } => {
                if half { h } else { full }.cayley(psi);
            }
        }
    }

    /// Implicit midpoint update of `i hbar dpsi/dt = sign * E(psi)`, solved by
    /// fixed-point iteration from the explicit midpoint guess. The rule is
    /// time-symmetric and conserves the norm whenever `Re(psi* E) = 0`.
    fn correction_step(
        &self,
        psi: &mut LatticeField,
        u: &[f64],
        rf: &CorrectionFunctional,
        mode: CorrectionMode,
        bar: bool,
    ) -> Result<usize> {
        const MAX_ITER: usize = 50;
        let eval = |f: &LatticeField| -> Result<(Vec<Complex64>, usize)> {
            let e = if bar {
                rf.extra_term_bar(f, u, mode)?
            } else {
                rf.extra_term(f, u, mode)?
            };
            let dead = e.iter().filter(|v| v.is_none()).count();
            Ok((e.into_iter().map(|v| v.unwrap_or_default()).collect(), dead))
        };
        let coef = Complex64::new(0.0, -self.dt / self.params.hbar);
        let start = psi.values().to_vec();
        let scale = start.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(f64::MIN_POSITIVE);
        let (e0, _) = eval(psi)?;
        let mut mid = psi.clone();
        mid.values_mut()
            .iter_mut()
            .zip(&e0)
            .for_each(|(p, e)| *p += coef * 0.5 * e);
        let mut dead = 0;
        for _ in 0..MAX_ITER {
            let (e, d) = eval(&mid)?;
            dead = d;
            let mut change: f64 = 0.0;
            for ((m, s), e) in mid.values_mut().iter_mut().zip(&start).zip(&e) {
                let next = s + coef * 0.5 * e;
                change = change.max((next - *m).norm());
                *m = next;
            }
            if change <= 1e-15 * scale {
                break;
            }
        }
        // psi1 = 2 mid - psi0
        for (p, m) in psi.values_mut().iter_mut().zip(mid.values()) {
            *p = 2.0 * m - *p;
        }
        Ok(dead)
    }

    /// Advances one field by `dt` from time `t`; `correction` selects the
    /// modified (or antiparticle, when the flag is set) equation.
    pub fn evolve_field(
        &self,
        psi: &mut LatticeField,
        t: f64,
        u: &PotentialSpec,
        correction: Option<(&CorrectionFunctional, CorrectionMode, bool)>,
    ) -> Result<usize> {
        self.check(psi)?;
        if self.dt == 0.0 {
            return Ok(0);
        }
        let u0 = u.evaluate(&self.grid, t)?;
        let u1 = if u.is_static() { u0.clone() } else { u.evaluate(&self.grid, t + self.dt)? };
        let mut dead = 0;
        self.potential_half(psi.values_mut(), &u0);
        match correction {
            Some((rf, mode, bar)) if !u.is_zero() => {
                let um = if u.is_static() { u0.clone() } else { u.evaluate(&self.grid, t + self.dt / 2.0)? };
                self.kinetic(psi.values_mut(), true);
                if um.iter().any(|&v| v != 0.0) {
                    dead = self.correction_step(psi, &um, rf, mode, bar)?;
                }
                self.kinetic(psi.values_mut(), true);
            }
            _ => self.kinetic(psi.values_mut(), false),
        }
        self.potential_half(psi.values_mut(), &u1);
        Ok(dead)
    }

    fn finish(&self, state: &mut EvolutionState) -> Result<()> {
        state.time += self.dt;
        state.steps += 1;
        let finite = state.psi.is_finite() && state.psi_bar.as_ref().is_none_or(|b| b.is_finite());
        if !finite {
            return Err(Error::Blowup { step: state.steps });
        }
        state.refresh();
        Ok(())
    }

    /// Linear Schrodinger step for every branch present.
    pub fn step_standard(&self, state: &mut EvolutionState, u: &PotentialSpec) -> Result<()> {
        self.evolve_field(&mut state.psi, state.time, u, None)?;
        if let Some(bar) = state.psi_bar.as_mut() {
            self.evolve_field(bar, state.time, u, None)?;
        }
        self.finish(state)
    }

    /// Modified step: the particle branch sees `E`, the antiparticle branch
    /// (if present) its counterpart.
    pub fn step_modified(
        &self,
        state: &mut EvolutionState,
        u: &PotentialSpec,
        rf: &CorrectionFunctional,
        mode: CorrectionMode,
    ) -> Result<()> {
        let t = state.time;
        let mut dead = self.evolve_field(&mut state.psi, t, u, Some((rf, mode, false)))?;
        if let Some(bar) = state.psi_bar.as_mut() {
            dead += self.step_antiparticle(bar, t, u, rf, mode)?;
        }
        state.annihilated = dead;
        self.finish(state)
    }

    /// Advances the antiparticle branch alone; returns the annihilated-site count.
    pub fn step_antiparticle(
        &self,
        psi_bar: &mut LatticeField,
        t: f64,
        u: &PotentialSpec,
        rf: &CorrectionFunctional,
        mode: CorrectionMode,
    ) -> Result<usize> {
        self.evolve_field(psi_bar, t, u, Some((rf, mode, true)))
    }

    /// Dispatches on `state.mode`.
    pub fn step(
        &self,
        state: &mut EvolutionState,
        u: &PotentialSpec,
        rf: Option<&CorrectionFunctional>,
        mode: CorrectionMode,
    ) -> Result<()> {
        match (state.mode, rf) {
            (EvolutionMode::Standard, _) => self.step_standard(state, u),
            (_, Some(rf)) => self.step_modified(state, u, rf, mode),
            (_, None) => Err(config("functional", "modified evolution needs a correction functional")),
        }
    }
}
