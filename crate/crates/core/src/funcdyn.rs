//! Wave-functional evolution.
//!
//! The equation of motion on the configuration grid is
//!
//! ```text
//! i dPsi/dt = [ sum_j c_j Lap_j - V_cfg ] Psi,   c_j = U_j / (2a),
//! ```
//!
//! where `Lap_j` is the Laplacian in the `(q_j, p_j)` plane and
//! `V_cfg(psi) = sum_links a |(psi_{j+1} - psi_j) / a|^2` is the lattice
//! gradient energy of the configuration. Links follow the lattice boundary
//! rule: periodic lattices wrap, Dirichlet lattices add zero ghost sites at
//! both ends.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::fft::{for_each_line, wavenumbers, NdFft};
use crate::funcspace::{config_coordinates, functional_polar_split, ConfigGrid, WaveFunctional};
use crate::grid::{Boundary, LatticeField, SpatialGrid};
use crate::polar::wrap_phase;
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalHamiltonian {
    domain: ConfigGrid,
    coefficients: Vec<f64>,
    v_cfg: Vec<f64>,
}

/// Lattice gradient energy of one configuration `[q_0, p_0, q_1, p_1, ...]`.
pub fn gradient_energy(coords: &[f64], spacing: f64, boundary: Boundary) -> f64 {
    let m = coords.len() / 2;
    let site = |j: usize| Complex64::new(coords[2 * j], coords[2 * j + 1]);
    let link = |l: Complex64, r: Complex64| (r - l).norm_sqr() / spacing;
    let zero = Complex64::new(0.0, 0.0);
    match boundary {
        Boundary::Periodic => (0..m).map(|j| link(site(j), site((j + 1) % m))).sum(),
        Boundary::Dirichlet => {
            let mut e = link(zero, site(0)) + link(site(m - 1), zero);
            for j in 0..m - 1 {
                e += link(site(j), site(j + 1));
            }
            e
        }
    }
}

impl FunctionalHamiltonian {
    pub fn domain(&self) -> &ConfigGrid {
        &self.domain
    }

    /// `c_j` per functional site.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `V_cfg` at every configuration point.
    pub fn v_cfg(&self) -> &[f64] {
        &self.v_cfg
    }

    /// `H Psi` with the spectral plane Laplacian.
    pub fn apply(&self, psi: &WaveFunctional) -> Vec<Complex64> {
        let shape = self.domain.shape().to_vec();
        let nd = NdFft::new(&shape);
        let mut hat = psi.values().to_vec();
        nd.forward(&mut hat);
        let k = wavenumbers(self.domain.points_per_axis(), self.domain.step());
        let d = &self.domain;
        hat.par_iter_mut().enumerate().for_each(|(i, v)| {
            let mut s = 0.0;
            for axis in 0..d.dims() {
                let kk = k[d.axis_index(i, axis)];
                s -= self.coefficients[axis / 2] * kk * kk;
            }
            *v *= s;
        });
        nd.inverse(&mut hat);
        hat.into_par_iter()
            .zip(psi.values().par_iter())
            .zip(self.v_cfg.par_iter())
            .map(|((h, p), v)| h - p * *v)
            .collect()
    }
}

/// Builds `c_j` and `V_cfg` for `u` evaluated at time `t`.
///
/// When the functional grid holds a single site but the field lattice has
/// several, the functional stands for one representative site of a
/// site-factorized state and `c` uses the lattice average of `U`.
pub fn build_functional_hamiltonian(
    u: &PotentialSpec,
    lattice: &SpatialGrid,
    domain: &ConfigGrid,
    t: f64,
) -> Result<FunctionalHamiltonian> {
    let uv = u.evaluate(lattice, t)?;
    let m = domain.sites();
    let a = domain.lattice().spacing();
    let site_u: Vec<f64> = if lattice.sites() == m {
        uv
    } else if m == 1 {
        vec![uv.iter().sum::<f64>() / uv.len() as f64]
    } else {
        return Err(Error::Shape {
            expected: m,
            got: lattice.sites(),
        });
    };
    let coefficients = site_u.iter().map(|u| u / (2.0 * a)).collect();
    let boundary = domain.lattice().boundary();
    let v_cfg = (0..domain.total_points())
        .into_par_iter()
        .map(|i| gradient_energy(&domain.point(i), a, boundary))
        .collect();
    Ok(FunctionalHamiltonian {
        domain: domain.clone(),
        coefficients,
        v_cfg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    StrangSpectral,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub steps_per_output: usize,
}

impl TimeStepperConfig {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            scheme,
            steps_per_output: 1,
        }
    }
}

/// Cyclic constant-coefficient tridiagonal solver (Sherman-Morrison on top of
/// the Thomas algorithm) for `(1 + alpha L) x = d`, `L = [1, -2, 1]` periodic.
#[derive(Debug, Clone)]
struct Cyclic {
    alpha: Complex64,
    c_prime: Vec<Complex64>,
    inv_denom: Vec<Complex64>,
    z: Vec<Complex64>,
    gamma: Complex64,
    vz: Complex64,
}

impl Cyclic {
    fn new(n: usize, alpha: Complex64) -> Self {
        let diag = Complex64::new(1.0, 0.0) - alpha * 2.0;
        let off = alpha;
        let gamma = -diag;
        let mut b = vec![diag; n];
        b[0] = diag - gamma;
        b[n - 1] = diag - off * off / gamma;
        let mut c_prime = vec![Complex64::default(); n];
        let mut inv_denom = vec![Complex64::default(); n];
        for i in 0..n {
            let den = if i == 0 { b[0] } else { b[i] - off * c_prime[i - 1] };
            inv_denom[i] = 1.0 / den;
            c_prime[i] = off * inv_denom[i];
        }
        let mut me = Self {
            alpha,
            c_prime,
            inv_denom,
            z: Vec::new(),
            gamma,
            vz: Complex64::default(),
        };
        let mut u = vec![Complex64::default(); n];
        u[0] = gamma;
        u[n - 1] = off;
        me.thomas(&mut u);
        me.vz = u[0] + off / gamma * u[n - 1];
        me.z = u;
        me
    }

    fn thomas(&self, d: &mut [Complex64]) {
        let n = d.len();
        let off = self.alpha;
        d[0] *= self.inv_denom[0];
        for i in 1..n {
            d[i] = (d[i] - off * d[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            let next = d[i + 1];
            d[i] -= self.c_prime[i] * next;
        }
    }

    /// One Crank-Nicolson update of a periodic line in place.
    fn step(&self, line: &mut [Complex64], rhs: &mut Vec<Complex64>) {
        let n = line.len();
        rhs.clear();
        rhs.extend((0..n).map(|i| {
            let l = line[(i + n - 1) % n];
            let r = line[(i + 1) % n];
            line[i] - self.alpha * (l - line[i] * 2.0 + r)
        }));
        self.thomas(rhs);
        let vy = rhs[0] + self.alpha / self.gamma * rhs[n - 1];
        let f = vy / (Complex64::new(1.0, 0.0) + self.vz);
        for i in 0..n {
            line[i] = rhs[i] - f * self.z[i];
        }
    }
}

/// Reusable propagator with cached transforms and phase factors.
pub struct FunctionalStepper {
    ham: FunctionalHamiltonian,
    cfg: TimeStepperConfig,
    fft: NdFft,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    cn: Vec<Cyclic>,
    steps: usize,
}

impl FunctionalStepper {
    pub fn new(ham: FunctionalHamiltonian, cfg: TimeStepperConfig) -> Result<Self> {
        if !cfg.dt.is_finite() {
            return Err(config("dt", "must be finite"));
        }
        let d = ham.domain.clone();
        let dt = cfg.dt;
        let k = wavenumbers(d.points_per_axis(), d.step());
        let kmax = std::f64::consts::PI / d.step();
        let cmax = ham.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let vmax = ham.v_cfg.iter().cloned().fold(0.0, f64::max);
        let guide = 0.1 / (cmax * kmax * kmax).max(vmax).max(f64::MIN_POSITIVE);
        if dt.abs() > guide {
            log::warn!("functional dt = {dt} exceeds the accuracy guidance {guide:.3e}");
        }
        let half_potential = ham
            .v_cfg
            .par_iter()
            .map(|v| Complex64::from_polar(1.0, v * dt / 2.0))
            .collect();
        let (kinetic, cn) = match cfg.scheme {
            Scheme::StrangSpectral => {
                let kinetic = (0..d.total_points())
                    .into_par_iter()
                    .map(|i| {
                        let mut phase = 0.0;
                        for axis in 0..d.dims() {
                            let kk = k[d.axis_index(i, axis)];
                            phase += ham.coefficients[axis / 2] * kk * kk;
                        }
                        Complex64::from_polar(1.0, phase * dt)
                    })
                    .collect();
                (kinetic, Vec::new())
            }
            Scheme::CrankNicolson => {
                let h2 = d.step() * d.step();
                let cn = (0..d.dims())
                    .map(|axis| {
                        let alpha = Complex64::new(0.0, ham.coefficients[axis / 2] * dt / (2.0 * h2));
                        Cyclic::new(d.points_per_axis(), alpha)
                    })
                    .collect();
                (Vec::new(), cn)
            }
        };
        Ok(Self {
            fft: NdFft::new(d.shape()),
            ham,
            cfg,
            half_potential,
            kinetic,
            cn,
            steps: 0,
        })
    }

    pub fn hamiltonian(&self) -> &FunctionalHamiltonian {
        &self.ham
    }

    pub fn config(&self) -> &TimeStepperConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self, psi: &mut WaveFunctional) -> Result<()> {
        if psi.domain() != &self.ham.domain {
            return Err(Error::Shape {
                expected: self.ham.domain.total_points(),
                got: psi.values().len(),
            });
        }
        self.steps += 1;
        if self.cfg.dt == 0.0 {
            return Ok(());
        }
        let values = psi.values_mut();
        multiply(values, &self.half_potential);
        match self.cfg.scheme {
            Scheme::StrangSpectral => {
                self.fft.forward(values);
                multiply(values, &self.kinetic);
                self.fft.inverse(values);
            }
            Scheme::CrankNicolson => {
                let shape = self.ham.domain.shape().to_vec();
                for (axis, solver) in self.cn.iter().enumerate() {
                    for_each_line(&shape, values, axis, Vec::new, |rhs, line| solver.step(line, rhs));
                }
            }
        }
        multiply(values, &self.half_potential);
        if !psi.is_finite() {
            return Err(Error::Blowup { step: self.steps });
        }
        Ok(())
    }
}

fn multiply(values: &mut [Complex64], factors: &[Complex64]) {
    values
        .par_iter_mut()
        .zip(factors.par_iter())
        .for_each(|(v, f)| *v *= f);
}

/// Advances `psi` by one step of `cfg.dt`.
pub fn step_functional(psi: &WaveFunctional, ham: &FunctionalHamiltonian, cfg: &TimeStepperConfig) -> Result<WaveFunctional> {
    let mut stepper = FunctionalStepper::new(ham.clone(), *cfg)?;
    let mut out = psi.clone();
    stepper.step(&mut out)?;
    Ok(out)
}

/// Polar residuals of the functional equation at one probe configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResidual {
    /// Grid point the probe was snapped to.
    pub coords: Vec<f64>,
    /// `-dS/dt` minus the real-part right-hand side.
    pub real: f64,
    /// `(dR/dt)/R` minus the imaginary part of the directly split equation.
    pub imaginary: f64,
    /// Same, against the asymmetric pairing `dR/dpsi dS/dpsi*` alone.
    pub imaginary_printed: f64,
    /// `|central difference of Psi - (-i H Psi)|` at the probe.
    pub time_derivative: f64,
    /// `R` at the probe, for scale.
    pub magnitude: f64,
}

fn first_at(values: &[f64], i: usize, s: usize, h: f64, wrap: bool) -> f64 {
    let d = values[i + s] - values[i - s];
    let d = if wrap { wrap_phase(d, 1.0) } else { d };
    d / (2.0 * h)
}

fn plane_lap_at(values: &[f64], i: usize, sq: usize, sp: usize, h: f64, wrap: bool) -> f64 {
    let c = values[i];
    let rel = |k: usize| {
        let d = values[k] - c;
        if wrap {
            wrap_phase(d, 1.0)
        } else {
            d
        }
    };
    let edges = rel(i + sq) + rel(i - sq) + rel(i + sp) + rel(i - sp);
    let corners = rel(i + sq + sp) + rel(i + sq - sp) + rel(i - sq + sp) + rel(i - sq - sp);
    (4.0 * edges + corners) / (6.0 * h * h)
}

/// Checks the polar split of the functional equation at `probes`, using the
/// last three snapshots of `history` spaced by `dt`.
pub fn functional_residual_probe(
    history: &[WaveFunctional],
    dt: f64,
    ham: &FunctionalHamiltonian,
    probes: &[LatticeField],
) -> Result<Vec<ProbeResidual>> {
    if history.len() < 3 {
        return Err(Error::History {
            needed: 3,
            got: history.len(),
        });
    }
    let n = history.len();
    let (prev, mid, next) = (&history[n - 3], &history[n - 2], &history[n - 1]);
    let d = ham.domain();
    let pm = functional_polar_split(mid);
    let pp = functional_polar_split(prev);
    let pn = functional_polar_split(next);
    let h_psi = ham.apply(mid);
    let a = d.lattice().spacing();
    let h = d.step();
    let points = d.points_per_axis();
    probes
        .iter()
        .map(|probe| {
            if probe.len() != d.sites() {
                return Err(Error::Shape {
                    expected: d.sites(),
                    got: probe.len(),
                });
            }
            let coords = config_coordinates(probe);
            d.check_inside(&coords, h)?;
            let i = d.nearest_index(&coords);
            if (0..d.dims()).any(|ax| {
                let k = d.axis_index(i, ax);
                k == 0 || k == points - 1
            }) {
                return Err(d.check_inside(&coords, 2.0 * h).unwrap_err());
            }
            let r = pm.magnitude();
            let s = pm.phase();
            let r0 = r[i];
            let s_dot = wrap_phase(pn.phase()[i] - pp.phase()[i], 1.0) / (2.0 * dt);
            let r_dot = (pn.magnitude()[i] - pp.magnitude()[i]) / (2.0 * dt);
            let mut real_rhs = -ham.v_cfg()[i];
            let mut imag_rhs = 0.0;
            let mut imag_printed = 0.0;
            for (j, &c) in ham.coefficients().iter().enumerate() {
                let u = 2.0 * a * c;
                let (sq, sp) = (d.strides()[2 * j], d.strides()[2 * j + 1]);
                // lattice Wirtinger derivatives: d/dpsi = (dq - i dp)/(2a)
                let rq = first_at(r, i, sq, h, false);
                let rp = first_at(r, i, sp, h, false);
                let sq_ = first_at(s, i, sq, h, true);
                let sp_ = first_at(s, i, sp, h, true);
                let dr = Complex64::new(rq, -rp) / (2.0 * a);
                let dr_star = dr.conj();
                let ds = Complex64::new(sq_, -sp_) / (2.0 * a);
                let ds_star = ds.conj();
                let mixed_r = plane_lap_at(r, i, sq, sp, h, false) / (4.0 * a * a);
                let mixed_s = plane_lap_at(s, i, sq, sp, h, true) / (4.0 * a * a);
                real_rhs += 2.0 * a * u * (mixed_r / r0 - (ds * ds_star).re);
                imag_rhs += 2.0 * a * u * (((dr * ds_star + ds * dr_star) / r0).re + mixed_s);
                imag_printed += a * (2.0 * u / r0 * (dr * dr_star + dr * ds_star).re + 2.0 * u * mixed_s);
            }
            let psi_dot = (next.values()[i] - prev.values()[i]) / (2.0 * dt);
            let exact = Complex64::new(0.0, -1.0) * h_psi[i];
            Ok(ProbeResidual {
                coords: d.point(i),
                real: -s_dot - real_rhs,
                imaginary: r_dot / r0 - imag_rhs,
                imaginary_printed: r_dot / r0 - imag_printed,
                time_derivative: (psi_dot - exact).norm(),
                magnitude: r0,
            })
        })
        .collect()
}
