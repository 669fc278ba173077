//! Correction functional built from the wave-functional magnitude.
//!
//! On the lattice the correction density at site `k` is
//! `Q_k = U_k / a^2 * (d^2 R / d psi_k d psi_k*) / R`, where `R` is the
//! magnitude of the wave functional evaluated at the current field
//! configuration. The ratio `G_k = (d^2 R / d psi_k d psi_k*) / R` is
//! precomputed once on the configuration grid and interpolated with a
//! tensor-cubic stencil, so the perturb-and-reevaluate derivatives below see a
//! smooth function of the configuration.
//!
//! Two layouts are supported:
//! - full: the configuration grid has one site per field site;
//! - product: a single-site magnitude `R_1` stands for the site-factorized
//!   functional `R[psi] = prod_k R_1(psi_k)`, for which `G_k = G(psi_k)`.
//!
//! Sites where the magnitude vanishes carry no pilot wave and are reported as
//! `None` ("annihilated") instead of a number.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{
    axis_first, evaluate_point, plane_laplacian, ConfigGrid, FunctionalPolar, Interpolation,
    MAGNITUDE_THRESHOLD,
};
use crate::grid::{LatticeField, PhysicsParams};
use crate::polar::{from_polar, standard_quantum_potential, PolarField};
use crate::potential::PotentialSpec;

/// How `dQ/dpsi*` is read on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    /// `(1/a) d/dpsi*_j` of the integrated `sum_k a Q_k`.
    #[default]
    Integral,
    /// `(1/a) dQ_j/dpsi*_j`, same site only.
    Local,
}

/// How the antiparticle correction is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QbarMode {
    /// `Qbar = -Q`, imposed.
    #[default]
    Anticommutator,
    /// Derivative order swapped and evaluated numerically.
    Direct,
}

/// Which coefficients the polar split of the modified equation uses.
///
/// `Exact` follows from splitting `i hbar dpsi/dt = H psi + dQ/dpsi*` with
/// `psi = R exp(iS/hbar)`: the Hamilton-Jacobi correction is
/// `(1/(2R)) dQ/dR` and the continuity source is `+dQ/dS`.
/// `AsPrinted` uses the commonly quoted forms `(1/R) dQ/dR` and `-2 dQ/dS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Exact,
    #[serde(alias = "as-printed")]
    AsPrinted,
}

impl Convention {
    /// Coefficient multiplying `(1/R) dQ/dR` in the modified potential.
    pub fn potential_factor(self) -> f64 {
        match self {
            Convention::Exact => 0.5,
            Convention::AsPrinted => 1.0,
        }
    }

    /// Coefficient multiplying `dQ/dS` in the continuity source.
    pub fn source_factor(self) -> f64 {
        match self {
            Convention::Exact => 1.0,
            Convention::AsPrinted => -2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Full,
    Product,
}

/// Precomputed curvature ratios of a wave-functional magnitude.
#[derive(Debug, Clone)]
pub struct CorrectionFunctional {
    domain: ConfigGrid,
    magnitude: Vec<f64>,
    threshold: f64,
    ratio: Vec<Vec<f64>>,
    swapped: Option<Vec<Vec<f64>>>,
    qbar_mode: QbarMode,
}

fn curvature_ratio(magnitude: &[f64], lap: Vec<f64>, threshold: f64) -> Vec<f64> {
    lap.into_par_iter()
        .zip(magnitude.par_iter())
        .map(|(l, &r)| if r > threshold { 0.25 * l / r } else { 0.0 })
        .collect()
}

impl CorrectionFunctional {
    pub fn new(polar: &FunctionalPolar) -> Self {
        let domain = polar.domain().clone();
        let magnitude = polar.magnitude().to_vec();
        let threshold = MAGNITUDE_THRESHOLD * magnitude.iter().cloned().fold(0.0, f64::max);
        let ratio = (0..domain.sites())
            .map(|j| {
                let lap = plane_laplacian(&domain, &magnitude, j);
                curvature_ratio(&magnitude, lap, threshold)
            })
            .collect();
        Self {
            domain,
            magnitude,
            threshold,
            ratio,
            swapped: None,
            qbar_mode: QbarMode::Anticommutator,
        }
    }

    /// Selects the antiparticle mode; `Direct` precomputes the swapped-order ratios.
    pub fn with_qbar_mode(mut self, mode: QbarMode) -> Self {
        self.qbar_mode = mode;
        if mode == QbarMode::Direct && self.swapped.is_none() {
            let swapped = (0..self.domain.sites())
                .map(|j| {
                    // d/dpsi* d/dpsi = (dq + i dp)(dq - i dp)/4; the imaginary
                    // commutator part vanishes for tensor-product difference
                    // operators, leaving composed first differences.
                    let (aq, ap) = (2 * j, 2 * j + 1);
                    let qq = axis_first(&self.domain, &axis_first(&self.domain, &self.magnitude, aq), aq);
                    let pp = axis_first(&self.domain, &axis_first(&self.domain, &self.magnitude, ap), ap);
                    let lap = qq.into_iter().zip(pp).map(|(a, b)| a + b).collect();
                    curvature_ratio(&self.magnitude, lap, self.threshold)
                })
                .collect();
            self.swapped = Some(swapped);
        }
        self
    }

    pub fn domain(&self) -> &ConfigGrid {
        &self.domain
    }

    pub fn qbar_mode(&self) -> QbarMode {
        self.qbar_mode
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Raw curvature ratio grid for one functional site.
    pub fn ratio_grid(&self, site: usize) -> &[f64] {
        &self.ratio[site]
    }

    /// Perturbation used by all numerical derivatives, `h_c / 4`.
    pub fn perturbation(&self) -> f64 {
        self.domain.step() / 4.0
    }

    pub fn layout(&self, config: &LatticeField) -> Result<Layout> {
        let m = self.domain.sites();
        if config.len() == m {
            Ok(Layout::Full)
        } else if m == 1 {
            Ok(Layout::Product)
        } else {
            Err(Error::Shape {
                expected: m,
                got: config.len(),
            })
        }
    }

    fn interp(&self, grid: &[f64], coords: &[f64]) -> Result<f64> {
        evaluate_point(&self.domain, grid, coords, Interpolation::Cubic)
    }

    /// Coordinates seen by the functional grid for site `k` of `coords`.
    fn view<'a>(&self, layout: Layout, coords: &'a [f64], k: usize) -> &'a [f64] {
        match layout {
            Layout::Full => coords,
            Layout::Product => &coords[2 * k..2 * k + 2],
        }
    }

    fn ratio_at(&self, layout: Layout, coords: &[f64], k: usize, swapped: bool) -> Result<f64> {
        let grids = if swapped {
            self.swapped.as_ref().expect("swapped ratios requested without direct mode")
        } else {
            &self.ratio
        };
        let grid = match layout {
            Layout::Full => &grids[k],
            Layout::Product => &grids[0],
        };
        self.interp(grid, self.view(layout, coords, k))
    }

    /// Per-site pilot-wave flags: `false` where the magnitude is at or below threshold.
    fn alive(&self, layout: Layout, coords: &[f64], sites: usize) -> Result<Vec<bool>> {
        match layout {
            Layout::Full => {
                let r = self.interp(&self.magnitude, coords)?;
                Ok(vec![r > self.threshold; sites])
            }
            Layout::Product => (0..sites)
                .map(|k| Ok(self.interp(&self.magnitude, self.view(layout, coords, k))? > self.threshold))
                .collect(),
        }
    }

    fn check_coords(&self, layout: Layout, coords: &[f64], margin: f64) -> Result<()> {
        match layout {
            Layout::Full => self.domain.check_inside(coords, margin),
            Layout::Product => self.domain.check_inside(coords, margin).map_err(|e| match e {
                Error::Domain { component, value, half_width, .. } => {
                    let site = coords.iter().position(|&c| c == value).unwrap_or(0) / 2;
                    Error::Domain { site, component, value, half_width }
                }
                other => other,
            }),
        }
    }

    /// `Q_k` for every lattice site.
    pub fn q_density(&self, config: &LatticeField, u: &[f64]) -> Result<Vec<Option<f64>>> {
        self.density(config, u, false)
    }

    fn density(&self, config: &LatticeField, u: &[f64], swapped: bool) -> Result<Vec<Option<f64>>> {
        let n = config.len();
        check_potential(u, n)?;
        if u.iter().all(|&v| v == 0.0) {
            return Ok(vec![Some(0.0); n]);
        }
        let layout = self.layout(config)?;
        let coords = crate::funcspace::config_coordinates(config);
        self.check_coords(layout, &coords, 0.0)?;
        let alive = self.alive(layout, &coords, n)?;
        let a = config.grid().spacing();
        (0..n)
            .map(|k| {
                if !alive[k] {
                    return Ok(None);
                }
                Ok(Some(u[k] / (a * a) * self.ratio_at(layout, &coords, k, swapped)?))
            })
            .collect()
    }

    /// Antiparticle correction `Qbar_k`.
    pub fn q_bar(&self, config: &LatticeField, u: &[f64]) -> Result<Vec<Option<f64>>> {
        match self.qbar_mode {
            QbarMode::Anticommutator => Ok(self
                .q_density(config, u)?
                .into_iter()
                .map(|q| q.map(|v| -v))
                .collect()),
            QbarMode::Direct => self.density(config, u, true),
        }
    }

    /// Sum over the sites that depend on site `j`, weighted by `a`: `sum_k a Q_k`.
    #[allow(clippy::too_many_arguments)]
    fn partial_total(
        &self,
        layout: Layout,
        coords: &[f64],
        u: &[f64],
        a: f64,
        j: usize,
        mode: CorrectionMode,
        swapped: bool,
    ) -> Result<f64> {
        let local = mode == CorrectionMode::Local || layout == Layout::Product;
        if local {
            return Ok(u[j] / a * self.ratio_at(layout, coords, j, swapped)?);
        }
        let mut s = 0.0;
        for (k, &uk) in u.iter().enumerate() {
            if uk != 0.0 {
                s += uk / a * self.ratio_at(layout, coords, k, swapped)?;
            }
        }
        Ok(s)
    }

    /// Central difference of the integrated correction along a direction in
    /// the `(q_j, p_j)` plane, scaled by `1/a`.
    #[allow(clippy::too_many_arguments)]
    fn directional(
        &self,
        layout: Layout,
        coords: &[f64],
        u: &[f64],
        a: f64,
        j: usize,
        dir: (f64, f64),
        step: f64,
        mode: CorrectionMode,
        swapped: bool,
    ) -> Result<f64> {
        let mut plus = coords.to_vec();
        let mut minus = coords.to_vec();
        plus[2 * j] += dir.0 * step;
        plus[2 * j + 1] += dir.1 * step;
        minus[2 * j] -= dir.0 * step;
        minus[2 * j + 1] -= dir.1 * step;
        self.check_coords(layout, &plus, 0.0)?;
        self.check_coords(layout, &minus, 0.0)?;
        let fp = self.partial_total(layout, &plus, u, a, j, mode, swapped)?;
        let fm = self.partial_total(layout, &minus, u, a, j, mode, swapped)?;
        let scale = match mode {
            CorrectionMode::Integral => 1.0 / a,
            // local reads the density derivative: (1/a) dQ_j/dpsi_j, and
            // partial_total already carries the factor a
            CorrectionMode::Local => 1.0 / (a * a),
        };
        Ok((fp - fm) / (2.0 * step) * scale)
    }

    /// `E_j = dQ/dpsi*_j`.
    pub fn extra_term(&self, config: &LatticeField, u: &[f64], mode: CorrectionMode) -> Result<Vec<Option<Complex64>>> {
        self.extra(config, u, mode, false)
    }

    /// Antiparticle counterpart `dQbar/dpsibar*_j` evaluated at `config`.
    pub fn extra_term_bar(&self, config: &LatticeField, u: &[f64], mode: CorrectionMode) -> Result<Vec<Option<Complex64>>> {
        match self.qbar_mode {
            QbarMode::Anticommutator => Ok(self
                .extra(config, u, mode, false)?
                .into_iter()
                .map(|e| e.map(|v| -v))
                .collect()),
            QbarMode::Direct => self.extra(config, u, mode, true),
        }
    }

    fn extra(&self, config: &LatticeField, u: &[f64], mode: CorrectionMode, swapped: bool) -> Result<Vec<Option<Complex64>>> {
        let n = config.len();
        check_potential(u, n)?;
        if u.iter().all(|&v| v == 0.0) {
            return Ok(vec![Some(Complex64::new(0.0, 0.0)); n]);
        }
        let layout = self.layout(config)?;
        let coords = crate::funcspace::config_coordinates(config);
        let h = self.perturbation();
        self.check_coords(layout, &coords, self.domain.step())?;
        let alive = self.alive(layout, &coords, n)?;
        let a = config.grid().spacing();
        (0..n)
            .into_par_iter()
            .map(|j| {
                if !alive[j] {
                    return Ok(None);
                }
                let dq = self.directional(layout, &coords, u, a, j, (1.0, 0.0), h, mode, swapped)?;
                let dp = self.directional(layout, &coords, u, a, j, (0.0, 1.0), h, mode, swapped)?;
                Ok(Some(Complex64::new(0.5 * dq, 0.5 * dp)))
            })
            .collect()
    }

    /// `(1/a) dQ/dR_j` at fixed phase; masked at amplitude nodes.
    pub fn dq_dr(&self, polar: &PolarField, u: &[f64], params: &PhysicsParams) -> Result<Vec<Option<f64>>> {
        self.polar_derivative(polar, u, params, false)
    }

    /// `(1/a) dQ/dS_j` at fixed amplitude; masked at amplitude nodes.
    pub fn dq_ds(&self, polar: &PolarField, u: &[f64], params: &PhysicsParams) -> Result<Vec<Option<f64>>> {
        self.polar_derivative(polar, u, params, true)
    }

    fn polar_derivative(&self, polar: &PolarField, u: &[f64], params: &PhysicsParams, phase: bool) -> Result<Vec<Option<f64>>> {
        let n = polar.amplitude().len();
        check_potential(u, n)?;
        if u.iter().all(|&v| v == 0.0) {
            return Ok(vec![Some(0.0); n]);
        }
        let config = from_polar(polar, params);
        let layout = self.layout(&config)?;
        let coords = crate::funcspace::config_coordinates(&config);
        self.check_coords(layout, &coords, self.domain.step())?;
        let alive = self.alive(layout, &coords, n)?;
        let a = config.grid().spacing();
        let h = self.perturbation();
        (0..n)
            .into_par_iter()
            .map(|j| {
                if !alive[j] || polar.is_node(j) {
                    return Ok(None);
                }
                let theta = polar.phase()[j] / params.hbar;
                let r = polar.amplitude()[j];
                if phase {
                    // S_j -> S_j +- hbar dtheta moves psi_j along i psi_j
                    let dtheta = h / r.max(1.0);
                    let mut plus = coords.clone();
                    let mut minus = coords.clone();
                    let (sp, cp) = (theta + dtheta).sin_cos();
                    let (sm, cm) = (theta - dtheta).sin_cos();
                    plus[2 * j] = r * cp;
                    plus[2 * j + 1] = r * sp;
                    minus[2 * j] = r * cm;
                    minus[2 * j + 1] = r * sm;
                    self.check_coords(layout, &plus, 0.0)?;
                    self.check_coords(layout, &minus, 0.0)?;
                    let fp = self.partial_total(layout, &plus, u, a, j, CorrectionMode::Integral, false)?;
                    let fm = self.partial_total(layout, &minus, u, a, j, CorrectionMode::Integral, false)?;
                    Ok(Some((fp - fm) / (2.0 * params.hbar * dtheta) / a))
                } else {
                    let dir = theta.sin_cos();
                    let d = self.directional(layout, &coords, u, a, j, (dir.1, dir.0), h, CorrectionMode::Integral, false)?;
                    Ok(Some(d))
                }
            })
            .collect()
    }
}

fn check_potential(u: &[f64], n: usize) -> Result<()> {
    if u.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: u.len(),
        });
    }
    Ok(())
}

/// Everything the modified dynamics needs at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct QCorrection {
    pub q_density: Vec<Option<f64>>,
    pub q_bar: Vec<Option<f64>>,
    pub extra_term: Vec<Option<Complex64>>,
    pub dq_dr: Vec<Option<f64>>,
    pub dq_dr_over_r: Vec<Option<f64>>,
    pub dq_ds: Vec<Option<f64>>,
    pub mode: CorrectionMode,
    pub qbar_mode: QbarMode,
}

impl QCorrection {
    /// Number of sites with no pilot wave.
    pub fn annihilated_sites(&self) -> usize {
        self.q_density.iter().filter(|q| q.is_none()).count()
    }
}

pub fn qcal_density(rf: &CorrectionFunctional, config: &LatticeField, u: &PotentialSpec, t: f64) -> Result<Vec<Option<f64>>> {
    rf.q_density(config, &u.evaluate(config.grid(), t)?)
}

pub fn qbar_density(rf: &CorrectionFunctional, config: &LatticeField, u: &PotentialSpec, t: f64) -> Result<Vec<Option<f64>>> {
    rf.q_bar(config, &u.evaluate(config.grid(), t)?)
}

pub fn extra_term(
    rf: &CorrectionFunctional,
    config: &LatticeField,
    u: &PotentialSpec,
    t: f64,
    mode: CorrectionMode,
) -> Result<Vec<Option<Complex64>>> {
    rf.extra_term(config, &u.evaluate(config.grid(), t)?, mode)
}

pub fn dq_dr(rf: &CorrectionFunctional, polar: &PolarField, u: &PotentialSpec, t: f64, params: &PhysicsParams) -> Result<Vec<Option<f64>>> {
    rf.dq_dr(polar, &u.evaluate(polar.grid(), t)?, params)
}

pub fn dq_ds(rf: &CorrectionFunctional, polar: &PolarField, u: &PotentialSpec, t: f64, params: &PhysicsParams) -> Result<Vec<Option<f64>>> {
    rf.dq_ds(polar, &u.evaluate(polar.grid(), t)?, params)
}

/// Full correction bundle at the field `polar` describes.
pub fn correction(
    rf: &CorrectionFunctional,
    polar: &PolarField,
    u: &PotentialSpec,
    t: f64,
    params: &PhysicsParams,
    mode: CorrectionMode,
) -> Result<QCorrection> {
    let uv = u.evaluate(polar.grid(), t)?;
    let config = from_polar(polar, params);
    let dr = rf.dq_dr(polar, &uv, params)?;
    let dr_over_r = dr
        .iter()
        .zip(polar.amplitude())
        .map(|(d, &r)| d.map(|v| v / r))
        .collect();
    Ok(QCorrection {
        q_density: rf.q_density(&config, &uv)?,
        q_bar: rf.q_bar(&config, &uv)?,
        extra_term: rf.extra_term(&config, &uv, mode)?,
        dq_dr: dr,
        dq_dr_over_r: dr_over_r,
        dq_ds: rf.dq_ds(polar, &uv, params)?,
        mode,
        qbar_mode: rf.qbar_mode(),
    })
}

/// Modified quantum potential and its two addends.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedPotential {
    pub total: Vec<Option<f64>>,
    pub standard: Vec<Option<f64>>,
    pub correction: Vec<Option<f64>>,
}

pub fn modified_quantum_potential(
    polar: &PolarField,
    rf: &CorrectionFunctional,
    u: &PotentialSpec,
    t: f64,
    params: &PhysicsParams,
    convention: Convention,
) -> Result<ModifiedPotential> {
    let standard = standard_quantum_potential(polar, params);
    let dr = dq_dr(rf, polar, u, t, params)?;
    let k = convention.potential_factor();
    let correction: Vec<Option<f64>> = dr
        .iter()
        .zip(polar.amplitude())
        .enumerate()
        .map(|(j, (d, &r))| if polar.is_node(j) { None } else { d.map(|v| k * v / r) })
        .collect();
    let total = standard
        .iter()
        .zip(&correction)
        .map(|(s, c)| match (s, c) {
            (Some(s), Some(c)) => Some(s + c),
            _ => None,
        })
        .collect();
    Ok(ModifiedPotential {
        total,
        standard,
        correction,
    })
}

/// Per-site continuity source for the particle branch.
pub fn continuity_source(
    polar: &PolarField,
    rf: &CorrectionFunctional,
    u: &PotentialSpec,
    t: f64,
    params: &PhysicsParams,
    convention: Convention,
) -> Result<Vec<Option<f64>>> {
    let k = convention.source_factor();
    Ok(dq_ds(rf, polar, u, t, params)?
        .into_iter()
        .map(|d| d.map(|v| k * v))
        .collect())
}

/// Antiparticle counterpart of a particle continuity source.
pub fn antiparticle_source(particle: &[Option<f64>], mode: QbarMode) -> Vec<Option<f64>> {
    match mode {
        QbarMode::Anticommutator => particle.iter().map(|s| s.map(|v| -v)).collect(),
        QbarMode::Direct => particle.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::tabulate;
    use crate::grid::{Boundary, SpatialGrid};

    fn gaussian(n: usize, l: f64, c: f64) -> CorrectionFunctional {
        let lattice = SpatialGrid::new(1, 1.0, 0.0, Boundary::Periodic).unwrap();
        let domain = ConfigGrid::new(lattice, l, n).unwrap();
        let mag = tabulate(&domain, |x| (-((x[0] - c).powi(2) + x[1] * x[1]) / 2.0).exp());
        CorrectionFunctional::new(&FunctionalPolar::from_magnitude(domain, mag).unwrap())
    }

    fn single(v: Complex64) -> LatticeField {
        LatticeField::new(SpatialGrid::new(1, 1.0, 0.0, Boundary::Periodic).unwrap(), vec![v]).unwrap()
    }

    #[test]
    fn zero_potential_is_exactly_zero() {
        let rf = gaussian(64, 6.0, 0.0);
        let cfg = single(Complex64::new(0.3, 0.1));
        assert_eq!(rf.q_density(&cfg, &[0.0]).unwrap(), vec![Some(0.0)]);
        assert_eq!(rf.extra_term(&cfg, &[0.0], CorrectionMode::Integral).unwrap(), vec![Some(Complex64::new(0.0, 0.0))]);
    }

    #[test]
    fn gaussian_density_and_antiparticle() {
        let rf = gaussian(256, 6.0, 0.0);
        let cfg = single(Complex64::new(0.0, 0.0));
        let q = rf.q_density(&cfg, &[1.0]).unwrap()[0].unwrap();
        assert!((q + 0.5).abs() < 1e-3, "{q}");
        let qb = rf.q_bar(&cfg, &[1.0]).unwrap()[0].unwrap();
        assert_eq!(qb, -q);
        let direct = rf.with_qbar_mode(QbarMode::Direct);
        let qd = direct.q_bar(&cfg, &[1.0]).unwrap()[0].unwrap();
        assert!((qd - q).abs() < 1e-3, "{qd} vs {q}");
    }

    #[test]
    fn extra_term_at_unit_field() {
        let rf = gaussian(256, 6.0, 0.0);
        let cfg = single(Complex64::new(1.0, 0.0));
        for mode in [CorrectionMode::Integral, CorrectionMode::Local] {
            let e = rf.extra_term(&cfg, &[1.0], mode).unwrap()[0].unwrap();
            assert!((e - Complex64::new(0.25, 0.0)).norm() < 1e-3, "{e}");
        }
    }

    #[test]
    fn far_tail_is_annihilated() {
        let rf = gaussian(64, 12.0, 0.0);
        let cfg = single(Complex64::new(8.0, 7.0));
        assert_eq!(rf.q_density(&cfg, &[1.0]).unwrap(), vec![None]);
    }

    #[test]
    fn out_of_box_is_a_domain_error() {
        let rf = gaussian(64, 4.0, 0.0);
        let cfg = single(Complex64::new(0.0, 3.99));
        assert!(matches!(
            rf.extra_term(&cfg, &[1.0], CorrectionMode::Integral),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn sources_cancel_under_anticommutator() {
        let p = vec![Some(0.3), None, Some(-1.5)];
        let a = antiparticle_source(&p, QbarMode::Anticommutator);
        for (x, y) in p.iter().zip(&a) {
            match (x, y) {
                (Some(x), Some(y)) => assert_eq!(x + y, 0.0),
                (None, None) => {}
                _ => panic!("mask mismatch"),
            }
        }
    }
}
