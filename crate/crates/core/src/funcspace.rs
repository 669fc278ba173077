//! Discretized field-configuration space.
//!
//! A lattice of `M` sites maps to a `2M`-dimensional box: site `j` contributes
//! the axes `q_j = Re psi_j` (axis `2j`) and `p_j = Im psi_j` (axis `2j + 1`).
//! Each axis carries `n_c` points `-L_c + i h_c`, `h_c = 2 L_c / n_c`, stored
//! row-major with the last axis fastest.
//!
//! Functional derivatives use the lattice rule `delta/delta psi(x_j) = (1/a) d/d psi_j`
//! with exact Wirtinger factors:
//! `d/d psi = (d_q - i d_p)/2`, `d/d psi* = (d_q + i d_p)/2`, and the mixed second
//! derivative `d^2/(d psi d psi*) = (d_q^2 + d_p^2)/4`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, Component, Error, Result};
use crate::grid::{LatticeField, SpatialGrid};

/// Default ceiling on the number of configuration-grid points.
pub const DEFAULT_POINT_CAP: usize = 1 << 24;

/// Relative magnitude threshold for the wave functional.
pub const MAGNITUDE_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigGrid {
    lattice: SpatialGrid,
    half_width: f64,
    points: usize,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl ConfigGrid {
    pub fn new(lattice: SpatialGrid, half_width: f64, points: usize) -> Result<Self> {
        Self::with_cap(lattice, half_width, points, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(lattice: SpatialGrid, half_width: f64, points: usize, cap: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(config("half_width", format!("must be positive, got {half_width}")));
        }
        if points < 8 || !points.is_multiple_of(2) {
            return Err(config("points", format!("must be even and at least 8, got {points}")));
        }
        let dims = 2 * lattice.sites();
        let total = (0..dims).try_fold(1usize, |acc, _| acc.checked_mul(points));
        match total {
            Some(t) if t <= cap => {}
            _ => {
                return Err(config(
                    "points",
                    format!("{points}^{dims} configuration points exceed the cap of {cap}"),
                ))
            }
        }
        let shape = vec![points; dims];
        let mut strides = vec![1usize; dims];
        for d in (0..dims.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * shape[d + 1];
        }
        Ok(Self {
            lattice,
            half_width,
            points,
            shape,
            strides,
        })
    }

    pub fn lattice(&self) -> &SpatialGrid {
        &self.lattice
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn total_points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Per-axis spacing `h_c`.
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Volume element `h_c^(2M)`.
    pub fn cell_volume(&self) -> f64 {
        self.step().powi(self.dims() as i32)
    }

    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    pub fn axis_coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.axis_coordinate(i)).collect()
    }

    /// Largest coordinate present on the grid.
    pub fn upper_edge(&self) -> f64 {
        self.axis_coordinate(self.points - 1)
    }

    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.strides[axis]) % self.shape[axis]
    }

    /// Coordinates `[q_0, p_0, q_1, p_1, ...]` of a flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        (0..self.dims())
            .map(|d| self.axis_coordinate(self.axis_index(flat, d)))
            .collect()
    }

    /// Flat index of the grid point nearest to `coords` (clamped to the box).
    pub fn nearest_index(&self, coords: &[f64]) -> usize {
        coords
            .iter()
            .enumerate()
            .map(|(d, &x)| {
                let i = ((x + self.half_width) / self.step()).round();
                let i = i.clamp(0.0, (self.points - 1) as f64) as usize;
                i * self.strides[d]
            })
            .sum()
    }

    /// Checks that `coords` lies inside the grid hull, optionally with a margin.
    pub fn check_inside(&self, coords: &[f64], margin: f64) -> Result<()> {
        let lo = -self.half_width + margin;
        let hi = self.upper_edge() - margin;
        for (d, &x) in coords.iter().enumerate() {
            if !(x >= lo && x <= hi) {
                return Err(Error::Domain {
                    site: d / 2,
                    component: if d % 2 == 0 { Component::Real } else { Component::Imag },
                    value: x,
                    half_width: self.half_width,
                });
            }
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.total_points() {
            return Err(Error::Shape {
                expected: self.total_points(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Flattens a lattice configuration into configuration-space coordinates.
pub fn config_coordinates(config: &LatticeField) -> Vec<f64> {
    config.values().iter().flat_map(|v| [v.re, v.im]).collect()
}

/// Values that can live on a configuration grid.
pub trait GridValue:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
}

impl GridValue for f64 {}
impl GridValue for Complex64 {}

/// Wave functional `Psi[psi]` sampled on a configuration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunctional {
    domain: ConfigGrid,
    values: Vec<Complex64>,
}

impl WaveFunctional {
    pub fn new(domain: ConfigGrid, values: Vec<Complex64>) -> Result<Self> {
        domain.check_len(values.len())?;
        Ok(Self { domain, values })
    }

    pub fn domain(&self) -> &ConfigGrid {
        &self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// `sum |Psi|^2 h_c^(2M)`
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.domain.cell_volume()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let s = 1.0 / n.sqrt();
            self.values.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest `|Psi|` on the outermost layer of the box.
    pub fn edge_magnitude(&self) -> f64 {
        let n = self.domain.points_per_axis();
        (0..self.values.len())
            .filter(|&i| {
                (0..self.domain.dims()).any(|d| {
                    let k = self.domain.axis_index(i, d);
                    k == 0 || k == n - 1
                })
            })
            .map(|i| self.values[i].norm())
            .fold(0.0, f64::max)
    }
}

/// Builds a separable function `prod_d factor_d(x_d)` over the grid.
pub fn separable<T, F>(domain: &ConfigGrid, factor: F) -> Vec<T>
where
    T: GridValue + Mul<Output = T>,
    F: Fn(usize, f64) -> T + Sync,
{
    let axes: Vec<Vec<T>> = (0..domain.dims())
        .map(|d| domain.axis_coordinates().into_iter().map(|x| factor(d, x)).collect())
        .collect();
    (0..domain.total_points())
        .into_par_iter()
        .map(|i| {
            let mut acc = axes[0][domain.axis_index(i, 0)];
            for (d, axis) in axes.iter().enumerate().skip(1) {
                acc = acc * axis[domain.axis_index(i, d)];
            }
            acc
        })
        .collect()
}

/// Evaluates an arbitrary function of the configuration coordinates on the grid.
pub fn tabulate<T, F>(domain: &ConfigGrid, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64]) -> T + Sync,
{
    (0..domain.total_points())
        .into_par_iter()
        .map(|i| f(&domain.point(i)))
        .collect()
}

/// Gaussian wave functional `exp(-sum_j |psi_j - c_j|^2 / (2 w^2))`, normalized.
pub fn init_wave_functional(domain: &ConfigGrid, center: &LatticeField, width: f64) -> Result<WaveFunctional> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(config("width", format!("must be positive, got {width}")));
    }
    if center.len() != domain.sites() {
        return Err(Error::Shape {
            expected: domain.sites(),
            got: center.len(),
        });
    }
    let c = config_coordinates(center);
    for (d, x) in c.iter().enumerate() {
        if x.abs() + 4.0 * width >= domain.half_width() {
            log::warn!(
                "functional center component {d} = {x} lies within 4 widths of the box edge (half width {})",
                domain.half_width()
            );
        }
    }
    let inv = 1.0 / (2.0 * width * width);
    let values: Vec<Complex64> = separable(domain, |d, x| {
        let dx = x - c[d];
        Complex64::new((-dx * dx * inv).exp(), 0.0)
    });
    let mut psi = WaveFunctional::new(domain.clone(), values)?;
    psi.normalize();
    Ok(psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKind {
    WrtPsi,
    WrtPsiStar,
    MixedSecond,
}

/// Second-order first derivative along one axis; one-sided at the edges.
pub fn axis_first<T: GridValue>(domain: &ConfigGrid, f: &[T], axis: usize) -> Vec<T> {
    let n = domain.points_per_axis();
    let s = domain.strides()[axis];
    let inv = 1.0 / (2.0 * domain.step());
    (0..f.len())
        .into_par_iter()
        .map(|i| {
            let k = domain.axis_index(i, axis);
            if k == 0 {
                (f[i + s] * 4.0 - f[i] * 3.0 - f[i + 2 * s]) * inv
            } else if k == n - 1 {
                (f[i] * 3.0 - f[i - s] * 4.0 + f[i - 2 * s]) * inv
            } else {
                (f[i + s] - f[i - s]) * inv
            }
        })
        .collect()
}

fn axis_second_at<T: GridValue>(f: &[T], i: usize, k: usize, n: usize, s: usize, inv: f64) -> T {
    if k == 0 {
        (f[i] * 2.0 - f[i + s] * 5.0 + f[i + 2 * s] * 4.0 - f[i + 3 * s]) * inv
    } else if k == n - 1 {
        (f[i] * 2.0 - f[i - s] * 5.0 + f[i - 2 * s] * 4.0 - f[i - 3 * s]) * inv
    } else {
        (f[i + s] - f[i] * 2.0 + f[i - s]) * inv
    }
}

/// Raw plane Laplacian `(d_q^2 + d_p^2)` for one site, without lattice factors.
///
/// Interior points use the isotropic nine-point stencil, whose leading error
/// is rotation invariant in the `(q, p)` plane; edge points fall back to
/// axis-wise one-sided differences.
pub fn plane_laplacian<T: GridValue>(domain: &ConfigGrid, f: &[T], site: usize) -> Vec<T> {
    let n = domain.points_per_axis();
    let (aq, ap) = (2 * site, 2 * site + 1);
    let (sq, sp) = (domain.strides()[aq], domain.strides()[ap]);
    let h2 = domain.step() * domain.step();
    let inv2 = 1.0 / h2;
    let inv6 = 1.0 / (6.0 * h2);
    (0..f.len())
        .into_par_iter()
        .map(|i| {
            let kq = domain.axis_index(i, aq);
            let kp = domain.axis_index(i, ap);
            if kq == 0 || kq == n - 1 || kp == 0 || kp == n - 1 {
                axis_second_at(f, i, kq, n, sq, inv2) + axis_second_at(f, i, kp, n, sp, inv2)
            } else {
                let edges = f[i + sq] + f[i - sq] + f[i + sp] + f[i - sp];
                let corners = f[i + sq + sp] + f[i + sq - sp] + f[i - sq + sp] + f[i - sq - sp];
                (edges * 4.0 + corners - f[i] * 20.0) * inv6
            }
        })
        .collect()
}

/// Lattice functional derivative at every configuration point.
pub fn functional_derivative<T>(domain: &ConfigGrid, f: &[T], site: usize, kind: DerivativeKind) -> Result<Vec<Complex64>>
where
    T: GridValue + Into<Complex64>,
{
    domain.check_len(f.len())?;
    if site >= domain.sites() {
        return Err(Error::Index {
            index: site,
            len: domain.sites(),
        });
    }
    let a = domain.lattice().spacing();
    let out = match kind {
        DerivativeKind::MixedSecond => {
            let scale = 0.25 / (a * a);
            plane_laplacian(domain, f, site)
                .into_iter()
                .map(|v| v.into() * scale)
                .collect()
        }
        DerivativeKind::WrtPsi | DerivativeKind::WrtPsiStar => {
            let dq = axis_first(domain, f, 2 * site);
            let dp = axis_first(domain, f, 2 * site + 1);
            let sign = if kind == DerivativeKind::WrtPsi { -1.0 } else { 1.0 };
            let scale = 0.5 / a;
            dq.into_iter()
                .zip(dp)
                .map(|(q, p)| (q.into() + Complex64::new(0.0, sign) * p.into()) * scale)
                .collect()
        }
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Multilinear,
    /// Tensor-product four-point Lagrange interpolation.
    Cubic,
}

/// Interpolates grid values at a configuration (`config` has one site per lattice site).
pub fn evaluate_functional_at<T: GridValue>(domain: &ConfigGrid, f: &[T], config: &LatticeField) -> Result<T> {
    if config.len() != domain.sites() {
        return Err(Error::Shape {
            expected: domain.sites(),
            got: config.len(),
        });
    }
    evaluate_point(domain, f, &config_coordinates(config), Interpolation::Multilinear)
}

/// Interpolates grid values at raw coordinates `[q_0, p_0, ...]`.
pub fn evaluate_point<T: GridValue>(domain: &ConfigGrid, f: &[T], coords: &[f64], interp: Interpolation) -> Result<T> {
    domain.check_len(f.len())?;
    if coords.len() != domain.dims() {
        return Err(Error::Shape {
            expected: domain.dims(),
            got: coords.len(),
        });
    }
    domain.check_inside(coords, 0.0)?;
    let h = domain.step();
    let n = domain.points_per_axis();
    let dims = domain.dims();
    let width = match interp {
        Interpolation::Multilinear => 2usize,
        Interpolation::Cubic => 4,
    };
    // per axis: base index and stencil weights
    let mut base = Vec::with_capacity(dims);
    let mut weights = Vec::with_capacity(dims);
    for &x in coords {
        let u = (x + domain.half_width()) / h;
        let cell = (u.floor() as usize).min(n - 2);
        match interp {
            Interpolation::Multilinear => {
                let t = u - cell as f64;
                base.push(cell);
                weights.push([1.0 - t, t, 0.0, 0.0]);
            }
            Interpolation::Cubic => {
                let start = cell.saturating_sub(1).min(n - 4);
                let t = u - start as f64;
                let w0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
                let w1 = t * (t - 2.0) * (t - 3.0) / 2.0;
                let w2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
                let w3 = t * (t - 1.0) * (t - 2.0) / 6.0;
                base.push(start);
                weights.push([w0, w1, w2, w3]);
            }
        }
    }
    let strides = domain.strides();
    let corners = width.pow(dims as u32);
    let mut acc = T::default();
    for c in 0..corners {
        let mut rem = c;
        let mut idx = 0;
        let mut w = 1.0;
        for d in (0..dims).rev() {
            let o = rem % width;
            rem /= width;
            idx += (base[d] + o) * strides[d];
            w *= weights[d][o];
        }
        if w != 0.0 {
            acc = acc + f[idx] * w;
        }
    }
    Ok(acc)
}

/// Magnitude and phase of a wave functional.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalPolar {
    domain: ConfigGrid,
    magnitude: Vec<f64>,
    phase: Vec<f64>,
    /// Points at or below the magnitude threshold; their phase is not measured.
    continued: Vec<bool>,
    threshold: f64,
}

impl FunctionalPolar {
    /// Wraps a closed-form or externally computed magnitude (phase zero).
    pub fn from_magnitude(domain: ConfigGrid, magnitude: Vec<f64>) -> Result<Self> {
        domain.check_len(magnitude.len())?;
        if magnitude.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(config("magnitude", "must be finite and non-negative"));
        }
        let threshold = MAGNITUDE_THRESHOLD * magnitude.iter().cloned().fold(0.0, f64::max);
        let continued = magnitude.iter().map(|&m| m <= threshold).collect();
        let phase = vec![0.0; magnitude.len()];
        Ok(Self {
            domain,
            magnitude,
            phase,
            continued,
            threshold,
        })
    }

    pub fn domain(&self) -> &ConfigGrid {
        &self.domain
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn continued(&self) -> &[bool] {
        &self.continued
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// `R = |Psi|`, `S = arg Psi` pointwise. Sub-threshold points keep the raw
/// argument and are flagged; no global unwrapping is attempted.
pub fn functional_polar_split(psi: &WaveFunctional) -> FunctionalPolar {
    let magnitude: Vec<f64> = psi.values().iter().map(|v| v.norm()).collect();
    let threshold = MAGNITUDE_THRESHOLD * magnitude.iter().cloned().fold(0.0, f64::max);
    let phase = psi.values().iter().map(|v| v.arg()).collect();
    let continued = magnitude.iter().map(|&m| m <= threshold).collect();
    FunctionalPolar {
        domain: psi.domain().clone(),
        magnitude,
        phase,
        continued,
        threshold,
    }
}
