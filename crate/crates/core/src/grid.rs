//! Spatial lattice, physical scales and the first-quantized field container.
//!
//! Periodic grids use spectral (Fourier) derivatives; Dirichlet grids use
//! second-order central differences with zero ghost cells on both ends.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::fft;

/// Action and mass scales. Natural units (`hbar = mass = 1`) by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsParams {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

impl PhysicsParams {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        let p = Self { hbar, mass };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(config("hbar", format!("must be positive, got {}", self.hbar)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(config("mass", format!("must be positive, got {}", self.mass)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Dirichlet,
}

/// Uniform 1D lattice `x_j = origin + j * spacing`, `j in [0, sites)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    sites: usize,
    spacing: f64,
    origin: f64,
    boundary: Boundary,
}

impl SpatialGrid {
    pub fn new(sites: usize, spacing: f64, origin: f64, boundary: Boundary) -> Result<Self> {
        if sites == 0 {
            return Err(config("sites", "a grid needs at least one site"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(config("spacing", format!("must be positive, got {spacing}")));
        }
        if !origin.is_finite() {
            return Err(config("origin", "must be finite"));
        }
        Ok(Self {
            sites,
            spacing,
            origin,
            boundary,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn extent(&self) -> f64 {
        self.sites as f64 * self.spacing
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.sites).map(|j| self.coordinate(j)).collect()
    }

    /// Angular wavenumbers of the lattice in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        fft::wavenumbers(self.sites, self.spacing)
    }

    /// Discrete integral `sum_j a * f_j`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.spacing * values.iter().sum::<f64>()
    }
}

/// Complex amplitudes on a spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    grid: SpatialGrid,
    values: Vec<Complex64>,
}

impl LatticeField {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.sites() {
            return Err(Error::Shape {
                expected: grid.sites(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(config("values", "field contains non-finite amplitudes"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::default(); grid.sites()],
        }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.sites()).map(|j| f(grid.coordinate(j))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `sum_j a |psi_j|^2`
    pub fn norm(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

fn spectral(values: &[Complex64], grid: &SpatialGrid, symbol: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    fft::fft_1d(&mut buf, false);
    for (v, k) in buf.iter_mut().zip(grid.wavenumbers()) {
        *v *= symbol(k);
    }
    fft::fft_1d(&mut buf, true);
    buf
}

fn dirichlet_stencil<T>(values: &[T], f: impl Fn(T, T, T) -> T) -> Vec<T>
where
    T: Copy + Default,
{
    let n = values.len();
    (0..n)
        .map(|j| {
            let left = if j == 0 { T::default() } else { values[j - 1] };
            let right = if j + 1 == n { T::default() } else { values[j + 1] };
            f(left, values[j], right)
        })
        .collect()
}

/// Second spatial derivative of a complex field.
pub fn laplacian(field: &LatticeField) -> LatticeField {
    let grid = *field.grid();
    let values = laplacian_complex(&grid, field.values());
    LatticeField { grid, values }
}

/// First spatial derivative of a complex field.
pub fn gradient(field: &LatticeField) -> LatticeField {
    let grid = *field.grid();
    let values = gradient_complex(&grid, field.values());
    LatticeField { grid, values }
}

pub fn laplacian_complex(grid: &SpatialGrid, values: &[Complex64]) -> Vec<Complex64> {
    match grid.boundary() {
        Boundary::Periodic => spectral(values, grid, |k| Complex64::new(-k * k, 0.0)),
        Boundary::Dirichlet => {
            let inv = 1.0 / (grid.spacing() * grid.spacing());
            dirichlet_stencil(values, |l, c, r| (l - c * 2.0 + r) * inv)
        }
    }
}

pub fn gradient_complex(grid: &SpatialGrid, values: &[Complex64]) -> Vec<Complex64> {
    match grid.boundary() {
        Boundary::Periodic => spectral(values, grid, |k| Complex64::new(0.0, k)),
        Boundary::Dirichlet => {
            let inv = 0.5 / grid.spacing();
            dirichlet_stencil(values, |l, _, r| (r - l) * inv)
        }
    }
}

/// Laplacian of a real site field (real part of the complex operator).
pub fn laplacian_real(grid: &SpatialGrid, values: &[f64]) -> Vec<f64> {
    match grid.boundary() {
        Boundary::Periodic => {
            let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            laplacian_complex(grid, &c).into_iter().map(|v| v.re).collect()
        }
        Boundary::Dirichlet => {
            let inv = 1.0 / (grid.spacing() * grid.spacing());
            dirichlet_stencil(values, |l, c, r| (l - 2.0 * c + r) * inv)
        }
    }
}

/// Gradient of a real site field (real part of the complex operator).
pub fn gradient_real(grid: &SpatialGrid, values: &[f64]) -> Vec<f64> {
    match grid.boundary() {
        Boundary::Periodic => {
            let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            gradient_complex(grid, &c).into_iter().map(|v| v.re).collect()
        }
        Boundary::Dirichlet => {
            let inv = 0.5 / grid.spacing();
            dirichlet_stencil(values, |l, _, r| (r - l) * inv)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn periodic(n: usize, a: f64) -> SpatialGrid {
        SpatialGrid::new(n, a, 0.0, Boundary::Periodic).unwrap()
    }

    #[test]
    fn grid_coordinates() {
        let g = periodic(4, 0.5);
        assert_eq!(g.coordinates(), vec![0.0, 0.5, 1.0, 1.5]);
        let g = SpatialGrid::new(1, 1.0, -2.0, Boundary::Dirichlet).unwrap();
        assert_eq!(g.coordinates(), vec![-2.0]);
        assert!(matches!(
            SpatialGrid::new(0, 1.0, 0.0, Boundary::Periodic),
            Err(Error::Config { field: "sites", .. })
        ));
        assert!(matches!(
            SpatialGrid::new(3, -0.1, 0.0, Boundary::Periodic),
            Err(Error::Config { field: "spacing", .. })
        ));
    }

    #[test]
    fn params_validate() {
        assert_eq!(PhysicsParams::default(), PhysicsParams { hbar: 1.0, mass: 1.0 });
        assert!(PhysicsParams::new(0.0, 1.0).is_err());
        assert!(PhysicsParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = periodic(16, 0.3);
        let f = LatticeField::from_fn(g, |_| Complex64::new(2.5, -1.0));
        assert!(laplacian(&f).values().iter().all(|v| v.norm() < 1e-13));
        assert!(gradient(&f).values().iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn plane_wave_is_spectral_eigenfunction() {
        let n = 32;
        let a = 0.25;
        let g = periodic(n, a);
        let k = 2.0 * PI * 3.0 / (n as f64 * a);
        let f = LatticeField::from_fn(g, |x| Complex64::from_polar(1.0, k * x));
        let lap = laplacian(&f);
        let grad = gradient(&f);
        for j in 0..n {
            assert!((lap.values()[j] + k * k * f.values()[j]).norm() < 1e-11);
            assert!((grad.values()[j] - Complex64::i() * k * f.values()[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn sine_gradient_second_order_dirichlet() {
        let err = |a: f64| {
            let n = (2.0 / a) as usize;
            let g = SpatialGrid::new(n, a, 0.0, Boundary::Dirichlet).unwrap();
            let f: Vec<f64> = g.coordinates().iter().map(|x| x.sin()).collect();
            let d = gradient_real(&g, &f);
            (1..n - 1)
                .map(|j| (d[j] - g.coordinate(j).cos()).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(0.1);
        let e2 = err(0.05);
        assert!(e1 < 0.1 * 0.1);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn composition_holds_spectrally() {
        let g = periodic(24, 0.4);
        let f = LatticeField::from_fn(g, |x| Complex64::new((0.5 * x).cos().exp(), (x * 0.3).sin()));
        let lap = laplacian(&f);
        let gg = gradient(&gradient(&f));
        for (a, b) in lap.values().iter().zip(gg.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
