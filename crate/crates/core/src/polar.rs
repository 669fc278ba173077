//! Polar (Madelung) split `psi = R exp(iS/hbar)` and the standard Bohmian
//! quantities derived from it.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{config, Error, Result};
use crate::grid::{gradient_complex, laplacian_real, Boundary, LatticeField, PhysicsParams, SpatialGrid};

/// Relative node threshold: sites with `R <= NODE_THRESHOLD * max R` are nodes.
pub const NODE_THRESHOLD: f64 = 1e-10;

/// Per-site amplitude `R >= 0` and phase-action `S` (units of hbar).
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    grid: SpatialGrid,
    amplitude: Vec<f64>,
    phase: Vec<f64>,
    /// Sites whose phase was continued through a node rather than measured.
    continued: Vec<bool>,
    threshold: f64,
}

impl PolarField {
    /// Builds a polar field from explicit amplitude and phase. No site is
    /// flagged as continued.
    pub fn from_parts(grid: SpatialGrid, amplitude: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        let n = grid.sites();
        for v in [&amplitude, &phase] {
            if v.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if amplitude.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(config("amplitude", "must be finite and non-negative"));
        }
        if phase.iter().any(|s| !s.is_finite()) {
            return Err(config("phase", "must be finite"));
        }
        let threshold = node_threshold(&amplitude);
        Ok(Self {
            grid,
            amplitude,
            phase,
            continued: vec![false; n],
            threshold,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn phase_mut(&mut self) -> &mut [f64] {
        &mut self.phase
    }

    pub fn continued(&self) -> &[bool] {
        &self.continued
    }

    /// Absolute node threshold `eps_R` for this field.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_node(&self, j: usize) -> bool {
        self.amplitude[j] <= self.threshold
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitude.iter().map(|r| r * r).collect()
    }
}

pub fn node_threshold(amplitude: &[f64]) -> f64 {
    NODE_THRESHOLD * amplitude.iter().cloned().fold(0.0, f64::max)
}

/// Wraps a phase-action difference into `(-pi hbar, pi hbar]`.
pub fn wrap_phase(d: f64, hbar: f64) -> f64 {
    let period = 2.0 * PI * hbar;
    d - period * (d / period).round()
}

/// Polar split with spatial phase unwrapping.
///
/// Unwrapping scans sites left to right from the first non-node site, adding
/// multiples of `2 pi hbar` so adjacent valid phases differ by less than
/// `pi hbar`. Node sites carry the last valid phase and are flagged.
pub fn to_polar(field: &LatticeField, params: &PhysicsParams) -> Result<PolarField> {
    let hbar = params.hbar;
    let amplitude: Vec<f64> = field.values().iter().map(|v| v.norm()).collect();
    let threshold = node_threshold(&amplitude);
    let first = amplitude
        .iter()
        .position(|&r| r > threshold)
        .ok_or(Error::DegenerateField)?;

    let n = amplitude.len();
    let mut phase = vec![0.0; n];
    let mut continued = vec![false; n];
    let mut last = hbar * field.values()[first].arg();
    for j in 0..n {
        if j < first || amplitude[j] <= threshold {
            continued[j] = true;
            phase[j] = last;
            continue;
        }
        let raw = hbar * field.values()[j].arg();
        let s = if j == first { raw } else { last + wrap_phase(raw - last, hbar) };
        phase[j] = s;
        last = s;
    }
    // sites before the first valid one inherit its phase
    let head = phase[first];
    phase[..first].fill(head);

    Ok(PolarField {
        grid: *field.grid(),
        amplitude,
        phase,
        continued,
        threshold,
    })
}

pub fn from_polar(polar: &PolarField, params: &PhysicsParams) -> LatticeField {
    let values = polar
        .amplitude
        .iter()
        .zip(&polar.phase)
        .map(|(&r, &s)| Complex64::from_polar(r, s / params.hbar))
        .collect();
    LatticeField::new(polar.grid, values).expect("polar field is finite and grid-shaped")
}

/// `Q_std = -(hbar^2 / 2m) lap(R) / R`, absent at nodes.
pub fn standard_quantum_potential(polar: &PolarField, params: &PhysicsParams) -> Vec<Option<f64>> {
    let lap = laplacian_real(&polar.grid, &polar.amplitude);
    let scale = -params.hbar * params.hbar / (2.0 * params.mass);
    polar
        .amplitude
        .iter()
        .zip(lap)
        .map(|(&r, l)| if r > polar.threshold { Some(scale * l / r) } else { None })
        .collect()
}

/// Spatial derivative of `S`.
///
/// Periodic grids use the probability current `hbar Im(psi* grad psi)/|psi|^2`
/// with the spectral gradient, which never sees branch cuts. Dirichlet grids
/// and node sites use branch-wrapped phase increments: central differences in
/// the interior, second-order one-sided differences at Dirichlet edges.
pub fn phase_gradient(polar: &PolarField, params: &PhysicsParams) -> Vec<f64> {
    let n = polar.amplitude.len();
    let a = polar.grid.spacing();
    let s = &polar.phase;
    let hbar = params.hbar;
    if n == 1 {
        return vec![0.0];
    }
    let inc = |j: usize, k: usize| wrap_phase(s[k] - s[j], hbar);
    match polar.grid.boundary() {
        Boundary::Periodic => {
            // hbar Im(psi* grad psi) / |psi|^2 with the spectral gradient of the
            // (periodic) field; nodes fall back to wrapped phase increments
            let psi = from_polar(polar, params);
            let grad = gradient_complex(&polar.grid, psi.values());
            (0..n)
                .map(|j| {
                    if polar.continued[j] {
                        let prev = (j + n - 1) % n;
                        let next = (j + 1) % n;
                        (inc(prev, j) + inc(j, next)) / (2.0 * a)
                    } else {
                        let p = psi.values()[j];
                        hbar * (p.conj() * grad[j]).im / p.norm_sqr()
                    }
                })
                .collect()
        }
        Boundary::Dirichlet => (0..n)
            .map(|j| {
                if n == 2 {
                    inc(0, 1) / a
                } else if j == 0 {
                    (3.0 * inc(0, 1) - inc(1, 2)) / (2.0 * a)
                } else if j == n - 1 {
                    (3.0 * inc(n - 2, n - 1) - inc(n - 3, n - 2)) / (2.0 * a)
                } else {
                    (inc(j - 1, j) + inc(j, j + 1)) / (2.0 * a)
                }
            })
            .collect(),
    }
}

/// Bohmian guidance velocity `v = grad(S) / m`.
pub fn velocity_field(polar: &PolarField, params: &PhysicsParams) -> Vec<f64> {
    phase_gradient(polar, params)
        .into_iter()
        .map(|g| g / params.mass)
        .collect()
}

/// Shifts `phase` per site by multiples of `2 pi hbar` so it lies within
/// `pi hbar` of `reference` (branch continuity across snapshots).
pub fn align_phase(reference: &[f64], phase: &mut [f64], hbar: f64) {
    for (s, r) in phase.iter_mut().zip(reference) {
        *s = r + wrap_phase(*s - r, hbar);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn grid(n: usize, a: f64, origin: f64, b: Boundary) -> SpatialGrid {
        SpatialGrid::new(n, a, origin, b).unwrap()
    }

    #[test]
    fn plane_wave_phase_is_unwrapped() {
        let g = grid(64, 0.25, -8.0, Boundary::Periodic);
        let k = 2.0 * PI * 5.0 / g.extent();
        let p = PhysicsParams { hbar: 0.7, mass: 1.0 };
        let f = LatticeField::from_fn(g, |x| Complex64::from_polar(1.0, k * x));
        let polar = to_polar(&f, &p).unwrap();
        let offset = polar.phase()[0] - p.hbar * k * g.coordinate(0);
        for j in 0..64 {
            assert!((polar.amplitude()[j] - 1.0).abs() < 1e-14);
            let expected = p.hbar * k * g.coordinate(j) + offset;
            assert!((polar.phase()[j] - expected).abs() < 1e-12);
        }
        // unwrapped phase spans more than one period
        let span = polar.phase()[63] - polar.phase()[0];
        assert!(span > 2.0 * PI * p.hbar);
        let v = velocity_field(&polar, &p);
        for vj in v {
            assert!((vj - p.hbar * k / p.mass).abs() < 1e-10);
        }
    }

    #[test]
    fn real_positive_has_zero_phase() {
        let g = grid(8, 1.0, 0.0, Boundary::Dirichlet);
        let f = LatticeField::from_fn(g, |x| Complex64::new(1.0 + x, 0.0));
        let polar = to_polar(&f, &PhysicsParams::default()).unwrap();
        assert!(polar.phase().iter().all(|&s| s == 0.0));
        assert_eq!(polar.amplitude()[3], 4.0);
    }

    #[test]
    fn degenerate_field_is_rejected() {
        let g = grid(4, 1.0, 0.0, Boundary::Periodic);
        let f = LatticeField::zeros(g);
        assert_eq!(to_polar(&f, &PhysicsParams::default()), Err(Error::DegenerateField));
    }

    #[test]
    fn nodes_are_flagged_and_continued() {
        let g = grid(5, 1.0, 0.0, Boundary::Dirichlet);
        let vals = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        let f = LatticeField::new(g, vals).unwrap();
        let polar = to_polar(&f, &PhysicsParams::default()).unwrap();
        assert_eq!(polar.continued(), &[true, false, true, false, false]);
        assert_eq!(polar.phase()[0], polar.phase()[1]);
        assert_eq!(polar.phase()[2], polar.phase()[1]);
        assert!((polar.phase()[3] - PI).abs() < 1e-15);
        assert!((polar.phase()[4] - 1.5 * PI).abs() < 1e-15);
        let q = standard_quantum_potential(&polar, &PhysicsParams::default());
        assert!(q[0].is_none() && q[2].is_none() && q[1].is_some());
    }

    #[test]
    fn from_polar_trivial_cases() {
        let g = grid(6, 0.5, 0.0, Boundary::Periodic);
        let p = PhysicsParams::default();
        let one = PolarField::from_parts(g, vec![1.0; 6], vec![0.0; 6]).unwrap();
        assert!(from_polar(&one, &p).values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let zero = PolarField::from_parts(g, vec![0.0; 6], vec![0.3; 6]).unwrap();
        assert!(from_polar(&zero, &p).values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn gaussian_quantum_potential() {
        // R = exp(-x^2/4): Q_std = 1/4 - x^2/8
        let g = grid(256, 0.125, -16.0, Boundary::Periodic);
        let amp: Vec<f64> = g.coordinates().iter().map(|x| (-x * x / 4.0).exp()).collect();
        let polar = PolarField::from_parts(g, amp, vec![0.0; 256]).unwrap();
        let q = standard_quantum_potential(&polar, &PhysicsParams::default());
        let j0 = 128;
        let j2 = 144;
        assert!((q[j0].unwrap() - 0.25).abs() < 1e-10);
        assert!((q[j2].unwrap() + 0.25).abs() < 1e-10);
    }

    #[test]
    fn cosine_amplitude_has_constant_potential() {
        // R = cos(kx) on the positive lobe (Dirichlet, finite differences)
        let k = 1.3;
        let half = PI / (2.0 * k);
        let err = |a: f64| {
            let n = (2.0 * half / a).floor() as usize - 1;
            let origin = -half + a;
            let g = grid(n, a, origin, Boundary::Dirichlet);
            let amp: Vec<f64> = g.coordinates().iter().map(|x| (k * x).cos()).collect();
            let polar = PolarField::from_parts(g, amp, vec![0.0; n]).unwrap();
            let q = standard_quantum_potential(&polar, &PhysicsParams::default());
            (n / 4..3 * n / 4)
                .map(|j| (q[j].unwrap() - 0.5 * k * k).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(0.02);
        let e2 = err(0.01);
        assert!(e1 < 1e-4, "{e1}");
        assert!((3.0..5.0).contains(&(e1 / e2)));
    }

    #[test]
    fn quadratic_phase_velocity() {
        let g = grid(41, 0.1, -2.0, Boundary::Dirichlet);
        let s: Vec<f64> = g.coordinates().iter().map(|x| 0.5 * x * x).collect();
        let polar = PolarField::from_parts(g, vec![1.0; 41], s).unwrap();
        let v = velocity_field(&polar, &PhysicsParams::default());
        for (j, vj) in v.iter().enumerate() {
            assert!((vj - g.coordinate(j)).abs() < 1e-10, "site {j}");
        }
        let still = PolarField::from_parts(g, vec![1.0; 41], vec![2.0; 41]).unwrap();
        assert!(velocity_field(&still, &PhysicsParams::default()).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn align_phase_removes_branch_jumps() {
        let mut s = vec![0.1 + 2.0 * PI, -0.2 - 4.0 * PI];
        align_phase(&[0.0, 0.0], &mut s, 1.0);
        assert!((s[0] - 0.1).abs() < 1e-12 && (s[1] + 0.2).abs() < 1e-12);
    }
}
