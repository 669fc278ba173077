//! Bohmian trajectory ensembles.
//!
//! Densities are modelled as piecewise linear between lattice sites: over
//! `[origin, origin + M a)` with a wrap-around segment on periodic lattices,
//! over the lattice hull `[origin, origin + (M-1) a]` on Dirichlet lattices.
//! The same model backs sampling and the Kolmogorov-Smirnov comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::grid::{Boundary, SpatialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceInterpolation {
    Linear,
    #[default]
    Cubic,
}

/// Piecewise-linear density with cumulative segment masses.
#[derive(Debug, Clone)]
struct LinearDensity {
    start: f64,
    width: f64,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl LinearDensity {
    fn new(grid: &SpatialGrid, density: &[f64]) -> Result<Self> {
        let m = grid.sites();
        if density.len() != m {
            return Err(Error::Shape { expected: m, got: density.len() });
        }
        if density.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
            return Err(Error::Density("values must be finite and non-negative"));
        }
        let mut nodes = density.to_vec();
        if grid.boundary() == Boundary::Periodic {
            nodes.push(density[0]);
        }
        if nodes.len() < 2 {
            return Err(Error::Density("at least two density nodes are needed"));
        }
        let a = grid.spacing();
        let mut cumulative = Vec::with_capacity(nodes.len());
        cumulative.push(0.0);
        for w in nodes.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + 0.5 * a * (w[0] + w[1]));
        }
        if !(*cumulative.last().unwrap() > 0.0) {
            return Err(Error::Density("density vanishes everywhere"));
        }
        Ok(Self {
            start: grid.origin(),
            width: a,
            nodes,
            cumulative,
        })
    }

    fn mass(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn end(&self) -> f64 {
        self.start + self.width * (self.nodes.len() - 1) as f64
    }

    /// Position with cumulative mass `m`.
    fn quantile(&self, m: f64) -> f64 {
        let segs = self.nodes.len() - 1;
        let j = (self.cumulative.partition_point(|&c| c <= m).max(1) - 1).min(segs - 1);
        let rem = (m - self.cumulative[j]).max(0.0);
        let (r0, r1) = (self.nodes[j], self.nodes[j + 1]);
        let k = (r1 - r0) / self.width;
        let disc = (r0 * r0 + 2.0 * k * rem).max(0.0);
        let denom = r0 + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * rem / denom } else { 0.0 };
        self.start + self.width * j as f64 + s.clamp(0.0, self.width)
    }

    /// Cumulative mass up to `x` (clamped to the support).
    fn cdf(&self, x: f64) -> f64 {
        if x <= self.start {
            return 0.0;
        }
        if x >= self.end() {
            return self.mass();
        }
        let u = (x - self.start) / self.width;
        let j = (u.floor() as usize).min(self.nodes.len() - 2);
        let s = x - self.start - self.width * j as f64;
        let (r0, r1) = (self.nodes[j], self.nodes[j + 1]);
        self.cumulative[j] + r0 * s + 0.5 * (r1 - r0) / self.width * s * s
    }
}

/// Draws `count` positions from the piecewise-linear density `density`.
pub fn sample_initial(grid: &SpatialGrid, density: &[f64], count: usize, seed: u64) -> Result<Vec<f64>> {
    let model = LinearDensity::new(grid, density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = model.mass();
    let draws: Vec<f64> = (0..count).map(|_| rng.gen::<f64>() * total).collect();
    Ok(draws.into_par_iter().map(|m| model.quantile(m)).collect())
}

/// A velocity field sampled at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySnapshot {
    pub time: f64,
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub grid: SpatialGrid,
    pub seed: u64,
    pub interpolation: SpaceInterpolation,
    pub times: Vec<f64>,
    /// `positions[t][i]`: particle `i` at `times[t]`, wrapped into the periodic cell.
    pub positions: Vec<Vec<f64>>,
    /// Same without periodic wrapping.
    pub unwrapped: Vec<Vec<f64>>,
    /// Output index at which a particle left a Dirichlet domain.
    pub absorbed: Vec<Option<usize>>,
}

impl TrajectoryEnsemble {
    /// An ensemble at its initial positions.
    pub fn new(grid: SpatialGrid, initial: Vec<f64>, t0: f64, seed: u64, interpolation: SpaceInterpolation) -> Self {
        let n = initial.len();
        Self {
            grid,
            seed,
            interpolation,
            times: vec![t0],
            positions: vec![initial.clone()],
            unwrapped: vec![initial],
            absorbed: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.absorbed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.absorbed.is_empty()
    }

    /// Positions at output `k` of particles still inside the domain.
    pub fn active_positions(&self, k: usize) -> Vec<f64> {
        self.positions[k]
            .iter()
            .zip(&self.absorbed)
            .filter(|(_, a)| a.is_none_or(|at| at > k))
            .map(|(x, _)| *x)
            .collect()
    }

    /// True when no two particles exchange order at any output time.
    pub fn no_crossing(&self) -> bool {
        let first = &self.unwrapped[0];
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &k| first[i].total_cmp(&first[k]).then(i.cmp(&k)));
        self.unwrapped.iter().enumerate().all(|(t, xs)| {
            let alive: Vec<usize> = order
                .iter()
                .copied()
                .filter(|&i| self.absorbed[i].is_none_or(|at| at > t))
                .collect();
            alive.windows(2).all(|w| {
                let (i, k) = (w[0], w[1]);
                if first[i] == first[k] {
                    xs[i] == xs[k]
                } else {
                    xs[i] < xs[k]
                }
            })
        })
    }
}

fn wrap_into(x: f64, start: f64, length: f64) -> f64 {
    let y = (x - start).rem_euclid(length) + start;
    // rem_euclid can round up to exactly `length`
    if y >= start + length {
        start
    } else {
        y
    }
}

/// Spatial interpolation of a site field at `x`.
fn interpolate(grid: &SpatialGrid, v: &[f64], x: f64, kind: SpaceInterpolation) -> f64 {
    let m = v.len();
    let a = grid.spacing();
    let u = (x - grid.origin()) / a;
    match grid.boundary() {
        Boundary::Periodic => {
            let j = u.floor();
            let t = u - j;
            let j = j as i64;
            let at = |k: i64| v[k.rem_euclid(m as i64) as usize];
            match kind {
                SpaceInterpolation::Linear => (1.0 - t) * at(j) + t * at(j + 1),
                SpaceInterpolation::Cubic => lagrange4(t + 1.0, [at(j - 1), at(j), at(j + 1), at(j + 2)]),
            }
        }
        Boundary::Dirichlet => {
            let u = u.clamp(0.0, (m - 1) as f64);
            if m == 1 {
                return v[0];
            }
            let j = (u.floor() as usize).min(m - 2);
            match kind {
                SpaceInterpolation::Linear => {
                    let t = u - j as f64;
                    (1.0 - t) * v[j] + t * v[j + 1]
                }
                SpaceInterpolation::Cubic if m >= 4 => {
                    let s = j.saturating_sub(1).min(m - 4);
                    lagrange4(u - s as f64, [v[s], v[s + 1], v[s + 2], v[s + 3]])
                }
                SpaceInterpolation::Cubic => {
                    let t = u - j as f64;
                    (1.0 - t) * v[j] + t * v[j + 1]
                }
            }
        }
    }
}

/// Lagrange interpolation through nodes 0, 1, 2, 3 at `t`.
fn lagrange4(t: f64, f: [f64; 4]) -> f64 {
    let w0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let w1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let w2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let w3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    w0 * f[0] + w1 * f[1] + w2 * f[2] + w3 * f[3]
}

/// Integrates the guidance law through `history` with classical RK4.
///
/// Positions are recorded at every `record_stride`-th snapshot time (and at
/// the last one). Steps of at most `dt_traj` subdivide each snapshot interval;
/// velocities are interpolated linearly in time within the interval.
pub fn integrate(
    ensemble: &TrajectoryEnsemble,
    history: &[VelocitySnapshot],
    dt_traj: f64,
    record_stride: usize,
) -> Result<TrajectoryEnsemble> {
    if !(dt_traj > 0.0) {
        return Err(config("trajectories.dt", "must be positive"));
    }
    if history.len() < 2 {
        return Err(Error::History { needed: 2, got: history.len() });
    }
    let grid = ensemble.grid;
    let m = grid.sites();
    if let Some(bad) = history.iter().find(|s| s.velocity.len() != m) {
        return Err(Error::Shape { expected: m, got: bad.velocity.len() });
    }
    let t_last = *ensemble.times.last().unwrap();
    if (history[0].time - t_last).abs() > 1e-12 * t_last.abs().max(1.0) {
        return Err(config("trajectories", "velocity history must start at the ensemble's current time"));
    }
    let stride = record_stride.max(1);
    let kind = ensemble.interpolation;
    let periodic = grid.boundary() == Boundary::Periodic;
    let (lo, hi) = (grid.origin(), grid.origin() + (m - 1) as f64 * grid.spacing());
    let start = ensemble.unwrapped.last().unwrap().clone();
    let base_out = ensemble.times.len() - 1;
    let record: Vec<usize> = (1..history.len())
        .filter(|&k| k % stride == 0 || k == history.len() - 1)
        .collect();

    // per particle: recorded unwrapped positions and absorption output index
    let results: Vec<(Vec<f64>, Option<usize>)> = start
        .par_iter()
        .zip(ensemble.absorbed.par_iter())
        .map(|(&x0, &absorbed)| {
            let mut out = Vec::with_capacity(record.len());
            let mut x = x0;
            let mut gone = absorbed;
            let mut next_record = 0;
            for k in 0..history.len() - 1 {
                let (s0, s1) = (&history[k], &history[k + 1]);
                let span = s1.time - s0.time;
                let sub = (span.abs() / dt_traj).ceil().max(1.0) as usize;
                let h = span / sub as f64;
                let vel = |t: f64, x: f64| {
                    let w = ((t - s0.time) / span).clamp(0.0, 1.0);
                    let v0 = interpolate(&grid, &s0.velocity, x, kind);
                    let v1 = interpolate(&grid, &s1.velocity, x, kind);
                    (1.0 - w) * v0 + w * v1
                };
                if gone.is_none() {
                    for i in 0..sub {
                        let t = s0.time + i as f64 * h;
                        let k1 = vel(t, x);
                        let k2 = vel(t + h / 2.0, x + h / 2.0 * k1);
                        let k3 = vel(t + h / 2.0, x + h / 2.0 * k2);
                        let k4 = vel(t + h, x + h * k3);
                        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                        if !periodic && (x < lo || x > hi) {
                            x = x.clamp(lo, hi);
                            gone = Some(base_out + next_record + 1);
                            break;
                        }
                    }
                }
                if next_record < record.len() && record[next_record] == k + 1 {
                    out.push(x);
                    next_record += 1;
                }
            }
            (out, gone)
        })
        .collect();

    let mut next = ensemble.clone();
    for (r, &k) in record.iter().enumerate() {
        next.times.push(history[k].time);
        let unwrapped: Vec<f64> = results.iter().map(|(xs, _)| xs[r]).collect();
        let wrapped = if periodic {
            unwrapped.iter().map(|&x| wrap_into(x, grid.origin(), grid.extent())).collect()
        } else {
            unwrapped.clone()
        };
        next.unwrapped.push(unwrapped);
        next.positions.push(wrapped);
    }
    next.absorbed = results.into_iter().map(|(_, g)| g).collect();
    Ok(next)
}

/// Kolmogorov-Smirnov comparison of samples against a lattice density.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceReport {
    /// KS distance against the density normalized to unit mass.
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Distance against the raw (unnormalized) cumulative mass.
    pub raw_statistic: f64,
    /// Total mass of the density.
    pub mass: f64,
    pub samples: usize,
}

/// Default pass threshold `1.5 * 1.63 / sqrt(N)`.
pub fn default_ks_threshold(n: usize) -> f64 {
    1.5 * 1.63 / (n as f64).sqrt()
}

pub fn equivariance_check(
    positions: &[f64],
    grid: &SpatialGrid,
    density: &[f64],
    threshold: Option<f64>,
) -> Result<EquivarianceReport> {
    let model = LinearDensity::new(grid, density)?;
    let n = positions.len();
    if n == 0 {
        return Err(Error::Density("no samples to compare"));
    }
    let mass = model.mass();
    let mut sorted = positions.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let (statistic, raw_statistic) = sorted
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let raw = model.cdf(x);
            let f = raw / mass;
            let lo = i as f64 / nf;
            let hi = (i + 1) as f64 / nf;
            ((f - lo).abs().max((f - hi).abs()), (raw - lo).abs().max((raw - hi).abs()))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let threshold = threshold.unwrap_or_else(|| default_ks_threshold(n));
    Ok(EquivarianceReport {
        statistic,
        threshold,
        passed: statistic < threshold,
        raw_statistic,
        mass,
        samples: n,
    })
}
