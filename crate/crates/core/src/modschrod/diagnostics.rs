use crate::error::{Error, Result};
use crate::grid::{gradient_complex, gradient_real, PhysicsParams};
use crate::polar::{align_phase, from_polar, phase_gradient, PolarField};
use crate::potential::PotentialSpec;

/// A polar field at a known time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub polar: PolarField,
}

/// `C * sum(h_i^2)` with the conventional safety factor `C = 10`.
pub fn truncation_bound(steps: &[f64]) -> f64 {
    10.0 * steps.iter().map(|h| h * h).sum::<f64>()
}

fn last_three(history: &[Snapshot]) -> Result<(&Snapshot, &Snapshot, &Snapshot)> {
    let n = history.len();
    if n < 3 {
        return Err(Error::History { needed: 3, got: n });
    }
    Ok((&history[n - 3], &history[n - 2], &history[n - 1]))
}

fn node_mask(snaps: [&Snapshot; 3], j: usize) -> bool {
    snaps.iter().any(|s| s.polar.is_node(j))
}

/// `dS/dt + (grad S)^2 / 2m + U + Q` at the middle of the last three snapshots.
///
/// `q` is the quantum potential to test (standard or modified). Phases of
/// the outer snapshots are shifted by multiples of `2 pi hbar` toward the
/// middle one before differencing.
pub fn hj_residual(
    history: &[Snapshot],
    u: &PotentialSpec,
    q: &[Option<f64>],
    params: &PhysicsParams,
) -> Result<Vec<Option<f64>>> {
    let (prev, mid, next) = last_three(history)?;
    let grid = mid.polar.grid();
    let n = grid.sites();
    if q.len() != n {
        return Err(Error::Shape { expected: n, got: q.len() });
    }
    let s_mid = mid.polar.phase();
    let mut s_prev = prev.polar.phase().to_vec();
    let mut s_next = next.polar.phase().to_vec();
    align_phase(s_mid, &mut s_prev, params.hbar);
    align_phase(s_mid, &mut s_next, params.hbar);
    let span = next.time - prev.time;
    let grad = phase_gradient(&mid.polar, params);
    let uv = u.evaluate(grid, mid.time)?;
    Ok((0..n)
        .map(|j| {
            if node_mask([prev, mid, next], j) {
                return None;
            }
            let q = q[j]?;
            let s_t = (s_next[j] - s_prev[j]) / span;
            Some(s_t + grad[j] * grad[j] / (2.0 * params.mass) + uv[j] + q)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityResidual {
    /// `d(R^2)/dt + d/dx j - source` per site.
    pub pointwise: Vec<Option<f64>>,
    /// `d/dt sum_j a R_j^2`.
    pub norm_rate: f64,
    /// `sum_j a source_j` (masked sites contribute nothing).
    pub integrated_source: f64,
}

impl ContinuityResidual {
    pub fn integrated(&self) -> f64 {
        self.norm_rate - self.integrated_source
    }
}

/// Continuity residual at the middle of the last three snapshots with the
/// current `j = (hbar/m) Im(psi* grad psi)`.
pub fn continuity_residual(
    history: &[Snapshot],
    source: &[Option<f64>],
    params: &PhysicsParams,
) -> Result<ContinuityResidual> {
    let (prev, mid, next) = last_three(history)?;
    let grid = mid.polar.grid();
    let n = grid.sites();
    if source.len() != n {
        return Err(Error::Shape { expected: n, got: source.len() });
    }
    let span = next.time - prev.time;
    let rho = |s: &Snapshot| s.polar.density();
    let (r0, r2) = (rho(prev), rho(next));
    let psi = from_polar(&mid.polar, params);
    let dpsi = gradient_complex(grid, psi.values());
    let current: Vec<f64> = psi
        .values()
        .iter()
        .zip(&dpsi)
        .map(|(p, d)| params.hbar / params.mass * (p.conj() * d).im)
        .collect();
    let div = gradient_real(grid, &current);
    let pointwise = (0..n)
        .map(|j| {
            let s = source[j]?;
            Some((r2[j] - r0[j]) / span + div[j] - s)
        })
        .collect();
    let a = grid.spacing();
    let norm_rate = a * r2.iter().zip(&r0).map(|(x, y)| x - y).sum::<f64>() / span;
    let integrated_source = a * source.iter().flatten().sum::<f64>();
    Ok(ContinuityResidual {
        pointwise,
        norm_rate,
        integrated_source,
    })
}
