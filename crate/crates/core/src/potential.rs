use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::grid::SpatialGrid;

/// External potential `U(x, t)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    Free,
    Constant {
        value: f64,
    },
    /// `U = k (x - center)^2 / 2`
    Harmonic {
        stiffness: f64,
        center: f64,
    },
    /// `height` on `left <= x <= right`, zero elsewhere.
    Barrier {
        height: f64,
        left: f64,
        right: f64,
    },
    /// One value per site, optionally a sequence of frames at `times`
    /// (linear in time between frames, held constant outside).
    Tabulated {
        values: Vec<Vec<f64>>,
        #[serde(default)]
        times: Vec<f64>,
    },
}

impl PotentialSpec {
    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        let finite = |v: f64, what: &'static str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(config(what, "must be finite"))
            }
        };
        match self {
            PotentialSpec::Free => Ok(()),
            PotentialSpec::Constant { value } => finite(*value, "potential.value"),
            PotentialSpec::Harmonic { stiffness, center } => {
                finite(*stiffness, "potential.stiffness")?;
                finite(*center, "potential.center")
            }
            PotentialSpec::Barrier { height, left, right } => {
                finite(*height, "potential.height")?;
                finite(*left, "potential.left")?;
                finite(*right, "potential.right")?;
                if left > right {
                    return Err(config("potential.left", "barrier left edge exceeds right edge"));
                }
                Ok(())
            }
            PotentialSpec::Tabulated { values, times } => {
                if values.is_empty() {
                    return Err(config("potential.values", "at least one frame required"));
                }
                for frame in values {
                    if frame.len() != grid.sites() {
                        return Err(Error::Shape {
                            expected: grid.sites(),
                            got: frame.len(),
                        });
                    }
                    if frame.iter().any(|v| !v.is_finite()) {
                        return Err(config("potential.values", "must be finite"));
                    }
                }
                if values.len() > 1 {
                    if times.len() != values.len() {
                        return Err(config(
                            "potential.times",
                            format!("need {} frame times, got {}", values.len(), times.len()),
                        ));
                    }
                    if times.windows(2).any(|w| !(w[1] > w[0])) {
                        return Err(config("potential.times", "must be strictly increasing"));
                    }
                }
                Ok(())
            }
        }
    }

    /// True when the potential vanishes at every site and time.
    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Free => true,
            PotentialSpec::Constant { value } => *value == 0.0,
            PotentialSpec::Harmonic { stiffness, .. } => *stiffness == 0.0,
            PotentialSpec::Barrier { height, .. } => *height == 0.0,
            PotentialSpec::Tabulated { values, .. } => values.iter().flatten().all(|v| *v == 0.0),
        }
    }

    /// True when the potential does not depend on time.
    pub fn is_static(&self) -> bool {
        !matches!(self, PotentialSpec::Tabulated { values, .. } if values.len() > 1)
    }

    pub fn at(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Constant { value } => *value,
            PotentialSpec::Harmonic { stiffness, center } => 0.5 * stiffness * (x - center).powi(2),
            PotentialSpec::Barrier { height, left, right } => {
                if (*left..=*right).contains(&x) {
                    *height
                } else {
                    0.0
                }
            }
            PotentialSpec::Tabulated { .. } => {
                panic!("tabulated potentials are evaluated per site, use `evaluate`")
            }
        }
    }

    /// Potential at every site of `grid` at time `t`.
    pub fn evaluate(&self, grid: &SpatialGrid, t: f64) -> Result<Vec<f64>> {
        match self {
            PotentialSpec::Tabulated { values, times } => {
                let n = grid.sites();
                for frame in values {
                    if frame.len() != n {
                        return Err(Error::Shape {
                            expected: n,
                            got: frame.len(),
                        });
                    }
                }
                if values.len() == 1 || t <= times[0] {
                    return Ok(values[0].clone());
                }
                let last = values.len() - 1;
                if t >= times[last] {
                    return Ok(values[last].clone());
                }
                let k = times.partition_point(|&tk| tk <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                Ok(values[k]
                    .iter()
                    .zip(&values[k + 1])
                    .map(|(a, b)| a + w * (b - a))
                    .collect())
            }
            _ => Ok(grid.coordinates().into_iter().map(|x| self.at(x)).collect()),
        }
    }
}
