//! Reproducible Brownian motion, Brownian bridge and terminal-energy draws.
//!
//! Every path is a pure function of `(master_seed, path_index)`. A ChaCha20
//! generator keyed by the master seed is switched to a stream derived from
//! the path index, so paths can be produced in any order on any thread.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::LudersDecomposition;

/// Uniform grid `t_k = k·t_end/steps`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub t_end: f64,
    pub steps: usize,
}

impl PathGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be at least 1".into()));
        }
        Ok(Self { t_end, steps })
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    /// Grid time `t_k`. Computed as a fraction of `t_end` so that `time(steps) == t_end` exactly.
    pub fn time(&self, k: usize) -> f64 {
        self.t_end * (k as f64 / self.steps as f64)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    Brownian,
    Bridge { horizon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub grid: PathGrid,
    pub values: Vec<f64>,
    pub kind: NoiseKind,
}

impl NoisePath {
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Subsamples every `factor`-th grid point. `steps` must be divisible by `factor`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.grid.steps % factor != 0 {
            return Err(Error::GridMismatch(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.grid.steps
            )));
        }
        let grid = PathGrid::new(self.grid.t_end, self.grid.steps / factor)?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Ok(Self {
            grid,
            values,
            kind: self.kind,
        })
    }
}

/// Which independent stream of a path is being drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Noise = 0,
    TerminalEnergy = 1,
    /// Auxiliary draws such as random probe points.
    Probe = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master_seed: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn rng(&self, path_index: u64, stream: Stream) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream((path_index << 2) | stream as u64);
        rng
    }
}

pub fn sample_brownian(grid: PathGrid, seed: SeedPolicy, path_index: u64) -> NoisePath {
    let mut rng = seed.rng(path_index, Stream::Noise);
    let sd = grid.dt().sqrt();
    let mut values = Vec::with_capacity(grid.len());
    let mut b = 0.0;
    values.push(b);
    for _ in 0..grid.steps {
        let z: f64 = rng.sample(StandardNormal);
        b += sd * z;
        values.push(b);
    }
    NoisePath {
        grid,
        values,
        kind: NoiseKind::Brownian,
    }
}

/// `βₜ = Bₜ − (t/T)B_T` from the Brownian path of the same index.
pub fn sample_bridge(grid: PathGrid, seed: SeedPolicy, path_index: u64) -> NoisePath {
    bridge_from_brownian(&sample_brownian(grid, seed, path_index))
}

/// Pins a Brownian path to zero at the end of its grid.
pub fn bridge_from_brownian(b: &NoisePath) -> NoisePath {
    let grid = b.grid;
    let b_end = b.values[grid.steps];
    let mut values: Vec<f64> = b
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| v - (k as f64 / grid.steps as f64) * b_end)
        .collect();
    values[grid.steps] = 0.0;
    NoisePath {
        grid,
        values,
        kind: NoiseKind::Bridge {
            horizon: grid.t_end,
        },
    }
}

/// Draws a level index with probability πᵢ. Levels with πᵢ = 0 are never returned.
pub fn sample_terminal_energy(dec: &LudersDecomposition, seed: SeedPolicy, path_index: u64) -> usize {
    let mut rng = seed.rng(path_index, Stream::TerminalEnergy);
    let u: f64 = rng.random();
    draw_level(dec.probabilities(), u)
}

pub(crate) fn draw_level(pi: &[f64], u: f64) -> usize {
    let total: f64 = pi.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in pi.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}
