//! Exact sampling of Gaussian paths and of jointly adapted Wiener/fBm pairs,
//! plus a dyadic Hölder-exponent estimator.

mod holder;
mod joint;
mod sampler;

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use holder::{holder_exponent_estimate, HolderEstimate};
pub use joint::{sample_joint, JointSampler};
pub use sampler::{sample_path, PathSampler, SamplingMethod};

/// Random stream for path `stream` of an experiment seeded with `seed`.
///
/// ChaCha streams are independent for distinct stream ids, so a batch of paths
/// is reproducible regardless of how it is split across threads.
pub fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How a grid was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    Uniform,
    /// Accumulates toward the horizon at level points `T − θⁿ`, `n ≤ levels`,
    /// with `m` points per sub-interval inside each level.
    Geometric {
        theta: f64,
        levels: usize,
        m: usize,
    },
    Custom,
}

/// Strictly increasing time grid from 0 to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    times: Vec<f64>,
    kind: GridKind,
}

impl SampleGrid {
    /// `steps` equal cells on `[0, horizon]`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Grid("uniform grid needs at least one step".into()));
        }
        let mut times: Vec<f64> = (0..=steps)
            .map(|i| horizon * i as f64 / steps as f64)
            .collect();
        times[steps] = horizon;
        Self::from_times(times, GridKind::Uniform)
    }

    /// Validates and wraps an explicit list of times.
    pub fn from_times(times: Vec<f64>, kind: GridKind) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Grid("grid needs at least two points".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Grid(format!(
                "grid must start at 0, starts at {}",
                times[0]
            )));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0] || !w[1].is_finite()) {
            return Err(Error::Grid(format!(
                "times not strictly increasing near {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { times, kind })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn kind(&self) -> &GridKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is nonempty")
    }

    /// Step size when the grid is uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        (self.kind == GridKind::Uniform).then(|| self.horizon() / (self.len() - 1) as f64)
    }

    /// Index of the grid point equal to `t` up to a relative tolerance of 1e−12.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon().max(1.0);
        let i = self.times.partition_point(|&x| x < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// Index of the last grid point `≤ t`.
    pub fn floor_index(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t).saturating_sub(1)
    }
}

/// One sampled path.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath {
    pub grid: Arc<SampleGrid>,
    pub values: Vec<f64>,
    pub model: String,
    pub seed: u64,
    pub stream: u64,
}

impl GaussianPath {
    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    /// Piecewise-linear interpolation of the sampled values.
    pub fn value_at(&self, t: f64) -> f64 {
        let ts = self.grid.times();
        if t <= ts[0] {
            return self.values[0];
        }
        let n = ts.len();
        if t >= ts[n - 1] {
            return self.values[n - 1];
        }
        let i = self.grid.floor_index(t);
        let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Writes `time,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,value")?;
        for (t, v) in self.grid.times().iter().zip(&self.values) {
            writeln!(w, "{t:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

/// Driving Wiener path and the process built from it on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPath {
    pub wiener: GaussianPath,
    pub transformed: GaussianPath,
}
