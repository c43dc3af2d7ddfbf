//! Joint sampling of a Wiener path and the fractional Brownian motion it
//! drives, `B^H(t) = ∫_0^t K^H(t,u) dW(u)`, through a lower-triangular map.
//!
//! For a cell `j ≥ 2` the kernel is replaced by its cell average, so
//! `B^H(t_i) ≈ Σ_j c_ij ΔW_j`. On the first cell the kernel behaves like
//! `u^{1/2−H}` near the origin, and a constant fit there would leave a bias of
//! order `Δ^{2−2H}`. The first cell therefore projects the kernel onto
//! `span{1, u^{1/2−H}}` and draws the pair `(W(t_1), ∫_0^{t_1} u^{1/2−H} dW)`
//! exactly, which brings the bias down to the order `Δ^{2H}` of the other cells.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{path_rng, GaussianPath, JointPath, SampleGrid};
use crate::error::{domain, Result};
use crate::process_models::FbmKernel;
use crate::quadrature::{gauss_legendre, graded, Grading, PowerWeight, Rule};

/// Precomputed lower-triangular weights for one index and one grid.
pub struct JointSampler {
    h: f64,
    grid: Arc<SampleGrid>,
    /// Gram matrix of `{1, u^{1/2−H}}` on the first cell: `[t1, m12, m22]`.
    gram: [f64; 3],
    /// Coefficients of `(W(t_1), V)` for each row `i ≥ 1` (index `i − 1`).
    lead: Vec<(f64, f64)>,
    /// `rows[i − 1][j − 2] = c_ij` for `2 ≤ j ≤ i`.
    rows: Vec<Vec<f64>>,
}

impl JointSampler {
    /// Builds the weights; `h = 1/2` gives the identity map.
    pub fn new(h: f64, grid: Arc<SampleGrid>) -> Result<Self> {
        if !(0.5..1.0).contains(&h) {
            return Err(domain(format!(
                "joint sampling needs H in [1/2, 1), got {h}"
            )));
        }
        let t = grid.times().to_vec();
        let n = t.len() - 1;
        let t1 = t[1];
        let m12 = t1.powf(1.5 - h) / (1.5 - h);
        let m22 = t1.powf(2.0 - 2.0 * h) / (2.0 - 2.0 * h);
        let gram = [t1, m12, m22];
        if h == 0.5 {
            let lead = vec![(1.0, 0.0); n];
            let rows = (1..=n).map(|i| vec![1.0; i - 1]).collect();
            return Ok(Self {
                h,
                grid,
                gram,
                lead,
                rows,
            });
        }
        let kernel = FbmKernel::new(h)?;
        let det = t1 * m22 - m12 * m12;
        let lead = (1..=n)
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let r1 = kernel.cov_with_wiener(t[i], t1)?;
                let r2 = kernel.singular_moment(t[i], t1)?;
                if det.abs() <= 1e-14 * t1 * m22 {
                    // Basis degenerates as H → 1/2; fall back to the constant fit.
                    return Ok((r1 / t1, 0.0));
                }
                Ok(((m22 * r1 - m12 * r2) / det, (t1 * r2 - m12 * r1) / det))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = (1..=n)
            .into_par_iter()
            .map(|i| {
                (2..=i)
                    .map(|j| cell_average(&kernel, t[i], t[j - 1], t[j], j == i))
                    .collect()
            })
            .collect();
        Ok(Self {
            h,
            grid,
            gram,
            lead,
            rows,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &Arc<SampleGrid> {
        &self.grid
    }

    /// Draws path number `stream` of the experiment seeded with `seed`.
    pub fn sample(&self, seed: u64, stream: u64) -> JointPath {
        let mut rng = path_rng(seed, stream);
        let t = self.grid.times();
        let n = t.len() - 1;
        let [g11, g12, g22] = self.gram;
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let w1 = g11.sqrt() * z1;
        let v = g12 / g11 * w1 + (g22 - g12 * g12 / g11).max(0.0).sqrt() * z2;
        let mut dw = vec![0.0; n + 1];
        dw[1] = w1;
        for j in 2..=n {
            let z: f64 = rng.sample(StandardNormal);
            dw[j] = (t[j] - t[j - 1]).sqrt() * z;
        }
        let mut wiener = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        wiener.push(0.0);
        for d in &dw[1..] {
            acc += d;
            wiener.push(acc);
        }
        let mut transformed = Vec::with_capacity(n + 1);
        transformed.push(0.0);
        if self.h == 0.5 {
            transformed.clone_from(&wiener);
        }
        for i in transformed.len()..=n {
            let (a, b) = self.lead[i - 1];
            let tail: f64 = self.rows[i - 1]
                .iter()
                .zip(&dw[2..=i])
                .map(|(c, d)| c * d)
                .sum();
            transformed.push(a * w1 + b * v + tail);
        }
        let mk = |values: Vec<f64>, model: String| GaussianPath {
            grid: Arc::clone(&self.grid),
            values,
            model,
            seed,
            stream,
        };
        JointPath {
            wiener: mk(wiener, "wiener".into()),
            transformed: mk(transformed, format!("fbm(H={}) via kernel", self.h)),
        }
    }

    /// Draws paths `0..count` in parallel.
    pub fn sample_many(&self, seed: u64, count: usize) -> Vec<JointPath> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.sample(seed, i))
            .collect()
    }

    /// Exact covariance of the sampled `B^H(t_i)` and `B^H(t_k)` implied by the weights.
    pub fn implied_covariance(&self, i: usize, k: usize) -> f64 {
        if i == 0 || k == 0 {
            return 0.0;
        }
        let [g11, g12, g22] = self.gram;
        let (ai, bi) = self.lead[i - 1];
        let (ak, bk) = self.lead[k - 1];
        let head = ai * ak * g11 + (ai * bk + bi * ak) * g12 + bi * bk * g22;
        let t = self.grid.times();
        let m = i.min(k);
        let tail: f64 = (2..=m)
            .map(|j| self.rows[i - 1][j - 2] * self.rows[k - 1][j - 2] * (t[j] - t[j - 1]))
            .sum();
        head + tail
    }

    /// Exact `Cov(B^H(t_i), W(t_k))` implied by the weights.
    pub fn implied_cross_covariance(&self, i: usize, k: usize) -> f64 {
        if i == 0 || k == 0 {
            return 0.0;
        }
        let [g11, g12, _] = self.gram;
        let (ai, bi) = self.lead[i - 1];
        let t = self.grid.times();
        let head = ai * g11 + bi * g12;
        let tail: f64 = (2..=i.min(k))
            .map(|j| self.rows[i - 1][j - 2] * (t[j] - t[j - 1]))
            .sum();
        head + tail
    }
}

/// `(1/Δ) ∫_a^b K^H(ti, u) du`; the rule is chosen from the width of the cell
/// relative to its distance from the singular points `0` and `ti`.
fn cell_average(kernel: &FbmKernel, ti: f64, a: f64, b: f64, diagonal: bool) -> f64 {
    let width = b - a;
    let k = |u: f64| kernel.eval_fast(ti, u);
    if diagonal {
        return graded(k, a, b, PowerWeight::NONE, Grading::Both, Rule::new(14, 6)) / width;
    }
    let rho = width / a.min(ti - b);
    if rho <= 1e-3 {
        k(0.5 * (a + b))
    } else if rho <= 0.2 {
        gauss_legendre(4).integrate(k, a, b) / width
    } else {
        graded(k, a, b, PowerWeight::NONE, Grading::Both, Rule::new(8, 6)) / width
    }
}

/// Draws one joint path (stream 0).
pub fn sample_joint(h: f64, grid: &SampleGrid, seed: u64) -> Result<JointPath> {
    Ok(JointSampler::new(h, Arc::new(grid.clone()))?.sample(seed, 0))
}
