// SPDX-License-Identifier: Apache-2.0

//! Circulant-embedding (Davies–Harte) sampling of fBm on an equispaced grid.
//!
//! Fractional Gaussian noise is stationary, so its covariance embeds in a
//! circulant matrix of size `2n` whose eigenvalues are one FFT away. Paths
//! are cumulative sums of the sampled increments.

use std::sync::Arc;

use dlt_core::pathgen::{normal_stream, PathSample, DEFAULT_MEMORY_CAP};
use dlt_core::{CovarianceModel, Error, Result, TimeGrid};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::par;

/// Relative size of a negative embedding eigenvalue that is still treated as
/// rounding.
const EIGEN_TOLERANCE: f64 = 1e-10;

/// Autocovariance of fractional Gaussian noise with step `dt` at lag `k`.
pub fn fgn_autocov(h: f64, dt: f64, k: usize) -> f64 {
    let two_h = 2.0 * h;
    let k = k as f64;
    let g = (k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h);
    0.5 * dt.powf(two_h) * g
}

/// Precomputed square-root spectrum of the circulant embedding.
pub struct CirculantSampler {
    n: usize,
    /// `sqrt(λ_j / 2n)`.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler").field("n", &self.n).finish()
    }
}

impl CirculantSampler {
    /// `None` if the embedding has an eigenvalue below `-1e-10 max λ`.
    pub fn new(h: f64, grid: &TimeGrid) -> Option<Self> {
        let n = grid.n();
        let m = 2 * n;
        let dt = grid.step();
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= n { j } else { m - j };
                Complex::new(fgn_autocov(h, dt, lag), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
        if row.iter().any(|c| c.re < -EIGEN_TOLERANCE * max) {
            return None;
        }
        let scale = row.iter().map(|c| (c.re.max(0.0) / m as f64).sqrt()).collect();
        Some(Self { n, scale, fft })
    }

    /// One fBm path (`n` values at `t_1..t_n`) from `stream`.
    pub fn fill(&self, seed: u64, stream: u64, buf: &mut [Complex<f64>], out: &mut [f64]) {
        let mut rng = normal_stream(seed, stream);
        for (b, s) in buf.iter_mut().zip(&self.scale) {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *b = Complex::new(s * re, s * im);
        }
        self.fft.process(buf);
        let mut acc = 0.0;
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            acc += b.re;
            *o = acc;
        }
    }

    fn fill_path(&self, seed: u64, path: usize, d: usize, block: &mut [f64]) {
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * self.n];
        for (c, out) in block.chunks_exact_mut(self.n).enumerate() {
            self.fill(seed, (path * d + c) as u64, &mut buf, out);
        }
    }
}

/// fBm paths by circulant embedding. Falls back to exact Cholesky sampling
/// (and sets [`PathSample::fallback`]) if the embedding is not nonnegative.
pub fn sample_fbm_fast(h: f64, grid: &TimeGrid, d: usize, n_paths: usize, seed: u64) -> Result<PathSample> {
    let model = CovarianceModel::fbm(h)?;
    let total = PathSample::check_size(grid, d, n_paths, DEFAULT_MEMORY_CAP)?;
    let Some(sampler) = CirculantSampler::new(h, grid) else {
        let mut s = par::sample_paths(&model, grid, d, n_paths, seed)?;
        s.fallback = true;
        return Ok(s);
    };
    let mut values = vec![0.0; total];
    let block = d * grid.n();
    values
        .par_chunks_mut(block)
        .enumerate()
        .for_each(|(p, chunk)| sampler.fill_path(seed, p, d, chunk));
    Ok(PathSample { grid: *grid, d, n_paths, values, seed, model, fallback: false })
}

/// Dispatch to the circulant sampler for fBm models when `fast` is set.
pub fn sample_model(
    model: &CovarianceModel,
    grid: &TimeGrid,
    d: usize,
    n_paths: usize,
    seed: u64,
    fast: bool,
) -> Result<PathSample> {
    if fast {
        if !model.is_fbm() {
            return Err(Error::Domain("circulant sampling needs an fBm model (K0 = 1)".into()));
        }
        sample_fbm_fast(model.h0(), grid, d, n_paths, seed)
    } else {
        par::sample_paths(model, grid, d, n_paths, seed)
    }
}
