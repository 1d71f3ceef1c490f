// SPDX-License-Identifier: Apache-2.0

//! Exact Gaussian sampling of component paths on an equispaced grid.
//!
//! Every `(path, coordinate)` pair draws from its own ChaCha stream keyed by
//! `(seed, path * d + coordinate)`, so a parallel driver filling paths in any
//! order produces the same sample.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::ChaCha12Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::{gram_unchecked, CovarianceModel};
use crate::error::{domain, Error, Result};

/// Default cap on `n * n_paths * d` stored values (one gibibyte of `f64`).
pub const DEFAULT_MEMORY_CAP: usize = 1 << 27;

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-8;

/// Equispaced grid `t_j = j T / n`, `j = 1..=n`. Time zero is implicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(domain(format!("horizon must be positive, got {horizon}")));
        }
        if n == 0 {
            return Err(domain("grid needs at least one step"));
        }
        Ok(Self { horizon, n })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        j as f64 * self.horizon / self.n as f64
    }

    /// `t_1, ..., t_n`.
    pub fn points(&self) -> Vec<f64> {
        (1..=self.n).map(|j| self.point(j)).collect()
    }
}

/// Sampled paths, stored as `values[(path * d + coord) * n + j]` for the
/// value at `t_{j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub d: usize,
    pub n_paths: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub model: CovarianceModel,
    /// Set when a faster method was requested but exact Cholesky sampling was
    /// used instead.
    pub fallback: bool,
}

impl PathSample {
    /// One coordinate of one path, `n` values at `t_1..t_n`.
    pub fn coord(&self, path: usize, coord: usize) -> &[f64] {
        let n = self.grid.n();
        let start = (path * self.d + coord) * n;
        &self.values[start..start + n]
    }

    /// Check the shape and cap before allocating `n * n_paths * d` values.
    pub fn check_size(grid: &TimeGrid, d: usize, n_paths: usize, cap: usize) -> Result<usize> {
        if d == 0 || n_paths == 0 {
            return Err(domain("d and n_paths must be at least 1"));
        }
        let requested = grid
            .n()
            .checked_mul(n_paths)
            .and_then(|v| v.checked_mul(d))
            .unwrap_or(usize::MAX);
        if requested > cap {
            return Err(Error::ResourceLimit { requested, cap });
        }
        Ok(requested)
    }
}

/// Normal stream for one `(path, coordinate)` slot.
pub fn normal_stream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Lower Cholesky factor of `gram`, trying no jitter first and then
/// `10^-12 trace`, `10^-11 trace`, ..., `10^-8 trace` on the diagonal.
/// Returns the factor and the jitter used.
pub fn cholesky_with_jitter(gram: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let trace = gram.trace();
    let mut jitter = 0.0;
    let mut scale = JITTER_START;
    loop {
        let mut m = gram.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = nalgebra::Cholesky::new(m) {
            return Ok((ch.unpack(), jitter));
        }
        if scale > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::CholeskyFailed { jitter });
        }
        jitter = scale * trace;
        scale *= 10.0;
    }
}

/// Maps i.i.d. normals to one path through a packed lower-triangular factor.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    n: usize,
    /// Row `i` occupies `lower[i(i+1)/2 .. i(i+1)/2 + i + 1]`.
    lower: Vec<f64>,
    pub jitter: f64,
}

impl CholeskySampler {
    pub fn new(model: &CovarianceModel, grid: &TimeGrid) -> Result<Self> {
        let gram = gram_unchecked(model, &grid.points());
        let (l, jitter) = cholesky_with_jitter(&gram)?;
        let n = grid.n();
        let mut lower = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                lower.push(l[(i, j)]);
            }
        }
        Ok(Self { n, lower, jitter })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fill `out` (length `n`) with one path drawn from `stream`.
    pub fn fill(&self, seed: u64, stream: u64, z: &mut [f64], out: &mut [f64]) {
        let mut rng = normal_stream(seed, stream);
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let mut offset = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.lower[offset..offset + i + 1];
            *o = row.iter().zip(&z[..=i]).map(|(a, b)| a * b).sum();
            offset += i + 1;
        }
    }

    /// Fill the block of one path (`d * n` values).
    pub fn fill_path(&self, seed: u64, path: usize, d: usize, block: &mut [f64]) {
        let mut z = vec![0.0; self.n];
        for (c, out) in block.chunks_exact_mut(self.n).enumerate() {
            self.fill(seed, (path * d + c) as u64, &mut z, out);
        }
    }
}

/// Exact sampling of `n_paths` paths with `d` i.i.d. coordinates.
pub fn sample_paths(
    model: &CovarianceModel,
    grid: &TimeGrid,
    d: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathSample> {
    sample_paths_capped(model, grid, d, n_paths, seed, DEFAULT_MEMORY_CAP)
}

/// As [`sample_paths`] with an explicit cap on stored values.
pub fn sample_paths_capped(
    model: &CovarianceModel,
    grid: &TimeGrid,
    d: usize,
    n_paths: usize,
    seed: u64,
    cap: usize,
) -> Result<PathSample> {
    let total = PathSample::check_size(grid, d, n_paths, cap)?;
    let sampler = CholeskySampler::new(model, grid)?;
    let mut values = vec![0.0; total];
    let block = d * grid.n();
    for (p, chunk) in values.chunks_exact_mut(block).enumerate() {
        sampler.fill_path(seed, p, d, chunk);
    }
    Ok(PathSample { grid: *grid, d, n_paths, values, seed, model: *model, fallback: false })
}
