// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo estimator of the mollified local time derivative
//!
//! ```text
//! L_ε^{(k)}(T, x) ≈ (T/n)^2 Σ_{i,j=0}^{n-1} ∂^k p_ε((X_{t_i} - x) - X̃_{s_j}),
//! ```
//!
//! a left-endpoint Riemann sum with `X_{t_0} = X̃_{s_0} = 0`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::kernel::{hermite, KernelEval, MultiIndex, UNDERFLOW_EXPONENT};
use crate::pathgen::PathSample;

/// Spacing of the truncated `x`-grid in units of `√ε`.
pub const MASS_GRID_SPACING: f64 = 0.25;
/// Padding of the truncated `x`-grid beyond the observed range, in `√ε`.
pub const MASS_GRID_PADDING: f64 = 12.0;

/// Per-path estimates at one `(k, ε, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeEstimate {
    pub per_path_values: Vec<f64>,
    pub eps: f64,
    pub k: MultiIndex,
    pub x: Vec<f64>,
    pub horizon: f64,
    pub grid_n: usize,
}

/// Left-endpoint points of one path as `n` rows of `d` values, row 0 being
/// the origin: `out[i * d + c] = X^c_{t_i}`.
pub fn left_points(sample: &PathSample, path: usize) -> Vec<f64> {
    let (n, d) = (sample.grid.n(), sample.d);
    let mut out = vec![0.0; n * d];
    for c in 0..d {
        let coord = sample.coord(path, c);
        for i in 1..n {
            out[i * d + c] = coord[i - 1];
        }
    }
    out
}

/// `step^2 Σ_{i,j} ∂^k p_ε((xs_i - x) - ys_j)` over row-major point sets of
/// dimension `x.len()`.
pub fn riemann_sum(
    xs: &[f64],
    ys: &[f64],
    k: &MultiIndex,
    eps: f64,
    x: &[f64],
    step: f64,
) -> Result<f64> {
    let d = x.len();
    if d == 0 || xs.len() % d != 0 || ys.len() % d != 0 {
        return Err(Error::ShapeMismatch(format!(
            "point arrays of length {} and {} are not multiples of d = {d}",
            xs.len(),
            ys.len()
        )));
    }
    k.check_dim(d)?;
    check_eps(eps)?;
    Ok(riemann_sum_unchecked(xs, ys, &KernelEval::new(k, eps), x, step))
}

fn riemann_sum_unchecked(xs: &[f64], ys: &[f64], kernel: &KernelEval, x: &[f64], step: f64) -> f64 {
    let d = x.len();
    let mut shifted = xs.to_vec();
    for row in shifted.chunks_exact_mut(d) {
        for (v, xc) in row.iter_mut().zip(x) {
            *v -= xc;
        }
    }
    let mut u = vec![0.0; d];
    let mut total = 0.0;
    for a in shifted.chunks_exact(d) {
        let mut row = 0.0;
        for b in ys.chunks_exact(d) {
            for c in 0..d {
                u[c] = a[c] - b[c];
            }
            row += kernel.eval(&u);
        }
        total += row;
    }
    step * step * total
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

fn check_pair(px: &PathSample, py: &PathSample) -> Result<()> {
    if px.grid != py.grid || px.n_paths != py.n_paths || px.d != py.d {
        return Err(Error::ShapeMismatch(format!(
            "path samples differ: grid {:?} vs {:?}, paths {} vs {}, d {} vs {}",
            px.grid, py.grid, px.n_paths, py.n_paths, px.d, py.d
        )));
    }
    Ok(())
}

/// Validated inputs for per-path evaluation; lets a parallel driver call
/// [`LocalTimeJob::path_value`] for each path independently.
#[derive(Debug)]
pub struct LocalTimeJob<'a> {
    px: &'a PathSample,
    py: &'a PathSample,
    kernel: KernelEval,
    k: MultiIndex,
    eps: f64,
    x: Vec<f64>,
}

impl<'a> LocalTimeJob<'a> {
    pub fn new(
        px: &'a PathSample,
        py: &'a PathSample,
        k: &MultiIndex,
        eps: f64,
        x: &[f64],
    ) -> Result<Self> {
        check_pair(px, py)?;
        check_eps(eps)?;
        k.check_dim(px.d)?;
        if x.len() != px.d {
            return Err(Error::ShapeMismatch(format!(
                "x has length {}, paths have d = {}",
                x.len(),
                px.d
            )));
        }
        Ok(Self { px, py, kernel: KernelEval::new(k, eps), k: k.clone(), eps, x: x.to_vec() })
    }

    pub fn n_paths(&self) -> usize {
        self.px.n_paths
    }

    pub fn path_value(&self, path: usize) -> f64 {
        let xs = left_points(self.px, path);
        let ys = left_points(self.py, path);
        riemann_sum_unchecked(&xs, &ys, &self.kernel, &self.x, self.px.grid.step())
    }

    pub fn finish(self, per_path_values: Vec<f64>) -> LocalTimeEstimate {
        LocalTimeEstimate {
            per_path_values,
            eps: self.eps,
            k: self.k,
            x: self.x,
            horizon: self.px.grid.horizon(),
            grid_n: self.px.grid.n(),
        }
    }
}

/// Estimate `L_ε^{(k)}(T, x)` for every path pair `(px[p], py[p])`.
#[allow(non_snake_case)]
pub fn estimate_Lk_eps(
    px: &PathSample,
    py: &PathSample,
    k: &MultiIndex,
    eps: f64,
    x: &[f64],
) -> Result<LocalTimeEstimate> {
    let job = LocalTimeJob::new(px, py, k, eps, x)?;
    let values = (0..job.n_paths()).map(|p| job.path_value(p)).collect();
    Ok(job.finish(values))
}

/// Empirical `E[v^order]` and its standard error.
pub fn sample_moment(est: &LocalTimeEstimate, order: u32) -> Result<(f64, f64)> {
    if order != 2 && order != 4 {
        return Err(domain(format!("moment order must be 2 or 4, got {order}")));
    }
    let n = est.per_path_values.len();
    if n < 100 {
        return Err(domain(format!("need at least 100 paths for a moment, got {n}")));
    }
    let powers: Vec<f64> = est.per_path_values.iter().map(|v| libm::pow(*v, order as f64)).collect();
    Ok(mean_and_se(&powers))
}

/// Sample mean and standard error `s / √n`.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// One-dimensional truncated trapezoid grid used for `x`-integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct MassGrid {
    pub lo: f64,
    pub spacing: f64,
    pub count: usize,
}

impl MassGrid {
    /// Cover `[min, max]` padded by `12√ε`, with spacing `√ε / 4`.
    pub fn covering(min: f64, max: f64, eps: f64) -> Self {
        let root = libm::sqrt(eps);
        let spacing = MASS_GRID_SPACING * root;
        let lo = min - MASS_GRID_PADDING * root;
        let hi = max + MASS_GRID_PADDING * root;
        let count = libm::ceil((hi - lo) / spacing) as usize + 1;
        Self { lo, spacing, count }
    }

    pub fn radius(&self) -> f64 {
        0.5 * self.spacing * (self.count - 1) as f64
    }

    fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.count {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }
}

/// `∂^k p_ε` in one dimension.
#[inline]
fn kernel_1d(k: u32, eps: f64, u: f64) -> f64 {
    let expo = -0.5 * u * u / eps;
    if expo < UNDERFLOW_EXPONENT {
        return 0.0;
    }
    let root = libm::sqrt(eps);
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut v = libm::exp(expo) / libm::sqrt(2.0 * core::f64::consts::PI * eps);
    if k > 0 {
        v *= sign * libm::pow(root, -(k as f64)) * hermite(k, u / root);
    }
    v
}

/// `∫ L_ε^{(k)}(T, x) dx` for one path over tensor trapezoid grids covering
/// the observed differences. Uses the product structure of the kernel, so
/// the cost is linear in `d`.
pub fn mass_integral(
    xs: &[f64],
    ys: &[f64],
    k: &MultiIndex,
    eps: f64,
    step: f64,
) -> Result<(f64, Vec<MassGrid>)> {
    let d = k.dim();
    if d == 0 || xs.len() % d != 0 || ys.len() % d != 0 {
        return Err(Error::ShapeMismatch("point arrays do not match the multi-index".into()));
    }
    check_eps(eps)?;
    let grids: Vec<MassGrid> = (0..d)
        .map(|c| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for a in xs.chunks_exact(d) {
                for b in ys.chunks_exact(d) {
                    let u = a[c] - b[c];
                    lo = lo.min(u);
                    hi = hi.max(u);
                }
            }
            MassGrid::covering(lo, hi, eps)
        })
        .collect();
    let ks = k.as_slice();
    let mut total = 0.0;
    for a in xs.chunks_exact(d) {
        for b in ys.chunks_exact(d) {
            let mut prod = 1.0;
            for c in 0..d {
                let u = a[c] - b[c];
                let g = &grids[c];
                let mut acc = 0.0;
                for i in 0..g.count {
                    let xg = g.lo + i as f64 * g.spacing;
                    acc += g.weight(i) * kernel_1d(ks[c], eps, u - xg);
                }
                prod *= acc;
            }
            total += prod;
        }
    }
    Ok((step * step * total, grids))
}
