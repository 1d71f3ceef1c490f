// SPDX-License-Identifier: Apache-2.0

//! Rayon drivers for the core operations. Every driver produces results that
//! are bitwise identical to the sequential versions in `dlt-core`, whatever
//! the size of the thread pool: work items are independent and reductions run
//! in a fixed order on the calling thread.

use dlt_core::localtime::{LocalTimeEstimate, LocalTimeJob};
use dlt_core::moments::{moment_quadrature_with, MomentKind, MomentPlan, PlanEvaluator};
use dlt_core::pathgen::{CholeskySampler, PathSample, DEFAULT_MEMORY_CAP};
use dlt_core::{
    CovarianceModel, FieldSpec, MomentResult, MultiIndex, QuadConfig, Result, TimeGrid, TimeRect,
};
use rayon::prelude::*;

/// Evaluates plan rows in parallel and sums them in index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl PlanEvaluator for Parallel {
    fn evaluate(&self, plan: &MomentPlan) -> f64 {
        let rows: Vec<f64> = (0..plan.rows()).into_par_iter().map(|i| plan.row(i)).collect();
        rows.iter().sum()
    }
}

pub fn second_moment_quadrature(
    spec: &FieldSpec,
    k: &MultiIndex,
    eps: f64,
    domain_a: &TimeRect,
    domain_b: &TimeRect,
    cfg: &QuadConfig,
) -> Result<MomentResult> {
    moment_quadrature_with(&Parallel, spec, k, eps, domain_a, domain_b, cfg, MomentKind::Second)
}

pub fn diagonal_term_f(
    spec: &FieldSpec,
    k: &MultiIndex,
    eps: f64,
    horizon: f64,
    cfg: &QuadConfig,
) -> Result<MomentResult> {
    let sq = TimeRect::square(horizon);
    moment_quadrature_with(&Parallel, spec, k, eps, &sq, &sq, cfg, MomentKind::Diagonal)
}

/// Exact Cholesky sampling with paths generated in parallel.
pub fn sample_paths(
    model: &CovarianceModel,
    grid: &TimeGrid,
    d: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathSample> {
    let total = PathSample::check_size(grid, d, n_paths, DEFAULT_MEMORY_CAP)?;
    let sampler = CholeskySampler::new(model, grid)?;
    let mut values = vec![0.0; total];
    let block = d * grid.n();
    values
        .par_chunks_mut(block)
        .enumerate()
        .for_each(|(p, chunk)| sampler.fill_path(seed, p, d, chunk));
    Ok(PathSample { grid: *grid, d, n_paths, values, seed, model: *model, fallback: false })
}

/// Per-path local time estimates evaluated in parallel.
#[allow(non_snake_case)]
pub fn estimate_Lk_eps(
    px: &PathSample,
    py: &PathSample,
    k: &MultiIndex,
    eps: f64,
    x: &[f64],
) -> Result<LocalTimeEstimate> {
    let job = LocalTimeJob::new(px, py, k, eps, x)?;
    let values = (0..job.n_paths()).into_par_iter().map(|p| job.path_value(p)).collect();
    Ok(job.finish(values))
}
