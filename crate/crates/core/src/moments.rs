// SPDX-License-Identifier: Apache-2.0

//! Exact second moment `E[|L_ε^{(k)}(T,0)|^2]`.
//!
//! The inner `2d`-dimensional Gaussian integral is done in closed form: for
//! one coordinate with covariance `Σ` of `(Z(t1,s1), Z(t2,s2))` and
//! `A = Σ + εI`,
//!
//! ```text
//! E[p_ε^{(k)}(U1) p_ε^{(k)}(U2)] = (-1)^k (2π)^{-1} det(A)^{-1/2} E[V1^k V2^k],
//! V ~ N(0, A^{-1}),
//! ```
//!
//! and coordinates multiply. What remains is a 4-dimensional time integral,
//! evaluated by tensor Gauss–Legendre on meshes graded toward the coincident
//! time faces `t1 = t2`, `s1 = s2` and toward the origin. Each time pair is
//! mapped through `t_hi - t_lo = x`, `t_lo = c0 + (L - x) v` so the diagonal is
//! a coordinate face. Covariances of each pair are tabulated once and the
//! 4-dimensional sum runs over the product of the two tables.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::covariance::{CovarianceModel, FieldSpec};
use crate::error::{domain, Error, Result};
use crate::kernel::MultiIndex;
use crate::quadrature::{
    levels_for_scale, GaussLegendre, QuadConfig, Rule1D, TriangleGrading, TriangleRule,
};

const INV_TWO_PI: f64 = 0.5 / PI;

/// Time rectangle `[t0, t1] x [s0, s1]` for one factor `(t, s)` of the
/// second moment: `t` drives `X^{H1}`, `s` drives `X̃^{H2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRect {
    pub t: (f64, f64),
    pub s: (f64, f64),
}

impl TimeRect {
    /// `[0, T]^2`.
    pub fn square(horizon: f64) -> Self {
        Self { t: (0.0, horizon), s: (0.0, horizon) }
    }

    pub fn new(t: (f64, f64), s: (f64, f64)) -> Self {
        Self { t, s }
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.t, self.s] {
            if !(lo >= 0.0) || !(hi > lo) || !hi.is_finite() {
                return Err(domain(format!("invalid time interval [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Which monomial the `x`-integral carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `Π x_{1,i}^{k_i} x_{2,i}^{k_i}`: the second moment itself.
    Second,
    /// `Π (-x_{2,i})^{k_i} x_{2,i}^{k_i}`: the diagonal functional `F`.
    Diagonal,
}

/// Result of a quadrature of the second moment or of `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentResult {
    pub value: f64,
    pub err_estimate: f64,
    pub eps: f64,
    pub k: MultiIndex,
    pub spec: FieldSpec,
    /// Largest time in either domain.
    pub horizon: f64,
    pub domain: (TimeRect, TimeRect),
    /// `false` if the two-level difference exceeded the tolerance at the
    /// largest permitted number of splits.
    pub converged: bool,
    pub splits_used: usize,
}

fn double_factorial_odd(n: i64) -> f64 {
    // (n)!! for odd n >= -1
    let mut acc = 1.0;
    let mut m = n;
    while m > 1 {
        acc *= m as f64;
        m -= 2;
    }
    acc
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// `E[U1^{k1} U2^{k2}]` for a centered pair with covariance `(c11, c12, c22)`,
/// grouping the perfect matchings of the `k1 + k2` slots by the number `j` of
/// cross pairs: `C(k1,j) C(k2,j) j! (k1-j-1)!! (k2-j-1)!!` matchings each
/// contribute `c11^{(k1-j)/2} c22^{(k2-j)/2} c12^j`.
#[inline]
pub(crate) fn isserlis_unchecked(c11: f64, c12: f64, c22: f64, k1: u32, k2: u32) -> f64 {
    if (k1 + k2) % 2 == 1 {
        return 0.0;
    }
    match (k1, k2) {
        (0, 0) => return 1.0,
        (1, 1) => return c12,
        (2, 2) => return c11 * c22 + 2.0 * c12 * c12,
        (0, 2) => return c22,
        (2, 0) => return c11,
        _ => {}
    }
    let mut total = 0.0;
    let mut j = k1.min(k2);
    loop {
        if (k1 - j) % 2 == 0 {
            let count = binomial(k1, j)
                * binomial(k2, j)
                * (1..=j).map(|i| i as f64).product::<f64>()
                * double_factorial_odd(k1 as i64 - j as i64 - 1)
                * double_factorial_odd(k2 as i64 - j as i64 - 1);
            total += count
                * libm::pow(c11, ((k1 - j) / 2) as f64)
                * libm::pow(c22, ((k2 - j) / 2) as f64)
                * libm::pow(c12, j as f64);
        }
        if j == 0 {
            break;
        }
        j -= 1;
    }
    total
}

/// `E[U1^{k1} U2^{k2}]` for `(U1, U2) ~ N(0, C)` by Wick pairing.
pub fn isserlis_moment(c: &[[f64; 2]; 2], k1: u32, k2: u32) -> Result<f64> {
    let (c11, c12, c22) = (c[0][0], c[0][1], c[1][1]);
    if c[0][1] != c[1][0] {
        return Err(domain("covariance matrix must be symmetric"));
    }
    let trace = c11 + c22;
    let min_eig = 0.5 * (trace - libm::sqrt((c11 - c22) * (c11 - c22) + 4.0 * c12 * c12));
    let tolerance = crate::covariance::PSD_TOLERANCE * libm::fabs(trace);
    if min_eig < -tolerance {
        return Err(Error::NotPsd { min_eigenvalue: min_eig, tolerance });
    }
    Ok(isserlis_unchecked(c11, c12, c22, k1, k2))
}

#[inline]
fn powi(mut base: f64, mut e: u32) -> f64 {
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// Evaluates the `x`-integrated integrand from the 2x2 covariance of one
/// coordinate of `(Z(p1), Z(p2))`.
#[derive(Debug, Clone)]
pub(crate) struct IntegrandKernel {
    /// Distinct nonzero derivative orders and their multiplicities.
    orders: Vec<(u32, u32)>,
    /// `(2π)^{-d}`.
    scale: f64,
    half_d: u32,
    odd_d: bool,
    eps: f64,
    kind: MomentKind,
}

impl IntegrandKernel {
    pub(crate) fn new(k: &MultiIndex, eps: f64, kind: MomentKind) -> Self {
        let mut orders: Vec<(u32, u32)> = Vec::new();
        for &ki in k.as_slice().iter().filter(|&&ki| ki > 0) {
            match orders.iter_mut().find(|(o, _)| *o == ki) {
                Some(entry) => entry.1 += 1,
                None => orders.push((ki, 1)),
            }
        }
        let d = k.dim() as u32;
        Self { orders, scale: powi(INV_TWO_PI, d), half_d: d / 2, odd_d: d % 2 == 1, eps, kind }
    }

    #[inline]
    pub(crate) fn eval(&self, s11: f64, s12: f64, s22: f64) -> f64 {
        let a11 = s11 + self.eps;
        let a22 = s22 + self.eps;
        let det = a11 * a22 - s12 * s12;
        let inv = 1.0 / det;
        // det(A)^{-d/2}
        let mut v = self.scale * powi(inv, self.half_d);
        if self.odd_d {
            v *= libm::sqrt(inv);
        }
        // A^{-1} = [[a22, -s12], [-s12, a11]] / det
        for &(k, count) in &self.orders {
            let (c11, c12, c22) = (a22 * inv, -s12 * inv, a11 * inv);
            let f = match self.kind {
                MomentKind::Second => {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    sign * isserlis_unchecked(c11, c12, c22, k, k)
                }
                MomentKind::Diagonal => isserlis_unchecked(c11, c12, c22, 0, 2 * k),
            };
            v *= powi(f, count);
        }
        v
    }
}

/// Pointwise integrand at the parameter points `p1 = (t1, s1)` and
/// `p2 = (t2, s2)`: its integral over `[0,T]^4` is `E[|L_ε^{(k)}(T,0)|^2]`.
pub fn second_moment_integrand(
    spec: &FieldSpec,
    k: &MultiIndex,
    eps: f64,
    p1: (f64, f64),
    p2: (f64, f64),
) -> Result<f64> {
    integrand_checked(spec, k, eps, p1, p2, MomentKind::Second)
}

/// Integrand of the diagonal functional `F`.
pub fn diagonal_integrand(
    spec: &FieldSpec,
    k: &MultiIndex,
    eps: f64,
    p1: (f64, f64),
    p2: (f64, f64),
) -> Result<f64> {
    integrand_checked(spec, k, eps, p1, p2, MomentKind::Diagonal)
}

fn integrand_checked(
    spec: &FieldSpec,
    k: &MultiIndex,
    eps: f64,
    p1: (f64, f64),
    p2: (f64, f64),
    kind: MomentKind,
) -> Result<f64> {
    k.check_dim(spec.d)?;
    if !(eps >= 0.0) {
        return Err(domain(format!("eps must be nonnegative, got {eps}")));
    }
    let s11 = spec.field_cov(p1, p1)?;
    let s22 = spec.field_cov(p2, p2)?;
    let s12 = spec.field_cov(p1, p2)?;
    let det = (s11 + eps) * (s22 + eps) - s12 * s12;
    if !(det > 0.0) {
        return Err(Error::Singular(format!(
            "covariance of the pair is singular at {p1:?}, {p2:?} (det = {det:e})"
        )));
    }
    Ok(IntegrandKernel::new(k, eps, kind).eval(s11, s12, s22))
}

/// Tabulated covariances `(R(u,u), R(u,v), R(v,v))` and weights over a 2-D
/// rule for one time pair `(u, v)`.
#[derive(Debug, Clone, Default)]
pub struct PairTable {
    pub c11: Vec<f64>,
    pub c12: Vec<f64>,
    pub c22: Vec<f64>,
    pub w: Vec<f64>,
}

impl PairTable {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    fn push(&mut self, model: &CovarianceModel, u: f64, v: f64, w: f64) {
        self.c11.push(model.variance(u));
        self.c22.push(model.variance(v));
        self.c12.push(model.cov_unchecked(u, v));
        self.w.push(w);
    }
}

fn sub_intervals(iv: (f64, f64), cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&c| c > iv.0 && c < iv.1).collect();
    pts.insert(0, iv.0);
    pts.push(iv.1);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

fn merge_levels(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Build the rule for the time pair `(u, v) ∈ iu x iv` of `model`, resolving
/// features of width `scale`. With `half`, only `u <= v` is kept and weights
/// are doubled; valid when `iu == iv` and the integrand is symmetric.
pub(crate) fn pair_table(
    model: &CovarianceModel,
    iu: (f64, f64),
    iv: (f64, f64),
    scale: f64,
    splits: usize,
    gl: &GaussLegendre,
    half: bool,
) -> PairTable {
    let mut cuts = alloc::vec![iu.0, iu.1, iv.0, iv.1];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    cuts.dedup();
    let levels = |len: f64| levels_for_scale(len, scale, splits);
    let factor = if half { 2.0 } else { 1.0 };
    let mut table = PairTable::default();
    for ju in sub_intervals(iu, &cuts) {
        for jv in sub_intervals(iv, &cuts) {
            if ju == jv {
                let (c0, c1) = ju;
                let len = c1 - c0;
                let at_origin = c0 == 0.0;
                let grading = TriangleGrading {
                    x_lo: Some(levels(len)),
                    x_hi: at_origin.then(|| levels(len)),
                    y_lo: at_origin.then(|| levels(len)),
                };
                let tri = TriangleRule::new(len, grading, gl);
                for i in 0..tri.len() {
                    let lo = c0 + tri.y[i];
                    let hi = lo + tri.x[i];
                    table.push(model, lo, hi, factor * tri.w[i]);
                    if !half {
                        table.push(model, hi, lo, tri.w[i]);
                    }
                }
            } else {
                if half && ju.0 > jv.0 {
                    continue;
                }
                let (mut u_lo, mut u_hi, mut v_lo, mut v_hi) = (None, None, None, None);
                if ju.1 == jv.0 {
                    u_hi = Some(levels(ju.1 - ju.0));
                    v_lo = Some(levels(jv.1 - jv.0));
                }
                if jv.1 == ju.0 {
                    v_hi = Some(levels(jv.1 - jv.0));
                    u_lo = Some(levels(ju.1 - ju.0));
                }
                if ju.0 == 0.0 {
                    u_lo = merge_levels(u_lo, Some(levels(ju.1 - ju.0)));
                }
                if jv.0 == 0.0 {
                    v_lo = merge_levels(v_lo, Some(levels(jv.1 - jv.0)));
                }
                let ru = Rule1D::graded(ju.0, ju.1, u_lo, u_hi, gl);
                let rv = Rule1D::graded(jv.0, jv.1, v_lo, v_hi, gl);
                for (u, wu) in ru.iter() {
                    for (v, wv) in rv.iter() {
                        table.push(model, u, v, factor * wu * wv);
                    }
                }
            }
        }
    }
    table
}

/// Width in time at which `Var(X_{t+h} - X_t) ~ ε`.
fn time_scale(model: &CovarianceModel, eps: f64) -> f64 {
    libm::pow(eps, 0.5 / model.h_eff())
}

/// Smaller eigenvalue of a 2x2 covariance.
fn lambda_min(c11: f64, c12: f64, c22: f64) -> f64 {
    let half_tr = 0.5 * (c11 + c22);
    let gap = libm::sqrt(0.25 * (c11 - c22) * (c11 - c22) + c12 * c12);
    let hi = half_tr + gap;
    if hi > 0.0 {
        ((c11 * c22 - c12 * c12) / hi).max(0.0)
    } else {
        0.0
    }
}

/// A fully tabulated quadrature: the 4-dimensional sum is
/// `Σ_i Σ_j wt_i ws_j g(Σ_t[i] + Σ_s[j])`.
///
/// The `t` part of row `i` adds at least `λ_min(Σ_t[i])` to the smallest
/// eigenvalue of the pair covariance, so the inner table for that row only
/// needs to resolve the scale of `ε + λ_min`. Inner tables are graded to
/// powers of two of that scale, down to the scale of `ε` itself.
#[derive(Debug, Clone)]
pub struct MomentPlan {
    t: PairTable,
    s_tables: Vec<PairTable>,
    s_index: Vec<usize>,
    kernel: IntegrandKernel,
}

impl MomentPlan {
    pub fn build(
        spec: &FieldSpec,
        k: &MultiIndex,
        eps: f64,
        domain_a: &TimeRect,
        domain_b: &TimeRect,
        cfg: &QuadConfig,
        kind: MomentKind,
    ) -> Result<Self> {
        Self::build_with_symmetry(spec, k, eps, domain_a, domain_b, cfg, kind, true)
    }

    /// As [`MomentPlan::build`]; `use_symmetry = false` keeps both orderings of
    /// the `t` pair even when the two domains coincide.
    #[allow(clippy::too_many_arguments)]
    pub fn build_with_symmetry(
        spec: &FieldSpec,
        k: &MultiIndex,
        eps: f64,
        domain_a: &TimeRect,
        domain_b: &TimeRect,
        cfg: &QuadConfig,
        kind: MomentKind,
        use_symmetry: bool,
    ) -> Result<Self> {
        k.check_dim(spec.d)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(domain(format!("eps must be positive, got {eps}")));
        }
        domain_a.validate()?;
        domain_b.validate()?;
        let grade = cfg.grade_eps.unwrap_or(eps).min(eps);
        let gl = GaussLegendre::new(cfg.nodes_per_dim);
        let half = use_symmetry && domain_a == domain_b;
        let t = pair_table(
            &spec.model1,
            domain_a.t,
            domain_b.t,
            time_scale(&spec.model1, grade),
            cfg.splits,
            &gl,
            half,
        );
        let floor_scale = time_scale(&spec.model2, grade);
        let finest = libm::ceil(-libm::log2(floor_scale)).max(0.0) as usize;
        let mut slots: Vec<Option<PairTable>> = vec![None; finest + 1];
        let mut s_index = Vec::with_capacity(t.len());
        for i in 0..t.len() {
            let lam = lambda_min(t.c11[i], t.c12[i], t.c22[i]) + grade;
            let want = -libm::log2(time_scale(&spec.model2, lam));
            let j = (libm::ceil(want).max(0.0) as usize).min(finest);
            if slots[j].is_none() {
                let scale = libm::exp2(-(j as f64)).max(floor_scale);
                slots[j] = Some(pair_table(&spec.model2, domain_a.s, domain_b.s, scale, cfg.splits, &gl, false));
            }
            s_index.push(j);
        }
        // compact to the tables actually used
        let mut remap = vec![usize::MAX; slots.len()];
        let mut s_tables = Vec::new();
        for (j, slot) in slots.into_iter().enumerate() {
            if let Some(table) = slot {
                remap[j] = s_tables.len();
                s_tables.push(table);
            }
        }
        for idx in &mut s_index {
            *idx = remap[*idx];
        }
        Ok(Self { t, s_tables, s_index, kernel: IntegrandKernel::new(k, eps, kind) })
    }

    /// Number of outer rows (nodes of the `t` pair table).
    pub fn rows(&self) -> usize {
        self.t.len()
    }

    /// Total number of integrand evaluations.
    pub fn size(&self) -> usize {
        self.s_index.iter().map(|&j| self.s_tables[j].len()).sum()
    }

    /// Contribution of outer node `i` summed over all inner nodes.
    pub fn row(&self, i: usize) -> f64 {
        let (a11, a12, a22) = (self.t.c11[i], self.t.c12[i], self.t.c22[i]);
        let s = &self.s_tables[self.s_index[i]];
        let mut acc = 0.0;
        for j in 0..s.len() {
            acc += s.w[j] * self.kernel.eval(a11 + s.c11[j], a12 + s.c12[j], a22 + s.c22[j]);
        }
        self.t.w[i] * acc
    }
}

/// Strategy for summing the rows of a [`MomentPlan`]. Implementations must
/// add the rows in index order so results do not depend on scheduling.
pub trait PlanEvaluator {
    fn evaluate(&self, plan: &MomentPlan) -> f64;
}

/// Single-threaded row summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl PlanEvaluator for Sequential {
    fn evaluate(&self, plan: &MomentPlan) -> f64 {
        (0..plan.rows()).map(|i| plan.row(i)).sum()
    }
}

/// Graded tensor quadrature of the second moment over `domain_a x domain_b`.
pub fn second_moment_quadrature(
    spec: &FieldSpec,
    k: &MultiIndex,
    eps: f64,
    domain_a: &TimeRect,
    domain_b: &TimeRect,
    cfg: &QuadConfig,
) -> Result<MomentResult> {
    moment_quadrature_with(&Sequential, spec, k, eps, domain_a, domain_b, cfg, MomentKind::Second)
}

/// The diagonal functional `F_{T,ε}^{(k)}` over `[0,T]^4`.
pub fn diagonal_term_f(
    spec: &FieldSpec,
    k: &MultiIndex,
    eps: f64,
    horizon: f64,
    cfg: &QuadConfig,
) -> Result<MomentResult> {
    let sq = TimeRect::square(horizon);
    moment_quadrature_with(&Sequential, spec, k, eps, &sq, &sq, cfg, MomentKind::Diagonal)
}

/// Quadrature with an explicit row evaluator. The error estimate is the
/// difference against the next coarser rule; `splits` is raised up to
/// `cfg.max_splits` until it falls below tolerance.
#[allow(clippy::too_many_arguments)]
pub fn moment_quadrature_with<E: PlanEvaluator + ?Sized>(
    evaluator: &E,
    spec: &FieldSpec,
    k: &MultiIndex,
    eps: f64,
    domain_a: &TimeRect,
    domain_b: &TimeRect,
    cfg: &QuadConfig,
    kind: MomentKind,
) -> Result<MomentResult> {
    cfg.validate()?;
    let mut splits = cfg.splits;
    loop {
        let level = QuadConfig { splits, ..*cfg };
        let fine_plan = MomentPlan::build(spec, k, eps, domain_a, domain_b, &level, kind)?;
        let fine = evaluator.evaluate(&fine_plan);
        drop(fine_plan);
        let coarse_plan =
            MomentPlan::build(spec, k, eps, domain_a, domain_b, &level.coarser(), kind)?;
        let coarse = evaluator.evaluate(&coarse_plan);
        let err = libm::fabs(fine - coarse);
        let converged = err <= cfg.tolerance_for(fine);
        if converged || splits >= cfg.max_splits {
            return Ok(MomentResult {
                value: fine,
                err_estimate: err,
                eps,
                k: k.clone(),
                spec: *spec,
                horizon: [domain_a.t.1, domain_a.s.1, domain_b.t.1, domain_b.s.1]
                    .into_iter()
                    .fold(0.0, f64::max),
                domain: (*domain_a, *domain_b),
                converged,
                splits_used: splits,
            });
        }
        splits += 1;
    }
}

/// Geometric ε-grid `ε_j = eps_max ρ^j`, `j = 0..count`.
pub fn geometric_eps_grid(eps_max: f64, ratio: f64, count: usize) -> Result<Vec<f64>> {
    if !(eps_max > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count == 0 {
        return Err(domain("eps grid needs eps_max > 0, ratio in (0,1), count >= 1"));
    }
    Ok((0..count).map(|j| eps_max * libm::pow(ratio, j as f64)).collect())
}
