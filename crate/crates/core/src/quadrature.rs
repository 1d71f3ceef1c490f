// SPDX-License-Identifier: Apache-2.0

//! Quadrature building blocks: Gauss–Legendre rules, geometrically graded
//! meshes toward singular endpoints, a graded rule on the right triangle and
//! an algebraic-substitution rule for endpoint power singularities.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{domain, Result};

/// Tensor quadrature configuration shared by the moment engine and the lemma
/// checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Gauss–Legendre order per cell and dimension.
    pub nodes_per_dim: usize,
    /// Extra dyadic levels beyond the ε-scale of the singularity.
    pub splits: usize,
    /// Upper bound on `splits` when escalating after a failed convergence check.
    pub max_splits: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Resolve the mesh down to the scale of this width instead of the one
    /// being integrated. Scans set it to their smallest ε so every point uses
    /// the same rule.
    pub grade_eps: Option<f64>,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            nodes_per_dim: 4,
            splits: 2,
            max_splits: 4,
            abs_tol: 1e-12,
            rel_tol: 1e-3,
            grade_eps: None,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_dim < 4 {
            return Err(domain(format!("nodes_per_dim must be >= 4, got {}", self.nodes_per_dim)));
        }
        if self.splits < 2 {
            return Err(domain(format!("splits must be >= 2, got {}", self.splits)));
        }
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(domain("tolerances must be positive"));
        }
        if let Some(e) = self.grade_eps {
            if !(e > 0.0) {
                return Err(domain("grade_eps must be positive"));
            }
        }
        Ok(())
    }

    /// The next coarser rule, used for the two-level error estimate.
    pub fn coarser(&self) -> Self {
        Self {
            nodes_per_dim: self.nodes_per_dim - 1,
            splits: self.splits.saturating_sub(1),
            ..*self
        }
    }

    pub fn tolerance_for(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * libm::fabs(value))
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if libm::fabs(dx) < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of dyadic levels needed to resolve a feature of width `scale` on an
/// interval of `length`, plus `splits` safety levels.
pub fn levels_for_scale(length: f64, scale: f64, splits: usize) -> usize {
    let raw = if scale > 0.0 && length > scale { libm::ceil(libm::log2(length / scale)) } else { 0.0 };
    (raw as usize + splits).min(200)
}

/// Breakpoints of `[a, b]` graded geometrically (ratio ½) toward `a` with
/// `levels` levels: `a, a + ℓ2^{-levels}, ..., a + ℓ/2, b`.
fn graded_toward_start(a: f64, b: f64, levels: usize) -> Vec<f64> {
    let len = b - a;
    let mut pts = Vec::with_capacity(levels + 2);
    pts.push(a);
    for j in (1..=levels).rev() {
        pts.push(a + len * libm::exp2(-(j as f64)));
    }
    pts.push(b);
    pts
}

/// Cell breakpoints of `[a, b]` graded toward the requested ends. When both
/// ends are graded the interval is split at its midpoint.
pub fn graded_breakpoints(a: f64, b: f64, lo: Option<usize>, hi: Option<usize>) -> Vec<f64> {
    match (lo, hi) {
        (None, None) => alloc::vec![a, b],
        (Some(l), None) => graded_toward_start(a, b, l),
        (None, Some(l)) => {
            let mut pts: Vec<f64> =
                graded_toward_start(0.0, b - a, l).into_iter().map(|u| b - u).collect();
            pts.reverse();
            pts
        }
        (Some(l1), Some(l2)) => {
            let mid = 0.5 * (a + b);
            let mut left = graded_breakpoints(a, mid, Some(l1), None);
            let right = graded_breakpoints(mid, b, None, Some(l2));
            left.pop();
            left.extend(right);
            left
        }
    }
}

/// A one-dimensional rule as flat node and weight arrays.
#[derive(Debug, Clone, Default)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    /// Composite Gauss–Legendre over consecutive cells of `breakpoints`.
    pub fn composite(breakpoints: &[f64], gl: &GaussLegendre) -> Self {
        let mut rule = Self::default();
        for cell in breakpoints.windows(2) {
            for (x, w) in gl.mapped(cell[0], cell[1]) {
                rule.nodes.push(x);
                rule.weights.push(w);
            }
        }
        rule
    }

    pub fn graded(
        a: f64,
        b: f64,
        lo: Option<usize>,
        hi: Option<usize>,
        gl: &GaussLegendre,
    ) -> Self {
        Self::composite(&graded_breakpoints(a, b, lo, hi), gl)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Grading request for [`TriangleRule`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TriangleGrading {
    /// Levels toward the edge `x = 0`.
    pub x_lo: Option<usize>,
    /// Levels toward the vertex `x = L`, where the triangle collapses.
    pub x_hi: Option<usize>,
    /// Levels toward the edge `y = 0`.
    pub y_lo: Option<usize>,
}

/// Rule on `{x >= 0, y >= 0, x + y <= L}` through `y = (L - x) v`, tensor
/// graded in `(x, v)`.
#[derive(Debug, Clone, Default)]
pub struct TriangleRule {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl TriangleRule {
    pub fn new(length: f64, grading: TriangleGrading, gl: &GaussLegendre) -> Self {
        let xr = Rule1D::graded(0.0, length, grading.x_lo, grading.x_hi, gl);
        let vr = Rule1D::graded(0.0, 1.0, grading.y_lo, None, gl);
        let mut rule = Self::default();
        for (x, wx) in xr.iter() {
            let span = length - x;
            for (v, wv) in vr.iter() {
                rule.x.push(x);
                rule.y.push(span * v);
                rule.w.push(wx * wv * span);
            }
        }
        rule
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Nodes on `(0, 1)` stored together with their complements `1 - x`, so
/// integrands singular at `x = 1` can be evaluated without cancellation.
#[derive(Debug, Clone, Default)]
pub struct EndpointRule {
    pub x: Vec<f64>,
    pub one_minus_x: Vec<f64>,
    pub w: Vec<f64>,
}

impl EndpointRule {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `Σ w f(x, 1 - x)`.
    pub fn integrate<F: FnMut(f64, f64) -> f64>(&self, mut f: F) -> f64 {
        (0..self.len()).map(|i| self.w[i] * f(self.x[i], self.one_minus_x[i])).sum()
    }
}

/// Rule for `∫_0^1 f(x) dx` when `f ~ x^alpha` at 0 and `f ~ (1-x)^beta` at 1
/// (`alpha, beta > -1`). Each half is mapped by `x = ½ y^p` with
/// `p = 1/(1+alpha)` (and its mirror), which removes the leading power, then
/// integrated by composite Gauss–Legendre graded toward `y = 0` with
/// `levels` levels (the substitution leaves weaker `y^p` terms behind). Cells
/// above `y = 1/8` are split in four because large `p` turns the remaining
/// factor into a high-degree polynomial in `y`.
pub fn endpoint_power_rule(alpha: f64, beta: f64, gl: &GaussLegendre, levels: usize) -> EndpointRule {
    let coarse = graded_breakpoints(0.0, 1.0, Some(levels), None);
    let mut breaks = alloc::vec![0.0];
    for cell in coarse.windows(2) {
        let pieces = if cell[0] >= 0.125 { 4 } else { 1 };
        for j in 1..=pieces {
            breaks.push(cell[0] + (cell[1] - cell[0]) * j as f64 / pieces as f64);
        }
    }
    let base = Rule1D::composite(&breaks, gl);
    let mut rule = EndpointRule::default();
    let p = if alpha < 0.0 { 1.0 / (1.0 + alpha) } else { 1.0 };
    for (y, w) in base.iter() {
        let x = 0.5 * libm::pow(y, p);
        rule.x.push(x);
        rule.one_minus_x.push(1.0 - x);
        rule.w.push(0.5 * p * libm::pow(y, p - 1.0) * w);
    }
    let q = if beta < 0.0 { 1.0 / (1.0 + beta) } else { 1.0 };
    for (y, w) in base.iter() {
        let c = 0.5 * libm::pow(y, q);
        rule.x.push(1.0 - c);
        rule.one_minus_x.push(c);
        rule.w.push(0.5 * q * libm::pow(y, q - 1.0) * w);
    }
    rule
}
