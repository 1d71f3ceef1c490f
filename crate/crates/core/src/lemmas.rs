// SPDX-License-Identifier: Apache-2.0

//! Numerical checks of the supporting inequalities and identities:
//!
//! - the Dirichlet integral of `Π u_j^{-a_j}` over a simplex and its shifted
//!   variant;
//! - ε-asymptotics of the singular integrals `∫ (u^{2r} + ε)^{-p}` and
//!   `∫∫ (u^{2H1} + v^{2H2} + ε)^{-p}`;
//! - the chaining inequality `Σ |x_j - x_{j+1}|^2 >= 2/(m(m+1)) Σ |x_j|^2`;
//! - bounded-ratio sweeps for the Gaussian moment bound in terms of
//!   increments and for the comparison with the local nondeterminism form,
//!   both at `m = 2`, `d = 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha12Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Uniform};

use crate::covariance::{lnd_certificate, CovarianceModel};
use crate::error::{domain, Error, Result};
use crate::quadrature::{
    endpoint_power_rule, levels_for_scale, EndpointRule, GaussLegendre, QuadConfig, Rule1D,
    TriangleGrading, TriangleRule,
};
use crate::rates::{linear_fit, BOUNDARY_TOL};

/// A quadrature value with its two-level error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: f64,
    pub err_estimate: f64,
    pub converged: bool,
}

/// Evaluate at `cfg` and at `cfg.coarser()`, escalating `splits` up to
/// `cfg.max_splits` while the difference exceeds tolerance.
fn two_level<F: FnMut(&QuadConfig) -> f64>(cfg: &QuadConfig, mut f: F) -> Result<QuadValue> {
    cfg.validate()?;
    let mut splits = cfg.splits;
    loop {
        let level = QuadConfig { splits, ..*cfg };
        let fine = f(&level);
        let coarse = f(&level.coarser());
        let err = libm::fabs(fine - coarse);
        let converged = err <= cfg.tolerance_for(fine);
        if converged || splits >= cfg.max_splits {
            return Ok(QuadValue { value: fine, err_estimate: err, converged });
        }
        splits += 1;
    }
}

fn check_exponents(a: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(domain("at least one exponent is required"));
    }
    if let Some(bad) = a.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(domain(format!("exponents must lie in (0,1), got {bad}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(domain(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// `∫_{Σu < T} Π u_j^{-a_j} du = Π Γ(1 - a_j) / Γ(m + 1 - Σ a) · T^{Σ(1 - a)}`.
pub fn dirichlet_closed_form(horizon: f64, a: &[f64]) -> Result<f64> {
    check_positive("T", horizon)?;
    check_exponents(a)?;
    let m = a.len() as f64;
    let sum: f64 = a.iter().sum();
    let num: f64 = a.iter().map(|v| libm::tgamma(1.0 - v)).product();
    Ok(num / libm::tgamma(m + 1.0 - sum) * libm::pow(horizon, m - sum))
}

fn simplex_levels(cfg: &QuadConfig) -> usize {
    4 * cfg.splits
}

/// Stick-breaking exponents: after `u_j = L x_j Π_{i<j} (1 - x_i)`, the
/// integrand `Π u_j^{-a_j}` times the Jacobian behaves like
/// `x_j^{-a_j} (1 - x_j)^{beta_j}` in each coordinate.
fn stick_breaking_betas(a: &[f64], extra: f64) -> Vec<f64> {
    let m = a.len();
    (0..m)
        .map(|j| (m - 1 - j) as f64 - a[j + 1..].iter().sum::<f64>() + extra)
        .collect()
}

/// Graded quadrature of `Π u_j^{-a_j}` over `{u >= 0, Σ u < T}`, `m <= 3`.
/// The stick-breaking map makes the integrand a product over coordinates,
/// so the tensor sum is evaluated as a product of one-dimensional sums.
pub fn dirichlet_quadrature(horizon: f64, a: &[f64], cfg: &QuadConfig) -> Result<QuadValue> {
    check_positive("T", horizon)?;
    check_exponents(a)?;
    if a.len() > 3 {
        return Err(domain(format!("simplex quadrature supports m <= 3, got {}", a.len())));
    }
    let betas = stick_breaking_betas(a, 0.0);
    let total: f64 = a.iter().map(|v| 1.0 - v).sum();
    two_level(cfg, |c| {
        let gl = GaussLegendre::new(c.nodes_per_dim);
        let mut prod = libm::pow(horizon, total);
        for (aj, bj) in a.iter().zip(&betas) {
            let rule = endpoint_power_rule(-aj, *bj, &gl, simplex_levels(c));
            prod *= rule.integrate(|x, cx| libm::pow(x, -aj) * libm::pow(cx, *bj));
        }
        prod
    })
}

/// Tensor stick-breaking rule on `{u >= 0, Σ u < size}` in `a.len()`
/// dimensions: `(u, weight, size - Σ u)` per node.
fn simplex_nodes(size: f64, a: &[f64], extra: f64, gl: &GaussLegendre, levels: usize) -> Vec<(Vec<f64>, f64, f64)> {
    let betas = stick_breaking_betas(a, extra);
    let rules: Vec<EndpointRule> =
        a.iter().zip(&betas).map(|(aj, bj)| endpoint_power_rule(-aj, *bj, gl, levels)).collect();
    let mut nodes = vec![(Vec::new(), 1.0, size)];
    for rule in &rules {
        let mut next = Vec::with_capacity(nodes.len() * rule.len());
        for (u, w, rest) in &nodes {
            for i in 0..rule.len() {
                let mut v = u.clone();
                v.push(rest * rule.x[i]);
                next.push((v, w * rest * rule.w[i], rest * rule.one_minus_x[i]));
            }
        }
        nodes = next;
    }
    nodes
}

/// Outcome of an inequality check `lhs <= rhs` (or `>=`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Compare `∫_{D} Π u_j^{-a_j}` over `D = {u_1 > T, T < Σ u < T + h}` with
/// the Dirichlet value at size `h`.
pub fn shifted_simplex_bound_check(horizon: f64, h: f64, a: &[f64], cfg: &QuadConfig) -> Result<(BoundCheck, QuadValue)> {
    check_positive("T", horizon)?;
    check_positive("h", h)?;
    check_exponents(a)?;
    if a.len() > 3 {
        return Err(domain(format!("simplex quadrature supports m <= 3, got {}", a.len())));
    }
    if h > horizon {
        return Err(domain(format!("h = {h} exceeds T = {horizon}")));
    }
    let lhs = two_level(cfg, |c| {
        let gl = GaussLegendre::new(c.nodes_per_dim);
        // u_1 ∈ (T, T + rest) is smooth since u_1 >= T >= h
        let z = Rule1D::composite(&[0.0, 0.25, 0.5, 0.75, 1.0], &gl);
        let mut acc = 0.0;
        for (u, w, rest) in simplex_nodes(h, &a[1..], 1.0, &gl, simplex_levels(c)) {
            let tail: f64 = u.iter().zip(&a[1..]).map(|(uj, aj)| libm::pow(*uj, -aj)).product();
            let inner = z.integrate(|s| libm::pow(horizon + rest * s, -a[0])) * rest;
            acc += w * tail * inner;
        }
        acc
    })?;
    let rhs = dirichlet_closed_form(h, a)?;
    Ok((BoundCheck { lhs: lhs.value, rhs, ok: lhs.value <= rhs * (1.0 + 1e-3) }, lhs))
}

fn check_asym_args(h1: f64, h2: f64, alpha: f64, eps: f64, horizon: f64) -> Result<()> {
    for h in [h1, h2] {
        if !(h > 0.0 && h < 1.0) {
            return Err(domain(format!("Hurst index must lie in (0,1), got {h}")));
        }
    }
    if !(alpha >= 0.0) {
        return Err(domain(format!("alpha must be nonnegative, got {alpha}")));
    }
    check_positive("T", horizon)?;
    if !(eps > 0.0 && eps < 0.5 * horizon) {
        return Err(domain(format!("eps must lie in (0, T/2), got {eps}")));
    }
    Ok(())
}

/// `∫_0^T (u^{2r} + ε)^{-d/2-α} du`, `r = H1 H2 / (H1 + H2)`.
pub fn asym_integral_1d(h1: f64, h2: f64, d: usize, alpha: f64, eps: f64, horizon: f64) -> Result<QuadValue> {
    check_asym_args(h1, h2, alpha, eps, horizon)?;
    let two_r = 2.0 * h1 * h2 / (h1 + h2);
    let p = 0.5 * d as f64 + alpha;
    let scale = libm::pow(eps, 1.0 / two_r);
    two_level(&QuadConfig::default(), |c| {
        let gl = GaussLegendre::new(c.nodes_per_dim);
        let levels = levels_for_scale(horizon, scale, c.splits);
        Rule1D::graded(0.0, horizon, Some(levels), None, &gl)
            .integrate(|u| libm::pow(libm::pow(u, two_r) + eps, -p))
    })
}

/// `∫_{[0,T]^2} (u^{2H1} + v^{2H2} + ε)^{-d/2-α} du dv`.
pub fn asym_integral_2d(h1: f64, h2: f64, d: usize, alpha: f64, eps: f64, horizon: f64) -> Result<QuadValue> {
    check_asym_args(h1, h2, alpha, eps, horizon)?;
    let p = 0.5 * d as f64 + alpha;
    two_level(&QuadConfig::default(), |c| {
        let gl = GaussLegendre::new(c.nodes_per_dim);
        let ru = Rule1D::graded(
            0.0,
            horizon,
            Some(levels_for_scale(horizon, libm::pow(eps, 0.5 / h1), c.splits)),
            None,
            &gl,
        );
        let rv = Rule1D::graded(
            0.0,
            horizon,
            Some(levels_for_scale(horizon, libm::pow(eps, 0.5 / h2), c.splits)),
            None,
            &gl,
        );
        let vpow: Vec<f64> = rv.nodes.iter().map(|v| libm::pow(*v, 2.0 * h2) + eps).collect();
        let mut acc = 0.0;
        for (u, wu) in ru.iter() {
            let a = libm::pow(u, 2.0 * h1);
            let row: f64 =
                vpow.iter().zip(&rv.weights).map(|(b, wv)| wv * libm::pow(a + b, -p)).sum();
            acc += wu * row;
        }
        acc
    })
}

/// Which singular integral a rate check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymDisplay {
    OneDim,
    TwoDim,
}

/// Three-way behaviour of the singular integrals as `ε ↓ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymRegime {
    /// `ε^{1/(2r) - d/2 - α}`.
    Power,
    /// `ln(1 + ε^{-1/2})`.
    Log,
    /// Bounded.
    Bounded,
}

pub fn asym_regime(h1: f64, h2: f64, d: usize, alpha: f64) -> AsymRegime {
    let lhs = (h1 + h2) / (h1 * h2);
    let rhs = d as f64 + 2.0 * alpha;
    if libm::fabs(lhs - rhs) <= BOUNDARY_TOL * rhs.max(1.0) {
        AsymRegime::Log
    } else if lhs < rhs {
        AsymRegime::Power
    } else {
        AsymRegime::Bounded
    }
}

/// Result of a rate check over a geometric ε-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymCheck {
    pub display: AsymDisplay,
    pub regime: AsymRegime,
    /// Predicted log-log slope of the value: the power exponent, or zero.
    pub predicted_slope: f64,
    /// Fitted log-log slope of `value / g(ε)` plus the predicted slope, so
    /// that it is directly comparable with `predicted_slope`.
    pub fitted_slope: f64,
    /// Relative change between the two smallest decades (bounded regime).
    pub bounded_change: Option<f64>,
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
    pub converged: bool,
}

impl AsymCheck {
    pub fn slope_error(&self) -> f64 {
        libm::fabs(self.fitted_slope - self.predicted_slope)
    }

    pub fn ok(&self, slope_tol: f64, bounded_tol: f64) -> bool {
        self.slope_error() <= slope_tol && self.bounded_change.map_or(true, |c| c <= bounded_tol)
    }
}

/// Half-decade grid `10^{-8}, 10^{-7.5}, ..., 10^{-2}`.
pub fn asym_eps_grid() -> Vec<f64> {
    (0..13).map(|j| libm::pow(10.0, -8.0 + 0.5 * j as f64)).collect()
}

/// Evaluate one display over [`asym_eps_grid`] and fit the log-log slope of
/// `value / g(ε)` where `g` is the predicted form.
pub fn asym_rate_check(display: AsymDisplay, h1: f64, h2: f64, d: usize, alpha: f64, horizon: f64) -> Result<AsymCheck> {
    let regime = asym_regime(h1, h2, d, alpha);
    let exponent = (h1 + h2) / (2.0 * h1 * h2) - 0.5 * d as f64 - alpha;
    let eps = asym_eps_grid();
    let mut values = Vec::with_capacity(eps.len());
    let mut converged = true;
    for &e in &eps {
        let q = match display {
            AsymDisplay::OneDim => asym_integral_1d(h1, h2, d, alpha, e, horizon)?,
            AsymDisplay::TwoDim => asym_integral_2d(h1, h2, d, alpha, e, horizon)?,
        };
        converged &= q.converged;
        values.push(q.value);
    }
    let g = |e: f64| match regime {
        AsymRegime::Power => libm::pow(e, exponent),
        AsymRegime::Log => libm::log(1.0 + 1.0 / libm::sqrt(e)),
        AsymRegime::Bounded => 1.0,
    };
    let lx: Vec<f64> = eps.iter().map(|e| libm::log(*e)).collect();
    let ly: Vec<f64> = eps.iter().zip(&values).map(|(e, v)| libm::log(v / g(*e))).collect();
    let predicted_slope = if regime == AsymRegime::Power { exponent } else { 0.0 };
    let fitted_slope = linear_fit(&lx, &ly)?.slope + predicted_slope;
    let bounded_change = (regime == AsymRegime::Bounded).then(|| {
        // values at 1e-8 and 1e-6
        libm::fabs(values[0] - values[4]) / libm::fabs(values[4])
    });
    Ok(AsymCheck { display, regime, predicted_slope, fitted_slope, bounded_change, eps, values, converged })
}

/// `Σ |x_j - x_{j+1}|^2 >= 2/(m(m+1)) Σ |x_j|^2` with `x_{m+1} = 0`.
pub fn quadratic_ineq_check(xs: &[Vec<f64>]) -> Result<BoundCheck> {
    let m = xs.len();
    if m == 0 {
        return Err(domain("at least one vector is required"));
    }
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d) {
        return Err(Error::ShapeMismatch("vectors differ in dimension".into()));
    }
    let mut lhs = 0.0;
    let mut norm = 0.0;
    for j in 0..m {
        for c in 0..d {
            let next = if j + 1 < m { xs[j + 1][c] } else { 0.0 };
            let diff = xs[j][c] - next;
            lhs += diff * diff;
            norm += xs[j][c] * xs[j][c];
        }
    }
    let rhs = 2.0 / (m * (m + 1)) as f64 * norm;
    Ok(BoundCheck { lhs, rhs, ok: lhs >= rhs - 1e-12 * rhs.max(1.0) })
}

/// Both sides and their ratio for one configuration of a bounded-ratio check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioValue {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub converged: bool,
}

/// Gaussian moment bound at `m = 2`, `d = 1`: the ratio of
///
/// ```text
/// ∫_{R^2} exp(-½ Var(y1 X_{s1} + y2 X_{s2}) - ε|y|^2/2) |y1 y2|^k dy
/// ```
///
/// to `Σ_patterns Π_j [(s_j - s_{j-1})^{2H} + ε]^{-(1 + k(p_j + p̄_{j-1}))/2}`
/// over `p_1 ∈ {0, 1}`, `p̄_1 = 1 - p_1`, `p_2 = 1`, `p̄_0 = 0`.
///
/// The left side is evaluated by whitening with the Cholesky factor of
/// `B = G + εI` and polar coordinates: the radial part is `2^k k!` and the
/// angular integrand `|y1 y2|^k` is split at the zeros of the linear forms.
pub fn moment_bound_ratio(model: &CovarianceModel, s: (f64, f64), k: u32, eps: f64) -> Result<RatioValue> {
    let (s1, s2) = s;
    if !(s1 > 0.0 && s2 > s1) || !s2.is_finite() {
        return Err(domain(format!("times must satisfy 0 < s1 < s2, got ({s1}, {s2})")));
    }
    if !(eps >= 0.0) {
        return Err(domain(format!("eps must be nonnegative, got {eps}")));
    }
    let b11 = model.variance(s1) + eps;
    let b22 = model.variance(s2) + eps;
    let b12 = model.cov_unchecked(s1, s2);
    let l11 = libm::sqrt(b11);
    let l21 = b12 / l11;
    let rem = b22 - l21 * l21;
    if !(l11 > 0.0) || !(rem > 0.0) {
        return Err(Error::Singular(format!("pair covariance is singular at ({s1}, {s2})")));
    }
    let l22 = libm::sqrt(rem);
    // y = L^{-T} z
    let y1 = |phi: f64| libm::cos(phi) / l11 - l21 * libm::sin(phi) / (l11 * l22);
    let y2 = |phi: f64| libm::sin(phi) / l22;
    let phi0 = libm::atan2(l22, l21);
    let mut cuts = vec![0.0, PI, 2.0 * PI];
    for c in [phi0, phi0 + PI] {
        let c = c.rem_euclid(2.0 * PI);
        if c > 0.0 && c < 2.0 * PI {
            cuts.push(c);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let angular = |n: usize| {
        Rule1D::composite(&cuts, &GaussLegendre::new(n))
            .integrate(|phi| libm::pow(libm::fabs(y1(phi) * y2(phi)), k as f64))
    };
    let fine = angular(24);
    let coarse = angular(20);
    let radial = libm::exp2(k as f64) * (1..=k).map(|i| i as f64).product::<f64>();
    let lhs = radial * fine / (l11 * l22);
    let converged = libm::fabs(fine - coarse) <= 1e-10 * libm::fabs(fine);

    let two_h = 2.0 * model.h_eff();
    let w1 = libm::pow(s1, two_h) + eps;
    let w2 = libm::pow(s2 - s1, two_h) + eps;
    let kf = k as f64;
    let mut rhs = 0.0;
    for p1 in [0.0, 1.0] {
        let pbar1 = 1.0 - p1;
        // j = 1 uses p̄_0 = 0; j = 2 uses p_2 = 1
        rhs += libm::pow(w1, -(1.0 + kf * p1) / 2.0) * libm::pow(w2, -(1.0 + kf * (1.0 + pbar1)) / 2.0);
    }
    Ok(RatioValue { lhs, rhs, ratio: lhs / rhs, converged })
}

/// Smallest LND ratio over a battery of two-point configurations in `(0, T]`.
pub fn lnd_constant(model: &CovarianceModel, horizon: f64) -> Result<f64> {
    check_positive("T", horizon)?;
    let mut kappa = f64::INFINITY;
    for i in 0..12 {
        let u1 = horizon * libm::exp2(-(i as f64));
        for j in 0..12 {
            let u2 = u1 + (horizon - u1) * libm::exp2(-(j as f64));
            if u2 <= u1 {
                continue;
            }
            let cert = lnd_certificate(model, &[u1, u2], horizon)?;
            kappa = kappa.min(cert.kappa_hat);
        }
        // also the configuration with u1 near T
        let u1b = horizon * (1.0 - libm::exp2(-(i as f64) - 1.0));
        let cert = lnd_certificate(model, &[u1b, horizon], horizon)?;
        kappa = kappa.min(cert.kappa_hat);
    }
    Ok(kappa)
}

fn ordered_pair_integral<F: Fn(f64, f64) -> f64>(horizon: f64, scale: f64, cfg: &QuadConfig, f: F) -> Result<QuadValue> {
    two_level(cfg, |c| {
        let gl = GaussLegendre::new(c.nodes_per_dim);
        let levels = levels_for_scale(horizon, scale, c.splits);
        let grading = TriangleGrading { x_lo: Some(levels), x_hi: None, y_lo: Some(levels) };
        let tri = TriangleRule::new(horizon, grading, &gl);
        // x = u2 - u1, y = u1
        (0..tri.len()).map(|i| tri.w[i] * f(tri.y[i], tri.y[i] + tri.x[i])).sum()
    })
}

/// LND comparison at `m = 2`, `d = 1`: the ratio of
/// `(∫_{0<u1<u2<T} exp(-½ Var(y1 X_{u1} + y2 X_{u2})) du)^p` to
/// `∫_{0<u1<u2<T} exp(-κ/2 [(y1+y2)^2 Δu1^{2H/p} + y2^2 Δu2^{2H/p}]) du`.
pub fn lnd_comparison_ratio(
    model: &CovarianceModel,
    y: (f64, f64),
    p: f64,
    horizon: f64,
    kappa: f64,
    cfg: &QuadConfig,
) -> Result<RatioValue> {
    check_positive("T", horizon)?;
    check_positive("kappa", kappa)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(domain(format!("p must be at least 1, got {p}")));
    }
    let (y1, y2) = y;
    let h = model.h_eff();
    let size = libm::sqrt(y1 * y1 + y2 * y2);
    let lhs_scale = if size > 1.0 { horizon * libm::pow(size, -1.0 / h) } else { horizon };
    let rhs_scale =
        if kappa * size * size > 1.0 { horizon * libm::pow(kappa * size * size, -0.5 * p / h) } else { horizon };
    let lhs = ordered_pair_integral(horizon, lhs_scale, cfg, |u1, u2| {
        let var = y1 * y1 * model.variance(u1)
            + 2.0 * y1 * y2 * model.cov_unchecked(u1, u2)
            + y2 * y2 * model.variance(u2);
        libm::exp(-0.5 * var)
    })?;
    let a = (y1 + y2) * (y1 + y2);
    let b = y2 * y2;
    let e = 2.0 * h / p;
    let rhs = ordered_pair_integral(horizon, rhs_scale, cfg, |u1, u2| {
        libm::exp(-0.5 * kappa * (a * libm::pow(u1, e) + b * libm::pow(u2 - u1, e)))
    })?;
    let lhs_p = libm::pow(lhs.value, p);
    Ok(RatioValue { lhs: lhs_p, rhs: rhs.value, ratio: lhs_p / rhs.value, converged: lhs.converged && rhs.converged })
}

/// Summary of a bounded-ratio sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub label: String,
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Largest ratio on the far end of the sweep, where a blow-up would show.
    pub extreme: f64,
    pub converged: bool,
}

impl SweepSummary {
    pub fn from_ratios(label: String, ratios: &[f64], extreme: f64, converged: bool) -> Self {
        let mut sorted = ratios.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        let n = sorted.len();
        let median = if n == 0 {
            f64::NAN
        } else if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self {
            label,
            count: n,
            min: sorted.first().copied().unwrap_or(f64::NAN),
            median,
            max: sorted.last().copied().unwrap_or(f64::NAN),
            extreme,
            converged,
        }
    }

    /// `extreme / median`.
    pub fn spread(&self) -> f64 {
        self.extreme / self.median
    }

    /// Finite positive ratios, `max < cap`, and `extreme <= factor * median`.
    pub fn bounded(&self, factor: f64, cap: f64) -> bool {
        self.min > 0.0 && self.max.is_finite() && self.max < cap && self.spread() <= factor
    }
}

/// Sweep of [`moment_bound_ratio`] over a `10 x 10 x 4` grid in
/// `(s1, s2 - s1, ε)` with `s1 ∈ [10^-3 T, T]`, `s2 - s1 ∈ [10^-3 T, 0.99 T]`.
pub fn moment_bound_sweep(model: &CovarianceModel, k: u32, horizon: f64) -> Result<SweepSummary> {
    check_positive("T", horizon)?;
    let geo = |lo: f64, hi: f64, i: usize| lo * libm::pow(hi / lo, i as f64 / 9.0);
    let mut ratios = Vec::with_capacity(400);
    let mut converged = true;
    for i in 0..10 {
        let s1 = geo(1e-3 * horizon, horizon, i);
        for j in 0..10 {
            let gap = geo(1e-3 * horizon, 0.99 * horizon, j);
            for eps in [0.0, 1e-4, 1e-2, 1.0] {
                let v = moment_bound_ratio(model, (s1, s1 + gap), k, eps)?;
                converged &= v.converged;
                ratios.push(v.ratio);
            }
        }
    }
    // every corner of the grid approaches a degenerate configuration, so the
    // whole grid counts as its far end
    let max = ratios.iter().copied().fold(f64::NAN, f64::max);
    Ok(SweepSummary::from_ratios(format!("moment bound k={k}"), &ratios, max, converged))
}

/// Directions used by [`lnd_comparison_sweep`].
pub const SWEEP_ANGLES: [f64; 4] = [0.3, 1.2, 2.0, 2.8];
/// Magnitudes `|y|` used by [`lnd_comparison_sweep`].
pub const SWEEP_SIZES: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

/// Sweep of [`lnd_comparison_ratio`] over `|y| ∈ {1, 10, 100, 1000}` along
/// the direction `theta` at fixed `p`. The far end is `|y| = 1000`.
pub fn lnd_comparison_sweep(
    model: &CovarianceModel,
    p: f64,
    theta: f64,
    horizon: f64,
    kappa: f64,
    cfg: &QuadConfig,
) -> Result<SweepSummary> {
    let mut ratios = Vec::new();
    let mut converged = true;
    for size in SWEEP_SIZES {
        let y = (size * libm::cos(theta), size * libm::sin(theta));
        let v = lnd_comparison_ratio(model, y, p, horizon, kappa, cfg)?;
        converged &= v.converged;
        ratios.push(v.ratio);
    }
    let extreme = ratios[ratios.len() - 1];
    Ok(SweepSummary::from_ratios(format!("lnd comparison p={p} theta={theta}"), &ratios, extreme, converged))
}

/// Options for [`run_battery`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryOptions {
    pub seed: u64,
    pub horizon: f64,
    pub quad: QuadConfig,
    /// Multiplier applied to every acceptance threshold.
    pub tolerance_scale: f64,
    /// Random trials per simplex dimension.
    pub simplex_trials: usize,
    /// Random trials of the chaining inequality.
    pub chaining_trials: usize,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self {
            seed: 20240601,
            horizon: 1.0,
            quad: QuadConfig::default(),
            tolerance_scale: 1.0,
            simplex_trials: 50,
            chaining_trials: 100_000,
        }
    }
}

/// One row of the battery report.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub id: &'static str,
    pub trials: usize,
    /// Worst observed error or ratio, compared against `threshold`.
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
    pub note: String,
}

/// Models for the bounded-ratio sweeps.
pub fn sweep_models() -> Vec<CovarianceModel> {
    vec![
        CovarianceModel::brownian(),
        CovarianceModel::fbm(0.3).expect("valid"),
        CovarianceModel::fbm(0.7).expect("valid"),
        CovarianceModel::bifbm(0.6, 0.8).expect("valid"),
        CovarianceModel::subfbm(0.6).expect("valid"),
    ]
}

/// Parameter sets `(H1, H2, d, α)` covering the three singular-integral regimes.
pub const ASYM_CASES: [(f64, f64, usize, f64); 3] = [
    (0.5, 0.5, 4, 1.0),
    (0.5, 0.5, 4, 0.0),
    (0.5, 0.5, 2, 0.0),
];

pub fn random_exponents(rng: &mut ChaCha12Rng, m: usize) -> Vec<f64> {
    let u = Uniform::new(0.05, 0.95);
    (0..m).map(|_| u.sample(rng)).collect()
}

/// Run the full set of checks.
pub fn run_battery(opts: &BatteryOptions) -> Result<Vec<LemmaReport>> {
    let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
    let s = opts.tolerance_scale;
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    let mut trials = 0;
    for m in 1..=3 {
        for _ in 0..opts.simplex_trials {
            let a = random_exponents(&mut rng, m);
            let t = Uniform::new(0.5, 2.0).sample(&mut rng);
            let q = dirichlet_quadrature(t, &a, &opts.quad)?;
            let exact = dirichlet_closed_form(t, &a)?;
            worst = worst.max(libm::fabs(q.value - exact) / exact);
            trials += 1;
        }
    }
    let threshold = 1e-4 * s;
    out.push(LemmaReport {
        id: "dirichlet_identity",
        trials,
        worst,
        threshold,
        passed: worst < threshold,
        note: "max relative error, quadrature vs closed form".into(),
    });

    let mut worst: f64 = 0.0;
    let mut trials = 0;
    for m in 1..=3 {
        for _ in 0..opts.simplex_trials {
            let a = random_exponents(&mut rng, m);
            let t = Uniform::new(0.5, 2.0).sample(&mut rng);
            let h = t * Uniform::new(0.01, 1.0).sample(&mut rng);
            let (b, _) = shifted_simplex_bound_check(t, h, &a, &opts.quad)?;
            worst = worst.max(b.lhs / b.rhs);
            trials += 1;
        }
    }
    let threshold = 1.0 + 1e-3 * s;
    out.push(LemmaReport {
        id: "shifted_simplex_bound",
        trials,
        worst,
        threshold,
        passed: worst <= threshold,
        note: "max lhs/rhs".into(),
    });

    let mut worst: f64 = 0.0;
    let mut passed = true;
    let mut trials = 0;
    for (h1, h2, d, alpha) in ASYM_CASES {
        for display in [AsymDisplay::OneDim, AsymDisplay::TwoDim] {
            let c = asym_rate_check(display, h1, h2, d, alpha, opts.horizon)?;
            worst = worst.max(c.slope_error());
            passed &= c.ok(0.05 * s, 0.01 * s);
            trials += 1;
        }
    }
    out.push(LemmaReport {
        id: "singular_integral_rates",
        trials,
        worst,
        threshold: 0.05 * s,
        passed,
        note: "max |fitted - predicted| log-log slope".into(),
    });

    let mut violations = 0usize;
    let mut min_margin = f64::INFINITY;
    let mu = Uniform::new_inclusive(1usize, 10);
    let du = Uniform::new_inclusive(1usize, 3);
    let xu = Uniform::new(-1.0, 1.0);
    for _ in 0..opts.chaining_trials {
        let m = mu.sample(&mut rng);
        let d = du.sample(&mut rng);
        let xs: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| xu.sample(&mut rng)).collect()).collect();
        let b = quadratic_ineq_check(&xs)?;
        if !b.ok {
            violations += 1;
        }
        if b.rhs > 0.0 {
            min_margin = min_margin.min(b.lhs / b.rhs);
        }
    }
    let threshold = if s > 0.0 { 0.0 } else { -1.0 };
    out.push(LemmaReport {
        id: "quadratic_chaining",
        trials: opts.chaining_trials,
        worst: violations as f64,
        threshold,
        passed: (violations as f64) <= threshold,
        note: format!("violations; min lhs/rhs = {min_margin:.6}"),
    });

    let mut spread: f64 = 0.0;
    let mut passed = true;
    let mut trials = 0;
    for model in sweep_models() {
        for k in 0..=2 {
            let sw = moment_bound_sweep(&model, k, opts.horizon)?;
            spread = spread.max(sw.spread());
            passed &= sw.bounded(10.0 * s, 1e3);
            trials += sw.count;
        }
    }
    out.push(LemmaReport {
        id: "moment_bound_ratio",
        trials,
        worst: spread,
        threshold: 10.0 * s,
        passed,
        note: "max over sub-sweeps of max/median ratio".into(),
    });

    let mut spread: f64 = 0.0;
    let mut passed = true;
    let mut trials = 0;
    for model in sweep_models() {
        let kappa = lnd_constant(&model, opts.horizon)?;
        for p in [1.0, 2.0, 4.0] {
            for theta in SWEEP_ANGLES {
                let sw = lnd_comparison_sweep(&model, p, theta, opts.horizon, kappa, &opts.quad)?;
                spread = spread.max(sw.spread());
                passed &= sw.bounded(10.0 * s, 1e3);
                trials += sw.count;
            }
        }
    }
    out.push(LemmaReport {
        id: "lnd_comparison_ratio",
        trials,
        worst: spread,
        threshold: 10.0 * s,
        passed,
        note: "max over sub-sweeps of ratio at |y| = 1000 over median".into(),
    });
    Ok(out)
}
