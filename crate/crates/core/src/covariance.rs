// SPDX-License-Identifier: Apache-2.0

//! Component covariance kernels of the Gaussian class and the checks that
//! place a model inside it: Gram matrices, local nondeterminism certificates
//! and the variance upper bound.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};

/// Relative tolerance for the positive semidefinite check, scaled by the trace.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Family of a one-dimensional covariance kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Bifractional Brownian motion with parameters `(H0, K0)`.
    BiFbm,
    /// Subfractional Brownian motion with parameter `H`.
    SubFbm,
}

/// A one-dimensional component kernel. Coordinates of the d-dimensional
/// process are i.i.d. copies of this kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceModel {
    kind: ModelKind,
    h0: f64,
    k0: f64,
}

impl CovarianceModel {
    /// Bifractional Brownian motion; `H_eff = h0 * k0`.
    pub fn bifbm(h0: f64, k0: f64) -> Result<Self> {
        if !(h0 > 0.0 && h0 < 1.0) {
            return Err(domain(format!("bi-fBm H0 must lie in (0,1), got {h0}")));
        }
        if !(k0 > 0.0 && k0 <= 1.0) {
            return Err(domain(format!("bi-fBm K0 must lie in (0,1], got {k0}")));
        }
        Ok(Self { kind: ModelKind::BiFbm, h0, k0 })
    }

    /// Subfractional Brownian motion with Hurst index `h`.
    pub fn subfbm(h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(domain(format!("sub-fBm H must lie in (0,1), got {h}")));
        }
        Ok(Self { kind: ModelKind::SubFbm, h0: h, k0: 1.0 })
    }

    /// Fractional Brownian motion, i.e. bi-fBm with `K0 = 1`.
    pub fn fbm(h: f64) -> Result<Self> {
        Self::bifbm(h, 1.0)
    }

    /// Standard Brownian motion.
    pub fn brownian() -> Self {
        Self { kind: ModelKind::BiFbm, h0: 0.5, k0: 1.0 }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// Effective Hurst index: `H0 * K0` for bi-fBm, `H` for sub-fBm.
    pub fn h_eff(&self) -> f64 {
        match self.kind {
            ModelKind::BiFbm => self.h0 * self.k0,
            ModelKind::SubFbm => self.h0,
        }
    }

    /// True for the fBm special case (stationary increments).
    pub fn is_fbm(&self) -> bool {
        self.kind == ModelKind::BiFbm && self.k0 == 1.0
    }

    pub fn is_brownian(&self) -> bool {
        self.is_fbm() && self.h0 == 0.5
    }

    /// Covariance `E[X_s X_t]`.
    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0) || !(t >= 0.0) {
            return Err(domain(format!("times must be nonnegative, got ({s}, {t})")));
        }
        Ok(self.cov_unchecked(s, t))
    }

    /// Covariance without the domain check; callers guarantee `s, t >= 0`.
    #[inline]
    pub fn cov_unchecked(&self, s: f64, t: f64) -> f64 {
        if s == 0.0 || t == 0.0 {
            return 0.0;
        }
        match self.kind {
            ModelKind::BiFbm => {
                let two_h = 2.0 * self.h0;
                let d = libm::fabs(t - s);
                if self.k0 == 1.0 {
                    0.5 * (libm::pow(t, two_h) + libm::pow(s, two_h) - libm::pow(d, two_h))
                } else {
                    let base = libm::pow(t, two_h) + libm::pow(s, two_h);
                    libm::exp2(-self.k0)
                        * (libm::pow(base, self.k0) - libm::pow(d, two_h * self.k0))
                }
            }
            ModelKind::SubFbm => {
                let two_h = 2.0 * self.h0;
                libm::pow(t, two_h) + libm::pow(s, two_h)
                    - 0.5 * (libm::pow(t + s, two_h) + libm::pow(libm::fabs(t - s), two_h))
            }
        }
    }

    /// `Var(X_t)`.
    #[inline]
    pub fn variance(&self, t: f64) -> f64 {
        match self.kind {
            ModelKind::BiFbm => libm::pow(t, 2.0 * self.h0 * self.k0),
            ModelKind::SubFbm => {
                (2.0 - libm::exp2(2.0 * self.h0 - 1.0)) * libm::pow(t, 2.0 * self.h0)
            }
        }
    }

    /// `Var(X_t - X_s)`.
    #[inline]
    pub fn increment_variance(&self, s: f64, t: f64) -> f64 {
        self.variance(s) + self.variance(t) - 2.0 * self.cov_unchecked(s, t)
    }
}

/// The field `Z(t, s) = X_t - X̃_s` in dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpec {
    pub model1: CovarianceModel,
    pub model2: CovarianceModel,
    pub d: usize,
}

impl FieldSpec {
    pub fn new(model1: CovarianceModel, model2: CovarianceModel, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(domain("spatial dimension must be at least 1"));
        }
        Ok(Self { model1, model2, d })
    }

    pub fn h1(&self) -> f64 {
        self.model1.h_eff()
    }

    pub fn h2(&self) -> f64 {
        self.model2.h_eff()
    }

    /// `r = H1 H2 / (H1 + H2)`.
    pub fn r(&self) -> f64 {
        let (h1, h2) = (self.h1(), self.h2());
        h1 * h2 / (h1 + h2)
    }

    /// Covariance of one coordinate of `Z` at the parameter points
    /// `p1 = (t1, s1)` and `p2 = (t2, s2)`.
    pub fn field_cov(&self, p1: (f64, f64), p2: (f64, f64)) -> Result<f64> {
        Ok(self.model1.cov(p1.0, p2.0)? + self.model2.cov(p1.1, p2.1)?)
    }
}

fn check_increasing(times: &[f64]) -> Result<()> {
    for (i, &t) in times.iter().enumerate() {
        if !(t > 0.0) || !t.is_finite() {
            return Err(domain(format!("time {i} must be positive and finite, got {t}")));
        }
        if i > 0 && !(t > times[i - 1]) {
            return Err(Error::DuplicateTimes(i));
        }
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix; fails if it is below
/// `-PSD_TOLERANCE * trace`.
pub fn psd_check(m: &DMatrix<f64>) -> Result<f64> {
    let trace = m.trace();
    let min = m.clone().symmetric_eigen().eigenvalues.min();
    let tolerance = PSD_TOLERANCE * libm::fabs(trace);
    if min < -tolerance {
        return Err(Error::NotPsd { min_eigenvalue: min, tolerance });
    }
    Ok(min)
}

/// Gram matrix `cov(times[i], times[j])` on strictly increasing positive times.
pub fn gram_matrix(model: &CovarianceModel, times: &[f64]) -> Result<DMatrix<f64>> {
    check_increasing(times)?;
    let g = gram_unchecked(model, times);
    psd_check(&g)?;
    Ok(g)
}

pub(crate) fn gram_unchecked(model: &CovarianceModel, times: &[f64]) -> DMatrix<f64> {
    let n = times.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = model.cov_unchecked(times[i], times[j]);
            g[(i, j)] = c;
            g[(j, i)] = c;
        }
    }
    g
}

/// How the LND constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LndMethod {
    /// Brownian case: increments are independent, the constant is 1.
    ExactHalf,
    /// Smallest generalized eigenvalue of `(G, D)`.
    GeneralizedEigen,
}

/// Numerical certificate of local nondeterminism on one time configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LndCertificate {
    pub times: Vec<f64>,
    /// Minimum over the unit sphere of
    /// `Var(sum x_i ΔX_i) / sum x_i^2 Δt_i^{2H}`.
    pub kappa_hat: f64,
    pub method: LndMethod,
}

impl LndCertificate {
    pub fn certifies(&self) -> bool {
        self.kappa_hat > 0.0
    }
}

/// Increment Gram matrix `Cov(X_{t_i} - X_{t_{i-1}}, X_{t_j} - X_{t_{j-1}})`
/// with `t_0 = 0`.
pub fn increment_gram(model: &CovarianceModel, times: &[f64]) -> DMatrix<f64> {
    let m = times.len();
    let prev = |i: usize| if i == 0 { 0.0 } else { times[i - 1] };
    let r = |a: f64, b: f64| model.cov_unchecked(a, b);
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = r(times[i], times[j]) - r(times[i], prev(j)) - r(prev(i), times[j])
                + r(prev(i), prev(j));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Estimate the LND constant on `0 < t_1 < ... < t_m < 2T` as the smallest
/// generalized eigenvalue of the increment Gram matrix against
/// `diag((t_i - t_{i-1})^{2H})`.
pub fn lnd_certificate(
    model: &CovarianceModel,
    times: &[f64],
    horizon: f64,
) -> Result<LndCertificate> {
    if times.is_empty() {
        return Err(domain("at least one time point is required"));
    }
    check_increasing(times)?;
    if !(times[times.len() - 1] < 2.0 * horizon) {
        return Err(domain(format!("times must lie below 2T = {}", 2.0 * horizon)));
    }
    let two_h = 2.0 * model.h_eff();
    let mut scale = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    for &t in times {
        let dt = libm::pow(t - prev, two_h);
        if !(dt > 0.0) {
            return Err(Error::Singular(format!("zero increment weight at t = {t}")));
        }
        scale.push(1.0 / libm::sqrt(dt));
        prev = t;
    }
    let mut g = increment_gram(model, times);
    for i in 0..times.len() {
        for j in 0..times.len() {
            g[(i, j)] *= scale[i] * scale[j];
        }
    }
    let kappa_hat = g.symmetric_eigen().eigenvalues.min();
    let method = if model.is_brownian() { LndMethod::ExactHalf } else { LndMethod::GeneralizedEigen };
    Ok(LndCertificate { times: times.to_vec(), kappa_hat, method })
}

/// Outcome of the variance upper-bound sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBound {
    /// `max cov(t,t) / t^{2H}` over the sampled times.
    pub c_hat: f64,
    pub ok: bool,
}

/// Sweep `cov(t,t) / t^{2H_eff}` over `(0, 2T]` on a uniform grid plus a
/// geometric sub-grid reaching down to `2T * 1e-8`.
pub fn variance_bound_check(
    model: &CovarianceModel,
    horizon: f64,
    n_samples: usize,
) -> Result<VarianceBound> {
    if !(horizon > 0.0) {
        return Err(domain("horizon must be positive"));
    }
    if n_samples < 2 {
        return Err(domain("need at least two samples"));
    }
    let top = 2.0 * horizon;
    let two_h = 2.0 * model.h_eff();
    let ratio = |t: f64| model.cov_unchecked(t, t) / libm::pow(t, two_h);
    let mut c_hat: f64 = 0.0;
    for i in 1..=n_samples {
        c_hat = c_hat.max(ratio(top * i as f64 / n_samples as f64));
    }
    // geometric refinement toward the origin
    let decades = 8.0;
    for i in 0..n_samples {
        let expo = -decades * i as f64 / (n_samples - 1) as f64;
        c_hat = c_hat.max(ratio(top * libm::pow(10.0, expo)));
    }
    Ok(VarianceBound { c_hat, ok: c_hat.is_finite() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn brownian_covariance_is_min() {
        let b = CovarianceModel::brownian();
        assert_relative_eq!(b.cov(1.0, 2.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(b.cov(2.0, 2.0).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(b.cov(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(b.cov(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn subfbm_half_variance() {
        let m = CovarianceModel::subfbm(0.5).unwrap();
        assert_relative_eq!(m.cov(1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn subfbm_three_quarters_matches_hand_expansion() {
        // 1 + 2^{1.5} - (3^{1.5} + 1) / 2
        let m = CovarianceModel::subfbm(0.75).unwrap();
        let expected = 1.0 + 2.0f64.powf(1.5) - 0.5 * (3.0f64.powf(1.5) + 1.0);
        assert_relative_eq!(m.cov(1.0, 2.0).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn negative_time_is_domain_error() {
        let b = CovarianceModel::brownian();
        assert!(matches!(b.cov(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn parameter_ranges() {
        assert!(CovarianceModel::bifbm(1.0, 0.5).is_err());
        assert!(CovarianceModel::bifbm(0.5, 0.0).is_err());
        assert!(CovarianceModel::bifbm(0.5, 1.1).is_err());
        assert!(CovarianceModel::subfbm(0.0).is_err());
        assert!(CovarianceModel::bifbm(0.6, 0.8).is_ok());
        assert!(FieldSpec::new(CovarianceModel::brownian(), CovarianceModel::brownian(), 0).is_err());
    }

    #[test]
    fn variance_closed_forms_agree_with_cov() {
        for m in [
            CovarianceModel::bifbm(0.6, 0.8).unwrap(),
            CovarianceModel::subfbm(0.3).unwrap(),
            CovarianceModel::fbm(0.75).unwrap(),
        ] {
            for t in [0.01, 0.5, 1.7] {
                assert_relative_eq!(m.variance(t), m.cov_unchecked(t, t), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn field_cov_examples() {
        let b = CovarianceModel::brownian();
        let f = FieldSpec::new(b, b, 1).unwrap();
        assert_eq!(f.field_cov((0.0, 0.0), (0.0, 0.0)).unwrap(), 0.0);
        assert_relative_eq!(f.field_cov((1.0, 1.0), (2.0, 3.0)).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(f.r(), 0.25);
    }

    #[test]
    fn gram_small_cases() {
        let b = CovarianceModel::brownian();
        let g = gram_matrix(&b, &[1.0]).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.0);
        let g = gram_matrix(&b, &[1.0, 2.0]).unwrap();
        assert_relative_eq!(g[(0, 1)], 1.0);
        assert_relative_eq!(g[(1, 1)], 2.0);
        assert!(g.symmetric_eigen().eigenvalues.min() > 0.0);
    }

    #[test]
    fn gram_rejects_duplicates_and_nonpositive() {
        let b = CovarianceModel::brownian();
        assert!(matches!(gram_matrix(&b, &[1.0, 1.0]), Err(Error::DuplicateTimes(1))));
        assert!(matches!(gram_matrix(&b, &[0.0, 1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn psd_check_flags_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(psd_check(&m), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn lnd_brownian_is_one() {
        let b = CovarianceModel::brownian();
        let c = lnd_certificate(&b, &[0.1, 0.35, 0.4, 1.2], 1.0).unwrap();
        assert!((c.kappa_hat - 1.0).abs() < 1e-10);
        assert_eq!(c.method, LndMethod::ExactHalf);
    }

    #[test]
    fn lnd_single_time_is_variance_ratio() {
        let m = CovarianceModel::bifbm(0.7, 1.0).unwrap();
        let c = lnd_certificate(&m, &[0.6], 1.0).unwrap();
        assert_relative_eq!(c.kappa_hat, 1.0, max_relative = 1e-12);
        let s = CovarianceModel::subfbm(0.3).unwrap();
        let c = lnd_certificate(&s, &[0.6], 1.0).unwrap();
        assert_relative_eq!(c.kappa_hat, 2.0 - 2.0f64.powf(-0.4), max_relative = 1e-12);
    }

    #[test]
    fn lnd_fbm_three_quarters_positive() {
        let m = CovarianceModel::bifbm(0.75, 1.0).unwrap();
        let c = lnd_certificate(&m, &[0.2, 0.4, 0.6, 0.8], 0.5).unwrap();
        assert!(c.certifies());
        assert_eq!(c.method, LndMethod::GeneralizedEigen);
    }

    #[test]
    fn lnd_rejects_bad_configurations() {
        let b = CovarianceModel::brownian();
        assert!(lnd_certificate(&b, &[0.5, 0.5], 1.0).is_err());
        assert!(lnd_certificate(&b, &[0.5, 2.5], 1.0).is_err());
        assert!(lnd_certificate(&b, &[], 1.0).is_err());
    }

    #[test]
    fn variance_bound_examples() {
        let b = variance_bound_check(&CovarianceModel::brownian(), 1.0, 64).unwrap();
        assert_relative_eq!(b.c_hat, 1.0, max_relative = 1e-12);
        for h in [0.1, 0.3, 0.5, 0.75, 0.95] {
            let m = CovarianceModel::subfbm(h).unwrap();
            let v = variance_bound_check(&m, 1.0, 64).unwrap();
            assert!(v.c_hat <= 2.0);
            assert_relative_eq!(v.c_hat, 2.0 - 2.0f64.powf(2.0 * h - 1.0), max_relative = 1e-10);
        }
        let m = CovarianceModel::bifbm(0.6, 0.8).unwrap();
        assert!(variance_bound_check(&m, 1.0, 64).unwrap().ok);
    }

    #[test]
    fn increment_gram_fbm_is_stationary() {
        let m = CovarianceModel::fbm(0.3).unwrap();
        let g = increment_gram(&m, &[0.25, 0.5, 0.75, 1.0]);
        assert_relative_eq!(g[(0, 1)], g[(2, 3)], max_relative = 1e-12);
        assert_relative_eq!(g[(1, 1)], 0.25f64.powf(0.6), max_relative = 1e-12);
    }
}
