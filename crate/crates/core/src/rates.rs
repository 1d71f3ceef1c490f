// SPDX-License-Identifier: Apache-2.0

//! Existence/divergence classification of `E[|L_ε^{(k)}(T,0)|^2]` and
//! regressions of measured scans against the predicted asymptotic forms.
//!
//! With `r = H1 H2 / (H1 + H2)` and `q = r (2|k| + d)`:
//!
//! | condition                         | form                              |
//! |-----------------------------------|-----------------------------------|
//! | `q < 1`                           | exists                            |
//! | `k = 0`, `r d > 1`                | `ε^{1/r - d}`                     |
//! | `k = 0`, `r d = 1`                | `ln²(1 + ε^{-1/2})`               |
//! | `r d = 1`, `q > 1`                | `ln(1 + ε^{-1/2}) ε^{1/2r - d/2 - |k|}` |
//! | `r d < 1`, `q > 1`                | `ε^{1/2r - d/2 - |k|}`            |
//! | `r d < 1`, `q = 1`                | `ln(1 + ε^{-1/2})`                |
//! | `k ≠ 0`, `r d > 1`                | `ε^{1/r - d - |k|}`               |

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{domain, Result};
use crate::kernel::MultiIndex;

/// Tolerance for treating `q` or `r d` as equal to one.
pub const BOUNDARY_TOL: f64 = 1e-13;

/// Number of smallest-ε points used by the rate fits.
pub const FIT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Exists,
    CriticalLog,
    CriticalLogSq,
    Power,
    LogTimesPower,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Exists => "exists",
            Regime::CriticalLog => "critical_log",
            Regime::CriticalLogSq => "critical_logsq",
            Regime::Power => "power",
            Regime::LogTimesPower => "log_times_power",
        }
    }
}

/// Predicted behaviour of the second moment as `ε ↓ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDescriptor {
    pub regime: Regime,
    /// Power exponent `a` for the power forms.
    pub exponent: Option<f64>,
    /// Space-Hölder bound, present when the limit exists.
    pub theta1_max: Option<f64>,
    /// Time-Hölder bound, present when the limit exists.
    pub theta2_max: Option<f64>,
    pub r: f64,
    pub q: f64,
}

fn cmp_one(v: f64) -> core::cmp::Ordering {
    if libm::fabs(v - 1.0) <= BOUNDARY_TOL {
        core::cmp::Ordering::Equal
    } else if v < 1.0 {
        core::cmp::Ordering::Less
    } else {
        core::cmp::Ordering::Greater
    }
}

pub fn classify_regime(h1: f64, h2: f64, d: usize, k: &MultiIndex) -> Result<RateDescriptor> {
    use core::cmp::Ordering::*;
    for h in [h1, h2] {
        if !(h > 0.0 && h < 1.0) {
            return Err(domain(format!("Hurst index must lie in (0,1), got {h}")));
        }
    }
    if d == 0 {
        return Err(domain("d must be at least 1"));
    }
    k.check_dim(d)?;
    let r = h1 * h2 / (h1 + h2);
    let kk = k.order() as f64;
    let df = d as f64;
    let q = r * (2.0 * kk + df);
    let half_power = 0.5 / r - 0.5 * df - kk;
    let mut desc =
        RateDescriptor { regime: Regime::Exists, exponent: None, theta1_max: None, theta2_max: None, r, q };
    let (regime, exponent) = match (cmp_one(q), cmp_one(r * df), k.is_zero()) {
        (Less, _, _) => {
            desc.theta1_max = Some(libm::fmin(1.0, 1.0 / r - 2.0 * kk - df));
            desc.theta2_max = Some(1.0 - r * (kk + df));
            (Regime::Exists, None)
        }
        (_, Greater, _) => (Regime::Power, Some(1.0 / r - df - kk)),
        (_, Equal, true) => (Regime::CriticalLogSq, None),
        (_, Equal, false) => (Regime::LogTimesPower, Some(half_power)),
        (Equal, Less, _) => (Regime::CriticalLog, None),
        (Greater, Less, _) => (Regime::Power, Some(half_power)),
    };
    desc.regime = regime;
    desc.exponent = exponent;
    Ok(desc)
}

/// Basis function `ε ↦ g(ε)` of a divergent regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateBasis {
    Power(f64),
    Log,
    LogSq,
    LogTimesPower(f64),
}

impl RateBasis {
    pub fn eval(&self, eps: f64) -> f64 {
        let log = || libm::log(1.0 + 1.0 / libm::sqrt(eps));
        match *self {
            RateBasis::Power(a) => libm::pow(eps, a),
            RateBasis::Log => log(),
            RateBasis::LogSq => {
                let l = log();
                l * l
            }
            RateBasis::LogTimesPower(a) => log() * libm::pow(eps, a),
        }
    }
}

/// Basis of the predicted lower bound; fails for the existence regime.
pub fn predicted_rate(desc: &RateDescriptor) -> Result<RateBasis> {
    let a = desc.exponent.unwrap_or(0.0);
    match desc.regime {
        Regime::Exists => Err(domain("the limit exists; there is no divergence rate to fit")),
        Regime::CriticalLog => Ok(RateBasis::Log),
        Regime::CriticalLogSq => Ok(RateBasis::LogSq),
        Regime::Power => Ok(RateBasis::Power(a)),
        Regime::LogTimesPower => Ok(RateBasis::LogTimesPower(a)),
    }
}

/// Least-squares line `y ≈ intercept + slope x` with its `R²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(domain("linear fit needs two equally long vectors of length >= 2"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if !(sxx > 0.0) {
        return Err(domain("regressor is constant"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| {
        let e = b - intercept - slope * a;
        e * e
    }).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, r2 })
}

fn check_fit_inputs(eps: &[f64], values: &[f64]) -> Result<()> {
    if eps.len() != values.len() {
        return Err(domain("eps and values differ in length"));
    }
    if eps.len() < 5 {
        return Err(domain(format!("need at least 5 points, got {}", eps.len())));
    }
    if eps.iter().chain(values).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(domain("eps and values must be positive and finite"));
    }
    Ok(())
}

/// Log-log regression; the slope is the fitted exponent.
pub fn fit_power_law(eps: &[f64], values: &[f64]) -> Result<LineFit> {
    check_fit_inputs(eps, values)?;
    let lx: Vec<f64> = eps.iter().map(|v| libm::log(*v)).collect();
    let ly: Vec<f64> = values.iter().map(|v| libm::log(*v)).collect();
    linear_fit(&lx, &ly)
}

/// Regression `value ≈ c0 + scale · g(ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormFit {
    pub scale: f64,
    pub offset: f64,
    pub r2: f64,
}

pub fn fit_log_form(eps: &[f64], values: &[f64], form: RateBasis) -> Result<FormFit> {
    check_fit_inputs(eps, values)?;
    let g: Vec<f64> = eps.iter().map(|e| form.eval(*e)).collect();
    let line = linear_fit(&g, values)?;
    Ok(FormFit { scale: line.slope, offset: line.intercept, r2: line.r2 })
}

/// The `count` points with the smallest ε, in the order given.
pub fn smallest_points(eps: &[f64], values: &[f64], count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..eps.len()).collect();
    idx.sort_by(|a, b| eps[*a].partial_cmp(&eps[*b]).unwrap_or(core::cmp::Ordering::Equal));
    idx.truncate(count);
    idx.sort_unstable();
    (idx.iter().map(|i| eps[*i]).collect(), idx.iter().map(|i| values[*i]).collect())
}

/// Small rational `p/q` with `q <= 24` if one matches to `1e-9`.
pub fn format_rational(v: f64) -> String {
    for den in 1..=24i64 {
        let num = libm::round(v * den as f64);
        if libm::fabs(v - num / den as f64) < 1e-9 {
            let num = num as i64;
            return if den == 1 { format!("{num}") } else { format!("{num}/{den}") };
        }
    }
    format!("{v:.6}")
}

fn power_text(a: f64) -> String {
    let s = format_rational(a);
    match s.strip_prefix('-') {
        Some(rest) => format!("ε^{{−{rest}}}"),
        None => format!("ε^{{{s}}}"),
    }
}

/// One-line verdict, e.g. `exists, θ₁<1, θ₂<1/2` or `diverges: ln²`.
pub fn describe(desc: &RateDescriptor) -> String {
    match desc.regime {
        Regime::Exists => format!(
            "exists, θ₁<{}, θ₂<{}",
            format_rational(desc.theta1_max.unwrap_or(0.0)),
            format_rational(desc.theta2_max.unwrap_or(0.0))
        ),
        Regime::CriticalLog => "diverges: ln".into(),
        Regime::CriticalLogSq => "diverges: ln²".into(),
        Regime::Power => format!("diverges: {}", power_text(desc.exponent.unwrap_or(0.0))),
        Regime::LogTimesPower => {
            format!("diverges: ln·{}", power_text(desc.exponent.unwrap_or(0.0)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn k(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn existence_example() {
        let d = classify_regime(0.5, 0.5, 2, &k(&[0, 0])).unwrap();
        assert_eq!(d.regime, Regime::Exists);
        assert_relative_eq!(d.theta1_max.unwrap(), 1.0);
        assert_relative_eq!(d.theta2_max.unwrap(), 0.5);
        assert_eq!(describe(&d), "exists, θ₁<1, θ₂<1/2");
    }

    #[test]
    fn logsq_example() {
        let d = classify_regime(0.5, 0.5, 4, &MultiIndex::zeros(4)).unwrap();
        assert_eq!(d.regime, Regime::CriticalLogSq);
        assert_eq!(describe(&d), "diverges: ln²");
    }

    #[test]
    fn power_example() {
        let d = classify_regime(0.75, 0.75, 1, &k(&[1])).unwrap();
        assert_eq!(d.regime, Regime::Power);
        assert_relative_eq!(d.exponent.unwrap(), -1.0 / 6.0, epsilon = 1e-14);
        assert_eq!(describe(&d), "diverges: ε^{−1/6}");
    }

    #[test]
    fn critical_log_example() {
        let d = classify_regime(2.0 / 3.0, 2.0 / 3.0, 1, &k(&[1])).unwrap();
        assert_eq!(d.regime, Regime::CriticalLog);
    }

    #[test]
    fn log_times_power_example() {
        // r d = 1 with k ≠ 0
        let d = classify_regime(0.5, 0.5, 4, &k(&[1, 0, 0, 0])).unwrap();
        assert_eq!(d.regime, Regime::LogTimesPower);
        assert_relative_eq!(d.exponent.unwrap(), -1.0, epsilon = 1e-14);
    }

    #[test]
    fn k_zero_supercritical_power() {
        let d = classify_regime(0.8, 0.9, 3, &MultiIndex::zeros(3)).unwrap();
        assert_eq!(d.regime, Regime::Power);
        assert_relative_eq!(d.exponent.unwrap(), (0.8 + 0.9) / (0.8 * 0.9) - 3.0, epsilon = 1e-13);
    }

    #[test]
    fn domain_errors() {
        assert!(classify_regime(0.0, 0.5, 1, &k(&[0])).is_err());
        assert!(classify_regime(0.5, 1.0, 1, &k(&[0])).is_err());
        assert!(classify_regime(0.5, 0.5, 2, &k(&[0])).is_err());
    }

    #[test]
    fn basis_values() {
        assert_relative_eq!(RateBasis::Power(-1.0 / 6.0).eval(1e-6), 10.0, epsilon = 1e-12);
        assert_relative_eq!(RateBasis::LogSq.eval(1.0), 0.4804530139182014, epsilon = 1e-15);
        let e = 0.01;
        assert_relative_eq!(
            RateBasis::LogTimesPower(-0.5).eval(e),
            RateBasis::Log.eval(e) * RateBasis::Power(-0.5).eval(e)
        );
        let exists = classify_regime(0.5, 0.5, 1, &k(&[0])).unwrap();
        assert!(predicted_rate(&exists).is_err());
    }

    #[test]
    fn fits() {
        let eps: Vec<f64> = (0..10).map(|j| 0.1 * 0.5f64.powi(j)).collect();
        let v: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        let f = fit_power_law(&eps, &v).unwrap();
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.r2, 1.0, epsilon = 1e-12);
        let c = fit_power_law(&eps, &vec![4.0; 10]).unwrap();
        assert_eq!(c.slope, 0.0);
        let l: Vec<f64> = eps.iter().map(|e| 7.0 * RateBasis::LogSq.eval(*e)).collect();
        let g = fit_log_form(&eps, &l, RateBasis::LogSq).unwrap();
        assert_relative_eq!(g.scale, 7.0, epsilon = 1e-10);
        assert_relative_eq!(g.r2, 1.0, epsilon = 1e-12);
        assert!(fit_power_law(&eps[..4], &v[..4]).is_err());
        let mut bad = v.clone();
        bad[3] = -1.0;
        assert!(fit_power_law(&eps, &bad).is_err());
    }

    #[test]
    fn smallest_subset() {
        let eps = [0.1, 0.05, 0.025, 0.0125];
        let (e, v) = smallest_points(&eps, &[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(e, vec![0.025, 0.0125]);
        assert_eq!(v, vec![3.0, 4.0]);
    }

    #[test]
    fn rationals() {
        assert_eq!(format_rational(0.5), "1/2");
        assert_eq!(format_rational(-1.0 / 6.0), "-1/6");
        assert_eq!(format_rational(2.0), "2");
    }
}
