// SPDX-License-Identifier: Apache-2.0

//! Gaussian mollifier `p_ε` and its mixed partial derivatives, evaluated in
//! closed form through probabilists' Hermite polynomials:
//!
//! `∂^k p_ε(x) = p_ε(x) · Π_i (-1)^{k_i} ε^{-k_i/2} He_{k_i}(x_i / √ε)`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{domain, Result};

/// Exponents below this are treated as exact zeros.
pub const UNDERFLOW_EXPONENT: f64 = -700.0;

/// Derivative order `k = (k_1, ..., k_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(k: Vec<u32>) -> Self {
        Self(k)
    }

    /// The zero multi-index in dimension `d`.
    pub fn zeros(d: usize) -> Self {
        Self(alloc::vec![0; d])
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|k| = Σ k_i`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.order() == 0
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(crate::error::Error::ShapeMismatch(format!(
                "multi-index has length {}, field dimension is {d}",
                self.dim()
            )));
        }
        Ok(())
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(k: Vec<u32>) -> Self {
        Self(k)
    }
}

/// Probabilists' Hermite polynomial `He_n(x)` by the three-term recurrence.
pub fn hermite(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for m in 1..n {
        let next = x * cur - m as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("mollification width must be positive, got {eps}")));
    }
    Ok(())
}

/// `p_ε(x) = (2πε)^{-d/2} exp(-|x|^2 / 2ε)`.
pub fn heat_kernel(eps: f64, x: &[f64]) -> Result<f64> {
    check_eps(eps)?;
    Ok(KernelEval::new(&MultiIndex::zeros(x.len()), eps).eval(x))
}

/// Mixed partial derivative `∂^k p_ε(x)`.
pub fn heat_kernel_deriv(k: &MultiIndex, eps: f64, x: &[f64]) -> Result<f64> {
    check_eps(eps)?;
    k.check_dim(x.len())?;
    Ok(KernelEval::new(k, eps).eval(x))
}

/// Precomputed constants for repeated evaluation of `∂^k p_ε` at one `(k, ε)`.
#[derive(Debug, Clone)]
pub struct KernelEval {
    k: Vec<u32>,
    inv_two_eps: f64,
    inv_sqrt_eps: f64,
    prefactor: f64,
    all_zero: bool,
}

impl KernelEval {
    /// `eps` must be positive; the public entry points validate it.
    pub fn new(k: &MultiIndex, eps: f64) -> Self {
        let d = k.dim() as f64;
        let order = k.order();
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        let prefactor =
            sign * libm::pow(2.0 * PI * eps, -0.5 * d) * libm::pow(eps, -0.5 * order as f64);
        Self {
            k: k.as_slice().to_vec(),
            inv_two_eps: 0.5 / eps,
            inv_sqrt_eps: 1.0 / libm::sqrt(eps),
            prefactor,
            all_zero: order == 0,
        }
    }

    /// Evaluate at `x`; `x.len()` must equal the multi-index length.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let expo = -r2 * self.inv_two_eps;
        if expo < UNDERFLOW_EXPONENT {
            return 0.0;
        }
        let mut v = self.prefactor * libm::exp(expo);
        if !self.all_zero {
            for (&ki, &xi) in self.k.iter().zip(x) {
                if ki > 0 {
                    v *= hermite(ki, xi * self.inv_sqrt_eps);
                }
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.3), 1.0);
        assert_eq!(hermite(1, 5.0), 5.0);
        assert_eq!(hermite(2, 2.0), 3.0);
        assert_eq!(hermite(3, 1.0), -2.0);
        // He_4 = x^4 - 6x^2 + 3
        assert_relative_eq!(hermite(4, 1.5), 1.5f64.powi(4) - 6.0 * 2.25 + 3.0);
    }

    #[test]
    fn heat_kernel_at_origin() {
        assert_relative_eq!(heat_kernel(1.0, &[0.0]).unwrap(), 0.3989422804014327, epsilon = 1e-15);
        assert_relative_eq!(heat_kernel(0.5, &[0.0, 0.0]).unwrap(), 1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn zero_order_derivative_is_kernel() {
        let k = MultiIndex::zeros(2);
        let x = [0.3, -0.7];
        assert_eq!(heat_kernel_deriv(&k, 0.4, &x).unwrap(), heat_kernel(0.4, &x).unwrap());
    }

    #[test]
    fn odd_derivative_vanishes_at_origin() {
        let k = MultiIndex::new(vec![1]);
        assert_eq!(heat_kernel_deriv(&k, 0.7, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn second_derivative_at_origin() {
        let k = MultiIndex::new(vec![2]);
        assert_relative_eq!(
            heat_kernel_deriv(&k, 1.0, &[0.0]).unwrap(),
            -0.3989422804014327,
            epsilon = 1e-15
        );
    }

    #[test]
    fn domain_errors() {
        assert!(heat_kernel(0.0, &[1.0]).is_err());
        assert!(heat_kernel(-1.0, &[1.0]).is_err());
        assert!(heat_kernel_deriv(&MultiIndex::new(vec![1]), 0.0, &[1.0]).is_err());
        assert!(heat_kernel_deriv(&MultiIndex::new(vec![1, 0]), 1.0, &[1.0]).is_err());
    }

    #[test]
    fn underflow_is_exact_zero() {
        assert_eq!(heat_kernel(1e-4, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn order_and_dim() {
        let k = MultiIndex::new(vec![1, 2, 0]);
        assert_eq!(k.order(), 3);
        assert_eq!(k.dim(), 3);
        assert!(!k.is_zero());
    }
}
