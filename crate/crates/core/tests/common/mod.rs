// SPDX-License-Identifier: Apache-2.0

//! Independent reference implementations used only by tests. Nothing here
//! calls into the library's numerics; covariance kernels are the single shared
//! input.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// Probabilists' Gauss–Hermite rule (weight `exp(-x^2/2) / sqrt(2 pi)`, weights
/// summing to one) from the Golub–Welsch eigenproblem.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut out: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Plain Gauss–Legendre on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre nodes on `[a, b]` with `panels` equal panels.
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(x, w) in &gl {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// `E[U1^k1 U2^k2]` for `(U1, U2) ~ N(0, C)` by tensor Gauss–Hermite after a
/// symmetric square root of `C`.
pub fn gaussian_moment_gh(c: [[f64; 2]; 2], k1: u32, k2: u32) -> f64 {
    let m = DMatrix::from_row_slice(2, 2, &[c[0][0], c[0][1], c[1][0], c[1][1]]);
    let eig = m.symmetric_eigen();
    let q = &eig.eigenvectors;
    let l: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    let rule = gauss_hermite(16);
    let mut acc = 0.0;
    for &(z1, w1) in &rule {
        for &(z2, w2) in &rule {
            let u1 = q[(0, 0)] * l[0] * z1 + q[(0, 1)] * l[1] * z2;
            let u2 = q[(1, 0)] * l[0] * z1 + q[(1, 1)] * l[1] * z2;
            acc += w1 * w2 * u1.powi(k1 as i32) * u2.powi(k2 as i32);
        }
    }
    acc
}

/// Gaussian density `(2 pi eps)^{-d/2} exp(-|x|^2 / (2 eps))`.
pub fn gaussian_density(eps: f64, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 * PI * eps).powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * eps)).exp()
}

/// Finite-difference weights for the `m`-th derivative at `0` on the given
/// offsets (Fornberg's recursion).
pub fn fd_weights(offsets: &[f64], m: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Mixed partial `∂^k` of `f` at `x` by a tensor product of central
/// 9-point stencils with step `h`.
pub fn mixed_partial<F: Fn(&[f64]) -> f64>(f: F, k: &[u32], x: &[f64], h: f64) -> f64 {
    let offsets: Vec<f64> = (-4..=4).map(|i| i as f64).collect();
    let stencils: Vec<Vec<f64>> = k
        .iter()
        .map(|&ki| {
            if ki == 0 {
                let mut s = vec![0.0; 9];
                s[4] = 1.0;
                s
            } else {
                fd_weights(&offsets, ki as usize)
            }
        })
        .collect();
    let d = x.len();
    let mut acc = 0.0;
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for c in 0..d {
            w *= stencils[c][idx[c]];
            point[c] = x[c] + offsets[idx[c]] * h;
        }
        if w != 0.0 {
            acc += w * f(&point);
        }
        let mut c = 0;
        loop {
            if c == d {
                let scale: f64 = k.iter().map(|&ki| h.powi(ki as i32)).product();
                return acc / scale;
            }
            idx[c] += 1;
            if idx[c] < 9 {
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

/// One coordinate block of the second-moment `x`-integral,
/// `∫∫ (i x1)^k (i x2)^k exp(-x^T A x / 2) dx1 dx2`, by composite
/// Gauss–Legendre along the principal axes of `A`. Returns the nodes of the
/// rotated grid as `(x1, x2, weight * gaussian)` so blocks can be combined
/// into a full tensor grid.
pub fn principal_axis_grid(a: [[f64; 2]; 2]) -> Vec<(f64, f64, f64)> {
    let m = DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]]);
    let eig = m.symmetric_eigen();
    let q = eig.eigenvectors.clone();
    let sig: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect();
    let r0 = composite(-12.0 * sig[0], 12.0 * sig[0], 8, 12);
    let r1 = composite(-12.0 * sig[1], 12.0 * sig[1], 8, 12);
    let mut out = Vec::with_capacity(r0.len() * r1.len());
    for &(y0, w0) in &r0 {
        for &(y1, w1) in &r1 {
            let g = (-0.5 * (y0 * y0 / (sig[0] * sig[0]) + y1 * y1 / (sig[1] * sig[1]))).exp();
            let x1 = q[(0, 0)] * y0 + q[(0, 1)] * y1;
            let x2 = q[(1, 0)] * y0 + q[(1, 1)] * y1;
            out.push((x1, x2, w0 * w1 * g));
        }
    }
    out
}

/// Brute-force second-moment integrand: the full `2d`-dimensional Fourier
/// integral `(2 pi)^{-2d} ∫ Π_i (i x_{1,i})^{k_i} (i x_{2,i})^{k_i}
/// exp(-Σ_i x_i^T A x_i / 2) dx` on a tensor grid, with `A = Σ + eps I` for
/// the one-coordinate covariance `Σ` of `(Z(p1), Z(p2))`.
pub fn second_moment_brute(sigma: [[f64; 2]; 2], eps: f64, k: &[u32]) -> f64 {
    let a = [[sigma[0][0] + eps, sigma[0][1]], [sigma[1][0], sigma[1][1] + eps]];
    let grid = principal_axis_grid(a);
    let d = k.len();
    // (i x1)^k (i x2)^k = (-1)^k (x1 x2)^k
    let mono = |x1: f64, x2: f64, ki: u32| {
        let sign = if ki % 2 == 0 { 1.0 } else { -1.0 };
        sign * (x1 * x2).powi(ki as i32)
    };
    let total = match d {
        1 => grid.iter().map(|&(x1, x2, w)| w * mono(x1, x2, k[0])).sum::<f64>(),
        2 => {
            let mut acc = 0.0;
            for &(a1, a2, wa) in &grid {
                let fa = wa * mono(a1, a2, k[0]);
                for &(b1, b2, wb) in &grid {
                    acc += fa * wb * mono(b1, b2, k[1]);
                }
            }
            acc
        }
        _ => panic!("brute-force oracle supports d <= 2"),
    };
    total / (2.0 * PI).powi(2 * d as i32)
}

/// Mean of the mollified local time at `x` over `[0,T]^2` for `d = 1`:
/// `∫∫ (2 pi (eps + v(t,s)))^{-1/2} exp(-x^2 / (2 (eps + v)))` with
/// `v = var1(t) + var2(s)`, by composite Gauss–Legendre.
pub fn mean_local_time_1d<V1: Fn(f64) -> f64, V2: Fn(f64) -> f64>(
    var1: V1,
    var2: V2,
    eps: f64,
    x: f64,
    horizon: f64,
) -> f64 {
    let rule = composite(0.0, horizon, 64, 10);
    let mut acc = 0.0;
    for &(t, wt) in &rule {
        for &(s, ws) in &rule {
            let v = eps + var1(t) + var2(s);
            acc += wt * ws * (2.0 * PI * v).powf(-0.5) * (-x * x / (2.0 * v)).exp();
        }
    }
    acc
}

/// Sample mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
