// SPDX-License-Identifier: Apache-2.0

//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measurements and wall time; the test fails if any criterion does.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use dlt::commands::scan_moments;
use dlt::{par, ExperimentConfig};
use dlt_core::covariance::lnd_certificate;
use dlt_core::kernel::heat_kernel_deriv;
use dlt_core::lemmas::{
    asym_rate_check, dirichlet_closed_form, dirichlet_quadrature, lnd_comparison_sweep, lnd_constant,
    moment_bound_sweep, quadratic_ineq_check, sweep_models, AsymDisplay, ASYM_CASES, SWEEP_ANGLES,
};
use dlt_core::localtime::{left_points, mass_integral};
use dlt_core::moments::{isserlis_moment, second_moment_integrand};
use dlt_core::rates::{fit_log_form, fit_power_law, linear_fit, smallest_points, RateBasis, FIT_POINTS};
use dlt_core::{CovarianceModel, FieldSpec, MultiIndex, QuadConfig, TimeGrid, TimeRect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{gaussian_density, gaussian_moment_gh, mean_se, mixed_partial, second_moment_brute};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed.as_secs_f64() < limit_secs as f64
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).expect("valid configuration")
}

fn dirichlet_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = QuadConfig::default();
    let mut worst: f64 = 0.0;
    for m in 1..=3 {
        for _ in 0..50 {
            let a: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..0.95)).collect();
            let t = rng.gen_range(0.5..2.0);
            let q = dirichlet_quadrature(t, &a, &cfg).unwrap();
            let exact = dirichlet_closed_form(t, &a).unwrap();
            worst = worst.max((q.value - exact).abs() / exact);
        }
    }
    let elapsed = start.elapsed();
    outcome(worst < 1e-4 && within(elapsed, 30), format!("worst rel err {worst:.2e} (< 1e-4)"))
}

fn singular_integral_rates() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut all_ok = true;
    let mut parts = Vec::new();
    for (h1, h2, d, alpha) in ASYM_CASES {
        for display in [AsymDisplay::OneDim, AsymDisplay::TwoDim] {
            let c = asym_rate_check(display, h1, h2, d, alpha, 1.0).unwrap();
            worst = worst.max(c.slope_error());
            all_ok &= c.ok(0.05, 0.01);
            parts.push(format!("{:?}/{:?} {:+.3}", c.regime, display, c.fitted_slope));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        all_ok && within(elapsed, 60),
        format!("max slope error {worst:.3} (<= 0.05); {}", parts.join(", ")),
    )
}

fn chaining_inequality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut violations = 0;
    for _ in 0..100_000 {
        let m = rng.gen_range(1..=10);
        let d = rng.gen_range(1..=3);
        let xs: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if !quadratic_ineq_check(&xs).unwrap().ok {
            violations += 1;
        }
    }
    outcome(violations == 0, format!("{violations} violations in 100000 configurations"))
}

fn lnd_certificates() -> Outcome {
    let models = [
        ("fbm 0.25", CovarianceModel::fbm(0.25).unwrap()),
        ("fbm 0.75", CovarianceModel::fbm(0.75).unwrap()),
        ("bifbm 0.3125/0.8", CovarianceModel::bifbm(0.3125, 0.8).unwrap()),
        ("bifbm 0.9375/0.8", CovarianceModel::bifbm(0.9375, 0.8).unwrap()),
        ("bifbm 0.75/1", CovarianceModel::bifbm(0.75, 1.0).unwrap()),
        ("subfbm 0.25", CovarianceModel::subfbm(0.25).unwrap()),
        ("subfbm 0.75", CovarianceModel::subfbm(0.75).unwrap()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let random_times = |rng: &mut ChaCha8Rng| {
        let m = rng.gen_range(1..=8);
        let mut t: Vec<f64> = (0..m).map(|_| rng.gen_range(0.001..1.0)).collect();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        t.dedup();
        t
    };
    let mut brownian_dev: f64 = 0.0;
    for _ in 0..100 {
        let t = random_times(&mut rng);
        let c = lnd_certificate(&CovarianceModel::brownian(), &t, 1.0).unwrap();
        brownian_dev = brownian_dev.max((c.kappa_hat - 1.0).abs());
    }
    let mut pass = brownian_dev <= 1e-10;
    let mut mins = Vec::new();
    for (name, m) in &models {
        let mut kmin = f64::INFINITY;
        for _ in 0..100 {
            let t = random_times(&mut rng);
            kmin = kmin.min(lnd_certificate(m, &t, 1.0).unwrap().kappa_hat);
        }
        pass &= kmin > 0.0;
        mins.push(format!("{name} {kmin:.3e}"));
    }
    outcome(pass, format!("brownian |κ-1| {brownian_dev:.1e}; min κ: {}", mins.join(", ")))
}

fn kernel_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=2usize);
        let eps = 10f64.powf(rng.gen_range(-2.0..0.5));
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0) * eps.sqrt()).collect();
        let k: Vec<u32> = loop {
            let k: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=3)).collect();
            if k.iter().sum::<u32>() <= 3 {
                break k;
            }
        };
        let exact = heat_kernel_deriv(&MultiIndex::new(k.clone()), eps, &x).unwrap();
        let fd = mixed_partial(|y| gaussian_density(eps, y), &k, &x, 0.02 * eps.sqrt());
        let order: u32 = k.iter().sum();
        let scale = gaussian_density(eps, &vec![0.0; d]) * eps.powf(-(order as f64) / 2.0);
        worst = worst.max((exact - fd).abs() / exact.abs().max(1e-3 * scale));
    }
    outcome(worst < 1e-6, format!("worst rel err {worst:.2e} (< 1e-6)"))
}

fn isserlis_gauss_hermite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let mut worst: f64 = 0.0;
    let mut odd_ok = true;
    for _ in 0..40 {
        let a: f64 = rng.gen_range(0.1..2.0);
        let b: f64 = rng.gen_range(0.1..2.0);
        let c12 = rng.gen_range(-0.99..0.99) * (a * b).sqrt();
        let c = [[a, c12], [c12, b]];
        for k1 in 0..=8u32 {
            for k2 in 0..=(8 - k1) {
                let exact = isserlis_moment(&c, k1, k2).unwrap();
                let gh = gaussian_moment_gh(c, k1, k2);
                let scale = (a.powi(k1 as i32) * b.powi(k2 as i32)).sqrt();
                if (k1 + k2) % 2 == 1 {
                    // vanishes by symmetry; the quadrature only sees round-off
                    let bound = (gaussian_moment_gh([[a, 0.0], [0.0, a]], 2 * k1, 0)
                        * gaussian_moment_gh([[b, 0.0], [0.0, b]], 2 * k2, 0))
                    .sqrt();
                    odd_ok &= exact == 0.0 && gh.abs() <= 1e-12 * bound;
                    continue;
                }
                worst = worst.max((exact - gh).abs() / gh.abs().max(1e-6 * scale));
            }
        }
    }
    outcome(
        worst < 1e-8 && odd_ok,
        format!("worst rel err {worst:.2e} (< 1e-8); odd orders vanish: {odd_ok}"),
    )
}

fn integrand_brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let model = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => CovarianceModel::fbm(rng.gen_range(0.2..0.85)).unwrap(),
        1 => CovarianceModel::bifbm(rng.gen_range(0.3..0.9), rng.gen_range(0.5..1.0)).unwrap(),
        _ => CovarianceModel::subfbm(rng.gen_range(0.2..0.85)).unwrap(),
    };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.gen_range(1..=2usize);
        let spec = FieldSpec::new(model(&mut rng), model(&mut rng), d).unwrap();
        let eps = 10f64.powf(rng.gen_range(-2.0..0.0));
        let k: Vec<u32> = loop {
            let k: Vec<u32> = (0..d).map(|_| rng.gen_range(0..=2)).collect();
            if k.iter().sum::<u32>() <= 2 {
                break k;
            }
        };
        let p1 = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let p2 = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let c11 = spec.field_cov(p1, p1).unwrap();
        let c12 = spec.field_cov(p1, p2).unwrap();
        let c22 = spec.field_cov(p2, p2).unwrap();
        let value = second_moment_integrand(&spec, &MultiIndex::new(k.clone()), eps, p1, p2).unwrap();
        let brute = second_moment_brute([[c11, c12], [c12, c22]], eps, &k);
        worst = worst.max((value - brute).abs() / brute.abs());
    }
    outcome(worst < 1e-6, format!("worst rel err {worst:.2e} (< 1e-6)"))
}

fn monte_carlo_vs_quadrature() -> Outcome {
    let start = Instant::now();
    let b = CovarianceModel::brownian();
    let spec = FieldSpec::new(b, b, 1).unwrap();
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let px = par::sample_paths(&b, &grid, 1, 10_000, 2024).unwrap();
    let py = par::sample_paths(&b, &grid, 1, 10_000, 2025).unwrap();
    let sq = TimeRect::square(1.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [0u32, 1] {
        let k = MultiIndex::new(vec![k]);
        let quad = par::second_moment_quadrature(&spec, &k, 0.05, &sq, &sq, &QuadConfig::default()).unwrap();
        let est = par::estimate_Lk_eps(&px, &py, &k, 0.05, &[0.0]).unwrap();
        let squares: Vec<f64> = est.per_path_values.iter().map(|v| v * v).collect();
        let (m2, se) = mean_se(&squares);
        let z = (m2 - quad.value).abs() / se;
        pass &= z < 3.0;
        parts.push(format!("k={:?}: mc {m2:.5} ± {se:.5} vs quad {:.5} ({z:.2} SE)", k.as_slice(), quad.value));
    }
    let elapsed = start.elapsed();
    outcome(pass && within(elapsed, 300), parts.join("; "))
}

/// Least-squares fit of `C ε^a + D` by a scan over `a`.
fn offset_power_fit(eps: &[f64], values: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY, f64::NAN);
    for i in 1..1000 {
        let a = -(i as f64) * 1e-3;
        let g: Vec<f64> = eps.iter().map(|e| e.powf(a)).collect();
        let line = linear_fit(&g, values).unwrap();
        let sse: f64 = g.iter().zip(values).map(|(x, y)| (y - line.intercept - line.slope * x).powi(2)).sum();
        if sse < best.1 {
            best = (a, sse, line.intercept);
        }
    }
    (best.0, best.2)
}

fn power_divergence() -> Outcome {
    let start = Instant::now();
    let cfg = config("model1.H0 = 0.75\nmodel2.H0 = 0.75\nd = 1\nk = 1\n");
    let rows = scan_moments(&cfg).unwrap();
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let (e8, v8) = smallest_points(&eps, &values, FIT_POINTS);
    let fit = fit_power_law(&e8, &v8).unwrap();
    let (a, offset) = offset_power_fit(&e8, &v8);
    let target = -1.0 / 6.0;
    let elapsed = start.elapsed();
    outcome(
        (fit.slope - target).abs() <= 0.05 && within(elapsed, 600) && rows.iter().all(|r| r.converged),
        format!(
            "fitted exponent {:.4} (target {target:.4} ± 0.05, R² {:.5}); with a constant offset: exponent {a:.3}, offset {offset:.3}",
            fit.slope, fit.r2
        ),
    )
}

fn logsq_divergence() -> Outcome {
    let cfg = config("d = 4\nk = 0\n");
    let rows = scan_moments(&cfg).unwrap();
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let (e8, v8) = smallest_points(&eps, &values, FIT_POINTS);
    let logsq = fit_log_form(&e8, &v8, RateBasis::LogSq).unwrap();
    let power = fit_power_law(&e8, &v8).unwrap();
    outcome(
        logsq.r2 > 0.99 && power.r2 <= logsq.r2 - 0.005,
        format!("ln² R² {:.6} (> 0.99); power R² {:.6} (gap {:.4} >= 0.005)", logsq.r2, power.r2, logsq.r2 - power.r2),
    )
}

fn existence_is_cauchy() -> Outcome {
    let cfg = config("d = 2\nk = 0\n");
    let rows = scan_moments(&cfg).unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let tail = &diffs[diffs.len() - 4..];
    let monotone = tail.windows(2).all(|w| w[1] < w[0]);
    let rel = diffs[diffs.len() - 1] / values[values.len() - 1].abs();
    outcome(
        monotone && rel < 0.02,
        format!(
            "last differences {}; final relative change {rel:.2e} (< 0.02)",
            tail.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn holder_in_time() -> Outcome {
    let b = CovarianceModel::brownian();
    let spec = FieldSpec::new(b, b, 1).unwrap();
    let k = MultiIndex::zeros(1);
    let cfg = QuadConfig { grade_eps: Some(1e-4), ..QuadConfig::default() };
    let (mut hs, mut vs) = (Vec::new(), Vec::new());
    for j in 3..=8 {
        let h = 0.5f64.powi(j);
        let dom = TimeRect::new((1.0, 1.0 + h), (0.0, 1.0));
        let r = par::second_moment_quadrature(&spec, &k, 1e-4, &dom, &dom, &cfg).unwrap();
        hs.push(h);
        vs.push(r.value);
    }
    let slope = fit_power_law(&hs, &vs).unwrap().slope;
    outcome(slope >= 1.4, format!("log-log slope in h {slope:.4} (>= 1.4)"))
}

fn mass_conservation() -> Outcome {
    let horizon = 1.5;
    let b = CovarianceModel::brownian();
    let grid = TimeGrid::new(horizon, 64).unwrap();
    let px = par::sample_paths(&b, &grid, 2, 100, 31).unwrap();
    let py = par::sample_paths(&b, &grid, 2, 100, 32).unwrap();
    let mut worst: f64 = 0.0;
    for p in 0..100 {
        let (mass, _) =
            mass_integral(&left_points(&px, p), &left_points(&py, p), &MultiIndex::zeros(2), 0.05, grid.step()).unwrap();
        worst = worst.max((mass / (horizon * horizon) - 1.0).abs());
    }
    outcome(worst < 0.01, format!("worst |mass/T² - 1| {worst:.2e} over 100 paths (< 0.01)"))
}

fn bounded_ratio_sweeps() -> Outcome {
    let mut pass = true;
    let (mut moment_spread, mut lnd_spread): (f64, f64) = (0.0, 0.0);
    for model in sweep_models() {
        for k in 0..=2 {
            let sw = moment_bound_sweep(&model, k, 1.0).unwrap();
            moment_spread = moment_spread.max(sw.spread());
            pass &= sw.bounded(10.0, 1e3);
        }
        let kappa = lnd_constant(&model, 1.0).unwrap();
        for p in [1.0, 2.0, 4.0] {
            for theta in SWEEP_ANGLES {
                let sw = lnd_comparison_sweep(&model, p, theta, 1.0, kappa, &QuadConfig::default()).unwrap();
                lnd_spread = lnd_spread.max(sw.spread());
                pass &= sw.bounded(10.0, 1e3);
            }
        }
    }
    outcome(
        pass,
        format!("moment bound max/median {moment_spread:.3}; comparison extreme/median {lnd_spread:.3} (<= 10)"),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 14] = [
        ("simplex integral identity", dirichlet_identity),
        ("singular integral rates", singular_integral_rates),
        ("chaining inequality", chaining_inequality),
        ("local nondeterminism certificate", lnd_certificates),
        ("kernel derivatives vs finite differences", kernel_finite_differences),
        ("isserlis vs gauss-hermite", isserlis_gauss_hermite),
        ("moment integrand vs brute force", integrand_brute_force),
        ("monte carlo vs quadrature", monte_carlo_vs_quadrature),
        ("power divergence rate", power_divergence),
        ("log-squared divergence rate", logsq_divergence),
        ("existence: cauchy scan", existence_is_cauchy),
        ("holder exponent in time", holder_in_time),
        ("per-path mass conservation", mass_conservation),
        ("bounded-ratio sweeps", bounded_ratio_sweeps),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {:>2} {name} [{:.1}s]: {}", i + 1, start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
