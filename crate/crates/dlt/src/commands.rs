// SPDX-License-Identifier: Apache-2.0

//! The experiment commands. Each writes its CSV files under the output
//! directory and returns an [`Outcome`] carrying the exit code and a short
//! human-readable report.

use std::fs;
use std::path::{Path, PathBuf};

use dlt_core::lemmas::{run_battery, LemmaReport};
use dlt_core::localtime::sample_moment;
use dlt_core::rates::{
    classify_regime, describe, fit_log_form, fit_power_law, predicted_rate, smallest_points,
    RateBasis, RateDescriptor, Regime, FIT_POINTS,
};
use dlt_core::{MomentResult, MultiIndex, QuadConfig, TimeGrid, TimeRect};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, SamplerMethod};
use crate::csvio::{self, fmt_f64};
use crate::{dump, fast, par};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("numerical error: {0}")]
    Numerical(#[from] dlt_core::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Numerical(
                dlt_core::Error::Domain(_) | dlt_core::Error::ShapeMismatch(_) | dlt_core::Error::ResourceLimit { .. },
            ) => EXIT_USAGE,
            CommandError::Numerical(_) => EXIT_NOT_CONVERGED,
            _ => EXIT_USAGE,
        }
    }
}

pub type CmdResult<T> = Result<T, CommandError>;

/// Exit code, files written and a report for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub report: String,
}

fn ensure_dir(dir: &Path) -> CmdResult<()> {
    fs::create_dir_all(dir).map_err(|source| CommandError::Io { path: dir.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    fs::write(path, text).map_err(|source| CommandError::Io { path: path.to_path_buf(), source })
}

// ---------------------------------------------------------------- lemmas

pub fn verify_lemmas(cfg: &ExperimentConfig, out: &Path) -> CmdResult<Outcome> {
    ensure_dir(out)?;
    let reports = run_battery(&cfg.battery())?;
    let path = out.join("lemmas.csv");
    let mut w = csvio::writer(&path)?;
    w.write_record(["lemma_id", "trials", "worst", "threshold", "verdict", "note"])?;
    for r in &reports {
        w.write_record([
            r.id.to_string(),
            r.trials.to_string(),
            fmt_f64(r.worst),
            fmt_f64(r.threshold),
            verdict(r).into(),
            r.note.clone(),
        ])?;
    }
    w.flush().map_err(|source| CommandError::Io { path: path.clone(), source })?;
    let all = reports.iter().all(|r| r.passed);
    let mut report = format!("{:<24} {:>8} {:>12} {:>12}  verdict\n", "lemma", "trials", "worst", "threshold");
    for r in &reports {
        report.push_str(&format!(
            "{:<24} {:>8} {:>12.4e} {:>12.4e}  {}\n",
            r.id,
            r.trials,
            r.worst,
            r.threshold,
            verdict(r)
        ));
    }
    report.push_str("moment-bound patterns use exponent 0 for the boundary term before the first time\n");
    report.push_str(if all { "all checks passed\n" } else { "some checks FAILED\n" });
    Ok(Outcome {
        exit_code: if all { EXIT_OK } else { EXIT_VERIFY_FAILED },
        files: vec![path],
        report,
    })
}

fn verdict(r: &LemmaReport) -> &'static str {
    if r.passed {
        "pass"
    } else {
        "fail"
    }
}

// ---------------------------------------------------------------- moment scan

/// Second moment over `[0,T]^2 x [0,T]^2` at every ε of the configured grid.
/// All points share the mesh graded for the smallest ε.
pub fn scan_moments(cfg: &ExperimentConfig) -> CmdResult<Vec<MomentResult>> {
    let eps = cfg.eps_grid();
    let smallest = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let quad = QuadConfig { grade_eps: Some(smallest), ..cfg.quad };
    let spec = cfg.field();
    let sq = TimeRect::square(cfg.horizon);
    eps.iter()
        .map(|e| par::second_moment_quadrature(&spec, &cfg.k, *e, &sq, &sq, &quad).map_err(Into::into))
        .collect()
}

pub fn moment_scan(cfg: &ExperimentConfig, out: &Path) -> CmdResult<Outcome> {
    ensure_dir(out)?;
    let rows = scan_moments(cfg)?;
    let path = out.join("moment_scan.csv");
    let mut w = csvio::writer(&path)?;
    w.write_record(["eps", "value", "err_estimate", "converged", "splits_used"])?;
    for r in &rows {
        w.write_record([
            fmt_f64(r.eps),
            fmt_f64(r.value),
            fmt_f64(r.err_estimate),
            r.converged.to_string(),
            r.splits_used.to_string(),
        ])?;
    }
    w.flush().map_err(|source| CommandError::Io { path: path.clone(), source })?;
    let flagged = rows.iter().filter(|r| !r.converged).count();
    let mut report = format!("{} eps points written to {}\n", rows.len(), path.display());
    if flagged > 0 {
        report.push_str(&format!("{flagged} points did not converge (see the converged column)\n"));
    }
    Ok(Outcome {
        exit_code: if flagged == 0 { EXIT_OK } else { EXIT_NOT_CONVERGED },
        files: vec![path],
        report,
    })
}

// ---------------------------------------------------------------- rate fit

/// Result of fitting a scan against the predicted form.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub desc: RateDescriptor,
    pub verdict: String,
    /// `None` in the existence regime.
    pub fit: Option<FitDetail>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDetail {
    pub form: RateBasis,
    pub fitted_exponent: f64,
    pub power_r2: f64,
    pub form_scale: f64,
    pub form_r2: f64,
    pub points: usize,
}

fn form_name(form: &RateBasis) -> &'static str {
    match form {
        RateBasis::Power(_) => "power",
        RateBasis::Log => "log",
        RateBasis::LogSq => "logsq",
        RateBasis::LogTimesPower(_) => "log_times_power",
    }
}

pub fn fit_rates(
    h1: f64,
    h2: f64,
    d: usize,
    k: &MultiIndex,
    eps: &[f64],
    values: &[f64],
) -> CmdResult<RateFit> {
    let desc = classify_regime(h1, h2, d, k)?;
    let verdict = describe(&desc);
    if desc.regime == Regime::Exists {
        return Ok(RateFit { desc, verdict, fit: None });
    }
    let form = predicted_rate(&desc)?;
    let (e, v) = smallest_points(eps, values, FIT_POINTS);
    let power = fit_power_law(&e, &v)?;
    let shaped = fit_log_form(&e, &v, form)?;
    Ok(RateFit {
        desc,
        verdict,
        fit: Some(FitDetail {
            form,
            fitted_exponent: power.slope,
            power_r2: power.r2,
            form_scale: shaped.scale,
            form_r2: shaped.r2,
            points: e.len(),
        }),
    })
}

pub fn rate_fit(cfg: &ExperimentConfig, scan_csv: Option<&Path>, out: &Path) -> CmdResult<Outcome> {
    ensure_dir(out)?;
    let (eps, values) = match scan_csv {
        Some(p) => csvio::read_scan(p)?,
        None => {
            let rows = scan_moments(cfg)?;
            (rows.iter().map(|r| r.eps).collect(), rows.iter().map(|r| r.value).collect())
        }
    };
    let fit = fit_rates(cfg.model1.h_eff(), cfg.model2.h_eff(), cfg.d, &cfg.k, &eps, &values)?;
    let path = out.join("rate_fit.csv");
    let mut w = csvio::writer(&path)?;
    w.write_record([
        "regime",
        "predicted_form",
        "predicted_exponent",
        "fitted_exponent",
        "power_r2",
        "form_scale",
        "form_r2",
        "fit_points",
    ])?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    match &fit.fit {
        None => w.write_record([fit.desc.regime.name(), "", "", "", "", "", "", ""])?,
        Some(f) => w.write_record([
            fit.desc.regime.name().to_string(),
            form_name(&f.form).to_string(),
            opt(fit.desc.exponent),
            fmt_f64(f.fitted_exponent),
            fmt_f64(f.power_r2),
            fmt_f64(f.form_scale),
            fmt_f64(f.form_r2),
            f.points.to_string(),
        ])?,
    }
    w.flush().map_err(|source| CommandError::Io { path: path.clone(), source })?;
    let report = match &fit.fit {
        None => format!("{}\nno divergence to fit\n", fit.verdict),
        Some(f) => format!(
            "{}\npredicted form {} (exponent {}), fitted log-log exponent {:.4} (r2 {:.5}), \
             form fit r2 {:.5} over the {} smallest eps\n",
            fit.verdict,
            form_name(&f.form),
            fit.desc.exponent.map(|a| format!("{a:.4}")).unwrap_or_else(|| "none".into()),
            f.fitted_exponent,
            f.power_r2,
            f.form_r2,
            f.points
        ),
    };
    let text = out.join("regime_report.txt");
    write_text(&text, &report)?;
    Ok(Outcome { exit_code: EXIT_OK, files: vec![path, text], report })
}

// ---------------------------------------------------------------- simulate

/// Summary row of a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSummary {
    pub eps: f64,
    pub n_paths: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub m2: f64,
    pub m2_se: f64,
    pub m4: f64,
    pub m4_se: f64,
    pub fallback: bool,
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path, dump_paths: bool) -> CmdResult<Outcome> {
    if cfg.mc_paths < 100 {
        return Err(CommandError::Usage("simulate needs mc.paths >= 100 for moment estimates".into()));
    }
    ensure_dir(out)?;
    let grid = TimeGrid::new(cfg.horizon, cfg.grid_n)?;
    let fast = cfg.mc_method == SamplerMethod::Circulant;
    let px = fast::sample_model(&cfg.model1, &grid, cfg.d, cfg.mc_paths, cfg.mc_seed, fast)?;
    let py = fast::sample_model(&cfg.model2, &grid, cfg.d, cfg.mc_paths, cfg.mc_seed.wrapping_add(1), fast)?;
    let eps = cfg.eps_max;
    let est = par::estimate_Lk_eps(&px, &py, &cfg.k, eps, &vec![0.0; cfg.d])?;
    let (mean, mean_se) = dlt_core::localtime::mean_and_se(&est.per_path_values);
    let (m2, m2_se) = sample_moment(&est, 2)?;
    let (m4, m4_se) = sample_moment(&est, 4)?;
    let summary = SimulationSummary {
        eps,
        n_paths: cfg.mc_paths,
        mean,
        mean_se,
        m2,
        m2_se,
        m4,
        m4_se,
        fallback: px.fallback || py.fallback,
    };

    let mut files = Vec::new();
    let values_path = out.join("simulate_paths.csv");
    let mut w = csvio::writer(&values_path)?;
    w.write_record(["path_index", "value"])?;
    for (i, v) in est.per_path_values.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*v)])?;
    }
    w.flush().map_err(|source| CommandError::Io { path: values_path.clone(), source })?;
    files.push(values_path);

    let summary_path = out.join("simulate_summary.csv");
    let mut w = csvio::writer(&summary_path)?;
    w.write_record(["eps", "n_paths", "grid_n", "mean", "mean_se", "m2", "m2_se", "m4", "m4_se", "fallback"])?;
    w.write_record([
        fmt_f64(eps),
        cfg.mc_paths.to_string(),
        cfg.grid_n.to_string(),
        fmt_f64(mean),
        fmt_f64(mean_se),
        fmt_f64(m2),
        fmt_f64(m2_se),
        fmt_f64(m4),
        fmt_f64(m4_se),
        summary.fallback.to_string(),
    ])?;
    w.flush().map_err(|source| CommandError::Io { path: summary_path.clone(), source })?;
    files.push(summary_path);

    if dump_paths {
        for (name, sample) in [("paths_x.bin", &px), ("paths_y.bin", &py)] {
            let p = out.join(name);
            let f = fs::File::create(&p).map_err(|source| CommandError::Io { path: p.clone(), source })?;
            dump::write_sample(sample, std::io::BufWriter::new(f))
                .map_err(|source| CommandError::Io { path: p.clone(), source })?;
            files.push(p);
        }
    }

    let report = format!(
        "eps {eps}: mean {mean:.6e} ± {mean_se:.2e}, m2 {m2:.6e} ± {m2_se:.2e}, m4 {m4:.6e} ± {m4_se:.2e} over {} paths{}\n",
        cfg.mc_paths,
        if summary.fallback { " (circulant embedding failed; exact sampling used)" } else { "" }
    );
    Ok(Outcome { exit_code: EXIT_OK, files, report })
}

// ---------------------------------------------------------------- classify

pub fn classify(h1: f64, h2: f64, d: usize, k: &MultiIndex) -> CmdResult<Outcome> {
    let desc = classify_regime(h1, h2, d, k)?;
    Ok(Outcome { exit_code: EXIT_OK, files: Vec::new(), report: format!("{}\n", describe(&desc)) })
}

// ---------------------------------------------------------------- schema

/// Documentation of every CSV file and config key.
pub fn schema() -> String {
    let mut s = String::from(
        "# CSV outputs (UTF-8, header row, comma-separated, floats with 17 significant digits)\n\
         \n\
         lemmas.csv (verify-lemmas)\n\
         \x20 lemma_id     check identifier\n\
         \x20 trials       configurations evaluated\n\
         \x20 worst        worst error or ratio observed\n\
         \x20 threshold    acceptance threshold for worst\n\
         \x20 verdict      pass or fail\n\
         \x20 note         what worst measures\n\
         \n\
         moment_scan.csv (moment-scan)\n\
         \x20 eps          mollifier width\n\
         \x20 value        second moment of the mollified local time derivative at x = 0\n\
         \x20 err_estimate difference against the next coarser quadrature rule\n\
         \x20 converged    false if err_estimate exceeded tolerance at quad.max_splits\n\
         \x20 splits_used  splits of the reported rule\n\
         \n\
         rate_fit.csv (rate-fit)\n\
         \x20 regime             exists, critical_log, critical_logsq, power or log_times_power\n\
         \x20 predicted_form     basis of the predicted lower bound (empty when the limit exists)\n\
         \x20 predicted_exponent power exponent of that basis (empty if none)\n\
         \x20 fitted_exponent    slope of the log-log fit over the smallest eps points\n\
         \x20 power_r2           r2 of the log-log fit\n\
         \x20 form_scale         scale of the linear fit against the predicted basis\n\
         \x20 form_r2            r2 of that fit\n\
         \x20 fit_points         number of eps points used\n\
         \n\
         simulate_paths.csv (simulate)\n\
         \x20 path_index   index of the path pair\n\
         \x20 value        Riemann-sum estimate at eps = eps.max, x = 0\n\
         \n\
         simulate_summary.csv (simulate)\n\
         \x20 eps          mollifier width (eps.max)\n\
         \x20 n_paths      path pairs\n\
         \x20 grid_n       time steps per path\n\
         \x20 mean, mean_se  sample mean and its standard error\n\
         \x20 m2, m2_se      second sample moment and its standard error\n\
         \x20 m4, m4_se      fourth sample moment and its standard error\n\
         \x20 fallback     true if circulant sampling fell back to exact sampling\n\
         \n\
         # Config keys (key, default, meaning)\n",
    );
    for (k, d, m) in crate::config::KEYS {
        s.push_str(&format!("{k:<20} {d:<10} {m}\n"));
    }
    s
}
