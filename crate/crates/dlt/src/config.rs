// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration: flat `dotted.key = value` lines, `#` comments,
//! unknown or repeated keys rejected. Every key is optional.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dlt_core::lemmas::BatteryOptions;
use dlt_core::moments::geometric_eps_grid;
use dlt_core::{CovarianceModel, FieldSpec, MultiIndex, QuadConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: cannot parse `{value}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Recognised keys with their defaults and one-line descriptions.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model1.kind", "bifbm", "family of X: bifbm or subfbm"),
    ("model1.H0", "0.5", "H0 of X (H for subfbm)"),
    ("model1.K0", "1", "K0 of X (bifbm only)"),
    ("model2.kind", "bifbm", "family of the independent copy X~"),
    ("model2.H0", "0.5", "H0 of X~"),
    ("model2.K0", "1", "K0 of X~"),
    ("d", "1", "spatial dimension"),
    ("k", "0", "derivative multi-index, comma-separated, length d"),
    ("T", "1", "time horizon"),
    ("eps.max", "0.1", "largest eps of the geometric scan grid"),
    ("eps.ratio", "0.5", "ratio between successive eps"),
    ("eps.count", "14", "number of eps points"),
    ("grid.n", "256", "time steps per path for simulation"),
    ("mc.paths", "1000", "Monte Carlo path pairs"),
    ("mc.seed", "20240601", "seed; X uses seed, X~ uses seed + 1"),
    ("mc.method", "exact", "path sampler: exact (Cholesky) or circulant (fBm only)"),
    ("quad.nodes_per_dim", "4", "Gauss-Legendre order per cell"),
    ("quad.splits", "2", "dyadic levels beyond the eps scale"),
    ("quad.max_splits", "4", "largest splits tried before flagging non-convergence"),
    ("quad.abs_tol", "1e-12", "absolute tolerance of the two-level error"),
    ("quad.rel_tol", "1e-3", "relative tolerance of the two-level error"),
    ("verify.tolerance", "1", "multiplier on every lemma-battery threshold"),
    ("output.dir", "out", "directory for CSV and report files"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerMethod {
    Exact,
    Circulant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model1: CovarianceModel,
    pub model2: CovarianceModel,
    pub d: usize,
    pub k: MultiIndex,
    pub horizon: f64,
    pub eps_max: f64,
    pub eps_ratio: f64,
    pub eps_count: usize,
    pub grid_n: usize,
    pub mc_paths: usize,
    pub mc_seed: u64,
    pub mc_method: SamplerMethod,
    pub quad: QuadConfig,
    pub verify_tolerance: f64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::parse("").expect("defaults are valid")
    }
}

fn value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let raw = map.get(key).cloned().unwrap_or_else(|| {
        KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| d.to_string()).expect("known key")
    });
    raw.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.into(),
        value: raw.clone(),
        reason: e.to_string(),
    })
}

fn model(map: &BTreeMap<String, String>, prefix: &str) -> Result<CovarianceModel, ConfigError> {
    let kind: String = value(map, &format!("{prefix}.kind"))?;
    let h0: f64 = value(map, &format!("{prefix}.H0"))?;
    let k0: f64 = value(map, &format!("{prefix}.K0"))?;
    let built = match kind.as_str() {
        "bifbm" => CovarianceModel::bifbm(h0, k0),
        "subfbm" => {
            if k0 != 1.0 {
                return Err(ConfigError::Invalid(format!("{prefix}.K0 applies to bifbm only")));
            }
            CovarianceModel::subfbm(h0)
        }
        other => {
            return Err(ConfigError::Value {
                key: format!("{prefix}.kind"),
                value: other.into(),
                reason: "expected bifbm or subfbm".into(),
            })
        }
    };
    built.map_err(|e| ConfigError::Invalid(format!("{prefix}: {e}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, val)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: raw.into() });
            };
            let (key, val) = (key.trim(), val.trim());
            if key.is_empty() || val.is_empty() {
                return Err(ConfigError::Syntax { line, text: raw.into() });
            }
            if !KEYS.iter().any(|(k, _, _)| *k == key) {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            }
            if map.insert(key.to_string(), val.to_string()).is_some() {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
        }

        let d: usize = value(&map, "d")?;
        if d == 0 {
            return Err(ConfigError::Invalid("d must be at least 1".into()));
        }
        let k_text: String = value(&map, "k")?;
        let k = k_text
            .split(',')
            .map(|s| s.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ConfigError::Value { key: "k".into(), value: k_text.clone(), reason: e.to_string() })?;
        // a single entry broadcasts over all coordinates only when it is 0
        let k = if k.len() == 1 && d > 1 && k[0] == 0 { vec![0; d] } else { k };
        if k.len() != d {
            return Err(ConfigError::Invalid(format!("k has {} entries but d = {d}", k.len())));
        }
        let method: String = value(&map, "mc.method")?;
        let mc_method = match method.as_str() {
            "exact" => SamplerMethod::Exact,
            "circulant" => SamplerMethod::Circulant,
            other => {
                return Err(ConfigError::Value {
                    key: "mc.method".into(),
                    value: other.into(),
                    reason: "expected exact or circulant".into(),
                })
            }
        };
        let quad = QuadConfig {
            nodes_per_dim: value(&map, "quad.nodes_per_dim")?,
            splits: value(&map, "quad.splits")?,
            max_splits: value(&map, "quad.max_splits")?,
            abs_tol: value(&map, "quad.abs_tol")?,
            rel_tol: value(&map, "quad.rel_tol")?,
            grade_eps: None,
        };
        let cfg = Self {
            model1: model(&map, "model1")?,
            model2: model(&map, "model2")?,
            d,
            k: MultiIndex::new(k),
            horizon: value(&map, "T")?,
            eps_max: value(&map, "eps.max")?,
            eps_ratio: value(&map, "eps.ratio")?,
            eps_count: value(&map, "eps.count")?,
            grid_n: value(&map, "grid.n")?,
            mc_paths: value(&map, "mc.paths")?,
            mc_seed: value(&map, "mc.seed")?,
            mc_method,
            quad,
            verify_tolerance: value(&map, "verify.tolerance")?,
            output_dir: PathBuf::from(value::<String>(&map, "output.dir")?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if self.quad.max_splits < self.quad.splits {
            return bad("quad.max_splits must be at least quad.splits".into());
        }
        self.quad.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        geometric_eps_grid(self.eps_max, self.eps_ratio, self.eps_count)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.grid_n == 0 {
            return bad("grid.n must be at least 1".into());
        }
        if self.mc_paths == 0 {
            return bad("mc.paths must be at least 1".into());
        }
        if !(self.verify_tolerance > 0.0) {
            return bad("verify.tolerance must be positive".into());
        }
        if self.mc_method == SamplerMethod::Circulant && !(self.model1.is_fbm() && self.model2.is_fbm()) {
            return bad("mc.method = circulant needs bifbm models with K0 = 1".into());
        }
        Ok(())
    }

    pub fn field(&self) -> FieldSpec {
        FieldSpec::new(self.model1, self.model2, self.d).expect("validated")
    }

    pub fn eps_grid(&self) -> Vec<f64> {
        geometric_eps_grid(self.eps_max, self.eps_ratio, self.eps_count).expect("validated")
    }

    pub fn battery(&self) -> BatteryOptions {
        BatteryOptions {
            seed: self.mc_seed,
            horizon: self.horizon,
            quad: self.quad,
            tolerance_scale: self.verify_tolerance,
            ..BatteryOptions::default()
        }
    }
}
