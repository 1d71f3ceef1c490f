// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::path::Path;

use crate::commands::{CmdResult, CommandError};

/// 17 significant digits in scientific notation; round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn writer(path: &Path) -> CmdResult<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// `(eps, value)` columns of a moment-scan CSV.
pub fn read_scan(path: &Path) -> CmdResult<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CommandError::Usage(format!("{} has no `{name}` column", path.display())))
    };
    let (ie, iv) = (col("eps")?, col("value")?);
    let (mut eps, mut values) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| {
            rec.get(i).unwrap_or("").trim().parse::<f64>().map_err(|e| {
                CommandError::Usage(format!("{}: bad number `{}`: {e}", path.display(), rec.get(i).unwrap_or("")))
            })
        };
        eps.push(parse(ie)?);
        values.push(parse(iv)?);
    }
    Ok((eps, values))
}
