// SPDX-License-Identifier: Apache-2.0

//! Command-line front end. Exit codes: 0 pass, 1 usage or configuration
//! error, 2 verification failure, 3 numerical non-convergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dlt_core::MultiIndex;

use crate::commands::{self, CmdResult, CommandError, Outcome, EXIT_OK, EXIT_USAGE};
use crate::config::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "dlt", version, about = "Derivatives of local time: simulation, quadrature and rate checks")]
pub struct Cli {
    /// Experiment configuration (flat `key = value` file).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads. Affects speed only, never results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print the CSV and config schema and exit.
    #[arg(long)]
    pub schema: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the lemma battery and write lemmas.csv.
    VerifyLemmas,
    /// Second moment by quadrature over the eps grid; writes moment_scan.csv.
    MomentScan,
    /// Fit a moment scan against the predicted regime; writes rate_fit.csv.
    RateFit {
        /// Existing moment_scan.csv; the scan is recomputed when absent.
        #[arg(long)]
        scan: Option<PathBuf>,
    },
    /// Monte Carlo estimates per path; writes simulate_paths.csv and simulate_summary.csv.
    Simulate {
        /// Also write both path samples in the binary dump format.
        #[arg(long)]
        dump_paths: bool,
    },
    /// One-line regime verdict. Flags override the configuration.
    Classify {
        #[arg(long)]
        h1: Option<f64>,
        #[arg(long)]
        h2: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        /// Comma-separated multi-index.
        #[arg(long)]
        k: Option<String>,
    },
}

fn parse_k(text: &str, d: usize) -> CmdResult<MultiIndex> {
    let k = text
        .split(',')
        .map(|s| s.trim().parse::<u32>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CommandError::Usage(format!("bad --k `{text}`: {e}")))?;
    let k = if k.len() == 1 && d > 1 && k[0] == 0 { vec![0; d] } else { k };
    if k.len() != d {
        return Err(CommandError::Usage(format!("--k has {} entries but d = {d}", k.len())));
    }
    Ok(MultiIndex::new(k))
}

fn dispatch(cli: &Cli, command: &Command) -> CmdResult<Outcome> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match command {
        Command::VerifyLemmas => commands::verify_lemmas(&cfg, &out),
        Command::MomentScan => commands::moment_scan(&cfg, &out),
        Command::RateFit { scan } => commands::rate_fit(&cfg, scan.as_deref(), &out),
        Command::Simulate { dump_paths } => commands::simulate(&cfg, &out, *dump_paths),
        Command::Classify { h1, h2, d, k } => {
            let d = d.unwrap_or(cfg.d);
            let k = match k {
                Some(text) => parse_k(text, d)?,
                None if d == cfg.d => cfg.k.clone(),
                None => MultiIndex::zeros(d),
            };
            commands::classify(
                h1.unwrap_or(cfg.model1.h_eff()),
                h2.unwrap_or(cfg.model2.h_eff()),
                d,
                &k,
            )
        }
    }
}

/// Parse `args`, run, print to the given streams and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    if cli.schema {
        let _ = write!(stdout, "{}", commands::schema());
        return EXIT_OK;
    }
    let Some(command) = &cli.command else {
        let _ = writeln!(stderr, "no command given; see --help");
        return EXIT_USAGE;
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "cannot start thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli, command)) {
        Ok(outcome) => {
            let _ = write!(stdout, "{}", outcome.report);
            outcome.exit_code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
