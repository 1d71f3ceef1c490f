// SPDX-License-Identifier: Apache-2.0

//! Standard-library companion to `dlt-core`: rayon drivers, circulant fBm
//! sampling, the binary path dump, the experiment configuration format and
//! the `dlt` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod dump;
pub mod fast;
pub mod par;

pub use config::ExperimentConfig;
