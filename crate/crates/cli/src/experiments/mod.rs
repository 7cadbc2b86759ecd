//! The five experiment runners behind the subcommands.
//!
//! Each runner validates its slice of the configuration, computes the
//! grid strictly in grid order (rows are emitted in that order no matter
//! how the work is scheduled), writes one CSV and one JSON summary, and
//! reports whether every asserted inequality held.

use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, Mode};

pub mod cosine;
pub mod gevrey;
pub mod kernel;
pub mod locality;
pub mod propagation;

pub struct RunContext<'a> {
    pub config: &'a ExperimentConfig,
    pub mode: Mode,
    pub out_dir: &'a Path,
    /// Largest dense-matrix instance the oracle is allowed to build.
    pub oracle_limit: usize,
}

pub struct RunOutcome {
    pub pass: bool,
    pub csv: PathBuf,
    pub json: PathBuf,
}

impl RunContext<'_> {
    /// `<out>/<kind>.csv` and `<out>/<kind>.json` unless the config
    /// overrides the file names.
    pub fn artifact_paths(&self) -> (PathBuf, PathBuf) {
        let kind = self.config.kind.name();
        let csv = self
            .config
            .csv
            .clone()
            .unwrap_or_else(|| format!("{kind}.csv"));
        let json = self
            .config
            .json
            .clone()
            .unwrap_or_else(|| format!("{kind}.json"));
        (self.out_dir.join(csv), self.out_dir.join(json))
    }
}
