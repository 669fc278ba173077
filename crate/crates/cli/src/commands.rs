//! Subcommand implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::bundle::{write_comparison, write_run_bundle};
use crate::config::{Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::identities::{check_identities, IdentityOptions, IdentityReport};
use crate::report::{report, ReportFiles};
use crate::run::{compare_modes, run, Comparison, RunOutput};

/// A loaded scenario plus the exact text to persist with its outputs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub persisted: String,
    pub out_dir: PathBuf,
}

/// Loads and validates `config`, applying the command-line overrides.
///
/// The config is persisted verbatim unless `seed` changes it, in which case
/// the effective config is re-serialized so the bundle still reproduces.
pub fn prepare(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Prepared, CliError> {
    let (mut cfg, text) = ScenarioConfig::load(config)?;
    let mut persisted = text;
    if let Some(seed) = seed {
        match cfg.trajectories.as_mut() {
            Some(t) => {
                t.seed = seed;
                persisted = serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n";
            }
            None => warn!("--seed given but the scenario has no trajectories section"),
        }
    }
    let scenario = cfg.validate()?;
    let out_dir = out.map_or_else(|| PathBuf::from(&cfg.output.directory), Path::to_path_buf);
    Ok(Prepared {
        scenario,
        persisted,
        out_dir,
    })
}

pub fn simulate(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(PathBuf, RunOutput), CliError> {
    let p = prepare(config, out, seed)?;
    let output = run(&p.scenario, p.scenario.mode)?;
    write_run_bundle(&p.out_dir, &p.persisted, &p.scenario, &output)?;
    info!("bundle written to {}", p.out_dir.display());
    Ok((p.out_dir, output))
}

pub fn compare(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(PathBuf, Comparison), CliError> {
    let p = prepare(config, out, seed)?;
    let cmp = compare_modes(&p.scenario)?;
    write_comparison(&p.out_dir, &p.persisted, &p.scenario, &cmp)?;
    info!("comparison written to {}", p.out_dir.display());
    Ok((p.out_dir, cmp))
}

/// Runs the identity suite; fails with [`CliError::Identity`] if any check fails.
pub fn identities(opts: &IdentityOptions) -> Result<IdentityReport, CliError> {
    check_identities(opts)
}

pub fn export(bundle: &Path, out: Option<&Path>) -> Result<ReportFiles, CliError> {
    report(bundle, out)
}
