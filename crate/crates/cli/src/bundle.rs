//! Run bundles on disk.
//!
//! A bundle is a directory holding the verbatim config, a JSON metadata file
//! and tidy CSV tables. Floats are written with 17 significant digits so a
//! re-run of the same config reproduces every numeric column byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::Scenario;
use crate::error::CliError;
use crate::run::{Comparison, RunOutput};

pub const BUNDLE_FORMAT: &str = "modbohm-bundle";
pub const BUNDLE_VERSION: u32 = 1;

pub const CONFIG_FILE: &str = "config.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const SERIES_FILE: &str = "series.csv";
pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const EQUIVARIANCE_FILE: &str = "equivariance.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const DISPLACEMENT_FILE: &str = "displacement.csv";

pub const SERIES_HEADER: [&str; 10] = [
    "t",
    "step",
    "norm",
    "survival_norm",
    "antiparticle_norm",
    "integrated_source",
    "norm_rate",
    "continuity_residual",
    "hj_residual",
    "annihilated_sites",
];

pub const SNAPSHOT_HEADER: [&str; 10] = [
    "t", "x", "R", "S", "Q_std", "Q_modified", "q_density", "E_re", "E_im", "source",
];

pub const TRAJECTORY_HEADER: [&str; 3] = ["particle_id", "t", "x"];

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

/// Serializes string records as CSV with `\n` line endings.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Bundle {
        path: PathBuf::new(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::Bundle {
        path: PathBuf::new(),
        message: e.to_string(),
    })
}

fn write_csv<I, R>(dir: &Path, file: &str, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    write_atomic(&dir.join(file), &csv_bytes(header, rows)?)
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("metadata serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn series_rows(out: &RunOutput) -> Vec<Vec<String>> {
    out.series
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.t),
                r.step.to_string(),
                fmt_f64(r.norm),
                fmt_f64(r.survival_norm),
                fmt_opt(r.antiparticle_norm),
                fmt_f64(r.integrated_source),
                fmt_opt(r.norm_rate),
                fmt_opt(r.continuity_residual),
                fmt_opt(r.hj_residual),
                r.annihilated_sites.to_string(),
            ]
        })
        .collect()
}

fn snapshot_rows(out: &RunOutput) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for s in &out.snapshots {
        for j in 0..s.x.len() {
            rows.push(vec![
                fmt_f64(s.t),
                fmt_f64(s.x[j]),
                fmt_f64(s.amplitude[j]),
                fmt_f64(s.phase[j]),
                fmt_opt(s.q_std[j]),
                fmt_opt(s.q_modified[j]),
                fmt_opt(s.q_density[j]),
                fmt_opt(s.extra_term[j].map(|e| e.re)),
                fmt_opt(s.extra_term[j].map(|e| e.im)),
                fmt_opt(s.source[j]),
            ]);
        }
    }
    rows
}

fn trajectory_rows(out: &RunOutput) -> Vec<Vec<String>> {
    let Some(ens) = &out.trajectories else {
        return Vec::new();
    };
    let mut rows = Vec::with_capacity(ens.len() * ens.times.len());
    for i in 0..ens.len() {
        for (k, &t) in ens.times.iter().enumerate() {
            if ens.absorbed[i].is_some_and(|at| at <= k) {
                break;
            }
            rows.push(vec![i.to_string(), fmt_f64(t), fmt_f64(ens.positions[k][i])]);
        }
    }
    rows
}

fn equivariance_rows(out: &RunOutput) -> Vec<Vec<String>> {
    out.equivariance
        .iter()
        .map(|e| {
            vec![
                fmt_f64(e.t),
                fmt_f64(e.report.statistic),
                fmt_f64(e.report.raw_statistic),
                fmt_f64(e.report.threshold),
                e.report.passed.to_string(),
                fmt_f64(e.report.mass),
                e.report.samples.to_string(),
            ]
        })
        .collect()
}

fn run_metadata(scenario: &Scenario, out: &RunOutput, files: &[&str]) -> Value {
    let mut caveats = Vec::new();
    if out.mode != modbohm::modschrod::EvolutionMode::Standard && out.trajectories.is_some() {
        caveats.push(
            "modified evolution carries a continuity source that transport along trajectories cannot \
             represent: `statistic` compares against the renormalized density and is the checked value, \
             `raw_statistic` compares against the unnormalized density and is expected to fail",
        );
    }
    json!({
        "format": BUNDLE_FORMAT,
        "format_version": BUNDLE_VERSION,
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "mode": out.mode,
        "config": scenario.config,
        "seeds": { "trajectories": scenario.trajectories.as_ref().map(|t| t.seed) },
        "steps": scenario.steps,
        "dt": scenario.dt,
        "output_times": out.series.len(),
        "functional_steps": out.functional_steps,
        "timings": { "wall_seconds": out.wall_seconds },
        "files": files,
        "caveats": caveats,
    })
}

/// Writes a complete simulation bundle into `dir`.
pub fn write_run_bundle(dir: &Path, raw_config: &str, scenario: &Scenario, out: &RunOutput) -> Result<(), CliError> {
    create_dir(dir)?;
    write_atomic(&dir.join(CONFIG_FILE), raw_config.as_bytes())?;
    let mut files = vec![CONFIG_FILE, METADATA_FILE, SERIES_FILE, SNAPSHOTS_FILE];
    write_csv(dir, SERIES_FILE, &SERIES_HEADER, series_rows(out))?;
    write_csv(dir, SNAPSHOTS_FILE, &SNAPSHOT_HEADER, snapshot_rows(out))?;
    if out.trajectories.is_some() {
        write_csv(dir, TRAJECTORIES_FILE, &TRAJECTORY_HEADER, trajectory_rows(out))?;
        write_csv(
            dir,
            EQUIVARIANCE_FILE,
            &["t", "statistic", "raw_statistic", "threshold", "passed", "mass", "samples"],
            equivariance_rows(out),
        )?;
        files.extend([TRAJECTORIES_FILE, EQUIVARIANCE_FILE]);
    }
    write_json(&dir.join(METADATA_FILE), &run_metadata(scenario, out, &files))
}

/// Writes a mode comparison: both run bundles plus the comparison tables.
pub fn write_comparison(dir: &Path, raw_config: &str, scenario: &Scenario, cmp: &Comparison) -> Result<(), CliError> {
    create_dir(dir)?;
    write_run_bundle(&dir.join("standard"), raw_config, scenario, &cmp.standard)?;
    write_run_bundle(&dir.join("modified"), raw_config, scenario, &cmp.modified)?;
    write_atomic(&dir.join(CONFIG_FILE), raw_config.as_bytes())?;
    write_csv(
        dir,
        COMPARISON_FILE,
        &["t", "psi_distance", "q_rms_difference", "q_max_difference"],
        cmp.fields.iter().map(|r| {
            vec![
                fmt_f64(r.t),
                fmt_f64(r.psi_distance),
                fmt_opt(r.q_rms_difference),
                fmt_opt(r.q_max_difference),
            ]
        }),
    )?;
    write_csv(
        dir,
        DISPLACEMENT_FILE,
        &["t", "mean", "rms", "max", "particles"],
        cmp.displacement.iter().map(|r| {
            vec![
                fmt_f64(r.t),
                fmt_f64(r.mean),
                fmt_f64(r.rms),
                fmt_f64(r.max),
                r.particles.to_string(),
            ]
        }),
    )?;
    write_json(
        &dir.join(METADATA_FILE),
        &json!({
            "format": "modbohm-comparison",
            "format_version": BUNDLE_VERSION,
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": scenario.config,
            "modes": [cmp.standard.mode, cmp.modified.mode],
            "timings": {
                "standard_seconds": cmp.standard.wall_seconds,
                "modified_seconds": cmp.modified.wall_seconds,
            },
            "files": [CONFIG_FILE, METADATA_FILE, COMPARISON_FILE, DISPLACEMENT_FILE, "standard/", "modified/"],
        }),
    )
}

/// A bundle read back from disk, with tables kept as text.
#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub dir: PathBuf,
    pub metadata: Value,
    pub series: Vec<Vec<String>>,
    pub snapshots: Vec<Vec<String>>,
    pub trajectories: Option<Vec<Vec<String>>>,
}

fn corrupt(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Bundle {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| corrupt(path, e.to_string()))?;
    let got = r.headers().map_err(|e| corrupt(path, e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(corrupt(path, format!("unexpected header {:?}", got.iter().collect::<Vec<_>>())));
    }
    r.records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(str::to_owned).collect())
                .map_err(|e| corrupt(path, e.to_string()))
        })
        .collect()
}

/// Reads and validates a simulation bundle.
pub fn load_bundle(dir: &Path) -> Result<LoadedBundle, CliError> {
    if !dir.is_dir() {
        return Err(corrupt(dir, "bundle directory does not exist"));
    }
    let meta_path = dir.join(METADATA_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| corrupt(&meta_path, e.to_string()))?;
    let metadata: Value = serde_json::from_str(&text).map_err(|e| corrupt(&meta_path, e.to_string()))?;
    if metadata.get("format").and_then(Value::as_str) != Some(BUNDLE_FORMAT) {
        return Err(corrupt(&meta_path, format!("not a {BUNDLE_FORMAT} metadata file")));
    }
    if !dir.join(CONFIG_FILE).is_file() {
        return Err(corrupt(&dir.join(CONFIG_FILE), "missing config"));
    }
    let series = read_table(&dir.join(SERIES_FILE), &SERIES_HEADER)?;
    let snapshots = read_table(&dir.join(SNAPSHOTS_FILE), &SNAPSHOT_HEADER)?;
    let traj_path = dir.join(TRAJECTORIES_FILE);
    let trajectories = if traj_path.is_file() {
        Some(read_table(&traj_path, &TRAJECTORY_HEADER)?)
    } else {
        None
    };
    Ok(LoadedBundle {
        dir: dir.to_path_buf(),
        metadata,
        series,
        snapshots,
        trajectories,
    })
}
