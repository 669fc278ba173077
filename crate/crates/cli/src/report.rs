//! Plot-ready exports from a bundle: one observable per file, no rendering.

use std::fs;
use std::path::{Path, PathBuf};

use crate::bundle::{csv_bytes, load_bundle, write_atomic, TRAJECTORY_HEADER};
use crate::error::CliError;

pub const NORM_SERIES_FILE: &str = "norm_series.csv";
pub const RESIDUAL_SERIES_FILE: &str = "residual_series.csv";
pub const SNAPSHOT_INDEX_FILE: &str = "snapshot_index.csv";

pub const NORM_SERIES_HEADER: [&str; 4] = ["t", "norm", "survival_norm", "integrated_source"];
pub const SNAPSHOT_EXPORT_HEADER: [&str; 7] = ["x", "R", "S", "Q_std", "Q_modified", "q_density", "source"];

/// Files produced by [`report`], relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

fn pick(row: &[String], cols: &[usize]) -> Vec<String> {
    cols.iter().map(|&c| row[c].clone()).collect()
}

/// Exports the tables of the bundle at `bundle` into `out`
/// (default: `<bundle>/report`).
pub fn report(bundle: &Path, out: Option<&Path>) -> Result<ReportFiles, CliError> {
    let b = load_bundle(bundle)?;
    let dir = out.map_or_else(|| bundle.join("report"), Path::to_path_buf);
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let mut files = Vec::new();
    let mut emit = |name: String, bytes: Vec<u8>| -> Result<(), CliError> {
        write_atomic(&dir.join(&name), &bytes)?;
        files.push(name);
        Ok(())
    };

    // series: t,step,norm,survival_norm,antiparticle_norm,integrated_source,norm_rate,continuity_residual,hj_residual,...
    emit(
        NORM_SERIES_FILE.into(),
        csv_bytes(&NORM_SERIES_HEADER, b.series.iter().map(|r| pick(r, &[0, 2, 3, 5])))?,
    )?;
    emit(
        RESIDUAL_SERIES_FILE.into(),
        csv_bytes(
            &["t", "norm_rate", "continuity_residual", "hj_residual"],
            b.series.iter().map(|r| pick(r, &[0, 6, 7, 8])),
        )?,
    )?;

    // snapshots: t,x,R,S,Q_std,Q_modified,q_density,E_re,E_im,source — contiguous per t
    let mut groups: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    for row in &b.snapshots {
        if groups.last().is_none_or(|(t, _)| *t != row[0]) {
            groups.push((row[0].clone(), Vec::new()));
        }
        let (_, rows) = groups.last_mut().expect("group pushed above");
        rows.push(pick(row, &[1, 2, 3, 4, 5, 6, 9]));
    }
    let mut index = Vec::new();
    for (idx, (t, rows)) in groups.into_iter().enumerate() {
        let name = format!("snapshot_{idx:05}.csv");
        emit(name.clone(), csv_bytes(&SNAPSHOT_EXPORT_HEADER, rows)?)?;
        index.push(vec![idx.to_string(), t, name]);
    }
    emit(SNAPSHOT_INDEX_FILE.into(), csv_bytes(&["index", "t", "file"], index)?)?;

    if let Some(traj) = &b.trajectories {
        emit("trajectories.csv".into(), csv_bytes(&TRAJECTORY_HEADER, traj.iter().cloned())?)?;
    }
    Ok(ReportFiles { dir, files })
}
