//! Result files. Every file is written to a temporary sibling and renamed
//! into place, so readers never see a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use iwatsuka::snapshot::write_snapshot;
use iwatsuka::Trajectory;

use crate::error::HarnessError;

/// Hermite modes whose masses go into trajectory tables.
pub const MODE_COLUMNS: usize = 8;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_atomic(path, &text)
}

/// `t, mass, sigma2_norm, mode_0, …` with one row per sample.
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>, HarnessError> {
    let n_modes = traj
        .fields()
        .first()
        .map_or(0, |f| f.grid().n_modes())
        .min(MODE_COLUMNS);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "mass".into(), "sigma2_norm".into()];
    header.extend((0..n_modes).map(|n| format!("mode_{n}")));
    w.write_record(&header)?;
    for (j, (&t, u)) in traj.times().iter().zip(traj.fields()).enumerate() {
        let mut row = vec![
            t.to_string(),
            traj.mass()[j].to_string(),
            traj.sigma2()[j].to_string(),
        ];
        row.extend((0..n_modes).map(|n| u.mode_mass(n).to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), HarnessError> {
    write_atomic(path, &trajectory_csv(traj)?)
}

/// One `snap_NNNNN.iwsk` per sample in `dir`.
pub fn write_snapshots(dir: &Path, traj: &Trajectory) -> Result<(), HarnessError> {
    for (j, u) in traj.fields().iter().enumerate() {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, u)?;
        write_atomic(&dir.join(format!("snap_{j:05}.iwsk")), &buf)?;
    }
    Ok(())
}
