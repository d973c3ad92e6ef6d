use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::{RunManifest, ScenarioError};
use crate::diagnostics::{IdentityId, ResidualReport, Trajectory};

pub const CSV_BASE_COLUMNS: [&str; 8] = ["t", "E_k", "E_p", "E_k_mod", "B_bot", "I_virial", "mean_psi", "gamma_min"];

/// One row per output time; `res_<identity>` columns hold absolute residuals and stay empty
/// where a stencil has no value.
pub fn time_series_csv(traj: &Trajectory, residuals: &BTreeMap<IdentityId, Vec<ResidualReport>>) -> String {
    let series: Vec<(&IdentityId, BTreeMap<u64, f64>)> = residuals
        .iter()
        .map(|(id, reports)| {
            let by_time = reports
                .iter()
                .map(|r| (time_key(traj, r.t), r.abs_residual))
                .collect::<BTreeMap<_, _>>();
            (id, by_time)
        })
        .collect();
    let mut out = CSV_BASE_COLUMNS.join(",");
    for (id, _) in &series {
        write!(out, ",res_{}", id.key()).unwrap();
    }
    out.push('\n');
    for (i, s) in traj.snapshots.iter().enumerate() {
        let r = &s.record;
        let cells = [r.t, r.e_k, r.e_p, r.e_k_mod, r.b_bot, r.i_virial, r.mean_psi, r.gamma_min];
        let row: Vec<String> = cells.iter().map(|v| format_float(*v)).collect();
        out.push_str(&row.join(","));
        for (_, by_time) in &series {
            out.push(',');
            if let Some(v) = by_time.get(&(i as u64)) {
                out.push_str(&format_float(*v));
            }
        }
        out.push('\n');
    }
    out
}

/// Shortest decimal that parses back to `v`, in exponent form outside `[1e-4, 1e16)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Index of the output time nearest to `t`.
fn time_key(traj: &Trajectory, t: f64) -> u64 {
    let t0 = traj.snapshots.first().map(|s| s.record.t).unwrap_or(0.0);
    ((t - t0) / traj.dt_out).round().max(0.0) as u64
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    let io = |source| ScenarioError::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

/// Writes `manifest.json` and, when given, `timeseries.csv` under `dir`.
pub fn write_outputs(dir: &Path, manifest: &RunManifest, csv: Option<&str>) -> Result<Vec<PathBuf>, ScenarioError> {
    let mut written = Vec::new();
    if let Some(csv) = csv {
        let p = dir.join("timeseries.csv");
        write_atomic(&p, csv)?;
        written.push(p);
    }
    let p = dir.join("manifest.json");
    write_atomic(&p, &(manifest.to_json() + "\n"))?;
    written.push(p);
    Ok(written)
}
