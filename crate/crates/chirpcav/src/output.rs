//! File formats: CSV tables, JSON summaries and the run manifest.
//!
//! CSV files have a single header row, LF line endings and floats written
//! with 17 significant digits. Schema versions are not stored in the CSV
//! itself; each run's `manifest.json` maps every file it wrote to its schema.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chirpcav_core::propagate::Sample;
use chirpcav_core::pulse::{field_truncated, PulsePair};
use chirpcav_core::scan::{PointStatus, ScanResult};
use chirpcav_core::units::UnitConstants;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::fmt_sig17;

pub const SCAN_SCHEMA: &str = "chirpcav-scan/1";
pub const TRAJECTORY_SCHEMA: &str = "chirpcav-trajectory/1";
pub const PULSE_SCHEMA: &str = "chirpcav-pulse/1";
pub const MAGNUS_SCHEMA: &str = "chirpcav-magnus/1";
pub const SUMMARY_SCHEMA: &str = "chirpcav-summary/1";
pub const MANIFEST_SCHEMA: &str = "chirpcav-manifest/1";

pub const SCAN_HEADER: [&str; 20] = [
    "point",
    "index_0",
    "index_1",
    "amplitude",
    "beta_plus",
    "beta_minus",
    "delta",
    "orientation",
    "p_ground",
    "p_minus",
    "p_plus",
    "psi_minus",
    "psi_plus",
    "delta_psi",
    "norm_drift",
    "magnus_p_ground",
    "magnus_p_minus",
    "magnus_p_plus",
    "status",
    "message",
];

pub const TRAJECTORY_HEADER: [&str; 9] =
    ["t", "cos_theta", "p_ground", "p_minus", "p_plus", "psi_minus", "psi_plus", "delta_psi", "norm"];

pub const PULSE_HEADER: [&str; 4] = ["t", "field_plus", "field_minus", "field_total"];

pub const MAGNUS_HEADER: [&str; 2] = ["t", "cos_theta"];

/// A finished output file, held in memory until every file of a run exists.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub schema: &'static str,
    pub bytes: Vec<u8>,
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {}", e.error()))
}

/// Rows of floats under `header`.
pub fn float_table<'a>(header: &[&str], rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(header)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row.iter().map(|v| fmt_sig17(*v)))?;
    }
    finish(w)
}

pub fn trajectory_csv(samples: &[Sample]) -> Result<Vec<u8>> {
    let rows: Vec<[f64; 9]> = samples
        .iter()
        .map(|s| {
            [
                s.t,
                s.orientation,
                s.populations[0],
                s.populations[1],
                s.populations[2],
                s.phases[0],
                s.phases[1],
                s.delta_psi,
                s.norm,
            ]
        })
        .collect();
    float_table(&TRAJECTORY_HEADER, rows.iter().map(|r| &r[..]))
}

/// The two fields and their sum at `samples` evenly spaced times.
pub fn pulse_csv(pulses: &PulsePair, window: (f64, f64), samples: usize) -> Result<Vec<u8>> {
    let (a, b) = window;
    let rows: Vec<[f64; 4]> = (0..samples)
        .map(|i| {
            let t = if i + 1 == samples { b } else { a + (b - a) * i as f64 / (samples - 1) as f64 };
            let p = field_truncated(t, &pulses.plus);
            let m = field_truncated(t, &pulses.minus);
            [t, p, m, p + m]
        })
        .collect();
    float_table(&PULSE_HEADER, rows.iter().map(|r| &r[..]))
}

/// One row per grid point in flat order. Settings columns hold the values
/// actually applied at the point (betas in ns², amplitude and delta in a.u.).
pub fn scan_csv(result: &ScanResult, settings: &[[f64; 4]]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(SCAN_HEADER)?;
    for (p, s) in result.points.iter().zip(settings) {
        let (status, message) = match &p.status {
            PointStatus::Ok => ("ok", String::new()),
            PointStatus::Failed(m) => ("failed", m.clone()),
        };
        let mut rec: Vec<String> = vec![p.flat.to_string(), p.index[0].to_string(), p.index[1].to_string()];
        let floats = [
            s[0],
            s[1],
            s[2],
            s[3],
            p.orientation,
            p.populations[0],
            p.populations[1],
            p.populations[2],
            p.phases[0],
            p.phases[1],
            p.delta_psi,
            p.norm_drift,
            p.magnus_populations[0],
            p.magnus_populations[1],
            p.magnus_populations[2],
        ];
        rec.extend(floats.iter().map(|v| fmt_sig17(*v)));
        rec.push(status.to_string());
        rec.push(message);
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn json_bytes(v: &Value) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

pub fn units_json() -> Value {
    let u = UnitConstants::FROZEN;
    json!({
        "wavenumber_to_au": u.wavenumber_to_au,
        "debye_to_au": u.debye_to_au,
        "second_to_au": u.second_to_au,
        "ns_to_au": u.ns_to_au,
        "ns2_to_au2": u.ns2_to_au2,
    })
}

pub struct ManifestInfo<'a> {
    pub command: &'a str,
    pub resolved_config: &'a str,
    pub warnings: &'a [String],
    pub wall_time_s: f64,
    pub threads: usize,
}

/// Manifest listing every file of the run with its schema and digest.
pub fn manifest(info: &ManifestInfo, files: &[OutputFile]) -> Result<OutputFile> {
    let listed: Vec<Value> =
        files.iter().map(|f| json!({ "name": f.name, "schema": f.schema, "sha256": sha256_hex(&f.bytes) })).collect();
    let v = json!({
        "schema": MANIFEST_SCHEMA,
        "tool": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "command": info.command,
        "config_sha256": sha256_hex(info.resolved_config.as_bytes()),
        "resolved_config": info.resolved_config,
        "warnings": info.warnings,
        "units": units_json(),
        "threads": info.threads,
        "wall_time_s": info.wall_time_s,
        "files": listed,
    });
    Ok(OutputFile { name: "manifest.json".into(), schema: MANIFEST_SCHEMA, bytes: json_bytes(&v)? })
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and an atomic rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes every file into `dir`, creating it if needed.
pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    files
        .iter()
        .map(|f| {
            let path = dir.join(&f.name);
            write_atomic(&path, &f.bytes)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_layout() {
        let rows = [[0.1, -2.0], [1.0 / 3.0, 5e-300]];
        let out = String::from_utf8(float_table(&["a", "b"], rows.iter().map(|r| &r[..])).unwrap()).unwrap();
        let lines: Vec<&str> = out.split('\n').collect();
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines[1], "1.0000000000000001e-1,-2.0000000000000000e0");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "");
        assert!(!out.contains('\r'));
        let third: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert_eq!(third, 1.0 / 3.0);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"first\n").unwrap();
        write_atomic(&p, b"second\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"second\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
