//! Waveform persistence: one `t,v,i` CSV per scenario plus a JSON manifest
//! of scenario parameters and labels.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{FaultScenario, WaveformRecord};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    pub file: String,
    pub dt_output: f64,
    pub scenario: FaultScenario,
    /// Regression target for fault events; absent for load steps.
    pub label_km: Option<f64>,
}

/// Write every record as `scenario_<id>.csv` plus `manifest.json` in `dir`.
pub fn write_waveforms(records: &[WaveformRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(records.len());
    for (id, record) in records.iter().enumerate() {
        let file = format!("scenario_{id:05}.csv");
        let path = dir.join(&file);
        let mut out = Vec::with_capacity(record.voltage.len() * 48);
        writeln!(out, "t,v,i").expect("write to vec");
        for (k, (v, i)) in record.voltage.iter().zip(&record.current).enumerate() {
            let t = k as f64 * record.dt_output;
            writeln!(out, "{t},{v},{i}").expect("write to vec");
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        manifest.push(ManifestEntry {
            id,
            file,
            dt_output: record.dt_output,
            scenario: record.scenario,
            label_km: record.scenario.label().distance(),
        });
    }
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest encode: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Read a directory written by [`write_waveforms`].
///
/// Fault-current oracles are not persisted, so loaded records carry none.
pub fn load_waveforms(dir: &Path) -> Result<Vec<WaveformRecord>> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest decode: {e}")))?;

    let mut records = Vec::with_capacity(manifest.len());
    for entry in manifest {
        let path = dir.join(&entry.file);
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let reader = BufReader::new(file);
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut voltage = Vec::new();
        let mut current = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if idx == 0 {
                if line != "t,v,i" {
                    return Err(parse_err(1, format!("bad header {line:?}")));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(parse_err(idx + 1, format!("expected 3 columns, found {}", fields.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(idx + 1, format!("bad value {s:?}: {e}")))
            };
            voltage.push(parse(fields[1])?);
            current.push(parse(fields[2])?);
        }
        if voltage.is_empty() {
            return Err(parse_err(1, "no samples".into()));
        }
        records.push(WaveformRecord {
            dt_output: entry.dt_output,
            voltage,
            current,
            fault_current: None,
            scenario: entry.scenario,
        });
    }
    Ok(records)
}
