//! CSV emission and re-parsing of the experiment artifacts.
//!
//! Headers:
//!   kfold.csv      channel,model,fold,mae_km
//!   timing.csv     channel,model,total_fit_seconds   (wall clock, not
//!                  covered by the byte-determinism guarantee)
//!   curve_<m>.csv  n_train,train_mae_km,val_mae_km,fit_seconds,cumulative_seconds
//!   noise.csv      snr_db,channel,model,mean_mae_km  (snr_db "clean" for
//!                  the no-noise sentinel)
//!   classify.csv   fold,true_fault,false_fault,true_nonfault,false_nonfault,accuracy
//!   impedance.csv  scenario,distance_km,fault_resistance_ohm,
//!                  estimate_oracle_km,error_oracle_km,estimate_blind_km,error_blind_km
//!
//! Floats are written with the shortest round-trip representation, so
//! re-parsing a report reproduces it exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{ClassifyReport, EvalReport, ImpedanceRow, LearningCurve, NoiseReport};

pub fn kfold_csv(report: &EvalReport) -> String {
    let mut out = String::from("channel,model,fold,mae_km\n");
    for channel in &report.channels {
        for model in &channel.models {
            for (fold, mae) in model.per_fold_mae.iter().enumerate() {
                writeln!(out, "{},{},{fold},{mae}", channel.channel, model.name).unwrap();
            }
        }
    }
    out
}

pub fn timing_csv(report: &EvalReport) -> String {
    let mut out = String::from("channel,model,total_fit_seconds\n");
    for channel in &report.channels {
        for model in &channel.models {
            writeln!(out, "{},{},{}", channel.channel, model.name, model.fit_seconds).unwrap();
        }
    }
    out
}

pub fn curve_csv(curve: &LearningCurve) -> String {
    let mut out = String::from("n_train,train_mae_km,val_mae_km,fit_seconds,cumulative_seconds\n");
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.n_train, p.train_mae, p.val_mae, p.fit_seconds, p.cumulative_seconds
        )
        .unwrap();
    }
    out
}

pub fn noise_csv(report: &NoiseReport) -> String {
    let mut out = String::from("snr_db,channel,model,mean_mae_km\n");
    for entry in &report.entries {
        let snr = entry
            .snr_db
            .map_or_else(|| "clean".to_string(), |db| db.to_string());
        for channel in &entry.report.channels {
            for model in &channel.models {
                writeln!(out, "{snr},{},{},{}", channel.channel, model.name, model.mean_mae)
                    .unwrap();
            }
        }
    }
    out
}

pub fn classify_csv(report: &ClassifyReport) -> String {
    let mut out =
        String::from("fold,true_fault,false_fault,true_nonfault,false_nonfault,accuracy\n");
    for f in &report.per_fold {
        let c = f.confusion;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            f.fold,
            c.true_fault,
            c.false_fault,
            c.true_nonfault,
            c.false_nonfault,
            c.accuracy()
        )
        .unwrap();
    }
    let c = report.confusion;
    writeln!(
        out,
        "overall,{},{},{},{},{}",
        c.true_fault, c.false_fault, c.true_nonfault, c.false_nonfault, report.accuracy
    )
    .unwrap();
    out
}

pub fn impedance_csv(rows: &[ImpedanceRow]) -> String {
    let mut out = String::from(
        "scenario,distance_km,fault_resistance_ohm,estimate_oracle_km,error_oracle_km,estimate_blind_km,error_blind_km\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scenario,
            r.distance_km,
            r.fault_resistance,
            r.estimate_oracle_km,
            r.estimate_oracle_km - r.distance_km,
            r.estimate_blind_km,
            r.estimate_blind_km - r.distance_km
        )
        .unwrap();
    }
    out
}

pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Generic row reader for the simple comma tables above; returns
/// (header fields, data rows) with line numbers on malformed input.
pub fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        line: 1,
        message: "empty file".into(),
    })?;
    let header: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != header.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected {} columns, found {}", header.len(), fields.len()),
            });
        }
        rows.push(fields);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ChannelMode;
    use crate::harness::{ChannelReport, ModelEval};

    fn sample_report() -> EvalReport {
        EvalReport {
            channels: vec![ChannelReport {
                channel: ChannelMode::Voltage,
                models: vec![ModelEval {
                    name: "gb".into(),
                    per_fold_mae: vec![30.5, 31.25, 29.125],
                    mean_mae: 30.291666666666668,
                    fit_seconds: 1.5,
                    failures: vec![],
                }],
            }],
            k_folds: 3,
            fingerprint: "abc".into(),
        }
    }

    #[test]
    fn kfold_csv_round_trips_values() {
        let report = sample_report();
        let text = kfold_csv(&report);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kfold.csv");
        std::fs::write(&path, &text).unwrap();
        let (header, rows) = read_rows(&path).unwrap();
        assert_eq!(header, ["channel", "model", "fold", "mae_km"]);
        assert_eq!(rows.len(), 3);
        for (row, expected) in rows.iter().zip(&report.channels[0].models[0].per_fold_mae) {
            assert_eq!(row[3].parse::<f64>().unwrap(), *expected);
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let report = EvalReport {
            channels: vec![],
            k_folds: 7,
            fingerprint: String::new(),
        };
        assert_eq!(kfold_csv(&report), "channel,model,fold,mae_km\n");
        assert_eq!(timing_csv(&report), "channel,model,total_fit_seconds\n");
    }

    #[test]
    fn identical_reports_emit_identical_bytes() {
        assert_eq!(kfold_csv(&sample_report()), kfold_csv(&sample_report()));
    }
}
