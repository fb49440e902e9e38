//! CSV ingestion and emission for the two observation files.
//!
//! EMA file: `patient_id,t_days,q1..q10` (all answers required).
//! Sensor file: `patient_id,t_days,epoch,<feature columns>`; empty fields
//! mark missing values and become NaN.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::records::{EmaRecord, Epoch, SensorEpochRecord, EMA_ITEMS, SENSOR_FEATURE_NAMES};
use crate::error::{Error, Result};

fn csv_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Csv { line, msg: msg.into() }
}

/// Parse EMA records from a reader. Records are validated and must be
/// strictly increasing in time per patient (in file order).
pub fn read_ema_csv<R: Read>(reader: R) -> Result<Vec<EmaRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?;
        let mut expected = vec!["patient_id".to_string(), "t_days".to_string()];
        expected.extend((1..=EMA_ITEMS).map(|q| format!("q{q}")));
        let got: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
        if got != expected {
            return Err(csv_err(1, format!("expected header {expected:?}, got {got:?}")));
        }
    }
    let mut records = Vec::new();
    for result in rdr.records() {
        let row = result.map_err(|e| {
            csv_err(e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 2 + EMA_ITEMS {
            return Err(csv_err(line, format!("expected {} fields, got {}", 2 + EMA_ITEMS, row.len())));
        }
        let patient_id = row[0].trim().to_string();
        if patient_id.is_empty() {
            return Err(csv_err(line, "empty patient_id"));
        }
        let t: f64 = row[1]
            .trim()
            .parse()
            .map_err(|_| csv_err(line, format!("bad t_days value {:?}", &row[1])))?;
        let mut answers = [0u8; EMA_ITEMS];
        for q in 0..EMA_ITEMS {
            let field = row[2 + q].trim();
            if field.is_empty() {
                return Err(csv_err(line, format!("missing answer q{}", q + 1)));
            }
            answers[q] = field
                .parse()
                .map_err(|_| csv_err(line, format!("bad answer q{}: {field:?}", q + 1)))?;
        }
        let rec = EmaRecord::new(patient_id, t, answers)
            .map_err(|e| csv_err(line, e.to_string()))?;
        if let Some(prev) = records.iter().rev().find(|r: &&EmaRecord| r.patient_id == rec.patient_id) {
            if rec.t <= prev.t {
                return Err(csv_err(
                    line,
                    format!("t_days not strictly increasing for patient {} ({} after {})", rec.patient_id, rec.t, prev.t),
                ));
            }
        }
        records.push(rec);
    }
    Ok(records)
}

/// Parse sensor epoch records; empty feature fields become NaN.
pub fn read_sensor_csv<R: Read>(reader: R) -> Result<Vec<SensorEpochRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    {
        let headers = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?;
        let mut expected = vec!["patient_id".to_string(), "t_days".to_string(), "epoch".to_string()];
        expected.extend(SENSOR_FEATURE_NAMES.iter().map(|s| s.to_string()));
        let got: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
        if got != expected {
            return Err(csv_err(1, format!("expected header {expected:?}, got {got:?}")));
        }
    }
    let mut records = Vec::new();
    for result in rdr.records() {
        let row = result.map_err(|e| {
            csv_err(e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 3 + SENSOR_FEATURE_NAMES.len() {
            return Err(csv_err(line, format!("expected {} fields, got {}", 3 + SENSOR_FEATURE_NAMES.len(), row.len())));
        }
        let patient_id = row[0].trim().to_string();
        let t: f64 = row[1]
            .trim()
            .parse()
            .map_err(|_| csv_err(line, format!("bad t_days value {:?}", &row[1])))?;
        let epoch = Epoch::parse(row[2].trim()).map_err(|e| csv_err(line, e.to_string()))?;
        let mut features = [f64::NAN; 9];
        for (j, feat) in features.iter_mut().enumerate() {
            let field = row[3 + j].trim();
            if !field.is_empty() {
                *feat = field.parse().map_err(|_| {
                    csv_err(line, format!("bad {} value {field:?}", SENSOR_FEATURE_NAMES[j]))
                })?;
            }
        }
        records.push(
            SensorEpochRecord::new(patient_id, t, epoch, features)
                .map_err(|e| csv_err(line, e.to_string()))?,
        );
    }
    Ok(records)
}

pub fn read_ema_csv_path(path: &Path) -> Result<Vec<EmaRecord>> {
    read_ema_csv(std::fs::File::open(path)?)
}

pub fn read_sensor_csv_path(path: &Path) -> Result<Vec<SensorEpochRecord>> {
    read_sensor_csv(std::fs::File::open(path)?)
}

fn fmt_num(v: f64) -> String {
    // Round-trippable, stable formatting for deterministic outputs.
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

pub fn write_ema_csv<W: Write>(writer: W, records: &[EmaRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["patient_id".to_string(), "t_days".to_string()];
    header.extend((1..=EMA_ITEMS).map(|q| format!("q{q}")));
    wtr.write_record(&header).map_err(|e| csv_err(1, e.to_string()))?;
    for r in records {
        let mut row = vec![r.patient_id.clone(), fmt_num(r.t)];
        row.extend(r.answers.iter().map(|a| a.to_string()));
        wtr.write_record(&row).map_err(|e| csv_err(0, e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_sensor_csv<W: Write>(writer: W, records: &[SensorEpochRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["patient_id".to_string(), "t_days".to_string(), "epoch".to_string()];
    header.extend(SENSOR_FEATURE_NAMES.iter().map(|s| s.to_string()));
    wtr.write_record(&header).map_err(|e| csv_err(1, e.to_string()))?;
    for r in records {
        let mut row = vec![r.patient_id.clone(), fmt_num(r.t), r.epoch.as_str().to_string()];
        row.extend(r.features.iter().map(|&v| if v.is_finite() { fmt_num(v) } else { String::new() }));
        wtr.write_record(&row).map_err(|e| csv_err(0, e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
