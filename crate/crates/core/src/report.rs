//! JSON and CSV emission. Floats are rounded to 9 significant digits, JSON
//! keeps struct field order, and every file is written through a temporary
//! sibling and renamed into place.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::apcc::{ApccReport, ClassCorrelation, ImpactEvent};
use crate::cfm::GridRow;
use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 9;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|f| serde_json::Number::from_f64(round_sig(f))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Evaluation(e.to_string()))?;
    round_value(&mut v);
    let mut out = serde_json::to_vec_pretty(&v).map_err(|e| Error::Evaluation(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Full-precision pretty JSON, for checkpoints that are read back.
pub fn to_exact_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| Error::Evaluation(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(value)?)
}

fn num(x: f64) -> String {
    round_sig(x).to_string()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub const CLASS_HEADER: [&str; 5] = ["class_label", "rho_gt", "rho_gen", "abs_diff", "events"];

pub fn classes_csv(classes: &[ClassCorrelation]) -> Vec<u8> {
    csv_bytes(
        &CLASS_HEADER,
        classes.iter().map(|c| {
            vec![
                c.class_label.clone(),
                num(c.rho_gt),
                num(c.rho_gen),
                num(c.abs_diff),
                c.events.to_string(),
            ]
        }),
    )
}

pub const EVENT_HEADER: [&str; 10] = [
    "video_id",
    "class_label",
    "impact_time",
    "object_id",
    "v_pre",
    "v_post",
    "mass",
    "delta_ke",
    "onset_strength_gt",
    "onset_strength_gen",
];

pub fn events_csv(events: &[ImpactEvent]) -> Vec<u8> {
    csv_bytes(
        &EVENT_HEADER,
        events.iter().map(|e| {
            vec![
                e.video_id.clone(),
                e.class_label.clone(),
                num(e.impact_time),
                e.object_id.clone(),
                num(e.v_pre),
                num(e.v_post),
                num(e.mass),
                num(e.delta_ke),
                num(e.onset_strength_gt),
                num(e.onset_strength_gen),
            ]
        }),
    )
}

pub fn loss_csv(losses: &[f64]) -> Vec<u8> {
    csv_bytes(
        &["step", "loss"],
        losses.iter().enumerate().map(|(i, l)| vec![i.to_string(), num(*l)]),
    )
}

pub const GRID_HEADER: [&str; 9] = [
    "class",
    "class_label",
    "mass_kg",
    "v_pre",
    "v_post",
    "kinetic_energy",
    "delta_ke",
    "target_amplitude",
    "sampled_amplitude",
];

pub fn grid_csv(rows: &[GridRow]) -> Vec<u8> {
    csv_bytes(
        &GRID_HEADER,
        rows.iter().map(|r| {
            vec![
                r.class.to_string(),
                crate::cfm::CLASS_LABELS[r.class].to_string(),
                num(r.mass_kg),
                num(r.v_pre),
                num(r.v_post),
                num(r.kinetic_energy),
                num(r.delta_ke),
                num(r.target_amplitude),
                num(r.sampled_amplitude),
            ]
        }),
    )
}

pub fn parse_report(bytes: &[u8], source_name: &str) -> Result<ApccReport> {
    serde_json::from_slice(bytes).map_err(|e| Error::from_json(source_name, &e))
}

fn csv_records(bytes: &[u8], header: &[&str], source_name: &str) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    let parse_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            column: 0,
            message: e.to_string(),
        }
    };
    let found = r.headers().map_err(parse_err)?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::validation("header", format!("expected {}", header.join(","))));
    }
    r.records().map(|rec| rec.map_err(parse_err)).collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::validation(name, format!("unreadable value {:?}", rec.get(i))))
}

pub fn parse_classes_csv(bytes: &[u8], source_name: &str) -> Result<Vec<ClassCorrelation>> {
    csv_records(bytes, &CLASS_HEADER, source_name)?
        .iter()
        .map(|r| {
            Ok(ClassCorrelation {
                class_label: field(r, 0, "class_label")?,
                rho_gt: field(r, 1, "rho_gt")?,
                rho_gen: field(r, 2, "rho_gen")?,
                abs_diff: field(r, 3, "abs_diff")?,
                events: field(r, 4, "events")?,
            })
        })
        .collect()
}

pub fn parse_loss_csv(bytes: &[u8], source_name: &str) -> Result<Vec<f64>> {
    csv_records(bytes, &["step", "loss"], source_name)?
        .iter()
        .map(|r| field(r, 1, "loss"))
        .collect()
}
