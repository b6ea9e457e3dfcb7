//! Long-format CSV and run manifest.

use std::io::Write;
use std::path::Path;

use qwalkdec_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::config::AxisValue;
use crate::engine::Row;
use crate::error::RunError;

/// Fixed columns after the sweep-axis columns.
pub const TAIL_COLUMNS: [&str; 6] = ["time", "observable", "x", "value", "converged", "seed"];

/// Rows of one evaluated sweep point.
#[derive(Debug, Clone)]
pub struct PointRows {
    pub coordinates: Vec<AxisValue>,
    pub seed: u64,
    pub rows: Vec<Row>,
}

fn fmt_time(t: f64) -> String {
    // Continuous sample times are k·dt; strip the accumulated float noise.
    let r = (t * 1e9).round() / 1e9;
    format!("{}", if r == 0.0 { 0.0 } else { r })
}

fn finite(v: f64, what: &str) -> Result<f64, RunError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RunError::core(
            "output",
            CoreError::Contract(format!("non-finite {what} ({v})")),
        ))
    }
}

pub fn header(experiment_id_axes: &[&str]) -> Vec<String> {
    let mut h = vec!["experiment_id".to_string()];
    h.extend(experiment_id_axes.iter().map(|s| s.to_string()));
    h.extend(TAIL_COLUMNS.iter().map(|s| s.to_string()));
    h
}

/// Writes the long table. Every numeric cell must be finite.
pub fn write_csv<W: Write>(
    out: W,
    experiment_id: &str,
    axes: &[&str],
    points: &[PointRows],
) -> Result<usize, RunError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| RunError::Io(e.to_string());
    w.write_record(header(axes)).map_err(io)?;
    let mut n = 0;
    for p in points {
        let coords: Vec<String> = p.coordinates.iter().map(AxisValue::render).collect();
        let seed = p.seed.to_string();
        for r in &p.rows {
            let time = match r.time {
                Some(t) => fmt_time(finite(t, "time")?),
                None => String::new(),
            };
            let value = match r.value {
                // Shortest round-trip form; exponent notation for extreme magnitudes.
                Some(v) => format!("{:?}", finite(v, r.observable)?),
                None => String::new(),
            };
            let mut rec: Vec<&str> = Vec::with_capacity(coords.len() + 7);
            rec.push(experiment_id);
            rec.extend(coords.iter().map(String::as_str));
            rec.push(&time);
            rec.push(r.observable);
            rec.push(r.x.as_deref().unwrap_or(""));
            rec.push(&value);
            rec.push(if r.converged { "true" } else { "false" });
            rec.push(&seed);
            w.write_record(&rec).map_err(io)?;
            n += 1;
        }
    }
    w.flush()?;
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub coordinates: Vec<(String, String)>,
    pub seed: u64,
    pub rows: usize,
    pub converged: bool,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment_id: String,
    pub code_version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub threads: usize,
    pub overrides: Vec<(String, String)>,
    pub sweep_axes: Vec<String>,
    pub csv: String,
    pub points: Vec<PointRecord>,
    pub all_converged: bool,
    pub wall_clock_seconds: f64,
}

pub fn config_digest(canonical: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

pub fn write_manifest(path: &Path, m: &RunManifest) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(m).map_err(|e| RunError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
