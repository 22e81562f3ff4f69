//! Text artifacts: metrics as JSON and CSV, per-frame pipeline CSV, generic
//! tables, and config-hash verification when reading them back.
//!
//! Every CSV starts with a comment line `# config_hash=<hex> seed=<n>`.

use std::fs;
use std::path::Path;

use jscc_phy::metrics::{MetricValue, MetricsReport};
use jscc_phy::stream::{PipelineReport, WorkerStates};

use crate::error::{io_err, SimError, SimResult};

/// Provenance stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    fn header(&self) -> String {
        format!("# config_hash={} seed={}\n", self.config_hash, self.seed)
    }
}

/// Writes a CSV table preceded by the stamp line.
pub fn write_table<I, R>(path: &Path, stamp: &Stamp, headers: &[&str], rows: I) -> SimResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut buf = stamp.header().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(headers)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush().map_err(io_err(path))?;
    }
    fs::write(path, buf).map_err(io_err(path))
}

/// Formats floats with enough digits to round-trip.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_metrics_json(path: &Path, report: &MetricsReport) -> SimResult<()> {
    report.validate()?;
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_metrics_json(path: &Path) -> SimResult<MetricsReport> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// One row per scalar, one row per vector element.
pub fn write_metrics_csv(path: &Path, report: &MetricsReport) -> SimResult<()> {
    report.validate()?;
    let stamp = Stamp {
        config_hash: report.config_hash.clone(),
        seed: report.seed,
    };
    let mut rows = Vec::new();
    for m in &report.metrics {
        let sat = m.saturated.to_string();
        match &m.value {
            MetricValue::Scalar(v) => rows.push(vec![m.name.clone(), String::new(), num(*v), m.unit.clone(), sat]),
            MetricValue::Vector(vs) => {
                for (i, v) in vs.iter().enumerate() {
                    rows.push(vec![m.name.clone(), i.to_string(), num(*v), m.unit.clone(), sat.clone()]);
                }
            }
        }
    }
    write_table(path, &stamp, &["name", "index", "value", "unit", "saturated"], rows)
}

fn states(s: &WorkerStates) -> String {
    let mut out = Vec::new();
    if s.idle {
        out.push("idle");
    }
    if s.working {
        out.push("working");
    }
    if s.blocking {
        out.push("blocking");
    }
    out.join("|")
}

/// One row per frame; `gap_s` is empty for the first frame.
pub fn write_pipeline_csv(path: &Path, stamp: &Stamp, report: &PipelineReport, extra: Option<(&str, &[f64])>) -> SimResult<()> {
    let mut headers = vec![
        "frame_index",
        "arrival_s",
        "encode_start_s",
        "encode_end_s",
        "buffered_at_s",
        "transmit_start_s",
        "transmit_end_s",
        "decode_end_s",
        "gap_s",
        "encoder_states",
        "transmitter_states",
    ];
    if let Some((name, _)) = extra {
        headers.push(name);
    }
    let rows = report.frames.iter().enumerate().map(|(i, f)| {
        let mut row = vec![
            f.frame_index.to_string(),
            num(f.arrival_time),
            num(f.encode_start),
            num(f.encode_end),
            num(f.buffered_at),
            num(f.transmit_start),
            num(f.transmit_end),
            num(f.decode_end),
            if i == 0 { String::new() } else { num(report.gaps[i - 1]) },
            states(&f.encoder),
            states(&f.transmitter),
        ];
        if let Some((_, values)) = extra {
            row.push(values.get(i).map_or_else(String::new, |v| num(*v)));
        }
        row
    });
    write_table(path, stamp, &headers, rows)
}

/// Reads the config hash an artifact was stamped with.
pub fn artifact_hash(path: &Path) -> SimResult<String> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |message: &str| SimError::Artifact {
        path: path.to_owned(),
        message: message.to_owned(),
    };
    if let Some(line) = text.lines().next().filter(|l| l.starts_with('#')) {
        return line
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix("config_hash="))
            .map(str::to_owned)
            .ok_or_else(|| bad("stamp line has no config_hash"));
    }
    let value: serde_json::Value = serde_json::from_str(&text)?;
    value
        .get("config_hash")
        .and_then(|v| v.as_str())
        .map(str::to_owned)
        .ok_or_else(|| bad("no config_hash field"))
}

/// Loads a stamped CSV, failing if its hash differs from `expected`.
/// Returns the header and the rows.
pub fn read_table_checked(path: &Path, expected: &str) -> SimResult<(Vec<String>, Vec<Vec<String>>)> {
    verify_artifact(path, expected)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<Result<_, _>>()?;
    Ok((headers, rows))
}

pub fn verify_artifact(path: &Path, expected: &str) -> SimResult<()> {
    let found = artifact_hash(path)?;
    if found != expected {
        return Err(SimError::HashMismatch {
            path: path.to_owned(),
            expected: expected.to_owned(),
            found,
        });
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_csv_and_json_carry_the_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = MetricsReport::new("demo", "deadbeef", 7);
        r.scalar("x", 1.5, "dB").vector("v", vec![1.0, 2.0], "");
        let csv_path = dir.path().join("m.csv");
        let json_path = dir.path().join("m.json");
        write_metrics_csv(&csv_path, &r).unwrap();
        write_metrics_json(&json_path, &r).unwrap();
        assert_eq!(artifact_hash(&csv_path).unwrap(), "deadbeef");
        assert_eq!(artifact_hash(&json_path).unwrap(), "deadbeef");
        assert_eq!(read_metrics_json(&json_path).unwrap(), r);
        let (h, rows) = read_table_checked(&csv_path, "deadbeef").unwrap();
        assert_eq!(h, ["name", "index", "value", "unit", "saturated"]);
        assert_eq!(rows.len(), 3);
        assert!(matches!(read_table_checked(&csv_path, "other"), Err(SimError::HashMismatch { .. })));
    }
}
