use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Result, RtaError};

use super::StepRecord;

pub fn write_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    let csv_err = |e| RtaError::Csv {
        path: path.into(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RtaError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<StepRecord>> {
    let csv_err = |e| RtaError::Csv {
        path: path.into(),
        source: e,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

pub fn write_ndjson(path: &Path, records: &[StepRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| RtaError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| RtaError::Json {
            path: path.into(),
            source: e,
        })?;
        w.write_all(b"\n").map_err(|e| RtaError::io(path, e))?;
    }
    w.flush().map_err(|e| RtaError::io(path, e))
}

pub fn read_ndjson(path: &Path) -> Result<Vec<StepRecord>> {
    let file = File::open(path).map_err(|e| RtaError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| RtaError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| RtaError::Json {
            path: path.into(),
            source: e,
        })?);
    }
    Ok(out)
}

/// Reads records by extension: `.ndjson`/`.jsonl` as JSON lines, anything else as CSV.
pub fn read_records(path: &Path) -> Result<Vec<StepRecord>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ndjson" | "jsonl") => read_ndjson(path),
        _ => read_csv(path),
    }
}
