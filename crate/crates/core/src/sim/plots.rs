use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Result, RtaError};
use crate::safety::SafetyParameters;

use super::StepRecord;

const CURVE_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotFiles {
    pub speed_limit: PathBuf,
    pub velocity: [PathBuf; 3],
    pub boundary: PathBuf,
}

#[derive(Serialize)]
struct SpeedRow {
    step: u64,
    r_norm: f64,
    v_norm: f64,
    speed_limit: f64,
}

#[derive(Serialize)]
struct AxisRow {
    step: u64,
    time: f64,
    velocity: f64,
    upper: f64,
    lower: f64,
}

#[derive(Serialize)]
struct Boundary {
    nu0: f64,
    nu1: f64,
    v_max: f64,
    /// `(r, ν0 + ν1 r)` from the origin to the farthest recorded range.
    speed_limit_curve: Vec<[f64; 2]>,
    /// Safe region of the speed panel: `v_norm ≤ ν0 + ν1 r_norm`.
    speed_safe_below_curve: bool,
    /// Safe band of each velocity panel.
    velocity_safe_band: [f64; 2],
    r_range: [f64; 2],
    time_range: [f64; 2],
}

/// Writes the speed-limit panel, the three velocity-cap panels and the
/// boundary metadata into `dir`.
pub fn emit_plot_data(records: &[StepRecord], sp: &SafetyParameters, dir: &Path) -> Result<PlotFiles> {
    if records.is_empty() {
        return Err(RtaError::InvalidConfig("no records to plot".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| RtaError::io(dir, e))?;

    let speed = dir.join("speed_limit.csv");
    write_rows(
        &speed,
        records.iter().map(|r| SpeedRow {
            step: r.step,
            r_norm: r.r_norm,
            v_norm: r.v_norm,
            speed_limit: sp.speed_limit(r.r_norm),
        }),
    )?;

    let velocity = ["vx", "vy", "vz"].map(|name| dir.join(format!("{name}_limit.csv")));
    for (axis, path) in velocity.iter().enumerate() {
        write_rows(
            path,
            records.iter().map(|r| AxisRow {
                step: r.step,
                time: r.time,
                velocity: [r.vx, r.vy, r.vz][axis],
                upper: sp.v_max,
                lower: -sp.v_max,
            }),
        )?;
    }

    let r_hi = records.iter().map(|r| r.r_norm).fold(0.0, f64::max);
    let curve = (0..CURVE_POINTS)
        .map(|k| {
            let r = r_hi * k as f64 / (CURVE_POINTS - 1) as f64;
            [r, sp.speed_limit(r)]
        })
        .collect();
    let meta = Boundary {
        nu0: sp.nu0,
        nu1: sp.nu1,
        v_max: sp.v_max,
        speed_limit_curve: curve,
        speed_safe_below_curve: true,
        velocity_safe_band: [-sp.v_max, sp.v_max],
        r_range: [records.iter().map(|r| r.r_norm).fold(f64::INFINITY, f64::min), r_hi],
        time_range: [records[0].time, records[records.len() - 1].time],
    };
    let boundary = dir.join("boundary.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| RtaError::Json {
        path: boundary.clone(),
        source: e,
    })?;
    std::fs::write(&boundary, text).map_err(|e| RtaError::io(&boundary, e))?;

    Ok(PlotFiles {
        speed_limit: speed,
        velocity,
        boundary,
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let csv_err = |e| RtaError::Csv {
        path: path.into(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RtaError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::FilterKind;
    use crate::sim::{default_config, run_scenario};

    #[test]
    fn one_row_per_record_and_curve_on_boundary() {
        let mut c = default_config();
        c.duration = 30;
        c.filter = FilterKind::None;
        let recs = run_scenario(&c).unwrap().records;
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&recs, &c.safety, dir.path()).unwrap();
        for p in std::iter::once(&files.speed_limit).chain(&files.velocity) {
            let n = std::fs::read_to_string(p).unwrap().lines().count();
            assert_eq!(n, recs.len() + 1, "{}", p.display());
        }
        let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.boundary).unwrap()).unwrap();
        for pt in meta["speed_limit_curve"].as_array().unwrap() {
            let (r, v) = (pt[0].as_f64().unwrap(), pt[1].as_f64().unwrap());
            assert!((v - (c.safety.nu0 + c.safety.nu1 * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_records_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plot_data(&[], &SafetyParameters::default(), dir.path()).is_err());
    }
}
