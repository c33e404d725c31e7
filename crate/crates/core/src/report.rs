//! Flat result rows and their CSV / JSON files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aoi::AoiValue;
use crate::sim::SimulationReport;
use crate::system::{AnalyticalReport, SweepAxis, SystemParams};

/// Bumped whenever the column set of [`ResultRow`] changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DEADLINE_AOI_OUT_DIR";

/// One analysed (and optionally simulated) scenario.
///
/// `throughput_derived` is `λ − drop_rate`; the simulated throughput is
/// measured directly from deliveries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub axis: Option<String>,
    pub axis_value: Option<f64>,
    pub q1: f64,
    pub q2: f64,
    pub arrival_prob: f64,
    pub deadline: u32,
    pub sinr_threshold_1: f64,
    pub sinr_threshold_2: f64,
    pub p_1_solo: f64,
    pub p_1_joint: f64,
    pub p_2_solo: f64,
    pub p_2_joint: f64,
    pub delta: f64,
    pub mpr_class: String,
    pub mu1: f64,
    pub mu2: f64,
    pub p1: f64,
    pub p2: f64,
    pub drop_rate: f64,
    pub per_packet_drop_prob: f64,
    pub throughput_derived: f64,
    pub busy_prob: f64,
    pub aoi_average: AoiValue,
    pub aoi_violation_1: f64,
    pub aoi_violation_5: f64,
    pub aoi_violation_10: f64,
    pub sim_mode: Option<String>,
    pub sim_seed: Option<u64>,
    pub sim_slots: Option<u64>,
    pub sim_warmup_slots: Option<u64>,
    pub sim_replications: Option<u32>,
    pub sim_drop_rate: Option<f64>,
    pub sim_drop_rate_ci: Option<f64>,
    pub sim_throughput: Option<f64>,
    pub sim_throughput_ci: Option<f64>,
    pub sim_busy_prob: Option<f64>,
    pub sim_busy_prob_ci: Option<f64>,
    pub sim_per_packet_drop_prob: Option<f64>,
    pub sim_per_packet_drop_prob_ci: Option<f64>,
    pub sim_aoi_average: Option<f64>,
    pub sim_aoi_average_ci: Option<f64>,
    pub sim_aoi_violation_1: Option<f64>,
    pub sim_aoi_violation_5: Option<f64>,
    pub sim_aoi_violation_10: Option<f64>,
}

impl ResultRow {
    pub fn new(
        sweep: Option<(SweepAxis, f64)>,
        params: &SystemParams,
        analytical: &AnalyticalReport,
        sim: Option<&SimulationReport>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            axis: sweep.map(|(a, _)| a.to_string()),
            axis_value: sweep.map(|(_, v)| v),
            q1: params.q1,
            q2: params.q2,
            arrival_prob: params.arrival_prob,
            deadline: params.deadline,
            sinr_threshold_1: params.link1.sinr_threshold,
            sinr_threshold_2: params.link2.sinr_threshold,
            p_1_solo: analytical.sp.p_1_solo,
            p_1_joint: analytical.sp.p_1_joint,
            p_2_solo: analytical.sp.p_2_solo,
            p_2_joint: analytical.sp.p_2_joint,
            delta: analytical.delta,
            mpr_class: analytical.mpr_class.to_string(),
            mu1: analytical.mu1,
            mu2: analytical.mu2,
            p1: analytical.p1,
            p2: analytical.p2,
            drop_rate: analytical.queue.drop_rate,
            per_packet_drop_prob: analytical.queue.per_packet_drop_prob,
            throughput_derived: analytical.queue.throughput,
            busy_prob: analytical.queue.busy_prob,
            aoi_average: analytical.aoi_average,
            aoi_violation_1: analytical.aoi_violation(1),
            aoi_violation_5: analytical.aoi_violation(5),
            aoi_violation_10: analytical.aoi_violation(10),
            sim_mode: sim.map(|s| s.mode.to_string()),
            sim_seed: sim.map(|s| s.seed),
            sim_slots: sim.map(|s| s.slots),
            sim_warmup_slots: sim.map(|s| s.warmup_slots),
            sim_replications: sim.map(|s| s.replications),
            sim_drop_rate: sim.map(|s| s.drop_rate),
            sim_drop_rate_ci: sim.and_then(|s| s.ci_halfwidth.drop_rate),
            sim_throughput: sim.map(|s| s.throughput),
            sim_throughput_ci: sim.and_then(|s| s.ci_halfwidth.throughput),
            sim_busy_prob: sim.map(|s| s.busy_prob),
            sim_busy_prob_ci: sim.and_then(|s| s.ci_halfwidth.busy_prob),
            sim_per_packet_drop_prob: sim.map(|s| s.per_packet_drop_prob),
            sim_per_packet_drop_prob_ci: sim.and_then(|s| s.ci_halfwidth.per_packet_drop_prob),
            sim_aoi_average: sim.map(|s| s.aoi_average),
            sim_aoi_average_ci: sim.and_then(|s| s.ci_halfwidth.aoi_average),
            sim_aoi_violation_1: sim.and_then(|s| s.aoi_violation(1)),
            sim_aoi_violation_5: sim.and_then(|s| s.aoi_violation(5)),
            sim_aoi_violation_10: sim.and_then(|s| s.aoi_violation(10)),
        }
    }
}

/// One point of an AoI violation curve, long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRow {
    pub axis_value: Option<f64>,
    pub x: u64,
    pub analytical: f64,
    pub simulated: Option<f64>,
}

impl ViolationRow {
    pub fn curve(
        axis_value: Option<f64>,
        analytical: &AnalyticalReport,
        sim: Option<&SimulationReport>,
    ) -> Vec<Self> {
        analytical
            .aoi_violation_curve
            .iter()
            .map(|p| ViolationRow {
                axis_value,
                x: p.x,
                analytical: p.prob,
                simulated: sim.and_then(|s| s.aoi_violation(p.x)),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub command: String,
    pub rows: Vec<ResultRow>,
    pub violation_curves: Vec<ViolationRow>,
}

impl ResultDocument {
    pub fn new(command: &str, rows: Vec<ResultRow>, violation_curves: Vec<ViolationRow>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            rows,
            violation_curves,
        }
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn from_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(bytes).deserialize().collect()
}

/// The three files written for one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub violation_csv: PathBuf,
    pub json: PathBuf,
}

impl OutputPaths {
    /// `out` is taken as a path stem (any extension is dropped); without it
    /// the stem is `default_name` inside `$DEADLINE_AOI_OUT_DIR` or the
    /// working directory.
    pub fn resolve(out: Option<&Path>, default_name: &str) -> Self {
        let stem = match out {
            Some(p) => p.with_extension(""),
            None => std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."))
                .join(default_name),
        };
        let with_suffix = |suffix: &str| {
            let mut name = stem.file_name().unwrap_or_default().to_os_string();
            name.push(suffix);
            stem.with_file_name(name)
        };
        Self {
            csv: with_suffix(".csv"),
            violation_csv: with_suffix("_violation.csv"),
            json: with_suffix(".json"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Serializes everything first, then writes the three files.
pub fn write_document(paths: &OutputPaths, doc: &ResultDocument) -> Result<(), OutputError> {
    let csv = to_csv(&doc.rows)?;
    let violation = to_csv(&doc.violation_curves)?;
    let mut json = serde_json::to_vec_pretty(doc)?;
    json.push(b'\n');
    for (path, bytes) in [(&paths.csv, &csv), (&paths.violation_csv, &violation), (&paths.json, &json)] {
        write_atomic(path, bytes).map_err(|source| OutputError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimConfig};
    use crate::system::analyze;

    fn sample_rows() -> Vec<ResultRow> {
        let p = SystemParams::reference(0.0, 0.5, 0.5, 0.5, 3);
        let a = analyze(&p).unwrap();
        let s = simulate(&SimConfig::new(p, 20_000, 3).with_replications(2)).unwrap();
        let silent = SystemParams { q2: 0.0, ..p };
        let a0 = analyze(&silent).unwrap();
        vec![
            ResultRow::new(None, &p, &a, Some(&s)),
            ResultRow::new(Some((SweepAxis::Q2, 0.0)), &silent, &a0, None),
        ]
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = sample_rows();
        let bytes = to_csv(&rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("schema_version,axis,axis_value,q1,"));
        assert!(text.lines().nth(2).unwrap().contains(",inf,"), "{text}");
        let back: Vec<ResultRow> = from_csv(&bytes).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rows = sample_rows();
        let doc = ResultDocument::new("analyze", rows, vec![]);
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains(r#""aoi_average":"inf""#));
        let back: ResultDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn output_paths() {
        let p = OutputPaths::resolve(Some(Path::new("out/run1.csv")), "x");
        assert_eq!(p.csv, PathBuf::from("out/run1.csv"));
        assert_eq!(p.violation_csv, PathBuf::from("out/run1_violation.csv"));
        assert_eq!(p.json, PathBuf::from("out/run1.json"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/file.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
