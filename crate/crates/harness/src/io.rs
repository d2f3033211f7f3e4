//! Trajectory log files: the per-tick CSV, its metadata sidecar, and plot-ready series.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use manip_bench_core::geometry::{Point3, Pose2D, Twist};
use manip_bench_core::global_planner::GlobalPath;
use manip_bench_core::metrics::{resample, turn_angles, LogSample, TrajectoryLog};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trial::{Failure, PlannerKind, TrialOutcome};

pub const LOG_COLUMNS: [&str; 12] = [
    "t",
    "base_x",
    "base_y",
    "base_theta",
    "cmd_v",
    "cmd_omega",
    "ee_exp_x",
    "ee_exp_y",
    "ee_exp_z",
    "ee_act_x",
    "ee_act_y",
    "ee_act_z",
];

/// Metric conventions stated alongside every emitted result.
pub const CONVENTIONS: [&str; 6] = [
    "d_travelled sums the distances of all N-1 consecutive base-position pairs",
    "p_acc is the squared distance to the goal; final_distance is the plain distance",
    "T_taken = t_final - t_start",
    "A_between pairs both curves after arc-length resampling to min(N, n) points",
    "p_e integrates |p_exp - p_act| with the trapezoidal rule",
    "std is the sample standard deviation (n - 1 denominator), 0 for a single success",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}, column `{column}`: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },
    #[error("missing column `{column}`")]
    Schema { column: String },
    #[error("line {line}: time {t} does not come after {previous}")]
    NonMonotonicTime { line: u64, t: f64, previous: f64 },
    #[error("{}: {message}", path.display())]
    Meta { path: PathBuf, message: String },
}

/// What the CSV cannot carry: the plan, the goal and the outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    #[serde(default)]
    pub scenario: Option<String>,
    pub planner: PlannerKind,
    #[serde(default)]
    pub seed: Option<u64>,
    pub goal: Pose2D,
    pub success: bool,
    #[serde(default)]
    pub failure: Option<Failure>,
    #[serde(default)]
    pub replans: usize,
    pub global_path: GlobalPath,
    #[serde(default)]
    pub conventions: Vec<String>,
}

impl LogMeta {
    pub fn for_outcome(outcome: &TrialOutcome) -> Self {
        Self {
            scenario: Some(outcome.spec.scenario.clone()),
            planner: outcome.spec.planner,
            seed: Some(outcome.spec.seed),
            goal: outcome.log.goal,
            success: outcome.log.success,
            failure: outcome.failure,
            replans: outcome.replans,
            global_path: outcome.log.global_path.clone(),
            conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// `run.csv` -> `run.meta.json`
pub fn meta_path(log_path: &Path) -> PathBuf {
    log_path.with_extension("meta.json")
}

fn write_rows<W: Write>(samples: &[LogSample], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_COLUMNS)?;
    for s in samples {
        let row = [
            s.t,
            s.base.x,
            s.base.y,
            s.base.theta,
            s.cmd.v,
            s.cmd.omega,
            s.ee_expected.x,
            s.ee_expected.y,
            s.ee_expected.z,
            s.ee_actual.x,
            s.ee_actual.y,
            s.ee_actual.z,
        ];
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()
}

pub fn write_log(log: &TrajectoryLog, meta: &LogMeta, path: &Path) -> io::Result<()> {
    write_rows(&log.samples, BufWriter::new(File::create(path)?))?;
    let json = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
    std::fs::write(meta_path(path), json + "\n")
}

/// Parses the per-tick samples of a log CSV. Columns may come in any order and extra
/// columns are ignored.
pub fn read_samples<R: io::Read>(input: R) -> Result<Vec<LogSample>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let csv_error = |e: csv::Error| IngestError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        column: String::new(),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_error)?.clone();
    let mut index = [0usize; 12];
    for (slot, name) in index.iter_mut().zip(LOG_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::Schema {
                column: name.to_string(),
            })?;
    }

    let mut samples: Vec<LogSample> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut v = [0.0; 12];
        for (k, (slot, name)) in v.iter_mut().zip(LOG_COLUMNS).enumerate() {
            let field = record.get(index[k]).unwrap_or("");
            *slot = match field.parse::<f64>() {
                Ok(x) if x.is_finite() => x,
                Ok(_) => {
                    return Err(IngestError::Parse {
                        line,
                        column: name.to_string(),
                        message: format!("`{field}` is not finite"),
                    })
                }
                Err(e) => {
                    return Err(IngestError::Parse {
                        line,
                        column: name.to_string(),
                        message: format!("`{field}`: {e}"),
                    })
                }
            };
        }
        if let Some(prev) = samples.last() {
            if !(v[0] > prev.t) {
                return Err(IngestError::NonMonotonicTime {
                    line,
                    t: v[0],
                    previous: prev.t,
                });
            }
        }
        samples.push(LogSample {
            t: v[0],
            base: Pose2D {
                x: v[1],
                y: v[2],
                theta: v[3],
            },
            cmd: Twist::new(v[4], v[5]),
            ee_expected: Point3::new(v[6], v[7], v[8]),
            ee_actual: Point3::new(v[9], v[10], v[11]),
        });
    }
    Ok(samples)
}

pub fn read_meta(path: &Path) -> Result<LogMeta, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IngestError::Meta {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads a log CSV and, when present, its metadata sidecar. Without a sidecar the run is
/// taken as successful, the goal is the final base pose and the global path is empty.
pub fn ingest_log(path: &Path) -> Result<TrajectoryLog, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let samples = read_samples(io::BufReader::new(file))?;
    let sidecar = meta_path(path);
    let log = if sidecar.exists() {
        let meta = read_meta(&sidecar)?;
        TrajectoryLog {
            samples,
            global_path: meta.global_path,
            goal: meta.goal,
            success: meta.success,
        }
    } else {
        let goal = samples.last().map_or(Pose2D::identity(), |s| s.base);
        TrajectoryLog {
            samples,
            global_path: GlobalPath::default(),
            goal,
            success: true,
        }
    };
    Ok(log)
}

/// Reads a global path from a CSV with `x` and `y` columns.
pub fn read_path_points(path: &Path) -> Result<GlobalPath, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(io::BufReader::new(file));
    let csv_error = |e: csv::Error| IngestError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        column: String::new(),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::Schema {
                column: name.to_string(),
            })
    };
    let (ix, iy) = (col("x")?, col("y")?);
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize, name: &str| {
            let field = record.get(i).unwrap_or("");
            field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| IngestError::Parse {
                    line,
                    column: name.to_string(),
                    message: format!("`{field}` is not a finite number"),
                })
        };
        points.push(manip_bench_core::geometry::Vec2::new(
            get(ix, "x")?,
            get(iy, "y")?,
        ));
    }
    let heading = match points.as_slice() {
        [.., a, b] => (b.y - a.y).atan2(b.x - a.x),
        _ => 0.0,
    };
    Ok(GlobalPath::from_points(&points, heading))
}

fn csv_file(path: &Path) -> io::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

/// Writes `<stem>_ee_error.csv` (signed expected-minus-actual error over time),
/// `<stem>_turns.csv` (base path with the turn angle at each sample) and
/// `<stem>_paths.csv` (travelled and global paths resampled to aligned pairs).
pub fn write_plot_series(log: &TrajectoryLog, dir: &Path, stem: &str) -> io::Result<()> {
    let mut w = csv_file(&dir.join(format!("{stem}_ee_error.csv")))?;
    w.write_record(["t", "e_x", "e_y", "e_z"])?;
    for s in &log.samples {
        let e = [
            s.ee_expected.x - s.ee_actual.x,
            s.ee_expected.y - s.ee_actual.y,
            s.ee_expected.z - s.ee_actual.z,
        ];
        w.write_record([s.t, e[0], e[1], e[2]].iter().map(f64::to_string))?;
    }
    w.flush()?;

    let positions = log.positions();
    let mut w = csv_file(&dir.join(format!("{stem}_turns.csv")))?;
    w.write_record(["x", "y", "turn_angle"])?;
    for (p, a) in positions.iter().zip(turn_angles(&positions)) {
        w.write_record([p.x, p.y, a].iter().map(f64::to_string))?;
    }
    w.flush()?;

    let mut w = csv_file(&dir.join(format!("{stem}_paths.csv")))?;
    w.write_record(["i", "travelled_x", "travelled_y", "global_x", "global_y"])?;
    let global = log.global_path.positions();
    if positions.len() >= 2 && global.len() >= 2 {
        let m = positions.len().min(global.len());
        let (a, b) = (resample(&positions, m), resample(&global, m));
        for (i, (p, q)) in a.iter().zip(&b).enumerate() {
            w.write_record([
                i.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                q.x.to_string(),
                q.y.to_string(),
            ])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "t,base_x,base_y,base_theta,cmd_v,cmd_omega,ee_exp_x,ee_exp_y,ee_exp_z,ee_act_x,ee_act_y,ee_act_z\n";

    #[test]
    fn missing_column_is_a_schema_error() {
        let text = "t,base_x,base_y,base_theta,cmd_v,cmd_omega,ee_exp_x,ee_exp_y,ee_exp_z\n0,0,0,0,0,0,0,0,0\n";
        match read_samples(text.as_bytes()) {
            Err(IngestError::Schema { column }) => assert_eq!(column, "ee_act_x"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn time_must_increase() {
        let text = format!("{HEADER}0,0,0,0,0,0,0,0,0,0,0,0\n0.2,0,0,0,0,0,0,0,0,0,0,0\n0.1,0,0,0,0,0,0,0,0,0,0,0\n");
        match read_samples(text.as_bytes()) {
            Err(IngestError::NonMonotonicTime { line, t, previous }) => {
                assert_eq!((line, t, previous), (4, 0.1, 0.2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line_and_column() {
        let text = format!("{HEADER}0,0,0,0,0,0,0,0,0,0,0,0\n0.1,0,zero,0,0,0,0,0,0,0,0,0\n");
        match read_samples(text.as_bytes()) {
            Err(IngestError::Parse { line, column, .. }) => {
                assert_eq!((line, column.as_str()), (3, "base_y"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn columns_in_any_order() {
        let text = "ee_act_z,ee_act_y,ee_act_x,ee_exp_z,ee_exp_y,ee_exp_x,cmd_omega,cmd_v,base_theta,base_y,base_x,t,extra\n\
                    12,11,10,9,8,7,6,5,4,3,2,1,x\n";
        let s = read_samples(text.as_bytes()).unwrap();
        assert_eq!(s[0].t, 1.0);
        assert_eq!((s[0].base.x, s[0].base.y, s[0].base.theta), (2.0, 3.0, 4.0));
        assert_eq!(s[0].ee_actual, Point3::new(10.0, 11.0, 12.0));
    }

    #[test]
    fn header_only_log_has_no_samples() {
        assert!(read_samples(HEADER.as_bytes()).unwrap().is_empty());
    }
}
