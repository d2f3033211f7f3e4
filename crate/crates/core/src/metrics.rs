//! Trajectory-quality metrics computed from a trial log.
//!
//! Six quantities describe one run: path smoothness `p_s`, end-effector stability `p_e`,
//! distance travelled, the area between the travelled and the global path, final position
//! accuracy and total time. Conventions where the printed formulas are ambiguous:
//!
//! * distance travelled sums all `N - 1` consecutive segments;
//! * the travelled and global paths are both resampled by arc length to `min(N, n)`
//!   points before being paired;
//! * final accuracy is the *squared* distance to the goal, with the plain distance kept
//!   alongside as [`MetricsReport::final_distance`];
//! * total time is `t_final - t_start`;
//! * `p_e` integrates with the trapezoidal rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angle_between, Point3, Pose2D, Twist, Vec2, EPS_LEN};
use crate::global_planner::GlobalPath;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("need at least {needed} samples, log has {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("global path is empty")]
    EmptyGlobalPath,
    #[error("timestamps must strictly increase (sample {index})")]
    NonMonotonicTime { index: usize },
}

/// One control-tick record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSample {
    pub t: f64,
    pub base: Pose2D,
    pub cmd: Twist,
    pub ee_expected: Point3,
    pub ee_actual: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub samples: Vec<LogSample>,
    pub global_path: GlobalPath,
    pub goal: Pose2D,
    pub success: bool,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn t_final(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.samples.iter().map(|s| s.base.position()).collect()
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        match self.samples.windows(2).position(|w| !(w[1].t > w[0].t)) {
            Some(k) => Err(MetricsError::NonMonotonicTime { index: k + 1 }),
            None => Ok(()),
        }
    }

    fn require(&self, needed: usize) -> Result<(), MetricsError> {
        if self.samples.len() < needed {
            return Err(MetricsError::InsufficientSamples {
                needed,
                got: self.samples.len(),
            });
        }
        Ok(())
    }
}

/// Sum of turn angles between consecutive non-degenerate segments of a polyline.
pub fn smoothness_of(points: &[Vec2]) -> f64 {
    let segments: Vec<Vec2> = points
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.norm() > EPS_LEN)
        .collect();
    segments
        .windows(2)
        .map(|w| angle_between(w[0], w[1]).expect("segments are filtered for length"))
        .sum()
}

/// Turn angle at each polyline vertex: the angle between the incoming and outgoing
/// segments, with degenerate segments skipped. Endpoints (and vertices with no valid
/// neighbor on one side) get 0.
pub fn turn_angles(points: &[Vec2]) -> Vec<f64> {
    let mut out = vec![0.0; points.len()];
    let mut incoming: Option<Vec2> = None;
    for i in 1..points.len() {
        let d = points[i] - points[i - 1];
        if d.norm() <= EPS_LEN {
            continue;
        }
        if let Some(prev) = incoming {
            out[i - 1] = angle_between(prev, d).expect("segments are filtered for length");
        }
        incoming = Some(d);
    }
    out
}

/// `p_s`: summed turn angle of the base path, in radians. Lower is smoother.
pub fn path_smoothness(log: &TrajectoryLog) -> Result<f64, MetricsError> {
    log.require(3)?;
    Ok(smoothness_of(&log.positions()))
}

/// `p_e`: per-axis time integral of |p_exp - p_act|.
pub fn ee_stability(log: &TrajectoryLog) -> Result<Point3, MetricsError> {
    log.require(2)?;
    let mut acc = Point3::ZERO;
    for w in log.samples.windows(2) {
        let e0 = (w[0].ee_expected - w[0].ee_actual).abs();
        let e1 = (w[1].ee_expected - w[1].ee_actual).abs();
        acc = acc + (e0 + e1).scale(0.5 * (w[1].t - w[0].t));
    }
    Ok(acc)
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// `d_travelled`: summed length of all consecutive base-position segments.
pub fn distance_travelled(log: &TrajectoryLog) -> Result<f64, MetricsError> {
    log.require(2)?;
    Ok(polyline_length(&log.positions()))
}

/// `m` points spaced evenly by arc length from the first to the last vertex.
pub fn resample(points: &[Vec2], m: usize) -> Vec<Vec2> {
    assert!(!points.is_empty() && m >= 1);
    let total = polyline_length(points);
    if m == 1 || total <= 0.0 {
        return vec![points[0]; m];
    }
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for j in 0..m {
        let s = if j == m - 1 {
            total
        } else {
            total * j as f64 / (m - 1) as f64
        };
        while seg + 1 < points.len() - 1 {
            let len = (points[seg + 1] - points[seg]).norm();
            if seg_start + len >= s {
                break;
            }
            seg_start += len;
            seg += 1;
        }
        let (a, b) = (points[seg], points[seg + 1]);
        let len = (b - a).norm();
        let t = if len > 0.0 {
            ((s - seg_start) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(a + (b - a) * t);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// Sum of squared distances between aligned samples.
    pub d_between: f64,
    /// `d_between · d_travelled / m`.
    pub a_between: f64,
    /// Number of aligned samples, `min(N, n)`.
    pub m: usize,
}

/// Divergence between two polylines after arc-length alignment to `min` of their sizes.
pub fn divergence_of(travelled: &[Vec2], global: &[Vec2]) -> Divergence {
    let m = travelled.len().min(global.len());
    let a = resample(travelled, m);
    let b = resample(global, m);
    let d_between: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).norm_squared()).sum();
    Divergence {
        d_between,
        a_between: d_between * polyline_length(travelled) / m as f64,
        m,
    }
}

/// `A_between`: area-like divergence of the travelled base path from the global path.
pub fn path_divergence(log: &TrajectoryLog) -> Result<Divergence, MetricsError> {
    log.require(2)?;
    if log.global_path.is_empty() {
        return Err(MetricsError::EmptyGlobalPath);
    }
    Ok(divergence_of(
        &log.positions(),
        &log.global_path.positions(),
    ))
}

/// `p_acc`: squared distance between the final base position and the goal.
pub fn final_accuracy(log: &TrajectoryLog) -> Result<f64, MetricsError> {
    log.require(1)?;
    Ok((log.samples[log.samples.len() - 1].base.position() - log.goal.position()).norm_squared())
}

/// `T_taken = t_final - t_start`.
pub fn total_time(log: &TrajectoryLog) -> f64 {
    (log.t_final() - log.t_start()).max(0.0)
}

/// One row of the results table. Failed trials carry only `t_taken` and `success`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub success: bool,
    pub p_s: Option<f64>,
    pub p_e: Option<Point3>,
    pub d_travelled: Option<f64>,
    pub a_between: Option<f64>,
    pub p_acc: Option<f64>,
    pub t_taken: f64,
    /// Plain (unsquared) distance to the goal.
    pub final_distance: Option<f64>,
}

impl MetricsReport {
    pub fn failed(t_taken: f64) -> Self {
        Self {
            success: false,
            p_s: None,
            p_e: None,
            d_travelled: None,
            a_between: None,
            p_acc: None,
            t_taken,
            final_distance: None,
        }
    }

    pub fn get(&self, field: MetricField) -> Option<f64> {
        match field {
            MetricField::PathSmoothness => self.p_s,
            MetricField::EeStabilityX => self.p_e.map(|p| p.x),
            MetricField::EeStabilityY => self.p_e.map(|p| p.y),
            MetricField::EeStabilityZ => self.p_e.map(|p| p.z),
            MetricField::DistanceTravelled => self.d_travelled,
            MetricField::AreaBetween => self.a_between,
            MetricField::FinalAccuracy => self.p_acc,
            MetricField::TimeTaken => Some(self.t_taken),
        }
    }
}

/// Result-table columns in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricField {
    PathSmoothness,
    EeStabilityX,
    EeStabilityY,
    EeStabilityZ,
    DistanceTravelled,
    AreaBetween,
    FinalAccuracy,
    TimeTaken,
}

impl MetricField {
    pub const ALL: [MetricField; 8] = [
        MetricField::PathSmoothness,
        MetricField::EeStabilityX,
        MetricField::EeStabilityY,
        MetricField::EeStabilityZ,
        MetricField::DistanceTravelled,
        MetricField::AreaBetween,
        MetricField::FinalAccuracy,
        MetricField::TimeTaken,
    ];

    pub fn column(&self) -> &'static str {
        match self {
            MetricField::PathSmoothness => "p_s",
            MetricField::EeStabilityX => "p_e_x",
            MetricField::EeStabilityY => "p_e_y",
            MetricField::EeStabilityZ => "p_e_z",
            MetricField::DistanceTravelled => "d_travelled",
            MetricField::AreaBetween => "A_between",
            MetricField::FinalAccuracy => "p_acc",
            MetricField::TimeTaken => "T_taken",
        }
    }
}

pub fn report(log: &TrajectoryLog) -> Result<MetricsReport, MetricsError> {
    log.validate()?;
    let t_taken = total_time(log);
    if !log.success {
        return Ok(MetricsReport::failed(t_taken));
    }
    let p_acc = final_accuracy(log)?;
    Ok(MetricsReport {
        success: true,
        p_s: Some(path_smoothness(log)?),
        p_e: Some(ee_stability(log)?),
        d_travelled: Some(distance_travelled(log)?),
        a_between: Some(path_divergence(log)?.a_between),
        p_acc: Some(p_acc),
        t_taken,
        final_distance: Some(p_acc.sqrt()),
    })
}

/// Like [`report`], but a metric whose preconditions the log does not meet is left empty
/// instead of failing the whole report. A successful run that ends almost immediately
/// still counts as a success with its time recorded.
pub fn partial_report(log: &TrajectoryLog) -> Result<MetricsReport, MetricsError> {
    log.validate()?;
    let t_taken = total_time(log);
    if !log.success {
        return Ok(MetricsReport::failed(t_taken));
    }
    let p_acc = final_accuracy(log).ok();
    Ok(MetricsReport {
        success: true,
        p_s: path_smoothness(log).ok(),
        p_e: ee_stability(log).ok(),
        d_travelled: distance_travelled(log).ok(),
        a_between: path_divergence(log).ok().map(|d| d.a_between),
        p_acc,
        t_taken,
        final_distance: p_acc.map(f64::sqrt),
    })
}

/// Arithmetic mean over successful reports, field by field over the reports that define
/// the field; `None` when none succeeded.
pub fn mean_report(reports: &[MetricsReport]) -> Option<MetricsReport> {
    let ok: Vec<&MetricsReport> = reports.iter().filter(|r| r.success).collect();
    if ok.is_empty() {
        return None;
    }
    let mean = |f: &dyn Fn(&MetricsReport) -> Option<f64>| {
        let vals: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let p_e = match (
        mean(&|r| r.p_e.map(|p| p.x)),
        mean(&|r| r.p_e.map(|p| p.y)),
        mean(&|r| r.p_e.map(|p| p.z)),
    ) {
        (Some(x), Some(y), Some(z)) => Some(Point3::new(x, y, z)),
        _ => None,
    };
    Some(MetricsReport {
        success: true,
        p_s: mean(&|r| r.p_s),
        p_e,
        d_travelled: mean(&|r| r.d_travelled),
        a_between: mean(&|r| r.a_between),
        p_acc: mean(&|r| r.p_acc),
        t_taken: mean(&|r| Some(r.t_taken)).expect("at least one success"),
        final_distance: mean(&|r| r.final_distance),
    })
}
