//! Local planners and the vocabulary they share with the trial runner.

pub mod dwa;
pub mod teb;

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::{normalize_angle, GoalTolerance, Pose2D, RobotSpec, Twist, Vec2};
use crate::global_planner::GlobalPath;

pub use dwa::{DwaConfig, DwaPlanner};
pub use teb::{TebConfig, TebPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StuckReason {
    /// Every sampled command was inadmissible.
    NoAdmissibleCommand,
    /// Too little progress toward the goal over the trailing window.
    NoProgress,
    /// The band optimizer could not make a step.
    OptimizerStalled,
    /// The optimized band collides with sensed obstacles.
    InfeasibleBand,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PlannerError {
    #[error("local planner stuck: {0:?}")]
    Stuck(StuckReason),
}

/// Everything a local planner sees in one control cycle.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub time: f64,
    pub pose: Pose2D,
    pub twist: Twist,
    /// Sensed obstacle points in the world frame.
    pub obstacles: &'a [Vec2],
    pub path: &'a GlobalPath,
    pub goal: Pose2D,
    pub tolerance: GoalTolerance,
    /// Control period in seconds.
    pub dt: f64,
}

pub trait LocalPlanner: Send {
    fn name(&self) -> &'static str;

    /// Next velocity command, or `Stuck` when the planner cannot make progress.
    fn compute(&mut self, ctx: &PlanningContext<'_>) -> Result<Twist, PlannerError>;

    /// Drops internal state after the global path changed.
    fn reset(&mut self);
}

/// Smallest signed distance from a footprint disc at `p` to any obstacle point.
pub fn point_clearance(p: Vec2, obstacles: &[Vec2], footprint_radius: f64) -> f64 {
    obstacles
        .iter()
        .map(|o| (o - p).norm())
        .fold(f64::INFINITY, f64::min)
        - footprint_radius
}

/// Obstacle points within `radius` of `center`.
pub fn points_near(obstacles: &[Vec2], center: Vec2, radius: f64) -> Vec<Vec2> {
    let r2 = radius * radius;
    obstacles
        .iter()
        .filter(|o| (*o - center).norm_squared() <= r2)
        .copied()
        .collect()
}

/// Rotate-in-place command toward the goal heading that can still stop in time,
/// bounded by what the acceleration limits allow from `current`.
pub fn rotate_toward(
    goal_heading: f64,
    pose: &Pose2D,
    current: Twist,
    spec: &RobotSpec,
    dt: f64,
) -> Twist {
    let err = normalize_angle(goal_heading - pose.theta);
    let w = err.signum()
        * (2.0 * spec.a_ang_max * err.abs())
            .sqrt()
            .min(spec.omega_max)
            .min(err.abs() / dt);
    let dv = spec.a_lin_max * dt;
    let dw = spec.a_ang_max * dt;
    Twist::new(
        0.0f64
            .clamp(current.v - dv, current.v + dv)
            .clamp(spec.v_min, spec.v_max),
        w.clamp(current.omega - dw, current.omega + dw),
    )
}

/// Tracks goal progress and flags a stall when neither the remaining path length nor the
/// straight-line distance to the goal shrank by `min_progress` over `window` seconds.
#[derive(Debug, Clone)]
pub struct ProgressMonitor {
    pub window: f64,
    pub min_progress: f64,
    history: VecDeque<(f64, f64, f64)>,
}

impl ProgressMonitor {
    pub fn new(window: f64, min_progress: f64) -> Self {
        Self {
            window,
            min_progress,
            history: VecDeque::new(),
        }
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Records a sample and reports whether the robot is stalled.
    pub fn update(&mut self, t: f64, pose: &Pose2D, path: &GlobalPath, goal: &Pose2D) -> bool {
        let remaining = if path.is_empty() {
            0.0
        } else {
            path.length() - path.project(pose.position()).0
        };
        let direct = pose.distance_to(goal);
        self.history.push_back((t, remaining, direct));
        // Keep exactly one sample at or before the window start.
        while self.history.len() > 1 && self.history[1].0 <= t - self.window {
            self.history.pop_front();
        }
        let &(t0, rem0, dir0) = self.history.front().expect("just pushed");
        if t - t0 < self.window - 1e-9 {
            return false;
        }
        rem0 - remaining < self.min_progress && dir0 - direct < self.min_progress
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monitor_flags_stall_after_window() {
        let path = GlobalPath::from_points(&[Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)], 0.0);
        let goal = Pose2D::new(10.0, 0.0, 0.0);
        let mut m = ProgressMonitor::new(3.0, 0.05);
        let mut t = 0.0;
        let mut stalled = false;
        while t < 2.95 {
            stalled |= m.update(t, &Pose2D::new(1.0, 0.0, 0.0), &path, &goal);
            t += 0.1;
        }
        assert!(!stalled, "window not yet covered");
        for _ in 0..3 {
            t += 0.1;
            stalled |= m.update(t, &Pose2D::new(1.0, 0.0, 0.0), &path, &goal);
        }
        assert!(stalled);
    }

    #[test]
    fn monitor_accepts_steady_progress() {
        let path = GlobalPath::from_points(&[Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)], 0.0);
        let goal = Pose2D::new(10.0, 0.0, 0.0);
        let mut m = ProgressMonitor::new(3.0, 0.05);
        for k in 0..100 {
            let t = k as f64 * 0.1;
            assert!(!m.update(t, &Pose2D::new(0.05 * t, 0.0, 0.0), &path, &goal));
        }
    }

    #[test]
    fn rotate_toward_respects_limits() {
        let spec = RobotSpec::default();
        let t = rotate_toward(2.0, &Pose2D::identity(), Twist::ZERO, &spec, 0.1);
        assert_eq!(t.v, 0.0);
        assert!((t.omega - 0.15).abs() < 1e-12);
        let t = rotate_toward(0.01, &Pose2D::identity(), Twist::new(0.0, 0.1), &spec, 0.1);
        assert!(t.omega <= 0.1 + 1e-12 && t.omega >= 0.0);
    }
}
