//! Dynamic-window local planner.

use serde::{Deserialize, Serialize};

use super::{
    point_clearance, points_near, rotate_toward, LocalPlanner, PlannerError, PlanningContext,
    ProgressMonitor, StuckReason,
};
use crate::geometry::{advance_pose, Pose2D, RobotSpec, Twist, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaConfig {
    pub v_samples: usize,
    pub omega_samples: usize,
    /// seconds
    pub horizon: f64,
    /// seconds
    pub rollout_dt: f64,
    pub w_path: f64,
    pub w_goal: f64,
    pub w_clearance: f64,
    pub w_speed: f64,
    /// Clearance above this no longer improves the score.
    pub clearance_cap: f64,
    /// Added to the footprint radius when checking sensed points, covering the gaps
    /// between scan rays and the in-period acceleration ramp.
    pub footprint_padding: f64,
    pub stuck_window: f64,
    pub stuck_progress: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            v_samples: 11,
            omega_samples: 21,
            horizon: 2.0,
            rollout_dt: 0.1,
            w_path: 1.0,
            w_goal: 0.8,
            w_clearance: 0.3,
            w_speed: 0.2,
            clearance_cap: 1.0,
            footprint_padding: 0.03,
            stuck_window: 3.0,
            stuck_progress: 0.05,
        }
    }
}

impl DwaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.v_samples < 2 || self.omega_samples < 2 {
            return Err("dwa sample counts must be at least 2".into());
        }
        if !(self.rollout_dt > 0.0 && self.horizon > self.rollout_dt) {
            return Err("dwa horizon must exceed rollout_dt > 0".into());
        }
        let w = [self.w_path, self.w_goal, self.w_clearance, self.w_speed];
        if w.iter().any(|x| !(*x >= 0.0)) || w.iter().all(|x| *x == 0.0) {
            return Err("dwa weights must be non-negative with at least one positive".into());
        }
        if !(self.footprint_padding >= 0.0) {
            return Err("dwa footprint padding must be non-negative".into());
        }
        if !(self.clearance_cap > 0.0)
            || !(self.stuck_window > 0.0)
            || !(self.stuck_progress >= 0.0)
        {
            return Err(
                "dwa clearance cap, stuck window and stuck progress must be positive".into(),
            );
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.rollout_dt).round() as usize
    }

    /// The robot as the planner sees it: footprint grown by the padding.
    pub fn padded(&self, spec: &RobotSpec) -> RobotSpec {
        RobotSpec {
            footprint_radius: spec.footprint_radius + self.footprint_padding,
            ..*spec
        }
    }

    /// Padded footprint for a robot whose current clearance is `clearance`. The padding
    /// shrinks once the robot is already inside it, so commands that back away stay admissible.
    pub fn padded_at(&self, spec: &RobotSpec, clearance: f64) -> RobotSpec {
        let pad = self.footprint_padding.min(0.5 * clearance).max(0.0);
        RobotSpec {
            footprint_radius: spec.footprint_radius + pad,
            ..*spec
        }
    }
}

/// Velocities reachable within one control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicWindow {
    pub v: (f64, f64),
    pub omega: (f64, f64),
}

impl DynamicWindow {
    pub fn contains(&self, t: Twist, tol: f64) -> bool {
        t.v >= self.v.0 - tol
            && t.v <= self.v.1 + tol
            && t.omega >= self.omega.0 - tol
            && t.omega <= self.omega.1 + tol
    }

    pub fn clamp(&self, t: Twist) -> Twist {
        Twist::new(
            t.v.clamp(self.v.0, self.v.1),
            t.omega.clamp(self.omega.0, self.omega.1),
        )
    }

    /// Grid samples ordered by ascending v, then ascending ω.
    pub fn samples(&self, nv: usize, nw: usize) -> Vec<Twist> {
        let lin =
            |(lo, hi): (f64, f64), n: usize, k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let mut out = Vec::with_capacity(nv * nw);
        for i in 0..nv {
            for j in 0..nw {
                out.push(Twist::new(lin(self.v, nv, i), lin(self.omega, nw, j)));
            }
        }
        out
    }
}

pub fn dynamic_window(current: Twist, spec: &RobotSpec, dt_ctrl: f64) -> DynamicWindow {
    let dv = spec.a_lin_max * dt_ctrl;
    let dw = spec.a_ang_max * dt_ctrl;
    DynamicWindow {
        v: (
            spec.v_min.max(current.v - dv),
            spec.v_max.min(current.v + dv),
        ),
        omega: (
            (-spec.omega_max).max(current.omega - dw),
            spec.omega_max.min(current.omega + dw),
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub candidate: Twist,
    /// Poses after each rollout step; the start pose is not included.
    pub poses: Vec<Pose2D>,
    pub admissible: bool,
    pub score: Option<f64>,
}

pub fn rollout_poses(start: &Pose2D, candidate: Twist, cfg: &DwaConfig) -> Vec<Pose2D> {
    (1..=cfg.steps())
        .map(|k| advance_pose(start, candidate, k as f64 * cfg.rollout_dt))
        .collect()
}

/// Steps taken along the arc never shrink below this when tracing toward an obstacle.
const MIN_TRACE_STEP: f64 = 2e-3;
const CONTACT: f64 = 1e-9;

/// Arc length the footprint can travel along the constant-twist arc from `start` before
/// touching an obstacle, searched up to `limit`. Returns `None` if the arc stays clear.
pub fn free_distance(
    start: &Pose2D,
    candidate: Twist,
    obstacles: &[Vec2],
    footprint_radius: f64,
    limit: f64,
) -> Option<f64> {
    let speed = candidate.v.abs();
    let mut s = 0.0;
    loop {
        let p = if speed > 0.0 {
            advance_pose(start, candidate, s / speed).position()
        } else {
            start.position()
        };
        let c = point_clearance(p, obstacles, footprint_radius);
        if c <= CONTACT {
            return Some(s);
        }
        if speed == 0.0 || s >= limit {
            return None;
        }
        // Clearance is 1-Lipschitz in arc length, so stepping by it cannot skip a contact.
        s = (s + c.max(MIN_TRACE_STEP)).min(limit);
    }
}

/// A candidate is admissible when its arc over the horizon is collision-free and the robot
/// can brake to a stop before the nearest obstacle along the arc.
pub fn admissible(
    start: &Pose2D,
    candidate: Twist,
    horizon: f64,
    obstacles: &[Vec2],
    spec: &RobotSpec,
) -> bool {
    let travel = candidate.v.abs() * horizon;
    let stopping = candidate.v * candidate.v / (2.0 * spec.a_lin_max);
    match free_distance(
        start,
        candidate,
        obstacles,
        spec.footprint_radius,
        travel.max(stopping),
    ) {
        None => true,
        Some(free) => free > travel && free > stopping,
    }
}

/// Weighted critic sum for an admissible rollout.
pub fn score(
    poses: &[Pose2D],
    candidate: Twist,
    ctx: &PlanningContext<'_>,
    cfg: &DwaConfig,
    spec: &RobotSpec,
) -> f64 {
    let end = poses
        .last()
        .map(|p| p.position())
        .unwrap_or_else(|| ctx.pose.position());
    let path_dist = if ctx.path.is_empty() {
        0.0
    } else {
        ctx.path.distance_to(end)
    };
    let goal_dist = (end - ctx.goal.position()).norm();
    let clearance = poses
        .iter()
        .map(|p| point_clearance(p.position(), ctx.obstacles, spec.footprint_radius))
        .fold(f64::INFINITY, f64::min)
        .min(cfg.clearance_cap);
    -cfg.w_path * path_dist - cfg.w_goal * goal_dist
        + cfg.w_clearance * clearance
        + cfg.w_speed * candidate.v.abs()
}

/// Rolls out and scores every sample of the window, in sample order. Admissibility and
/// clearance use the padded footprint.
pub fn evaluate(ctx: &PlanningContext<'_>, cfg: &DwaConfig, spec: &RobotSpec) -> Vec<Rollout> {
    let window = dynamic_window(ctx.twist, spec, ctx.dt);
    let reach = spec.v_max.max(-spec.v_min) * cfg.horizon
        + spec.v_max * spec.v_max / (2.0 * spec.a_lin_max);
    let nearby = points_near(
        ctx.obstacles,
        ctx.pose.position(),
        reach + spec.footprint_radius + cfg.footprint_padding + cfg.clearance_cap + 0.1,
    );
    let here = point_clearance(ctx.pose.position(), &nearby, spec.footprint_radius);
    let spec = &cfg.padded_at(spec, here);
    let local = PlanningContext {
        obstacles: &nearby,
        ..*ctx
    };
    window
        .samples(cfg.v_samples, cfg.omega_samples)
        .into_iter()
        .map(|candidate| {
            let poses = rollout_poses(&ctx.pose, candidate, cfg);
            let ok = admissible(&ctx.pose, candidate, cfg.horizon, &nearby, spec);
            let score = ok.then(|| score(&poses, candidate, &local, cfg, spec));
            Rollout {
                candidate,
                poses,
                admissible: ok,
                score,
            }
        })
        .collect()
}

/// Best admissible command for this cycle; a pure function of its inputs.
pub fn choose(
    ctx: &PlanningContext<'_>,
    cfg: &DwaConfig,
    spec: &RobotSpec,
) -> Result<Twist, PlannerError> {
    let window = dynamic_window(ctx.twist, spec, ctx.dt);
    let padded = cfg.padded_at(
        spec,
        point_clearance(ctx.pose.position(), ctx.obstacles, spec.footprint_radius),
    );
    if ctx.tolerance.reached(&ctx.pose, &ctx.goal) {
        return Ok(window.clamp(Twist::ZERO));
    }
    if ctx.tolerance.position_reached(&ctx.pose, &ctx.goal) {
        let cmd = window.clamp(rotate_toward(
            ctx.goal.theta,
            &ctx.pose,
            ctx.twist,
            spec,
            ctx.dt,
        ));
        if admissible(&ctx.pose, cmd, cfg.horizon, ctx.obstacles, &padded) {
            return Ok(cmd);
        }
    }
    let mut best: Option<(f64, Twist)> = None;
    for r in evaluate(ctx, cfg, spec) {
        if let Some(s) = r.score {
            // Samples arrive in (v, ω) order, so a strict comparison keeps the lowest on ties.
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, r.candidate));
            }
        }
    }
    best.map(|(_, t)| t)
        .ok_or(PlannerError::Stuck(StuckReason::NoAdmissibleCommand))
}

#[derive(Debug, Clone)]
pub struct DwaPlanner {
    pub cfg: DwaConfig,
    pub spec: RobotSpec,
    monitor: ProgressMonitor,
}

impl DwaPlanner {
    pub fn new(cfg: DwaConfig, spec: RobotSpec) -> Self {
        let monitor = ProgressMonitor::new(cfg.stuck_window, cfg.stuck_progress);
        Self { cfg, spec, monitor }
    }
}

impl LocalPlanner for DwaPlanner {
    fn name(&self) -> &'static str {
        "dwa"
    }

    fn compute(&mut self, ctx: &PlanningContext<'_>) -> Result<Twist, PlannerError> {
        if ctx.tolerance.position_reached(&ctx.pose, &ctx.goal) {
            self.monitor.reset();
        } else if self
            .monitor
            .update(ctx.time, &ctx.pose, ctx.path, &ctx.goal)
        {
            self.monitor.reset();
            return Err(PlannerError::Stuck(StuckReason::NoProgress));
        }
        choose(ctx, &self.cfg, &self.spec)
    }

    fn reset(&mut self) {
        self.monitor.reset();
    }
}
