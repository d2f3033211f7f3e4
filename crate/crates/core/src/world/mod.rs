//! Deterministic fixed-step world: base kinematics, obstacles, range sensing and the
//! compliant end-effector mount.

pub mod arm;
pub mod grid;
pub mod obstacle;
pub mod sensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use arm::{expected_ee, expected_ee_velocity, ArmModel, ArmState, Keyframe, MountSchedule};
pub use grid::OccupancyGrid;
pub use obstacle::{Obstacle, Shape};
pub use sensor::{scan, RangeScan, ScanConfig};

use crate::geometry::{advance_pose, Point3, Pose2D, RobotSpec, Twist};

/// Simulation step in seconds.
pub const DT_SIM: f64 = 0.01;
/// Control (planner) period in seconds.
pub const DT_CTRL: f64 = 0.1;
/// Simulation steps per control period.
pub const SIM_STEPS_PER_CTRL: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("collision at t = {time:.2} s, base ({x:.3}, {y:.3})")]
    CollisionDetected { time: f64, x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub time: f64,
    pub base_pose: Pose2D,
    pub base_twist: Twist,
    pub obstacles: Vec<Obstacle>,
    pub ee_actual: Point3,
    pub ee_velocity: Point3,
    pub collision: bool,
}

impl WorldState {
    /// Robot at rest with the load settled at its expected position.
    pub fn at_rest(
        base_pose: Pose2D,
        obstacles: Vec<Obstacle>,
        arm: &ArmModel,
        footprint_radius: f64,
    ) -> Self {
        let mut s = Self {
            time: 0.0,
            base_pose,
            base_twist: Twist::ZERO,
            obstacles,
            ee_actual: Point3::ZERO,
            ee_velocity: Point3::ZERO,
            collision: false,
        };
        s.ee_actual = expected_ee(&base_pose, arm, 0.0);
        s.collision = footprint_collides(&base_pose, &s.obstacles, footprint_radius);
        s
    }

    /// Smallest signed distance between the footprint disc and any obstacle.
    pub fn clearance(&self, footprint_radius: f64) -> f64 {
        clearance(&self.base_pose, &self.obstacles, footprint_radius)
    }
}

pub fn clearance(pose: &Pose2D, obstacles: &[Obstacle], footprint_radius: f64) -> f64 {
    let p = pose.position();
    obstacles
        .iter()
        .map(|o| o.shape.signed_distance(p) - footprint_radius)
        .fold(f64::INFINITY, f64::min)
}

fn footprint_collides(pose: &Pose2D, obstacles: &[Obstacle], footprint_radius: f64) -> bool {
    clearance(pose, obstacles, footprint_radius) <= 0.0
}

/// Limits a command by the velocity bounds and by what the acceleration limits allow
/// starting from `current` within `dt`.
pub fn clamp_command(current: Twist, cmd: Twist, spec: &RobotSpec, dt: f64) -> Twist {
    let cmd = spec.clamp(cmd);
    let dv = spec.a_lin_max * dt;
    let dw = spec.a_ang_max * dt;
    Twist {
        v: cmd.v.clamp(current.v - dv, current.v + dv),
        omega: cmd.omega.clamp(current.omega - dw, current.omega + dw),
    }
}

/// Advances the base by one step along the exact arc of the clamped command and moves
/// obstacles. The collision flag reflects the post-step pose.
pub fn step_base(state: &WorldState, cmd: Twist, spec: &RobotSpec, dt: f64) -> WorldState {
    let twist = clamp_command(state.base_twist, cmd, spec, dt);
    let mut next = state.clone();
    next.base_twist = twist;
    next.base_pose = advance_pose(&state.base_pose, twist, dt);
    for o in &mut next.obstacles {
        o.advance(dt);
    }
    next.time = state.time + dt;
    next.collision = footprint_collides(&next.base_pose, &next.obstacles, spec.footprint_radius);
    next
}

/// Integrates the load one step. The anchor is the expected end-effector position of the
/// pre-step `state`, moving with the twist `applied` over the step.
pub fn step_arm(state: &WorldState, applied: Twist, arm: &ArmModel, dt: f64) -> ArmState {
    let anchor = expected_ee(&state.base_pose, arm, state.time);
    let anchor_vel = expected_ee_velocity(&state.base_pose, applied, arm, state.time);
    arm::integrate_load(
        ArmState {
            position: state.ee_actual,
            velocity: state.ee_velocity,
        },
        anchor,
        anchor_vel,
        arm,
        dt,
    )
}

/// Owns one world instance and steps it at `DT_SIM`.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub state: WorldState,
    pub arm: ArmModel,
    pub spec: RobotSpec,
    step_count: u64,
}

impl Simulator {
    pub fn new(start: Pose2D, obstacles: Vec<Obstacle>, arm: ArmModel, spec: RobotSpec) -> Self {
        let state = WorldState::at_rest(start, obstacles, &arm, spec.footprint_radius);
        Self {
            state,
            arm,
            spec,
            step_count: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn expected_ee(&self) -> Point3 {
        expected_ee(&self.state.base_pose, &self.arm, self.state.time)
    }

    /// One `DT_SIM` step. Time is derived from the step counter so it never accumulates
    /// rounding drift.
    pub fn step(&mut self, cmd: Twist) -> Result<(), SimError> {
        let mut next = step_base(&self.state, cmd, &self.spec, DT_SIM);
        let load = step_arm(&self.state, next.base_twist, &self.arm, DT_SIM);
        self.step_count += 1;
        next.time = self.step_count as f64 * DT_SIM;
        next.ee_actual = load.position;
        next.ee_velocity = load.velocity;
        self.state = next;
        if self.state.collision {
            return Err(SimError::CollisionDetected {
                time: self.state.time,
                x: self.state.base_pose.x,
                y: self.state.base_pose.y,
            });
        }
        Ok(())
    }

    /// Holds `cmd` for one control period.
    pub fn step_control(&mut self, cmd: Twist) -> Result<(), SimError> {
        for _ in 0..SIM_STEPS_PER_CTRL {
            self.step(cmd)?;
        }
        Ok(())
    }

    pub fn scan(&self, cfg: &ScanConfig) -> RangeScan {
        scan(&self.state.base_pose, &self.state.obstacles, cfg)
    }
}
