//! Benchmark worlds.
//!
//! The built-in worlds are original analogs of a playground, an office and a warehouse.
//! Each has a `_dynamic` twin that adds obstacles the planner's map does not contain.

use std::f64::consts::FRAC_PI_2;

use manip_bench_core::geometry::{GoalTolerance, Point3, Pose2D, RobotSpec, Vec2};
use manip_bench_core::world::{
    clearance, ArmModel, Keyframe, MountSchedule, Obstacle, OccupancyGrid, Shape,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cell size of the planner's occupancy grid, meters.
pub const MAP_RESOLUTION: f64 = 0.05;
const WALL: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("scenario `{id}` is invalid: {reason}")]
    Invalid { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extents {
    pub min: Vec2,
    pub max: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub world: Extents,
    pub obstacles: Vec<Obstacle>,
    pub start: Pose2D,
    pub goal: Pose2D,
    #[serde(default)]
    pub tolerance: GoalTolerance,
    /// Mount schedule; `None` keeps the robot's nominal mount offset fixed.
    #[serde(default)]
    pub arm: Option<MountSchedule>,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Standard deviation of the seeded start-pose perturbation: meters, radians.
    #[serde(default = "default_jitter")]
    pub start_jitter: (f64, f64),
}

fn default_timeout() -> f64 {
    180.0
}

fn default_jitter() -> (f64, f64) {
    (0.05, 0.05)
}

impl Scenario {
    fn new(id: &str, min: (f64, f64), max: (f64, f64), start: Pose2D, goal: Pose2D) -> Self {
        let (min, max) = (Vec2::new(min.0, min.1), Vec2::new(max.0, max.1));
        let obstacles = vec![
            Obstacle::mapped(Shape::rect(min.x, min.y, max.x, min.y + WALL)),
            Obstacle::mapped(Shape::rect(min.x, max.y - WALL, max.x, max.y)),
            Obstacle::mapped(Shape::rect(min.x, min.y, min.x + WALL, max.y)),
            Obstacle::mapped(Shape::rect(max.x - WALL, min.y, max.x, max.y)),
        ];
        Self {
            id: id.to_string(),
            world: Extents { min, max },
            obstacles,
            start,
            goal,
            tolerance: GoalTolerance::default(),
            arm: None,
            timeout: default_timeout(),
            start_jitter: default_jitter(),
        }
    }

    fn with(mut self, shapes: impl IntoIterator<Item = Shape>) -> Self {
        self.obstacles
            .extend(shapes.into_iter().map(Obstacle::mapped));
        self
    }

    fn unmapped(mut self, id: &str, shapes: impl IntoIterator<Item = Shape>) -> Self {
        self.id = id.to_string();
        self.obstacles
            .extend(shapes.into_iter().map(Obstacle::unmapped));
        self
    }

    /// Occupancy grid of the mapped obstacles only: what the global planner knows.
    pub fn map_for_planner(&self) -> OccupancyGrid {
        OccupancyGrid::rasterize(
            self.world.min,
            self.world.max,
            MAP_RESOLUTION,
            self.obstacles.iter().filter(|o| o.mapped),
        )
    }

    pub fn arm_model(&self, spec: &RobotSpec) -> ArmModel {
        let mut arm = ArmModel::with_offset(spec.mount_offset);
        if let Some(schedule) = &self.arm {
            arm.schedule = schedule.clone();
        }
        arm
    }

    pub fn validate(&self, spec: &RobotSpec) -> Result<(), ScenarioError> {
        let fail = |reason: String| {
            Err(ScenarioError::Invalid {
                id: self.id.clone(),
                reason,
            })
        };
        if !(self.timeout > 0.0) {
            return fail("timeout must be positive".into());
        }
        if !(self.world.max.x > self.world.min.x && self.world.max.y > self.world.min.y) {
            return fail("world extents are empty".into());
        }
        if let Some(o) = self.obstacles.iter().find(|o| !o.shape.is_valid()) {
            return fail(format!("degenerate obstacle {:?}", o.shape));
        }
        for (name, p) in [("start", &self.start), ("goal", &self.goal)] {
            if clearance(p, &self.obstacles, spec.footprint_radius) <= 0.0 {
                return fail(format!("{name} pose collides with an obstacle"));
            }
        }
        if !(self.start_jitter.0 >= 0.0 && self.start_jitter.1 >= 0.0) {
            return fail("start jitter must be non-negative".into());
        }
        if let Some(schedule) = &self.arm {
            let mut arm = ArmModel::with_offset(spec.mount_offset);
            arm.schedule = schedule.clone();
            arm.validate().map_err(|reason| ScenarioError::Invalid {
                id: self.id.clone(),
                reason,
            })?;
        }
        Ok(())
    }
}

/// Open area with a few scattered boxes.
pub fn playground() -> Scenario {
    Scenario::new(
        "playground",
        (-2.0, -4.0),
        (14.0, 6.0),
        Pose2D::new(0.0, 0.0, 0.0),
        Pose2D::new(12.0, 2.0, 0.0),
    )
    .with([
        Shape::circle(2.5, -2.2, 0.6),
        Shape::circle(4.0, 1.2, 0.5),
        Shape::rect(6.5, 2.4, 7.5, 3.8),
        Shape::rect(6.8, -2.6, 8.2, -0.9),
        Shape::circle(10.0, 0.0, 0.4),
        Shape::rect(10.5, 3.6, 11.5, 4.6),
    ])
}

pub fn playground_dynamic() -> Scenario {
    playground().unmapped("playground_dynamic", [Shape::circle(6.6, 1.0, 0.45)])
}

/// Three rooms joined by doorways, with furniture.
pub fn office() -> Scenario {
    Scenario::new(
        "office",
        (0.0, 0.0),
        (16.0, 10.0),
        Pose2D::new(1.5, 2.0, 0.0),
        Pose2D::new(14.5, 8.0, FRAC_PI_2),
    )
    .with([
        // Wall with a doorway at y in [3.0, 4.6].
        Shape::rect(5.9, 0.0, 6.1, 3.0),
        Shape::rect(5.9, 4.6, 6.1, 10.0),
        // Wall with a doorway at y in [6.2, 7.8].
        Shape::rect(10.9, 0.0, 11.1, 6.2),
        Shape::rect(10.9, 7.8, 11.1, 10.0),
        Shape::rect(2.5, 4.8, 4.0, 6.0),
        Shape::rect(0.2, 8.6, 2.5, 9.8),
        Shape::rect(8.0, 5.6, 9.4, 6.6),
        Shape::circle(8.5, 8.5, 0.5),
        Shape::rect(13.0, 4.0, 14.2, 5.2),
    ])
}

pub fn office_dynamic() -> Scenario {
    office().unmapped("office_dynamic", [Shape::circle(7.3, 4.6, 0.4)])
}

/// Office traversal while the arm is folded in and back out.
pub fn office_moving_arm() -> Scenario {
    let nominal = RobotSpec::default().mount_offset;
    let folded = Point3::new(0.05, 0.25, 0.8);
    let mut s = office();
    s.id = "office_moving_arm".into();
    s.arm = Some(MountSchedule::Keyframes(vec![
        Keyframe {
            t: 3.0,
            offset: nominal,
        },
        Keyframe {
            t: 8.0,
            offset: folded,
        },
        Keyframe {
            t: 14.0,
            offset: folded,
        },
        Keyframe {
            t: 19.0,
            offset: nominal,
        },
    ]));
    s
}

/// Shelf aisles joined by one tight corridor.
pub fn warehouse() -> Scenario {
    Scenario::new(
        "warehouse",
        (0.0, 0.0),
        (14.0, 10.0),
        Pose2D::new(1.5, 1.5, 0.0),
        Pose2D::new(12.5, 8.5, 0.0),
    )
    .with([
        Shape::rect(3.0, 0.2, 3.8, 6.0),
        Shape::rect(5.5, 2.0, 6.3, 9.8),
        Shape::rect(8.0, 0.2, 8.8, 4.0),
        Shape::rect(8.0, 5.3, 8.8, 9.8),
        Shape::rect(10.6, 2.0, 11.4, 7.0),
    ])
}

pub fn warehouse_dynamic() -> Scenario {
    warehouse().unmapped("warehouse_dynamic", [Shape::rect(4.2, 6.9, 5.0, 7.9)])
}

/// A corridor whose only passage is closed by an object missing from the map.
pub fn blocked_corridor() -> Scenario {
    Scenario::new(
        "blocked_corridor",
        (0.0, 0.0),
        (12.0, 3.0),
        Pose2D::new(1.0, 1.5, 0.0),
        Pose2D::new(10.5, 1.5, 0.0),
    )
    .unmapped("blocked_corridor", [Shape::rect(5.5, 0.2, 6.3, 2.8)])
}

type Builder = fn() -> Scenario;

const BUILTINS: [(&str, Builder); 8] = [
    ("playground", playground),
    ("playground_dynamic", playground_dynamic),
    ("office", office),
    ("office_dynamic", office_dynamic),
    ("office_moving_arm", office_moving_arm),
    ("warehouse", warehouse),
    ("warehouse_dynamic", warehouse_dynamic),
    ("blocked_corridor", blocked_corridor),
];

pub fn builtin_ids() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(id, _)| *id)
}

pub fn builtin(id: &str) -> Result<Scenario, ScenarioError> {
    BUILTINS
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, build)| build())
        .ok_or_else(|| ScenarioError::Unknown(id.to_string()))
}
