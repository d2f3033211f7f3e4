//! Planar poses, velocity commands and the robot's kinematic limits.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// Segments shorter than this are treated as degenerate (robot idling between samples).
pub const EPS_LEN: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum GeometryError {
    #[error("segment shorter than {EPS_LEN} m has no direction")]
    DegenerateSegment,
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Base configuration in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Default for Pose2D {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn heading(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    /// Rigid-body composition `self ∘ other`: `other` expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            -c * self.x - s * self.y,
            s * self.x - c * self.y,
            -self.theta,
        )
    }

    /// Maps a point given in this pose's frame into the world frame.
    pub fn transform_point(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.theta.sin_cos();
        Vec2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.position() - other.position()).norm()
    }
}

/// Advances a pose along the exact constant-twist arc for `dt` seconds.
///
/// Falls back to the straight-line solution when `|omega| < 1e-9`.
pub fn advance_pose(pose: &Pose2D, twist: Twist, dt: f64) -> Pose2D {
    let th = pose.theta;
    if twist.omega.abs() < 1e-9 {
        let (s, c) = th.sin_cos();
        return Pose2D::new(pose.x + twist.v * dt * c, pose.y + twist.v * dt * s, th);
    }
    let th1 = th + twist.omega * dt;
    let r = twist.v / twist.omega;
    Pose2D::new(
        pose.x + r * (th1.sin() - th.sin()),
        pose.y - r * (th1.cos() - th.cos()),
        th1,
    )
}

/// Composition as a free function, mirroring `Pose2D::compose`.
pub fn compose(a: &Pose2D, b: &Pose2D) -> Pose2D {
    a.compose(b)
}

/// Unsigned angle between two direction vectors, in [0, pi].
///
/// Both vectors are normalized before the dot product so the result is scale-invariant,
/// and the cosine is clamped so rounding cannot produce NaN.
pub fn angle_between(u: Vec2, v: Vec2) -> Result<f64, GeometryError> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu <= EPS_LEN || nv <= EPS_LEN {
        return Err(GeometryError::DegenerateSegment);
    }
    let cos = (u / nu).dot(&(v / nv)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}

/// Commanded base velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub v: f64,
    pub omega: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn abs(&self) -> Point3 {
        Point3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn scale(&self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl std::ops::Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid robot spec: {0}")]
pub struct InvalidRobotSpec(pub String);

/// Kinematic and dynamic limits of the mobile base plus the nominal arm mount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotSpec {
    pub v_max: f64,
    pub v_min: f64,
    pub omega_max: f64,
    pub a_lin_max: f64,
    pub a_ang_max: f64,
    pub footprint_radius: f64,
    /// Base frame to nominal end-effector position.
    pub mount_offset: Point3,
}

impl Default for RobotSpec {
    fn default() -> Self {
        Self {
            v_max: 0.8,
            v_min: 0.0,
            omega_max: 1.0,
            a_lin_max: 0.5,
            a_ang_max: 1.5,
            footprint_radius: 0.45,
            mount_offset: Point3::new(0.25, 0.0, 1.1),
        }
    }
}

impl RobotSpec {
    pub fn validate(&self) -> Result<(), InvalidRobotSpec> {
        let fail = |m: &str| Err(InvalidRobotSpec(m.to_string()));
        if !(self.v_max > 0.0) {
            return fail("v_max must be positive");
        }
        if self.v_min > self.v_max {
            return fail("v_min exceeds v_max");
        }
        if !(self.omega_max > 0.0) {
            return fail("omega_max must be positive");
        }
        if !(self.a_lin_max > 0.0) || !(self.a_ang_max > 0.0) {
            return fail("acceleration limits must be positive");
        }
        if !(self.footprint_radius > 0.0) {
            return fail("footprint_radius must be positive");
        }
        if !self.mount_offset.is_finite() {
            return fail("mount_offset must be finite");
        }
        Ok(())
    }

    /// Clamps a twist into the velocity limits.
    pub fn clamp(&self, t: Twist) -> Twist {
        Twist {
            v: t.v.clamp(self.v_min, self.v_max),
            omega: t.omega.clamp(-self.omega_max, self.omega_max),
        }
    }
}

/// Position and heading tolerance for declaring the goal reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalTolerance {
    pub xy: f64,
    pub yaw: f64,
}

impl Default for GoalTolerance {
    fn default() -> Self {
        Self { xy: 0.15, yaw: 0.2 }
    }
}

impl GoalTolerance {
    pub fn position_reached(&self, pose: &Pose2D, goal: &Pose2D) -> bool {
        pose.distance_to(goal) <= self.xy
    }

    pub fn reached(&self, pose: &Pose2D, goal: &Pose2D) -> bool {
        self.position_reached(pose, goal)
            && normalize_angle(goal.theta - pose.theta).abs() <= self.yaw
    }
}
