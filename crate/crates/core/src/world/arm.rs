//! Planar compliant-mount model of the arm and its load.
//!
//! The end-effector is a point mass tied to its kinematically expected position by a
//! spring-damper. Base accelerations make the mass lag behind the anchor; that lag is
//! the quantity the end-effector stability metric integrates.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Pose2D, Twist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: f64,
    pub offset: Point3,
}

/// Base-frame position of the nominal end-effector over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MountSchedule {
    Fixed(Point3),
    /// Piecewise-linear between keyframes sorted by time; held constant outside them.
    Keyframes(Vec<Keyframe>),
}

impl MountSchedule {
    pub fn offset_at(&self, t: f64) -> Point3 {
        match self {
            MountSchedule::Fixed(p) => *p,
            MountSchedule::Keyframes(ks) => {
                let Some(first) = ks.first() else {
                    return Point3::ZERO;
                };
                if t <= first.t {
                    return first.offset;
                }
                for w in ks.windows(2) {
                    if t < w[1].t {
                        let s = (t - w[0].t) / (w[1].t - w[0].t);
                        return w[0].offset + (w[1].offset - w[0].offset).scale(s);
                    }
                }
                ks[ks.len() - 1].offset
            }
        }
    }

    /// Time derivative of the offset (right-continuous at keyframes).
    pub fn rate_at(&self, t: f64) -> Point3 {
        match self {
            MountSchedule::Fixed(_) => Point3::ZERO,
            MountSchedule::Keyframes(ks) => {
                for w in ks.windows(2) {
                    if t >= w[0].t && t < w[1].t {
                        return (w[1].offset - w[0].offset).scale(1.0 / (w[1].t - w[0].t));
                    }
                }
                Point3::ZERO
            }
        }
    }

    fn is_valid(&self) -> bool {
        match self {
            MountSchedule::Fixed(p) => p.is_finite(),
            MountSchedule::Keyframes(ks) => {
                !ks.is_empty()
                    && ks.iter().all(|k| k.t.is_finite() && k.offset.is_finite())
                    && ks.windows(2).all(|w| w[1].t > w[0].t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub schedule: MountSchedule,
    /// N/m
    pub stiffness: f64,
    /// N·s/m
    pub damping: f64,
    /// kg
    pub load_mass: f64,
}

impl ArmModel {
    pub fn with_offset(offset: Point3) -> Self {
        Self {
            schedule: MountSchedule::Fixed(offset),
            stiffness: 400.0,
            damping: 18.0,
            load_mass: 5.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.stiffness > 0.0 && self.damping > 0.0 && self.load_mass > 0.0) {
            return Err("arm stiffness, damping and load mass must be positive".into());
        }
        if !self.schedule.is_valid() {
            return Err(
                "arm schedule must be finite with strictly increasing keyframe times".into(),
            );
        }
        Ok(())
    }

    pub fn natural_frequency(&self) -> f64 {
        (self.stiffness / self.load_mass).sqrt()
    }

    pub fn damping_ratio(&self) -> f64 {
        self.damping / (2.0 * (self.stiffness * self.load_mass).sqrt())
    }

    /// Critically damped or overdamped mounts do not sway; allowed but worth flagging.
    pub fn is_overdamped(&self) -> bool {
        self.damping_ratio() >= 1.0
    }
}

/// Kinematic end-effector position: the scheduled mount offset carried by the base pose.
pub fn expected_ee(base_pose: &Pose2D, arm: &ArmModel, t: f64) -> Point3 {
    let off = arm.schedule.offset_at(t);
    let (s, c) = base_pose.theta.sin_cos();
    Point3::new(
        base_pose.x + c * off.x - s * off.y,
        base_pose.y + s * off.x + c * off.y,
        off.z,
    )
}

/// World-frame velocity of the kinematic end-effector position.
pub fn expected_ee_velocity(base_pose: &Pose2D, twist: Twist, arm: &ArmModel, t: f64) -> Point3 {
    let off = arm.schedule.offset_at(t);
    let rate = arm.schedule.rate_at(t);
    let (s, c) = base_pose.theta.sin_cos();
    // d/dt [p + R(θ) o] = v·h + ω·R'(θ) o + R(θ) ȯ
    Point3::new(
        twist.v * c + twist.omega * (-s * off.x - c * off.y) + (c * rate.x - s * rate.y),
        twist.v * s + twist.omega * (c * off.x - s * off.y) + (s * rate.x + c * rate.y),
        rate.z,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArmState {
    pub position: Point3,
    pub velocity: Point3,
}

/// One semi-implicit Euler step of the load toward the anchor `(anchor, anchor_velocity)`.
///
/// The spring force uses the current position; the damper is evaluated at the updated
/// velocity, and the position advances with that updated velocity.
pub fn integrate_load(
    load: ArmState,
    anchor: Point3,
    anchor_velocity: Point3,
    arm: &ArmModel,
    dt: f64,
) -> ArmState {
    let h = dt / arm.load_mass;
    let drive = (anchor - load.position).scale(arm.stiffness) + anchor_velocity.scale(arm.damping);
    let velocity = (load.velocity + drive.scale(h)).scale(1.0 / (1.0 + arm.damping * h));
    ArmState {
        position: load.position + velocity.scale(dt),
        velocity,
    }
}

/// Spring plus kinetic energy of the load relative to a stationary anchor.
pub fn load_energy(load: &ArmState, anchor: Point3, arm: &ArmModel) -> f64 {
    let e = load.position - anchor;
    let v = load.velocity;
    0.5 * arm.stiffness * (e.x * e.x + e.y * e.y + e.z * e.z)
        + 0.5 * arm.load_mass * (v.x * v.x + v.y * v.y + v.z * v.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn arm() -> ArmModel {
        ArmModel::with_offset(Point3::new(0.2, 0.0, 1.1))
    }

    #[test]
    fn expected_pose_examples() {
        let a = arm();
        assert_eq!(
            expected_ee(&Pose2D::identity(), &a, 0.0),
            Point3::new(0.2, 0.0, 1.1)
        );
        let p = expected_ee(&Pose2D::new(1.0, 1.0, PI / 2.0), &a, 0.0);
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 1.2).abs() < 1e-12 && p.z == 1.1);
    }

    #[test]
    fn scripted_schedule_matches_direct_evaluation() {
        let mut a = arm();
        a.schedule = MountSchedule::Keyframes(vec![
            Keyframe {
                t: 1.0,
                offset: Point3::new(0.2, 0.0, 1.1),
            },
            Keyframe {
                t: 3.0,
                offset: Point3::new(0.0, 0.4, 0.7),
            },
        ]);
        // Halfway between the keyframes: (0.1, 0.2, 0.9) in the base frame.
        let base = Pose2D::new(2.0, -1.0, 0.3);
        let p = expected_ee(&base, &a, 2.0);
        let q = base.transform_point(crate::geometry::Vec2::new(0.1, 0.2));
        assert!((p.x - q.x).abs() < 1e-12 && (p.y - q.y).abs() < 1e-12);
        assert!((p.z - 0.9).abs() < 1e-12);
        assert_eq!(a.schedule.offset_at(0.0), Point3::new(0.2, 0.0, 1.1));
        assert_eq!(a.schedule.offset_at(10.0), Point3::new(0.0, 0.4, 0.7));
    }

    #[test]
    fn expected_velocity_matches_finite_difference() {
        let mut a = arm();
        a.schedule = MountSchedule::Keyframes(vec![
            Keyframe {
                t: 0.0,
                offset: Point3::new(0.2, 0.0, 1.1),
            },
            Keyframe {
                t: 4.0,
                offset: Point3::new(0.5, -0.3, 0.9),
            },
        ]);
        let base = Pose2D::new(0.5, 0.2, 0.8);
        let tw = Twist::new(0.6, 0.4);
        let (t, h) = (1.5, 1e-6);
        let p0 = expected_ee(&crate::geometry::advance_pose(&base, tw, -h), &a, t - h);
        let p1 = expected_ee(&crate::geometry::advance_pose(&base, tw, h), &a, t + h);
        let fd = (p1 - p0).scale(0.5 / h);
        let v = expected_ee_velocity(&base, tw, &a, t);
        assert!((fd - v).norm() < 1e-6, "{fd:?} vs {v:?}");
    }

    #[test]
    fn default_mount_is_underdamped() {
        let a = arm();
        assert!(!a.is_overdamped());
        assert!((a.damping_ratio() - 18.0 / (2.0 * 2000f64.sqrt())).abs() < 1e-12);
        assert!(a.validate().is_ok());
        let bad = ArmModel {
            damping: 0.0,
            ..arm()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn load_at_rest_stays_put() {
        let a = arm();
        let anchor = Point3::new(0.2, 0.0, 1.1);
        let mut s = ArmState {
            position: anchor,
            velocity: Point3::ZERO,
        };
        for _ in 0..1000 {
            s = integrate_load(s, anchor, Point3::ZERO, &a, 0.01);
        }
        assert_eq!(s.position, anchor);
    }
}
