use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Circle {
        center: Vec2,
        radius: f64,
    },
    /// Axis-aligned rectangle spanned by its two corners.
    Rect {
        min: Vec2,
        max: Vec2,
    },
}

impl Shape {
    pub fn circle(x: f64, y: f64, radius: f64) -> Self {
        Shape::Circle {
            center: Vec2::new(x, y),
            radius,
        }
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Shape::Rect {
            min: Vec2::new(x0.min(x1), y0.min(y1)),
            max: Vec2::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Shape::Circle { center, radius } => {
                *radius > 0.0 && center.iter().all(|c| c.is_finite())
            }
            Shape::Rect { min, max } => {
                max.x > min.x
                    && max.y > min.y
                    && min.iter().chain(max.iter()).all(|c| c.is_finite())
            }
        }
    }

    /// Signed distance from `p` to the shape boundary; negative inside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        match self {
            Shape::Circle { center, radius } => (p - center).norm() - radius,
            Shape::Rect { min, max } => {
                let c = (min + max) * 0.5;
                let half = (max - min) * 0.5;
                let d = (p - c).abs() - half;
                let outside = Vec2::new(d.x.max(0.0), d.y.max(0.0)).norm();
                outside + d.x.max(d.y).min(0.0)
            }
        }
    }

    /// Distance along a unit ray to the first boundary crossing at `t >= 0`.
    /// Returns `Some(0.0)` when the origin lies inside the shape.
    pub fn ray_intersection(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        match self {
            Shape::Circle { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(&dir);
                let c = oc.norm_squared() - radius * radius;
                if c <= 0.0 {
                    return Some(0.0);
                }
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                (t >= 0.0).then_some(t)
            }
            Shape::Rect { min, max } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for k in 0..2 {
                    if dir[k].abs() < 1e-15 {
                        if origin[k] < min[k] || origin[k] > max[k] {
                            return None;
                        }
                        continue;
                    }
                    let inv = 1.0 / dir[k];
                    let (mut t0, mut t1) = ((min[k] - origin[k]) * inv, (max[k] - origin[k]) * inv);
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    t_near = t_near.max(t0);
                    t_far = t_far.min(t1);
                }
                if t_near > t_far || t_far < 0.0 {
                    None
                } else {
                    Some(t_near.max(0.0))
                }
            }
        }
    }

    pub fn translated(&self, d: Vec2) -> Shape {
        match self {
            Shape::Circle { center, radius } => Shape::Circle {
                center: center + d,
                radius: *radius,
            },
            Shape::Rect { min, max } => Shape::Rect {
                min: min + d,
                max: max + d,
            },
        }
    }
}

fn yes() -> bool {
    true
}

/// A world object. `mapped = false` marks objects missing from the planner's map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    #[serde(default = "yes")]
    pub mapped: bool,
    /// Constant velocity in m/s for moving obstacles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec2>,
}

impl Obstacle {
    pub fn mapped(shape: Shape) -> Self {
        Self {
            shape,
            mapped: true,
            velocity: None,
        }
    }

    pub fn unmapped(shape: Shape) -> Self {
        Self {
            shape,
            mapped: false,
            velocity: None,
        }
    }

    pub fn advance(&mut self, dt: f64) {
        if let Some(v) = self.velocity {
            self.shape = self.shape.translated(v * dt);
        }
    }
}
