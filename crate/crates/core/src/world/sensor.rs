use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::obstacle::Obstacle;
use crate::geometry::{Pose2D, Vec2};

/// Smallest range a ray can report; keeps ranges strictly positive.
const MIN_RANGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub rays: usize,
    pub max_range: f64,
    /// Standard deviation of additive range noise. Zero disables the hook.
    pub noise_std: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            rays: 360,
            max_range: 10.0,
            noise_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeScan {
    /// Ray angles relative to the base heading.
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub max_range: f64,
}

impl RangeScan {
    /// World-frame points of rays that hit something.
    pub fn hit_points(&self, pose: &Pose2D) -> Vec<Vec2> {
        self.angles
            .iter()
            .zip(&self.ranges)
            .filter(|(_, r)| **r < self.max_range)
            .map(|(a, r)| {
                let th = pose.theta + a;
                Vec2::new(pose.x + r * th.cos(), pose.y + r * th.sin())
            })
            .collect()
    }

    /// Adds a noise sample to each range, keeping ranges in (0, max_range].
    pub fn perturb(&mut self, mut noise: impl FnMut() -> f64) {
        for r in &mut self.ranges {
            if *r < self.max_range {
                *r = (*r + noise()).clamp(MIN_RANGE, self.max_range);
            }
        }
    }
}

/// Ray angles evenly spaced over a full turn, starting at -pi.
pub fn ray_angles(rays: usize) -> Vec<f64> {
    (0..rays)
        .map(|i| -PI + 2.0 * PI * i as f64 / rays as f64)
        .collect()
}

/// Noise-free range scan from `pose` against every obstacle in the true world.
pub fn scan(pose: &Pose2D, obstacles: &[Obstacle], cfg: &ScanConfig) -> RangeScan {
    assert!(cfg.rays >= 1, "a scan needs at least one ray");
    let origin = pose.position();
    let angles = ray_angles(cfg.rays);
    let ranges = angles
        .iter()
        .map(|a| {
            let th = pose.theta + a;
            let dir = Vec2::new(th.cos(), th.sin());
            obstacles
                .iter()
                .filter_map(|o| o.shape.ray_intersection(origin, dir))
                .fold(cfg.max_range, f64::min)
                .max(MIN_RANGE)
        })
        .collect();
    RangeScan {
        angles,
        ranges,
        max_range: cfg.max_range,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::obstacle::Shape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_world_reports_max_range() {
        let s = scan(&Pose2D::identity(), &[], &ScanConfig::default());
        assert_eq!(s.ranges.len(), 360);
        assert!(s.ranges.iter().all(|r| *r == 10.0));
        assert!(s.hit_points(&Pose2D::identity()).is_empty());
    }

    #[test]
    fn circle_straight_ahead() {
        let obs = [Obstacle::mapped(Shape::circle(3.0, 0.0, 1.0))];
        let s = scan(&Pose2D::identity(), &obs, &ScanConfig::default());
        let i = s.angles.iter().position(|a| *a == 0.0).unwrap();
        assert!((s.ranges[i] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn perturb_keeps_bounds() {
        let obs = [Obstacle::mapped(Shape::circle(0.5, 0.0, 0.2))];
        let mut s = scan(&Pose2D::identity(), &obs, &ScanConfig::default());
        s.perturb(|| -5.0);
        assert!(s.ranges.iter().all(|r| *r > 0.0 && *r <= s.max_range));
    }

    // Marches each ray in small steps and stops at the first sample inside a shape.
    fn march(pose: &Pose2D, obstacles: &[Obstacle], angle: f64, max_range: f64, step: f64) -> f64 {
        let th = pose.theta + angle;
        let mut t = 0.0;
        while t < max_range {
            let p = Vec2::new(pose.x + t * th.cos(), pose.y + t * th.sin());
            if obstacles.iter().any(|o| o.shape.signed_distance(p) <= 0.0) {
                return t;
            }
            t += step;
        }
        max_range
    }

    #[test]
    fn matches_dense_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let resolution = 0.05;
        let cfg = ScanConfig {
            rays: 90,
            ..ScanConfig::default()
        };
        for _ in 0..20 {
            let obs: Vec<Obstacle> = (0..6)
                .map(|_| {
                    let (x, y) = (rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
                    if rng.random_bool(0.5) {
                        Obstacle::mapped(Shape::circle(x, y, rng.random_range(0.2..1.5)))
                    } else {
                        Obstacle::mapped(Shape::rect(
                            x,
                            y,
                            x + rng.random_range(0.2..2.0),
                            y + rng.random_range(0.2..2.0),
                        ))
                    }
                })
                .filter(|o| o.shape.signed_distance(Vec2::zeros()) > 0.1)
                .collect();
            let pose = Pose2D::new(0.0, 0.0, rng.random_range(-3.0..3.0));
            let s = scan(&pose, &obs, &cfg);
            for (a, r) in s.angles.iter().zip(&s.ranges) {
                let oracle = march(&pose, &obs, *a, cfg.max_range, resolution / 10.0);
                assert!(
                    (oracle - r).abs() <= resolution / 2.0,
                    "ray {a}: {r} vs oracle {oracle}"
                );
            }
        }
    }
}
