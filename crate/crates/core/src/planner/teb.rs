//! Time-elastic-band local planner.
//!
//! The band is a chain of poses with a time interval between each pair. A damped
//! Gauss-Newton solver trades off travel time against obstacle distance, nonholonomic
//! consistency and velocity/acceleration limits. Residuals are plain functions of the band
//! so the Jacobian is taken numerically.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    point_clearance, points_near, rotate_toward, LocalPlanner, PlannerError, PlanningContext,
    ProgressMonitor, StuckReason,
};
use crate::geometry::{normalize_angle, Pose2D, RobotSpec, Twist, Vec2};
use crate::global_planner::GlobalPath;

/// Lower bound on every band time interval, seconds.
pub const DT_FLOOR: f64 = 1e-3;
/// Finite-difference step of the Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;
const LAMBDA_MAX: f64 = 1e8;
/// Band speed below which the robot is considered to have arrived.
const SETTLE_SPEED: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TebConfig {
    pub w_time: f64,
    pub w_obs: f64,
    pub w_kin: f64,
    pub w_vel: f64,
    pub w_acc: f64,
    /// meters
    pub min_obstacle_distance: f64,
    pub iterations: usize,
    pub lambda_init: f64,
    /// meters of global path covered by the band
    pub horizon_length: f64,
    /// meters between seeded vertices
    pub resolution: f64,
    /// Re-seed when the band start is farther than this from the robot.
    pub reseed_distance: f64,
    /// Band length checked for collisions before a command is issued.
    pub feasibility_length: f64,
    /// Added to the footprint radius in that check.
    pub footprint_padding: f64,
    pub stuck_window: f64,
    pub stuck_progress: f64,
}

impl Default for TebConfig {
    fn default() -> Self {
        Self::for_robot(&RobotSpec::default())
    }
}

impl TebConfig {
    pub fn for_robot(spec: &RobotSpec) -> Self {
        Self {
            w_time: 1.0,
            w_obs: 50.0,
            w_kin: 1000.0,
            w_vel: 20.0,
            w_acc: 20.0,
            min_obstacle_distance: spec.footprint_radius + 0.1,
            iterations: 8,
            lambda_init: 1e-2,
            horizon_length: 3.0,
            resolution: 0.3,
            reseed_distance: 0.5,
            feasibility_length: 1.0,
            footprint_padding: 0.03,
            stuck_window: 3.0,
            stuck_progress: 0.05,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let w = [self.w_time, self.w_obs, self.w_kin, self.w_vel, self.w_acc];
        if w.iter().any(|x| !(*x >= 0.0)) {
            return Err("teb weights must be non-negative".into());
        }
        if self.iterations == 0 {
            return Err("teb iterations must be at least 1".into());
        }
        if !(self.min_obstacle_distance > 0.0) || !(self.lambda_init > 0.0) {
            return Err("teb min_obstacle_distance and lambda_init must be positive".into());
        }
        if !(self.resolution > 0.0 && self.horizon_length > 0.0) {
            return Err("teb resolution and horizon must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub poses: Vec<Pose2D>,
    pub dts: Vec<f64>,
    /// Robot velocity at the start vertex; the first segment must be reachable from it.
    pub start_twist: Twist,
    /// The last vertex is the goal, where the robot must come to rest.
    pub end_at_goal: bool,
    /// Arc length on the global path of the last vertex.
    pub end_arc: f64,
}

impl Band {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn is_valid(&self) -> bool {
        self.poses.len() >= 3
            && self.dts.len() + 1 == self.poses.len()
            && self.dts.iter().all(|d| *d > DT_FLOOR)
    }

    pub fn total_time(&self) -> f64 {
        self.dts.iter().sum()
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        (self.poses[i + 1].position() - self.poses[i].position()).norm()
    }

    /// Free parameters: interior vertex coordinates, then every time interval.
    fn params(&self) -> DVector<f64> {
        let n = self.poses.len();
        let mut x = DVector::zeros(3 * (n - 2) + n - 1);
        for (k, p) in self.poses[1..n - 1].iter().enumerate() {
            x[3 * k] = p.x;
            x[3 * k + 1] = p.y;
            x[3 * k + 2] = p.theta;
        }
        for (k, d) in self.dts.iter().enumerate() {
            x[3 * (n - 2) + k] = *d;
        }
        x
    }

    /// Writes raw parameters back without normalizing, so finite differences stay exact.
    fn set_params(&mut self, x: &DVector<f64>) {
        let n = self.poses.len();
        for k in 0..n - 2 {
            self.poses[k + 1] = Pose2D {
                x: x[3 * k],
                y: x[3 * k + 1],
                theta: x[3 * k + 2],
            };
        }
        for k in 0..n - 1 {
            self.dts[k] = x[3 * (n - 2) + k];
        }
    }
}

/// Samples the band along the path from the projection of `current`, one vertex every
/// `resolution` meters up to `horizon_length`, with time intervals at full speed.
pub fn seed_band(path: &GlobalPath, current: Pose2D, cfg: &TebConfig, spec: &RobotSpec) -> Band {
    assert!(!path.is_empty(), "seed_band needs a non-empty path");
    let total = path.length();
    let (s0, _) = path.project(current.position());
    let s_end = (s0 + cfg.horizon_length).min(total);
    let end_at_goal = s0 + cfg.horizon_length >= total;

    let mut positions = vec![current.position()];
    let mut k = 1;
    while s0 + k as f64 * cfg.resolution < s_end - 1e-9 {
        positions.push(path.point_at(s0 + k as f64 * cfg.resolution));
        k += 1;
    }
    positions.push(path.point_at(s_end));
    if positions.len() < 3 {
        let mid = (positions[0] + positions[1]) * 0.5;
        positions.insert(1, mid);
    }

    let n = positions.len();
    let end_heading = path.heading_at(s_end);
    let mut poses = Vec::with_capacity(n);
    poses.push(current);
    for i in 1..n - 1 {
        let d = positions[i + 1] - positions[i];
        let theta = if d.norm() > 1e-9 {
            d.y.atan2(d.x)
        } else {
            end_heading
        };
        poses.push(Pose2D::new(positions[i].x, positions[i].y, theta));
    }
    poses.push(Pose2D::new(
        positions[n - 1].x,
        positions[n - 1].y,
        end_heading,
    ));

    let dts = positions
        .windows(2)
        .map(|w| ((w[1] - w[0]).norm() / spec.v_max).max(10.0 * DT_FLOOR))
        .collect();
    Band {
        poses,
        dts,
        start_twist: Twist::ZERO,
        end_at_goal,
        end_arc: s_end,
    }
}

fn nearest_distance(p: Vec2, obstacles: &[Vec2]) -> f64 {
    obstacles
        .iter()
        .map(|o| (o - p).norm_squared())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Number of residuals `residuals` returns for a band of `n` vertices.
pub fn residual_count(n: usize, end_at_goal: bool) -> usize {
    // time, obstacle, kinematics, linear and angular velocity, acceleration + boundaries
    (n - 1) + n + (n - 1) + 2 * (n - 1) + (n - 2) + 2 + usize::from(end_at_goal)
}

/// Stacked weighted residuals in a fixed layout: time intervals, vertex obstacle hinges,
/// nonholonomic consistency, linear and angular velocity hinges, acceleration hinges with
/// the start (and goal) boundary terms last.
pub fn residuals(band: &Band, obstacles: &[Vec2], cfg: &TebConfig, spec: &RobotSpec) -> Vec<f64> {
    let n = band.poses.len();
    let mut r = Vec::with_capacity(residual_count(n, band.end_at_goal));
    let (wt, wo, wk, wv, wa) = (
        cfg.w_time.sqrt(),
        cfg.w_obs.sqrt(),
        cfg.w_kin.sqrt(),
        cfg.w_vel.sqrt(),
        cfg.w_acc.sqrt(),
    );
    r.extend(band.dts.iter().map(|d| wt * d));
    r.extend(band.poses.iter().map(|p| {
        wo * (cfg.min_obstacle_distance - nearest_distance(p.position(), obstacles)).max(0.0)
    }));
    for i in 0..n - 1 {
        let (a, b) = (&band.poses[i], &band.poses[i + 1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        r.push(wk * ((a.theta.cos() + b.theta.cos()) * dy - (a.theta.sin() + b.theta.sin()) * dx));
    }
    let speeds: Vec<f64> = (0..n - 1)
        .map(|i| band.segment_length(i) / band.dts[i])
        .collect();
    r.extend(speeds.iter().map(|v| wv * (v.abs() - spec.v_max).max(0.0)));
    for i in 0..n - 1 {
        let w = normalize_angle(band.poses[i + 1].theta - band.poses[i].theta) / band.dts[i];
        r.push(wv * (w.abs() - spec.omega_max).max(0.0));
    }
    for i in 0..n - 2 {
        let dt_mean = 0.5 * (band.dts[i] + band.dts[i + 1]);
        r.push(wa * ((speeds[i + 1] - speeds[i]).abs() / dt_mean - spec.a_lin_max).max(0.0));
    }
    let start = band.start_twist;
    r.push(wa * ((speeds[0] - start.v.abs()).abs() / band.dts[0] - spec.a_lin_max).max(0.0));
    let omega0 = normalize_angle(band.poses[1].theta - band.poses[0].theta) / band.dts[0];
    r.push(wa * ((omega0 - start.omega).abs() / band.dts[0] - spec.a_ang_max).max(0.0));
    if band.end_at_goal {
        r.push(wa * (speeds[n - 2] / band.dts[n - 2] - spec.a_lin_max).max(0.0));
    }
    r
}

pub fn cost(band: &Band, obstacles: &[Vec2], cfg: &TebConfig, spec: &RobotSpec) -> f64 {
    residuals(band, obstacles, cfg, spec)
        .iter()
        .map(|x| x * x)
        .sum()
}

/// Central-difference Jacobian of the residual vector over the free parameters.
pub fn numeric_jacobian(
    band: &Band,
    obstacles: &[Vec2],
    cfg: &TebConfig,
    spec: &RobotSpec,
    h: f64,
) -> DMatrix<f64> {
    let x = band.params();
    let m = residual_count(band.len(), band.end_at_goal);
    let mut jac = DMatrix::zeros(m, x.len());
    let mut probe = band.clone();
    for k in 0..x.len() {
        let mut xp = x.clone();
        xp[k] += h;
        probe.set_params(&xp);
        let rp = residuals(&probe, obstacles, cfg, spec);
        xp[k] -= 2.0 * h;
        probe.set_params(&xp);
        let rm = residuals(&probe, obstacles, cfg, spec);
        for i in 0..m {
            jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    jac
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub band: Band,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub accepted_steps: usize,
    /// Damping escalated past its ceiling before any step was accepted; `band` is the input.
    pub stalled: bool,
}

/// Levenberg-damped least squares over interior vertices and time intervals.
pub fn optimize(band: &Band, obstacles: &[Vec2], cfg: &TebConfig, spec: &RobotSpec) -> Optimized {
    let initial_cost = cost(band, obstacles, cfg, spec);
    let mut current = band.clone();
    let mut current_cost = initial_cost;
    let mut lambda = cfg.lambda_init;
    let mut accepted_steps = 0;
    let mut stalled = false;
    let n = band.len();
    let dt_offset = 3 * (n - 2);

    'outer: for _ in 0..cfg.iterations {
        let r = DVector::from_vec(residuals(&current, obstacles, cfg, spec));
        let jac = numeric_jacobian(&current, obstacles, cfg, spec, JACOBIAN_STEP);
        let g = jac.tr_mul(&r);
        if g.amax() < 1e-12 {
            break;
        }
        let jtj = jac.tr_mul(&jac);
        let x = current.params();
        loop {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda;
            }
            if let Some(chol) = a.cholesky() {
                let mut xn = &x - chol.solve(&g);
                for k in dt_offset..xn.len() {
                    xn[k] = xn[k].max(DT_FLOOR + 1e-6);
                }
                let mut cand = current.clone();
                cand.set_params(&xn);
                for p in &mut cand.poses[1..n - 1] {
                    p.theta = normalize_angle(p.theta);
                }
                let c = cost(&cand, obstacles, cfg, spec);
                if c < current_cost {
                    current = cand;
                    current_cost = c;
                    accepted_steps += 1;
                    lambda = (lambda * 0.5).max(1e-12);
                    break;
                }
            }
            lambda *= 2.0;
            if lambda > LAMBDA_MAX {
                stalled = accepted_steps == 0;
                break 'outer;
            }
        }
    }
    Optimized {
        band: current,
        initial_cost,
        final_cost: current_cost,
        accepted_steps,
        stalled,
    }
}

/// Command that carries the robot along the first band segment.
pub fn control_from_band(band: &Band, spec: &RobotSpec) -> Twist {
    let (a, b) = (&band.poses[0], &band.poses[1]);
    let seg = b.position() - a.position();
    let sign = if seg.dot(&a.heading()) < 0.0 {
        -1.0
    } else {
        1.0
    };
    spec.clamp(Twist::new(
        sign * seg.norm() / band.dts[0],
        normalize_angle(b.theta - a.theta) / band.dts[0],
    ))
}

/// Whether the footprint stays clear of `obstacles` along the band's first `length` meters.
pub fn band_clear(band: &Band, obstacles: &[Vec2], footprint_radius: f64, length: f64) -> bool {
    let mut travelled = 0.0;
    for i in 0..band.len() - 1 {
        let (a, b) = (band.poses[i].position(), band.poses[i + 1].position());
        let seg = (b - a).norm();
        let steps = (seg / 0.05).ceil().max(1.0) as usize;
        for k in 1..=steps {
            let p = a + (b - a) * (k as f64 / steps as f64);
            if point_clearance(p, obstacles, footprint_radius) <= 0.0 {
                return false;
            }
        }
        travelled += seg;
        if travelled >= length {
            break;
        }
    }
    true
}

#[derive(Debug, Clone)]
pub struct TebPlanner {
    pub cfg: TebConfig,
    pub spec: RobotSpec,
    band: Option<Band>,
    monitor: ProgressMonitor,
}

impl TebPlanner {
    pub fn new(cfg: TebConfig, spec: RobotSpec) -> Self {
        let monitor = ProgressMonitor::new(cfg.stuck_window, cfg.stuck_progress);
        Self {
            cfg,
            spec,
            band: None,
            monitor,
        }
    }

    pub fn band(&self) -> Option<&Band> {
        self.band.as_ref()
    }

    fn seed(&self, ctx: &PlanningContext<'_>) -> Band {
        let mut band = seed_band(ctx.path, ctx.pose, &self.cfg, &self.spec);
        if band.end_at_goal {
            *band.poses.last_mut().expect("band has vertices") = ctx.goal;
        }
        band.start_twist = ctx.twist;
        band
    }

    /// Moves the band start onto the robot, drops passed vertices and extends the far end
    /// along the path.
    fn warm_start(&self, mut band: Band, ctx: &PlanningContext<'_>) -> Band {
        band.poses[0] = ctx.pose;
        band.start_twist = ctx.twist;
        while band.len() > 3 && band.segment_length(0) < 0.5 * self.cfg.resolution {
            band.poses.remove(1);
            let merged = band.dts[0] + band.dts[1];
            band.dts.remove(0);
            band.dts[0] = merged;
        }
        if !band.end_at_goal {
            let total = ctx.path.length();
            let (s0, _) = ctx.path.project(ctx.pose.position());
            let target = (s0 + self.cfg.horizon_length).min(total);
            while band.end_arc + self.cfg.resolution <= target + 1e-9
                || (target >= total && band.end_arc < total)
            {
                let s = (band.end_arc + self.cfg.resolution).min(total);
                let p = ctx.path.point_at(s);
                let at_goal = s >= total;
                let last = *band.poses.last().expect("band has vertices");
                let next = if at_goal {
                    ctx.goal
                } else {
                    Pose2D::new(p.x, p.y, ctx.path.heading_at(s))
                };
                band.dts.push(
                    ((next.position() - last.position()).norm() / self.spec.v_max)
                        .max(10.0 * DT_FLOOR),
                );
                band.poses.push(next);
                band.end_arc = s;
                band.end_at_goal = at_goal;
                if at_goal {
                    break;
                }
            }
        }
        band
    }

    fn optimize_checked(&self, band: &Band, obstacles: &[Vec2]) -> Result<Band, StuckReason> {
        let out = optimize(band, obstacles, &self.cfg, &self.spec);
        if out.stalled {
            return Err(StuckReason::OptimizerStalled);
        }
        // Padding never exceeds half the current clearance, so a robot already inside it can leave.
        let here = point_clearance(
            band.poses[0].position(),
            obstacles,
            self.spec.footprint_radius,
        );
        let radius =
            self.spec.footprint_radius + self.cfg.footprint_padding.min(0.5 * here).max(0.0);
        if !band_clear(&out.band, obstacles, radius, self.cfg.feasibility_length) {
            return Err(StuckReason::InfeasibleBand);
        }
        Ok(out.band)
    }
}

impl LocalPlanner for TebPlanner {
    fn name(&self) -> &'static str {
        "teb"
    }

    fn compute(&mut self, ctx: &PlanningContext<'_>) -> Result<Twist, PlannerError> {
        if ctx.tolerance.reached(&ctx.pose, &ctx.goal) {
            self.monitor.reset();
            return Ok(Twist::ZERO);
        }
        if ctx.pose.distance_to(&ctx.goal) < ctx.tolerance.xy / 3.0 {
            self.monitor.reset();
            return Ok(rotate_toward(
                ctx.goal.theta,
                &ctx.pose,
                ctx.twist,
                &self.spec,
                ctx.dt,
            ));
        }
        let near_goal = ctx.tolerance.position_reached(&ctx.pose, &ctx.goal);
        if near_goal {
            self.monitor.reset();
        } else if self
            .monitor
            .update(ctx.time, &ctx.pose, ctx.path, &ctx.goal)
        {
            self.monitor.reset();
            self.band = None;
            return Err(PlannerError::Stuck(StuckReason::NoProgress));
        }

        let band = match self.band.take() {
            Some(b)
                if (b.poses[0].position() - ctx.pose.position()).norm()
                    <= self.cfg.reseed_distance =>
            {
                self.warm_start(b, ctx)
            }
            _ => self.seed(ctx),
        };
        let reach = band
            .poses
            .iter()
            .map(|p| (p.position() - ctx.pose.position()).norm())
            .fold(0.0, f64::max);
        let local = points_near(
            ctx.obstacles,
            ctx.pose.position(),
            reach + self.cfg.min_obstacle_distance + 0.5,
        );

        let band = match self.optimize_checked(&band, &local) {
            Ok(b) => b,
            Err(_) => self
                .optimize_checked(&self.seed(ctx), &local)
                .map_err(PlannerError::Stuck)?,
        };
        let cmd = control_from_band(&band, &self.spec);
        self.band = Some(band);
        if near_goal && cmd.v.abs() < SETTLE_SPEED {
            // The band has come to rest inside the tolerance; finish the heading in place.
            return Ok(rotate_toward(
                ctx.goal.theta,
                &ctx.pose,
                ctx.twist,
                &self.spec,
                ctx.dt,
            ));
        }
        Ok(cmd)
    }

    fn reset(&mut self) {
        self.band = None;
        self.monitor.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(len: f64) -> GlobalPath {
        GlobalPath::from_points(&[Vec2::new(0.0, 0.0), Vec2::new(len, 0.0)], 0.0)
    }

    #[test]
    fn uniform_seeding() {
        let cfg = TebConfig {
            resolution: 0.5,
            ..TebConfig::default()
        };
        let spec = RobotSpec::default();
        let b = seed_band(&line(2.0), Pose2D::identity(), &cfg, &spec);
        assert_eq!(b.len(), 5);
        assert!(b.dts.iter().all(|d| (d - 0.5 / spec.v_max).abs() < 1e-12));
        assert!(b.end_at_goal && b.is_valid());
    }

    #[test]
    fn short_path_gets_midpoint() {
        let b = seed_band(
            &line(0.2),
            Pose2D::identity(),
            &TebConfig::default(),
            &RobotSpec::default(),
        );
        assert_eq!(b.len(), 3);
        assert!((b.poses[1].x - 0.1).abs() < 1e-12);
    }

    #[test]
    fn straight_band_only_time_residuals() {
        let spec = RobotSpec::default();
        let cfg = TebConfig::default();
        let mut b = seed_band(&line(2.0), Pose2D::identity(), &cfg, &spec);
        b.end_at_goal = false;
        b.start_twist = Twist::new(spec.v_max, 0.0);
        let r = residuals(&b, &[], &cfg, &spec);
        let n = b.len();
        assert!(r[..n - 1].iter().all(|x| *x > 0.0));
        assert!(r[n - 1..].iter().all(|x| x.abs() < 1e-9), "{r:?}");
    }

    #[test]
    fn hinge_boundary_is_zero() {
        let spec = RobotSpec::default();
        let cfg = TebConfig::default();
        let b = seed_band(&line(2.0), Pose2D::identity(), &cfg, &spec);
        let obs = [Vec2::new(b.poses[2].x, cfg.min_obstacle_distance)];
        let r = residuals(&b, &obs, &cfg, &spec);
        let n = b.len();
        assert_eq!(r[n - 1 + 2], 0.0);
    }

    #[test]
    fn zero_residual_band_is_fixed_point() {
        let spec = RobotSpec::default();
        let cfg = TebConfig {
            w_time: 0.0,
            ..TebConfig::default()
        };
        let mut b = seed_band(&line(2.0), Pose2D::identity(), &cfg, &spec);
        b.end_at_goal = false;
        b.start_twist = Twist::new(spec.v_max, 0.0);
        let out = optimize(&b, &[], &cfg, &spec);
        assert_eq!(out.band, b);
        assert_eq!(out.final_cost, 0.0);
    }

    #[test]
    fn obstacle_on_the_line_is_avoided() {
        let spec = RobotSpec::default();
        let cfg = TebConfig {
            iterations: 30,
            ..TebConfig::default()
        };
        let mut b = seed_band(&line(3.0), Pose2D::identity(), &cfg, &spec);
        b.start_twist = Twist::new(spec.v_max, 0.0);
        let obs: Vec<Vec2> = (0..36)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 36.0;
                Vec2::new(1.5 + 0.05 * a.cos(), 0.02 + 0.05 * a.sin())
            })
            .collect();
        let out = optimize(&b, &obs, &cfg, &spec);
        assert!(out.final_cost <= out.initial_cost);
        let min = out.band.poses[1..out.band.len() - 1]
            .iter()
            .map(|p| nearest_distance(p.position(), &obs))
            .fold(f64::INFINITY, f64::min);
        assert!(
            min >= cfg.min_obstacle_distance - 0.01,
            "min clearance {min}"
        );
    }

    #[test]
    fn control_examples() {
        let spec = RobotSpec::default();
        let b = seed_band(&line(2.0), Pose2D::identity(), &TebConfig::default(), &spec);
        let t = control_from_band(&b, &spec);
        assert!((t.v - spec.v_max).abs() < 1e-12 && t.omega.abs() < 1e-12);
        let goal = Pose2D::new(1.0, 1.0, 0.3);
        let still = Band {
            poses: vec![goal; 3],
            dts: vec![0.1; 2],
            start_twist: Twist::ZERO,
            end_at_goal: true,
            end_arc: 0.0,
        };
        assert_eq!(control_from_band(&still, &spec), Twist::ZERO);
    }
}
