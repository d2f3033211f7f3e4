use std::f64::consts::PI;

use manip_bench_core::geometry::{Pose2D, RobotSpec, Twist, Vec2};
use manip_bench_core::global_planner::GlobalPath;
use manip_bench_core::planner::teb::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_band(rng: &mut ChaCha8Rng, cfg: &TebConfig, spec: &RobotSpec) -> (Band, Vec<Vec2>) {
    let start = Pose2D::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-PI..PI),
    );
    let mut pts = vec![start.position()];
    for _ in 0..3 {
        let last = *pts.last().unwrap();
        pts.push(last + Vec2::new(rng.random_range(0.5..2.0), rng.random_range(-1.0..1.0)));
    }
    let path = GlobalPath::from_points(&pts, rng.random_range(-PI..PI));
    let mut band = seed_band(&path, start, cfg, spec);
    let n = band.len();
    for p in &mut band.poses[1..n - 1] {
        p.x += rng.random_range(-0.05..0.05);
        p.y += rng.random_range(-0.05..0.05);
        p.theta += rng.random_range(-0.3..0.3);
    }
    for d in &mut band.dts {
        *d *= rng.random_range(0.5..1.5);
    }
    band.start_twist = Twist::new(
        rng.random_range(0.0..spec.v_max),
        rng.random_range(-spec.omega_max..spec.omega_max),
    );
    let obstacles = (0..rng.random_range(0..20))
        .map(|_| {
            band.poses[rng.random_range(0..n)].position()
                + Vec2::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8))
        })
        .collect();
    (band, obstacles)
}

#[test]
fn jacobian_agrees_across_step_sizes() {
    let spec = RobotSpec::default();
    let cfg = TebConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let (band, obstacles) = random_band(&mut rng, &cfg, &spec);
        let coarse = numeric_jacobian(&band, &obstacles, &cfg, &spec, 1e-5);
        let fine = numeric_jacobian(&band, &obstacles, &cfg, &spec, 1e-7);
        assert_eq!(coarse.nrows(), residual_count(band.len(), band.end_at_goal));
        let worst = (0..coarse.ncols())
            .map(|k| (coarse.column(k) - fine.column(k)).norm() / fine.column(k).norm().max(1e-12))
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "relative column error {worst}");
    }
}

#[test]
fn residual_layout_and_hinges() {
    let spec = RobotSpec::default();
    let cfg = TebConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let (band, obstacles) = random_band(&mut rng, &cfg, &spec);
        let n = band.len();
        let r = residuals(&band, &obstacles, &cfg, &spec);
        assert_eq!(r.len(), residual_count(n, band.end_at_goal));
        assert!(r.iter().all(|x| x.is_finite()));
        for (k, d) in band.dts.iter().enumerate() {
            assert!((r[k] - cfg.w_time.sqrt() * d).abs() < 1e-12);
        }
        // Everything but the time and nonholonomic blocks is a hinge.
        let hinges = r[n - 1..2 * n - 1].iter().chain(&r[3 * n - 2..]);
        assert!(hinges.clone().all(|x| *x >= 0.0));
        let c: f64 = r.iter().map(|x| x * x).sum();
        assert!((cost(&band, &obstacles, &cfg, &spec) - c).abs() <= 1e-9 * c.max(1.0));
    }
}

#[test]
fn accepted_steps_never_increase_cost() {
    let spec = RobotSpec::default();
    let single = TebConfig {
        iterations: 1,
        ..TebConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let (mut band, obstacles) = random_band(&mut rng, &single, &spec);
        let mut previous = cost(&band, &obstacles, &single, &spec);
        for _ in 0..15 {
            let out = optimize(&band, &obstacles, &single, &spec);
            assert_eq!(out.initial_cost, previous);
            assert_eq!(out.final_cost, cost(&out.band, &obstacles, &single, &spec));
            if out.accepted_steps > 0 {
                assert!(out.final_cost < out.initial_cost);
            } else {
                assert_eq!(out.band, band);
            }
            previous = out.final_cost;
            band = out.band;
        }
    }
    let cfg = TebConfig::default();
    for _ in 0..20 {
        let (band, obstacles) = random_band(&mut rng, &cfg, &spec);
        let out = optimize(&band, &obstacles, &cfg, &spec);
        assert!(out.final_cost <= out.initial_cost);
        assert!(out.band.is_valid());
        assert_eq!(out.band.poses[0], band.poses[0]);
        assert_eq!(out.band.poses.last(), band.poses.last());
    }
}

fn converge(mut band: Band, cfg: &TebConfig, spec: &RobotSpec) -> Band {
    for _ in 0..20 {
        let out = optimize(&band, &[], cfg, spec);
        band = out.band;
        if out.accepted_steps == 0 {
            break;
        }
    }
    band
}

fn polyline_length(band: &Band) -> f64 {
    (0..band.len() - 1).map(|i| band.segment_length(i)).sum()
}

#[test]
fn empty_world_band_runs_at_full_speed() {
    let spec = RobotSpec::default();
    let cfg = TebConfig::default();
    let path = GlobalPath::from_points(&[Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)], 0.0);
    let mut band = seed_band(&path, Pose2D::new(0.0, 0.0, 0.0), &cfg, &spec);
    assert!(!band.end_at_goal);
    band.start_twist = Twist::new(spec.v_max, 0.0);
    for d in &mut band.dts {
        *d *= 2.0;
    }
    let band = converge(band, &cfg, &spec);
    let ideal = polyline_length(&band) / spec.v_max;
    let t = band.total_time();
    assert!((t - ideal).abs() <= 0.05 * ideal, "total {t} vs {ideal}");
}

#[test]
fn empty_world_band_to_goal_with_generous_acceleration() {
    let spec = RobotSpec {
        a_lin_max: 100.0,
        a_ang_max: 100.0,
        ..RobotSpec::default()
    };
    let cfg = TebConfig::for_robot(&spec);
    let path = GlobalPath::from_points(&[Vec2::new(0.0, 0.0), Vec2::new(1.5, 1.5)], PI / 4.0);
    let mut band = seed_band(&path, Pose2D::new(0.0, 0.0, PI / 4.0), &cfg, &spec);
    assert!(band.end_at_goal);
    for d in &mut band.dts {
        *d *= 3.0;
    }
    let band = converge(band, &cfg, &spec);
    let ideal = polyline_length(&band) / spec.v_max;
    let t = band.total_time();
    assert!((t - ideal).abs() <= 0.05 * ideal, "total {t} vs {ideal}");
}

#[test]
fn straight_band_commands_its_segment_speed() {
    let spec = RobotSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..100 {
        let theta = rng.random_range(-PI..PI);
        let v = rng.random_range(0.05..spec.v_max);
        let dt = rng.random_range(0.1..0.5);
        let a = Pose2D::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            theta,
        );
        let step = |p: &Pose2D| {
            Pose2D::new(
                p.x + v * dt * theta.cos(),
                p.y + v * dt * theta.sin(),
                theta,
            )
        };
        let b = step(&a);
        let c = step(&b);
        let band = Band {
            poses: vec![a, b, c],
            dts: vec![dt, dt],
            start_twist: Twist::ZERO,
            end_at_goal: false,
            end_arc: 0.0,
        };
        let t = control_from_band(&band, &spec);
        assert!(
            (t.v - v).abs() < 1e-9 && t.omega.abs() < 1e-9,
            "{t:?} vs {v}"
        );
    }
}

#[test]
fn optimize_is_deterministic() {
    let spec = RobotSpec::default();
    let cfg = TebConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..5 {
        let (band, obstacles) = random_band(&mut rng, &cfg, &spec);
        assert_eq!(
            optimize(&band, &obstacles, &cfg, &spec),
            optimize(&band, &obstacles, &cfg, &spec)
        );
    }
}
