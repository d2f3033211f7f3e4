use std::f64::consts::PI;

use manip_bench_core::geometry::{Point3, Pose2D, Twist, Vec2};
use manip_bench_core::global_planner::GlobalPath;
use manip_bench_core::metrics::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn log_of(
    points: &[Vec2],
    times: &[f64],
    errors: &[Point3],
    global: &[Vec2],
    goal: Vec2,
) -> TrajectoryLog {
    let samples = points
        .iter()
        .zip(times)
        .zip(errors)
        .map(|((p, t), e)| LogSample {
            t: *t,
            base: Pose2D::new(p.x, p.y, 0.0),
            cmd: Twist::ZERO,
            ee_expected: Point3::new(p.x, p.y, 1.0) + *e,
            ee_actual: Point3::new(p.x, p.y, 1.0),
        })
        .collect();
    TrajectoryLog {
        samples,
        global_path: GlobalPath::from_points(global, 0.0),
        goal: Pose2D::new(goal.x, goal.y, 0.0),
        success: true,
    }
}

fn simple_log(points: &[Vec2]) -> TrajectoryLog {
    let times: Vec<f64> = (0..points.len()).map(|i| i as f64 * 0.1).collect();
    let errors = vec![Point3::ZERO; points.len()];
    log_of(points, &times, &errors, points, *points.last().unwrap())
}

fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec2> {
    let mut p = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let mut out = vec![p];
    for _ in 1..n {
        p += Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        out.push(p);
    }
    out
}

/// Turn angle by atan2 of cross and dot products.
fn angle_sum_oracle(points: &[Vec2]) -> f64 {
    let segs: Vec<(f64, f64)> = points
        .windows(2)
        .map(|w| (w[1].x - w[0].x, w[1].y - w[0].y))
        .filter(|(dx, dy)| dx.hypot(*dy) > 1e-9)
        .collect();
    segs.windows(2)
        .map(|w| {
            let ((ax, ay), (bx, by)) = (w[0], w[1]);
            (ax * by - ay * bx).abs().atan2(ax * bx + ay * by)
        })
        .sum()
}

/// Resamples by walking a cumulative arc-length table with binary search.
fn resample_oracle(points: &[Vec2], m: usize) -> Vec<Vec2> {
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    (0..m)
        .map(|j| {
            let s = if m == 1 {
                0.0
            } else {
                total * j as f64 / (m - 1) as f64
            };
            let k = match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
                Ok(k) => return points[k],
                Err(k) => k.clamp(1, points.len() - 1),
            };
            let span = cum[k] - cum[k - 1];
            let t = if span > 0.0 {
                (s - cum[k - 1]) / span
            } else {
                0.0
            };
            points[k - 1] * (1.0 - t) + points[k] * t
        })
        .collect()
}

#[test]
fn smoothness_matches_angle_sum_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let pts = random_walk(&mut rng, 100);
        let got = path_smoothness(&simple_log(&pts)).unwrap();
        assert!((got - angle_sum_oracle(&pts)).abs() < 1e-9);
    }
}

#[test]
fn ee_stability_matches_fine_quadrature() {
    let (dt, duration) = (0.1, 20.0);
    let error = |t: f64| {
        Point3::new(
            0.05 * (0.7 * t).sin() + 0.01,
            0.03 * (1.3 * t + 0.4).cos(),
            0.01 * (0.2 * t).sin(),
        )
    };
    let n = (duration / dt) as usize + 1;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let errors: Vec<Point3> = times.iter().map(|t| error(*t)).collect();
    let pts = vec![Vec2::zeros(); n];
    let got = ee_stability(&log_of(&pts, &times, &errors, &pts, Vec2::zeros())).unwrap();

    let fine = 100 * (n - 1);
    let h = duration / fine as f64;
    let mut want = Point3::ZERO;
    for k in 0..fine {
        let (a, b) = (error(k as f64 * h).abs(), error((k + 1) as f64 * h).abs());
        want = want + (a + b).scale(0.5 * h);
    }
    for (g, w) in [(got.x, want.x), (got.y, want.y), (got.z, want.z)] {
        assert!((g - w).abs() / w < 0.01, "{g} vs {w}");
    }
}

#[test]
fn distance_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let pts = random_walk(&mut rng, 200);
        let want: f64 = pts
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum();
        let got = distance_travelled(&simple_log(&pts)).unwrap();
        assert!((got - want).abs() < 1e-9);
    }
}

#[test]
fn divergence_matches_independent_resampler() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(2..80);
        let k = rng.random_range(2..30);
        let travelled = random_walk(&mut rng, n);
        let global = random_walk(&mut rng, k);
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let log = log_of(
            &travelled,
            &times,
            &vec![Point3::ZERO; n],
            &global,
            Vec2::zeros(),
        );

        let m = n.min(k);
        let (a, b) = (resample_oracle(&travelled, m), resample_oracle(&global, m));
        let d: f64 = a
            .iter()
            .zip(&b)
            .map(|(p, q)| (p.x - q.x).powi(2) + (p.y - q.y).powi(2))
            .sum();
        let length: f64 = travelled.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let got = path_divergence(&log).unwrap();
        assert_eq!(got.m, m);
        assert!((got.d_between - d).abs() < 1e-9 * d.max(1.0));
        assert!((got.a_between - d * length / m as f64).abs() < 1e-9 * got.a_between.max(1.0));
    }
}

#[test]
fn parallel_offset_divergence() {
    let (l, d, m) = (4.0, 0.3, 41);
    let travelled: Vec<Vec2> = (0..m)
        .map(|i| Vec2::new(l * i as f64 / (m - 1) as f64, d))
        .collect();
    let global = [Vec2::new(0.0, 0.0), Vec2::new(l, 0.0)];
    let times: Vec<f64> = (0..m).map(|i| i as f64).collect();
    let global_dense: Vec<Vec2> = travelled.iter().map(|p| Vec2::new(p.x, 0.0)).collect();
    let log = log_of(
        &travelled,
        &times,
        &vec![Point3::ZERO; m],
        &global_dense,
        Vec2::zeros(),
    );
    let got = path_divergence(&log).unwrap();
    assert!((got.d_between - m as f64 * d * d).abs() < 1e-12);
    assert!((got.a_between - d * d * l).abs() < 1e-12);

    // A two-vertex global path aligns only two samples: the endpoints, each offset by d.
    let log = log_of(
        &travelled,
        &times,
        &vec![Point3::ZERO; m],
        &global,
        Vec2::zeros(),
    );
    let coarse = path_divergence(&log).unwrap();
    assert_eq!(coarse.m, 2);
    assert!((coarse.d_between - 2.0 * d * d).abs() < 1e-12);
}

#[test]
fn accuracy_and_time_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let end = Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let goal = Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let (t0, t1) = (rng.random_range(0.0..5.0), rng.random_range(5.0..100.0));
        let pts = [Vec2::zeros(), end];
        let log = log_of(&pts, &[t0, t1], &[Point3::ZERO; 2], &pts, goal);
        let want = (end.x - goal.x).powi(2) + (end.y - goal.y).powi(2);
        assert!((final_accuracy(&log).unwrap() - want).abs() < 1e-12);
        assert_eq!(total_time(&log), t1 - t0);
    }
}

#[test]
fn mean_report_is_fieldwise_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let reports: Vec<MetricsReport> = (0..7)
        .map(|_| report(&simple_log(&random_walk(&mut rng, 30))).unwrap())
        .collect();
    let mean = mean_report(&reports).unwrap();
    for field in MetricField::ALL {
        let want =
            reports.iter().map(|r| r.get(field).unwrap()).sum::<f64>() / reports.len() as f64;
        assert!((mean.get(field).unwrap() - want).abs() < 1e-12, "{field:?}");
    }
    let mut with_failure = reports.clone();
    with_failure.push(MetricsReport::failed(99.0));
    assert_eq!(mean_report(&with_failure), Some(mean));
    assert_eq!(mean_report(&[MetricsReport::failed(1.0)]), None);
}

#[test]
fn report_matches_individual_metrics() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let log = simple_log(&random_walk(&mut rng, 50));
    let r = report(&log).unwrap();
    assert_eq!(r.p_s, Some(path_smoothness(&log).unwrap()));
    assert_eq!(r.p_e, Some(ee_stability(&log).unwrap()));
    assert_eq!(r.d_travelled, Some(distance_travelled(&log).unwrap()));
    assert_eq!(r.a_between, Some(path_divergence(&log).unwrap().a_between));
    assert_eq!(r.p_acc, Some(final_accuracy(&log).unwrap()));
    assert_eq!(r.t_taken, total_time(&log));
}

fn polyline() -> impl Strategy<Value = Vec<Vec2>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..60)
        .prop_map(|v| v.into_iter().map(|(x, y)| Vec2::new(x, y)).collect())
}

proptest! {
    #[test]
    fn smoothness_rigid_invariance(pts in polyline(), angle in -PI..PI, tx in -100.0..100.0f64, ty in -100.0..100.0f64) {
        let pose = Pose2D::new(tx, ty, angle);
        let moved: Vec<Vec2> = pts.iter().map(|p| pose.transform_point(*p)).collect();
        prop_assert!((smoothness_of(&pts) - smoothness_of(&moved)).abs() < 1e-9);
    }

    #[test]
    fn smoothness_scale_invariance(pts in polyline(), k in 0.1..10.0f64) {
        let scaled: Vec<Vec2> = pts.iter().map(|p| p * k).collect();
        prop_assert!((smoothness_of(&pts) - smoothness_of(&scaled)).abs() < 1e-9);
    }

    #[test]
    fn distance_rotation_invariant_and_additive(pts in polyline(), angle in -PI..PI, cut in 1usize..50) {
        let pose = Pose2D::new(0.0, 0.0, angle);
        let moved: Vec<Vec2> = pts.iter().map(|p| pose.transform_point(*p)).collect();
        prop_assert!((polyline_length(&pts) - polyline_length(&moved)).abs() < 1e-9);
        let cut = cut.min(pts.len() - 1);
        let joined = polyline_length(&pts[..=cut]) + polyline_length(&pts[cut..]);
        prop_assert!((polyline_length(&pts) - joined).abs() < 1e-9);
    }

    #[test]
    fn divergence_symmetric_and_zero_on_self(a in polyline(), b in polyline()) {
        let ab = divergence_of(&a, &b);
        let ba = divergence_of(&b, &a);
        prop_assert!((ab.d_between - ba.d_between).abs() < 1e-9 * ab.d_between.max(1.0));
        prop_assert_eq!(divergence_of(&a, &a).d_between, 0.0);
    }

    #[test]
    fn ee_stability_zero_iff_perfect_tracking(errs in prop::collection::vec(-0.1..0.1f64, 2..40)) {
        let n = errs.len();
        let pts = vec![Vec2::zeros(); n];
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let errors: Vec<Point3> = errs.iter().map(|e| Point3::new(*e, 0.0, 0.0)).collect();
        let p = ee_stability(&log_of(&pts, &times, &errors, &pts, Vec2::zeros())).unwrap();
        prop_assert_eq!(p.x == 0.0, errs.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn total_time_non_negative(t0 in 0.0..100.0f64, span in 0.0..100.0f64) {
        let pts = [Vec2::zeros(), Vec2::zeros()];
        let log = log_of(&pts, &[t0, t0 + span + 1e-6], &[Point3::ZERO; 2], &pts, Vec2::zeros());
        prop_assert!(total_time(&log) >= 0.0);
    }
}
