//! One seeded run of a planner through a scenario.

use manip_bench_core::geometry::{Pose2D, RobotSpec, Twist, Vec2};
use manip_bench_core::global_planner::{
    inflate, plan_on_inflated, GlobalPath, PlanError, INFLATION_MARGIN,
};
use manip_bench_core::metrics::{partial_report, LogSample, MetricsReport, TrajectoryLog};
use manip_bench_core::planner::{
    DwaConfig, DwaPlanner, LocalPlanner, PlannerError, PlanningContext, StuckReason, TebConfig,
    TebPlanner,
};
use manip_bench_core::world::{clearance, ScanConfig, Simulator, DT_CTRL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::scenario::{Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Dwa,
    Teb,
    ExternalLog,
}

impl PlannerKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerKind::Dwa => "dwa",
            PlannerKind::Teb => "teb",
            PlannerKind::ExternalLog => "external-log",
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dwa" => Ok(PlannerKind::Dwa),
            "teb" => Ok(PlannerKind::Teb),
            "external-log" => Ok(PlannerKind::ExternalLog),
            other => Err(format!("unknown planner `{other}`")),
        }
    }
}

/// Everything besides the scenario that shapes a trial.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSettings {
    pub robot: RobotSpec,
    pub sensor: ScanConfig,
    pub dwa: DwaConfig,
    pub teb: Option<TebConfig>,
    /// Re-plans tolerated without progress before the trial is failed.
    pub max_replans: usize,
    /// Linear and angular speed below which the robot counts as stopped at the goal.
    pub settle_speed: (f64, f64),
}

impl TrialSettings {
    pub fn standard() -> Self {
        Self {
            max_replans: 3,
            settle_speed: (0.05, 0.1),
            ..Self::default()
        }
    }

    pub fn teb_config(&self) -> TebConfig {
        self.teb
            .unwrap_or_else(|| TebConfig::for_robot(&self.robot))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub scenario: String,
    pub planner: PlannerKind,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    NoPath,
    Collision,
    Timeout,
    Stuck,
    /// The scenario failed validation; nothing was simulated.
    InvalidScenario,
}

impl Failure {
    pub fn name(&self) -> &'static str {
        match self {
            Failure::NoPath => "no_path",
            Failure::Collision => "collision",
            Failure::Timeout => "timeout",
            Failure::Stuck => "stuck",
            Failure::InvalidScenario => "invalid_scenario",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub spec: TrialSpec,
    pub log: TrajectoryLog,
    pub report: MetricsReport,
    pub failure: Option<Failure>,
    pub replans: usize,
    /// Time and cause of every Stuck report.
    pub stuck_events: Vec<(f64, StuckReason)>,
}

impl TrialOutcome {
    pub fn success(&self) -> bool {
        self.failure.is_none()
    }

    /// Failure entry for a trial that could not start.
    pub fn invalid(spec: &TrialSpec) -> Self {
        Self {
            spec: spec.clone(),
            log: TrajectoryLog {
                samples: Vec::new(),
                global_path: GlobalPath::default(),
                goal: Pose2D::identity(),
                success: false,
            },
            report: MetricsReport::failed(0.0),
            failure: Some(Failure::InvalidScenario),
            replans: 0,
            stuck_events: Vec::new(),
        }
    }
}

/// Seeded perturbation of the nominal start; falls back to the nominal pose when every
/// draw lands in collision.
pub fn jittered_start(scenario: &Scenario, spec: &RobotSpec, seed: u64) -> Pose2D {
    let (sxy, sth) = scenario.start_jitter;
    if sxy == 0.0 && sth == 0.0 {
        return scenario.start;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos = Normal::new(0.0, sxy).expect("jitter is validated");
    let yaw = Normal::new(0.0, sth).expect("jitter is validated");
    for _ in 0..16 {
        let p = Pose2D::new(
            scenario.start.x + pos.sample(&mut rng),
            scenario.start.y + pos.sample(&mut rng),
            scenario.start.theta + yaw.sample(&mut rng),
        );
        if clearance(&p, &scenario.obstacles, spec.footprint_radius) > 0.0 {
            return p;
        }
    }
    scenario.start
}

fn make_planner(kind: PlannerKind, settings: &TrialSettings) -> Box<dyn LocalPlanner> {
    match kind {
        PlannerKind::Dwa => Box::new(DwaPlanner::new(settings.dwa, settings.robot)),
        PlannerKind::Teb => Box::new(TebPlanner::new(settings.teb_config(), settings.robot)),
        PlannerKind::ExternalLog => unreachable!("external logs are scored, not simulated"),
    }
}

/// Plans on the static map with the sensed points added. When the robot already sits
/// inside the inflated obstacles, the inflation shrinks until the start is free.
fn replan(
    scenario: &Scenario,
    sensed: &[Vec2],
    pose: &Pose2D,
    spec: &RobotSpec,
) -> Result<GlobalPath, PlanError> {
    let mut map = scenario.map_for_planner();
    map.mark_points(sensed);
    let mut radius = spec.footprint_radius + INFLATION_MARGIN;
    loop {
        match plan_on_inflated(&inflate(&map, radius), pose, &scenario.goal) {
            Err(PlanError::StartOccupied(..)) if radius > map.resolution => {
                radius -= map.resolution
            }
            other => return other,
        }
    }
}

/// Progress needed between two Stuck events for the second to start a fresh count.
const REPLAN_PROGRESS: f64 = 0.5;

pub fn run_trial(
    spec: &TrialSpec,
    scenario: &Scenario,
    settings: &TrialSettings,
) -> Result<TrialOutcome, ScenarioError> {
    let robot = settings.robot;
    scenario.validate(&robot)?;
    if let Err(reason) = robot.validate() {
        return Err(ScenarioError::Invalid {
            id: scenario.id.clone(),
            reason: reason.to_string(),
        });
    }
    let start = jittered_start(scenario, &robot, spec.seed);
    let arm = scenario.arm_model(&robot);
    let mut sim = Simulator::new(start, scenario.obstacles.clone(), arm, robot);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_5ca7);
    let noise = (settings.sensor.noise_std > 0.0)
        .then(|| Normal::new(0.0, settings.sensor.noise_std).expect("noise std is positive"));

    let sample = |sim: &Simulator, cmd: Twist| LogSample {
        t: sim.time(),
        base: sim.state.base_pose,
        cmd,
        ee_expected: sim.expected_ee(),
        ee_actual: sim.state.ee_actual,
    };

    let finish = |samples: Vec<LogSample>,
                  path: GlobalPath,
                  failure: Option<Failure>,
                  replans: usize,
                  stuck_events: Vec<(f64, StuckReason)>| {
        let log = TrajectoryLog {
            samples,
            global_path: path,
            goal: scenario.goal,
            success: failure.is_none(),
        };
        let report = partial_report(&log).expect("trial logs have increasing timestamps");
        Ok(TrialOutcome {
            spec: spec.clone(),
            log,
            report,
            failure,
            replans,
            stuck_events,
        })
    };

    let mut path = match replan(scenario, &[], &start, &robot) {
        Ok(p) => p,
        Err(_) => {
            return finish(
                vec![sample(&sim, Twist::ZERO)],
                GlobalPath::default(),
                Some(Failure::NoPath),
                0,
                Vec::new(),
            )
        }
    };
    // The log keeps the first plan: divergence is measured against the map-based intent.
    let initial = path.clone();
    let mut planner = make_planner(spec.planner, settings);
    let mut samples = Vec::new();
    let mut replans = 0;
    let mut stuck_events = Vec::new();
    let mut consecutive_stuck = 0;
    let mut last_stuck_distance = f64::INFINITY;

    loop {
        let pose = sim.state.base_pose;
        let twist = sim.state.base_twist;
        let settled =
            twist.v.abs() < settings.settle_speed.0 && twist.omega.abs() < settings.settle_speed.1;
        if scenario.tolerance.reached(&pose, &scenario.goal) && settled {
            samples.push(sample(&sim, Twist::ZERO));
            return finish(samples, initial.clone(), None, replans, stuck_events);
        }
        if sim.time() >= scenario.timeout - 1e-9 {
            samples.push(sample(&sim, Twist::ZERO));
            return finish(
                samples,
                initial.clone(),
                Some(Failure::Timeout),
                replans,
                stuck_events,
            );
        }

        let mut scan = sim.scan(&settings.sensor);
        if let Some(n) = noise {
            scan.perturb(|| n.sample(&mut noise_rng));
        }
        let sensed = scan.hit_points(&pose);
        let ctx = PlanningContext {
            time: sim.time(),
            pose,
            twist,
            obstacles: &sensed,
            path: &path,
            goal: scenario.goal,
            tolerance: scenario.tolerance,
            dt: DT_CTRL,
        };
        let cmd = match planner.compute(&ctx) {
            Ok(cmd) => cmd,
            Err(PlannerError::Stuck(reason)) => {
                stuck_events.push((sim.time(), reason));
                let distance = pose.distance_to(&scenario.goal);
                if last_stuck_distance - distance >= REPLAN_PROGRESS {
                    consecutive_stuck = 0;
                }
                consecutive_stuck += 1;
                last_stuck_distance = last_stuck_distance.min(distance);
                if consecutive_stuck > settings.max_replans {
                    samples.push(sample(&sim, Twist::ZERO));
                    return finish(
                        samples,
                        initial.clone(),
                        Some(Failure::Stuck),
                        replans,
                        stuck_events,
                    );
                }
                replans += 1;
                if let Ok(p) = replan(scenario, &sensed, &pose, &robot) {
                    path = p;
                }
                planner.reset();
                Twist::ZERO
            }
        };
        samples.push(sample(&sim, cmd));
        if sim.step_control(cmd).is_err() {
            samples.push(sample(&sim, Twist::ZERO));
            return finish(
                samples,
                initial.clone(),
                Some(Failure::Collision),
                replans,
                stuck_events,
            );
        }
    }
}

/// Draws a fresh seed for each repetition of a base seed.
pub fn repetition_seed(base: u64, repetition: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    let mut seed = rng.random::<u64>();
    for _ in 0..repetition {
        seed = rng.random();
    }
    seed
}
