use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use manip_bench::campaign::{emit, run_campaign};
use manip_bench::config::{CampaignConfig, ConfigError};
use manip_bench::io::{ingest_log, read_path_points, write_plot_series, IngestError};
use manip_bench::scenario::{builtin, builtin_ids};
use manip_bench::trial::PlannerKind;
use manip_bench_core::geometry::Pose2D;
use manip_bench_core::metrics::partial_report;

#[derive(Parser)]
#[command(
    name = "manip-bench",
    version,
    about = "Local-planner benchmark for mobile manipulators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write summaries, trial rows, logs and plot series.
    Run {
        /// Campaign file (TOML); built-in defaults when omitted.
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repetitions: Option<usize>,
        /// Repeat to select several planners.
        #[arg(long = "planner")]
        planners: Vec<PlannerKind>,
        /// Repeat to select several scenarios.
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compute the metrics of a recorded log and print them as JSON.
    Score {
        log: PathBuf,
        /// Goal position `x,y`; overrides the log's metadata.
        #[arg(long, value_parser = parse_xy)]
        goal: Option<(f64, f64)>,
        /// CSV with `x,y` columns; overrides the log's metadata.
        #[arg(long)]
        global_path: Option<PathBuf>,
        /// Score the run as failed.
        #[arg(long)]
        failed: bool,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Write plot-ready series for a recorded log.
    ExportPlots {
        log: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

fn parse_xy(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected `x,y`")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(x)?, num(y)?))
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            config,
            seed,
            repetitions,
            planners,
            scenarios,
            out,
            workers,
        } => {
            let mut cfg = match &config {
                Some(path) => CampaignConfig::load(path)?,
                None => CampaignConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.repetitions = repetitions.unwrap_or(cfg.repetitions);
            cfg.workers = workers.unwrap_or(cfg.workers);
            if !planners.is_empty() {
                cfg.planners = planners;
            }
            if !scenarios.is_empty() {
                cfg.scenarios = scenarios;
            }
            cfg.validate()?;
            let specs = cfg.specs();
            eprintln!(
                "running {} trials on {} worker(s)",
                specs.len(),
                cfg.workers
            );
            let campaign = run_campaign(&specs, &cfg.scenario_set(), &cfg.settings(), cfg.workers)
                .map_err(|e| Failure::Config(e.to_string()))?;
            emit(&campaign, &out).map_err(io_failure(&out))?;
            for c in &campaign.summary.cells {
                let t = c
                    .metrics
                    .t_taken
                    .mean
                    .map_or("-".into(), |t| format!("{t:.2}"));
                eprintln!(
                    "{:<20} {:<4} {}/{} succeeded, mean T_taken {t}",
                    c.scenario, c.planner, c.successes, c.trials
                );
            }
            eprintln!("results in {}", out.display());
            Ok(())
        }
        Command::Score {
            log,
            goal,
            global_path,
            failed,
        } => {
            let mut trajectory = ingest_log(&log)?;
            if let Some((x, y)) = goal {
                trajectory.goal = Pose2D::new(x, y, trajectory.goal.theta);
            }
            if let Some(path) = global_path {
                trajectory.global_path = read_path_points(&path)?;
            }
            if failed {
                trajectory.success = false;
            }
            let report = partial_report(&trajectory).map_err(|e| Failure::Config(e.to_string()))?;
            let json = serde_json::to_string_pretty(&report).expect("reports serialize");
            let _ = writeln!(std::io::stdout(), "{json}");
            Ok(())
        }
        Command::ListScenarios => {
            let mut out = std::io::stdout().lock();
            for id in builtin_ids() {
                let s = builtin(id).expect("built-in ids resolve");
                let unmapped = s.obstacles.iter().filter(|o| !o.mapped).count();
                let _ = writeln!(
                    out,
                    "{id:<20} start ({:.2}, {:.2})  goal ({:.2}, {:.2})  obstacles {} ({unmapped} unmapped){}",
                    s.start.x,
                    s.start.y,
                    s.goal.x,
                    s.goal.y,
                    s.obstacles.len(),
                    if s.arm.is_some() { "  moving arm" } else { "" },
                );
            }
            Ok(())
        }
        Command::ExportPlots { log, out } => {
            let trajectory = ingest_log(&log)?;
            std::fs::create_dir_all(&out).map_err(io_failure(&out))?;
            let stem = log
                .file_stem()
                .map_or("log".into(), |s| s.to_string_lossy().into_owned());
            write_plot_series(&trajectory, &out, &stem).map_err(io_failure(&out))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
