//! Batches of trials and their per-cell aggregation.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use manip_bench_core::metrics::{MetricField, MetricsReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{write_log, write_plot_series, LogMeta, CONVENTIONS};
use crate::scenario::Scenario;
use crate::trial::{
    repetition_seed, run_trial, PlannerKind, TrialOutcome, TrialSettings, TrialSpec,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CampaignError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("planner `{0}` cannot be simulated")]
    NotSimulated(PlannerKind),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Scenario-major, then planner, then repetition. Every planner sees the same seeds.
pub fn expand_specs(
    scenarios: &[String],
    planners: &[PlannerKind],
    seed: u64,
    repetitions: usize,
) -> Vec<TrialSpec> {
    let mut specs = Vec::with_capacity(scenarios.len() * planners.len() * repetitions);
    for scenario in scenarios {
        for planner in planners {
            for r in 0..repetitions {
                specs.push(TrialSpec {
                    scenario: scenario.clone(),
                    planner: *planner,
                    seed: repetition_seed(seed, r as u64),
                });
            }
        }
    }
    specs
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    /// In spec order.
    pub outcomes: Vec<TrialOutcome>,
    pub summary: CampaignSummary,
}

/// Runs every spec on up to `workers` threads. Trials that cannot start become failure
/// entries; results come back in spec order whatever the completion order.
pub fn run_campaign(
    specs: &[TrialSpec],
    scenarios: &BTreeMap<String, Scenario>,
    settings: &TrialSettings,
    workers: usize,
) -> Result<Campaign, CampaignError> {
    for spec in specs {
        if spec.planner == PlannerKind::ExternalLog {
            return Err(CampaignError::NotSimulated(spec.planner));
        }
        if !scenarios.contains_key(&spec.scenario) {
            return Err(CampaignError::UnknownScenario(spec.scenario.clone()));
        }
    }
    let one = |spec: &TrialSpec| {
        run_trial(spec, &scenarios[&spec.scenario], settings)
            .unwrap_or_else(|_| TrialOutcome::invalid(spec))
    };
    let outcomes: Vec<TrialOutcome> = if workers <= 1 {
        specs.iter().map(one).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CampaignError::Pool(e.to_string()))?
            .install(|| specs.par_iter().map(one).collect())
    };
    let summary = summarize(&outcomes);
    Ok(Campaign { outcomes, summary })
}

/// Mean and sample standard deviation over the trials that define a metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self {
            n,
            mean: Some(mean),
            std: Some(std),
        }
    }
}

/// One table cell per metric, in results-table column order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricStats {
    pub p_s: Stat,
    pub p_e_x: Stat,
    pub p_e_y: Stat,
    pub p_e_z: Stat,
    pub d_travelled: Stat,
    #[serde(rename = "A_between")]
    pub a_between: Stat,
    pub p_acc: Stat,
    #[serde(rename = "T_taken")]
    pub t_taken: Stat,
}

impl MetricStats {
    pub fn get(&self, field: MetricField) -> &Stat {
        match field {
            MetricField::PathSmoothness => &self.p_s,
            MetricField::EeStabilityX => &self.p_e_x,
            MetricField::EeStabilityY => &self.p_e_y,
            MetricField::EeStabilityZ => &self.p_e_z,
            MetricField::DistanceTravelled => &self.d_travelled,
            MetricField::AreaBetween => &self.a_between,
            MetricField::FinalAccuracy => &self.p_acc,
            MetricField::TimeTaken => &self.t_taken,
        }
    }

    fn get_mut(&mut self, field: MetricField) -> &mut Stat {
        match field {
            MetricField::PathSmoothness => &mut self.p_s,
            MetricField::EeStabilityX => &mut self.p_e_x,
            MetricField::EeStabilityY => &mut self.p_e_y,
            MetricField::EeStabilityZ => &mut self.p_e_z,
            MetricField::DistanceTravelled => &mut self.d_travelled,
            MetricField::AreaBetween => &mut self.a_between,
            MetricField::FinalAccuracy => &mut self.p_acc,
            MetricField::TimeTaken => &mut self.t_taken,
        }
    }

    /// Statistics over the successful reports only.
    pub fn over(reports: &[MetricsReport]) -> Self {
        let mut stats = Self::default();
        for field in MetricField::ALL {
            let values: Vec<f64> = reports
                .iter()
                .filter(|r| r.success)
                .filter_map(|r| r.get(field))
                .collect();
            *stats.get_mut(field) = Stat::of(&values);
        }
        stats
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scenario: String,
    pub planner: PlannerKind,
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    /// Failure count per cause.
    pub failure_causes: BTreeMap<String, usize>,
    pub metrics: MetricStats,
}

impl CellSummary {
    /// Every trial failed: the row renders as dashes.
    pub fn is_dash(&self) -> bool {
        self.successes == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub conventions: Vec<String>,
    /// One per (scenario, planner), in order of first appearance.
    pub cells: Vec<CellSummary>,
}

impl CampaignSummary {
    pub fn cell(&self, scenario: &str, planner: PlannerKind) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.planner == planner)
    }
}

pub fn summarize(outcomes: &[TrialOutcome]) -> CampaignSummary {
    let mut keys: Vec<(String, PlannerKind)> = Vec::new();
    for o in outcomes {
        let key = (o.spec.scenario.clone(), o.spec.planner);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let cells = keys
        .into_iter()
        .map(|(scenario, planner)| {
            let members: Vec<&TrialOutcome> = outcomes
                .iter()
                .filter(|o| o.spec.scenario == scenario && o.spec.planner == planner)
                .collect();
            let reports: Vec<MetricsReport> = members.iter().map(|o| o.report).collect();
            let mut failure_causes = BTreeMap::new();
            for f in members.iter().filter_map(|o| o.failure) {
                *failure_causes.entry(f.name().to_string()).or_insert(0) += 1;
            }
            let successes = members.iter().filter(|o| o.success()).count();
            CellSummary {
                scenario,
                planner,
                trials: members.len(),
                successes,
                failures: members.len() - successes,
                failure_causes,
                metrics: MetricStats::over(&reports),
            }
        })
        .collect();
    CampaignSummary {
        conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        cells,
    }
}

fn cell_text(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

pub fn write_summary_json<W: Write>(summary: &CampaignSummary, mut out: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut out, summary).map_err(io::Error::other)?;
    writeln!(out)
}

/// Mean and std per metric in results-table column order; `-` marks an empty cell.
pub fn write_summary_csv<W: Write>(summary: &CampaignSummary, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["scenario", "planner", "trials", "successes", "failures"]
        .map(String::from)
        .to_vec();
    for field in MetricField::ALL {
        header.push(field.column().to_string());
        header.push(format!("{}_std", field.column()));
    }
    w.write_record(&header)?;
    for c in &summary.cells {
        let mut row = vec![
            c.scenario.clone(),
            c.planner.to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            c.failures.to_string(),
        ];
        for field in MetricField::ALL {
            let s = c.metrics.get(field);
            row.push(cell_text(s.mean));
            row.push(cell_text(s.std));
        }
        w.write_record(&row)?;
    }
    w.flush()
}

/// One row per trial with its metrics; failed trials show dashes except `T_taken`.
pub fn write_trials_csv<W: Write>(outcomes: &[TrialOutcome], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "trial", "scenario", "planner", "seed", "success", "failure", "replans",
    ]
    .map(String::from)
    .to_vec();
    header.extend(MetricField::ALL.iter().map(|f| f.column().to_string()));
    header.push("final_distance".into());
    w.write_record(&header)?;
    for (i, o) in outcomes.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            o.spec.scenario.clone(),
            o.spec.planner.to_string(),
            o.spec.seed.to_string(),
            o.success().to_string(),
            o.failure.map_or("-", |f| f.name()).to_string(),
            o.replans.to_string(),
        ];
        row.extend(MetricField::ALL.iter().map(|f| cell_text(o.report.get(*f))));
        row.push(cell_text(o.report.final_distance));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn trial_stem(index: usize, spec: &TrialSpec) -> String {
    format!("trial_{index:04}_{}_{}", spec.scenario, spec.planner)
}

/// Writes `summary.json`, `summary.csv`, `trials.csv`, and per-trial logs under `logs/`
/// and plot series under `plots/`.
pub fn emit(campaign: &Campaign, dir: &Path) -> io::Result<()> {
    let logs = dir.join("logs");
    let plots = dir.join("plots");
    std::fs::create_dir_all(&logs)?;
    std::fs::create_dir_all(&plots)?;
    let create = |name: &str| std::fs::File::create(dir.join(name)).map(io::BufWriter::new);
    write_summary_json(&campaign.summary, create("summary.json")?)?;
    write_summary_csv(&campaign.summary, create("summary.csv")?)?;
    write_trials_csv(&campaign.outcomes, create("trials.csv")?)?;
    for (i, o) in campaign.outcomes.iter().enumerate() {
        let stem = trial_stem(i, &o.spec);
        write_log(
            &o.log,
            &LogMeta::for_outcome(o),
            &logs.join(format!("{stem}.csv")),
        )?;
        write_plot_series(&o.log, &plots, &stem)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_of_constant_values() {
        let s = Stat::of(&[2.5; 7]);
        assert_eq!((s.n, s.mean, s.std), (7, Some(2.5), Some(0.0)));
    }

    #[test]
    fn stat_uses_sample_deviation() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, Some(2.5));
        assert!((s.std.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_stat_is_a_dash() {
        assert_eq!(Stat::of(&[]), Stat::default());
        assert_eq!(cell_text(Stat::default().mean), "-");
    }

    #[test]
    fn specs_pair_seeds_across_planners() {
        let specs = expand_specs(&["a".into()], &[PlannerKind::Dwa, PlannerKind::Teb], 5, 3);
        assert_eq!(specs.len(), 6);
        for r in 0..3 {
            assert_eq!(specs[r].seed, specs[r + 3].seed);
            assert_eq!(
                (specs[r].planner, specs[r + 3].planner),
                (PlannerKind::Dwa, PlannerKind::Teb)
            );
        }
    }

    #[test]
    fn empty_campaign_writes_headers_only() {
        let summary = summarize(&[]);
        let mut csv_out = Vec::new();
        write_summary_csv(&summary, &mut csv_out).unwrap();
        assert_eq!(String::from_utf8(csv_out).unwrap().lines().count(), 1);
        let mut trials = Vec::new();
        write_trials_csv(&[], &mut trials).unwrap();
        assert_eq!(String::from_utf8(trials).unwrap().lines().count(), 1);
    }
}
