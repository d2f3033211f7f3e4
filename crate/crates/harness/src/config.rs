//! Campaign configuration files.
//!
//! ```toml
//! seed = 7
//! repetitions = 10
//! workers = 4
//! scenarios = ["playground", "office"]
//! planners = ["dwa", "teb"]
//!
//! [robot]
//! v_max = 0.8
//!
//! [dwa]
//! horizon = 2.0
//!
//! [teb]
//! iterations = 8
//!
//! [[scenario]]
//! id = "hall"
//! world = { min = [0.0, 0.0], max = [10.0, 5.0] }
//! start = { x = 1.0, y = 2.5, theta = 0.0 }
//! goal = { x = 9.0, y = 2.5, theta = 0.0 }
//! obstacles = [
//!   { shape = { type = "circle", center = [5.0, 2.5], radius = 0.3 }, mapped = false },
//! ]
//! ```
//!
//! Custom `[[scenario]]` entries join the built-in worlds and may shadow them by id.

use std::collections::BTreeMap;
use std::path::Path;

use manip_bench_core::geometry::RobotSpec;
use manip_bench_core::planner::{DwaConfig, TebConfig};
use manip_bench_core::world::ScanConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::campaign::expand_specs;
use crate::scenario::{builtin, builtin_ids, Scenario};
use crate::trial::{PlannerKind, TrialSettings, TrialSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub workers: usize,
    /// Scenario ids to run; empty means every built-in and custom scenario.
    pub scenarios: Vec<String>,
    pub planners: Vec<PlannerKind>,
    pub robot: RobotSpec,
    pub sensor: ScanConfig,
    pub dwa: DwaConfig,
    /// Defaults derive from `robot` when absent.
    pub teb: Option<TebConfig>,
    pub max_replans: usize,
    #[serde(rename = "scenario")]
    pub custom: Vec<Scenario>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let settings = TrialSettings::standard();
        Self {
            seed: 0,
            repetitions: 10,
            workers: 1,
            scenarios: Vec::new(),
            planners: vec![PlannerKind::Dwa, PlannerKind::Teb],
            robot: settings.robot,
            sensor: settings.sensor,
            dwa: settings.dwa,
            teb: None,
            max_replans: settings.max_replans,
            custom: Vec::new(),
        }
    }
}

impl CampaignConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn settings(&self) -> TrialSettings {
        TrialSettings {
            robot: self.robot,
            sensor: self.sensor,
            dwa: self.dwa,
            teb: self.teb,
            max_replans: self.max_replans,
            ..TrialSettings::standard()
        }
    }

    /// Built-in scenarios overlaid with the custom ones.
    pub fn scenario_set(&self) -> BTreeMap<String, Scenario> {
        let mut set: BTreeMap<String, Scenario> = builtin_ids()
            .map(|id| (id.to_string(), builtin(id).expect("built-in ids resolve")))
            .collect();
        for s in &self.custom {
            set.insert(s.id.clone(), s.clone());
        }
        set
    }

    pub fn scenario_ids(&self) -> Vec<String> {
        if !self.scenarios.is_empty() {
            return self.scenarios.clone();
        }
        let mut ids: Vec<String> = builtin_ids().map(String::from).collect();
        for s in &self.custom {
            if !ids.contains(&s.id) {
                ids.push(s.id.clone());
            }
        }
        ids
    }

    pub fn specs(&self) -> Vec<TrialSpec> {
        expand_specs(
            &self.scenario_ids(),
            &self.planners,
            self.seed,
            self.repetitions,
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.repetitions == 0 {
            return invalid("repetitions must be at least 1".into());
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1".into());
        }
        if self.planners.contains(&PlannerKind::ExternalLog) {
            return invalid("external-log runs are scored with `score`, not simulated".into());
        }
        if let Err(e) = self.robot.validate() {
            return invalid(e.to_string());
        }
        self.dwa.validate().map_err(ConfigError::Invalid)?;
        self.settings()
            .teb_config()
            .validate()
            .map_err(ConfigError::Invalid)?;
        let set = self.scenario_set();
        for id in self.scenario_ids() {
            let Some(s) = set.get(&id) else {
                return invalid(format!("unknown scenario `{id}`"));
            };
            s.validate(&self.robot)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}
