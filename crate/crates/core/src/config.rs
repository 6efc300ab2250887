//! Scenario files: TOML with `[world]`, `[sensor]`, `[regions]`, `[planner]`
//! and `[mission]` tables. Unknown keys are errors and missing keys take the
//! library defaults. Overrides are applied on top of the parsed file, first
//! from `TOPEX__SECTION__KEY` environment variables, then from explicit
//! `section.key=value` pairs, later ones winning.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::knowledge::SensorConfig;
use crate::mission::{MissionConfig, MissionError, PlannerKind, RegionConfig};
use crate::planning::PlannerParams;
use crate::world::{WorldKind, WorldSpec};

/// Prefix of environment overrides; `TOPEX__MISSION__TIME_BUDGET=60` sets
/// `mission.time_budget`.
pub const ENV_PREFIX: &str = "TOPEX__";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{source_name} line {line}, column {column}: {msg}")]
    Parse { source_name: String, line: usize, column: usize, msg: String },
    #[error("override `{text}`: {msg}")]
    Override { text: String, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Invalid(#[from] MissionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldSection {
    pub kind: WorldKind,
    pub seed: u64,
    /// Outer extent in meters, shell included.
    pub size: [f64; 3],
    pub resolution: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spawn: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self::from_spec(&WorldSpec::default())
    }
}

impl WorldSection {
    fn from_spec(w: &WorldSpec) -> Self {
        Self {
            kind: w.kind,
            seed: w.seed,
            size: w.size.to_array(),
            resolution: w.resolution,
            spawn: w.spawn.map(Vec3::to_array),
            file: w.file.clone(),
        }
    }

    fn to_spec(&self) -> WorldSpec {
        WorldSpec {
            kind: self.kind,
            seed: self.seed,
            size: Vec3::from_array(self.size),
            resolution: self.resolution,
            spawn: self.spawn.map(Vec3::from_array),
            file: self.file.clone(),
        }
    }
}

/// Region parameters; absent keys derive from the world resolution and the
/// detection range.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_dirs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_cluster: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_cluster_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_near: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionSection {
    pub planner: PlannerKind,
    pub max_speed: f64,
    pub tick_dt: f64,
    pub time_budget: f64,
    pub stuck_ticks: usize,
    pub metrics_window: f64,
}

impl Default for MissionSection {
    fn default() -> Self {
        let m = MissionConfig::default();
        Self {
            planner: m.planner_kind,
            max_speed: m.max_speed,
            tick_dt: m.tick_dt,
            time_budget: m.time_budget,
            stuck_ticks: m.stuck_ticks,
            metrics_window: m.metrics_window,
        }
    }
}

/// A parsed scenario file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub world: WorldSection,
    pub sensor: SensorConfig,
    pub regions: RegionsSection,
    pub planner: PlannerParams,
    pub mission: MissionSection,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl Scenario {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse { source_name: source_name.to_string(), line, column, msg: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Applies `(section.key, value)` pairs in order. Values are read as TOML
    /// literals, falling back to a bare string.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<(), ConfigError> {
        for (key, value) in overrides {
            let text = format!("{key}={value}");
            let err = |msg: String| ConfigError::Override { text: text.clone(), msg };
            let (section, field) = key.split_once('.').ok_or_else(|| err("key must be section.key".into()))?;
            let mut root = toml::Table::try_from(&*self).map_err(|e| err(e.to_string()))?;
            let table = root
                .entry(section)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| err(format!("unknown section `{section}`")))?;
            table.insert(field.to_string(), parse_value(value));
            *self = toml::Value::Table(root).try_into().map_err(|e: toml::de::Error| err(e.message().to_string()))?;
        }
        Ok(())
    }

    /// Resolves defaults and validates.
    pub fn to_mission_config(&self) -> Result<MissionConfig, ConfigError> {
        let world = self.world.to_spec();
        let d = RegionConfig::derived(world.resolution, self.sensor.zeta_detect);
        let r = &self.regions;
        let ds = r.ds.unwrap_or(d.ds);
        let regions = RegionConfig {
            coverage_dirs: r.coverage_dirs.unwrap_or(d.coverage_dirs),
            ds,
            // cluster distance tracks an overridden ds
            d_cluster: r.d_cluster.unwrap_or(2.0 * ds),
            min_cluster_size: r.min_cluster_size.unwrap_or(d.min_cluster_size),
            r_near: r.r_near.unwrap_or(d.r_near),
            visibility_fraction: r.visibility_fraction.unwrap_or(d.visibility_fraction),
        };
        let m = &self.mission;
        let cfg = MissionConfig {
            world,
            sensor: self.sensor.clone(),
            regions,
            planner: self.planner.clone(),
            planner_kind: m.planner,
            max_speed: m.max_speed,
            tick_dt: m.tick_dt,
            time_budget: m.time_budget,
            stuck_ticks: m.stuck_ticks,
            metrics_window: m.metrics_window,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The fully resolved scenario of a config, every key explicit.
    pub fn effective(cfg: &MissionConfig) -> Self {
        let r = &cfg.regions;
        Self {
            world: WorldSection::from_spec(&cfg.world),
            sensor: cfg.sensor.clone(),
            regions: RegionsSection {
                coverage_dirs: Some(r.coverage_dirs),
                ds: Some(r.ds),
                d_cluster: Some(r.d_cluster),
                min_cluster_size: Some(r.min_cluster_size),
                r_near: Some(r.r_near),
                visibility_fraction: Some(r.visibility_fraction),
            },
            planner: cfg.planner.clone(),
            mission: MissionSection {
                planner: cfg.planner_kind,
                max_speed: cfg.max_speed,
                tick_dt: cfg.tick_dt,
                time_budget: cfg.time_budget,
                stuck_ticks: cfg.stuck_ticks,
                metrics_window: cfg.metrics_window,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are all TOML-representable")
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Splits `section.key=value`.
pub fn parse_override(text: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| ConfigError::Override { text: text.to_string(), msg: "expected section.key=value".into() })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Overrides from `TOPEX__SECTION__KEY=value` variables, sorted by key.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            let (section, key) = rest.split_once("__")?;
            Some((format!("{}.{}", section.to_lowercase(), key.to_lowercase()), v))
        })
        .collect();
    out.sort();
    out
}
