//! Scenario files.
//!
//! A scenario is one TOML document holding everything needed to replay a run.
//! A run manifest is accepted too: its `config` table is the scenario it
//! echoes.

use std::fs;
use std::path::{Path, PathBuf};

use kinex_core::analysis::FitConfig;
use kinex_core::engine::{InitPolicy, ModelSpec, RunConfig};
use kinex_core::open_system::{Event, Schedule};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Mandatory: there is no clock-derived default.
    pub seed: u64,
    pub agents: usize,
    pub total_money: f64,
    pub sweeps: u64,
    pub snapshot_every: u64,
    pub model: ModelSpec,
    #[serde(default = "default_init")]
    pub init: InitPolicy,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_init() -> InitPolicy {
    InitPolicy::Equal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub snapshots: SnapshotSelection,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshots: SnapshotSelection::All,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Which snapshots go into `snapshots.csv`. Analysis always sees all of them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotSelection {
    #[default]
    All,
    Final,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Ccdf,
    Alpha,
    Relative,
    Gini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub tables: Vec<Table>,
    #[serde(default)]
    pub fit: FitConfig,
    /// Snapshot behind the CCDF table and the numerator of the relative curve.
    #[serde(default = "default_target")]
    pub target: SnapshotRef,
    /// Denominator of the relative curve.
    #[serde(default = "default_reference")]
    pub reference: Reference,
    /// Whether the CCDF table is a fraction (true) or a head count (false).
    #[serde(default = "default_normalized")]
    pub normalized: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tables: Vec::new(),
            fit: FitConfig::default(),
            target: default_target(),
            reference: default_reference(),
            normalized: default_normalized(),
        }
    }
}

fn default_target() -> SnapshotRef {
    SnapshotRef::Snapshot(-1)
}

fn default_reference() -> Reference {
    Reference::Snapshot(0)
}

fn default_normalized() -> bool {
    true
}

/// A snapshot of the run being analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotRef {
    /// Position in `snapshots.csv`; negative values count from the end.
    Snapshot(i64),
    /// The cadence snapshot taken after this many sweeps.
    Sweep(u64),
    /// The snapshot taken right after the events of this sweep fired.
    AfterEvents(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    Snapshot(i64),
    Sweep(u64),
    AfterEvents(u64),
    /// An income table on disk, resolved against the working directory.
    Sample(PathBuf),
}

impl ScenarioConfig {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            agent_count: self.agents,
            total_money: self.total_money,
            model: self.model,
            init: self.init.clone(),
            seed: self.seed,
            sweeps: self.sweeps,
            snapshot_every: self.snapshot_every,
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::new(self.events.clone())
    }

    /// Everything that can be checked before the run starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.run_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.schedule()
            .validate(self.sweeps)
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.analysis
            .fit
            .xmin
            .validate()
            .map_err(|e| CliError::Config(format!("analysis.fit: {e}")))?;
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    let doc: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let doc = if doc.contains_key("manifest_version") {
        match doc.get("config") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => return Err(CliError::Config("manifest has no [config] table".into())),
        }
    } else {
        doc
    };
    doc.try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
}

pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use kinex_core::open_system::{Operator, Threshold};

    const MINIMAL: &str = r#"
seed = 7
agents = 100
total_money = 1000.0
sweeps = 10
snapshot_every = 5

[model]
kind = "cc"
lambda = 0.5
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.init, InitPolicy::Equal);
        assert!(c.events.is_empty());
        assert_eq!(c.output.dir, PathBuf::from("out"));
        assert_eq!(c.analysis.target, SnapshotRef::Snapshot(-1));
        c.validate().unwrap();
    }

    #[test]
    fn seed_is_required() {
        let text = MINIMAL.replace("seed = 7", "");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn events_parse() {
        let text = format!(
            "{MINIMAL}\n[[events]]\nat_sweep = 5\nkind = \"unemployment\"\nfraction = 0.8\nthreshold = {{ percentile = 0.2 }}\n"
        );
        let c = parse(&text).unwrap();
        assert_eq!(
            c.events[0].operator,
            Operator::Unemployment {
                fraction: 0.8,
                threshold: Threshold::Percentile(0.2)
            }
        );
    }

    #[test]
    fn round_trips_through_toml() {
        let text = format!(
            "{MINIMAL}\n[analysis]\ntables = [\"alpha\", \"relative\"]\nreference = {{ sample = \"ref.csv\" }}\n\n[[events]]\nat_sweep = 10\nkind = \"money-injection\"\namount = 5.0\npolicy = \"band-targeted\"\nband = {{ lo = 0.0, hi = 0.5 }}\n"
        );
        let c = parse(&text).unwrap();
        let echoed = toml::to_string(&c).unwrap();
        assert_eq!(parse(&echoed).unwrap(), c);
    }

    #[test]
    fn manifest_config_table_is_accepted() {
        let c = parse(MINIMAL).unwrap();
        #[derive(Serialize)]
        struct M<'a> {
            manifest_version: &'a str,
            config: &'a ScenarioConfig,
        }
        let text = toml::to_string(&M {
            manifest_version: "0.1.0",
            config: &c,
        })
        .unwrap();
        assert_eq!(parse(&text).unwrap(), c);
    }

    #[test]
    fn bad_schedule_is_a_config_error() {
        let text =
            format!("{MINIMAL}\n[[events]]\nat_sweep = 99\nkind = \"inflation\"\nrate = 0.1\n");
        let c = parse(&text).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }
}
