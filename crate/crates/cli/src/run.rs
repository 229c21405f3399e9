//! `simulate` and `scenario`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use kinex_core::analysis::{alpha_timeseries, ccdf, gini, relative_ccdf, Sample};
use kinex_core::engine::Snapshot;
use kinex_core::ingest::{read_income_table, IngestOptions};
use kinex_core::open_system::run_scenario;
use kinex_core::persist::{
    render_snapshot_table, stage_manifest, AnalysisTables, OutputSet, RunManifest, WallClock,
};

use crate::config::{self, Reference, ScenarioConfig, SnapshotRef, SnapshotSelection, Table};
use crate::error::CliError;
use crate::Log;

pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub record_time: bool,
    pub log: Log,
}

pub fn simulate(path: &Path, opts: &RunOptions) -> Result<(), CliError> {
    let cfg = config::load(path)?;
    if !cfg.events.is_empty() {
        return Err(CliError::Config(format!(
            "{}: simulate runs closed systems; use `scenario` for a config with events",
            path.display()
        )));
    }
    execute(&cfg, opts)
}

pub fn scenario(path: &Path, opts: &RunOptions) -> Result<(), CliError> {
    let cfg = config::load(path)?;
    execute(&cfg, opts)
}

fn execute(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<(), CliError> {
    cfg.validate()?;
    let started = Instant::now();
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    opts.log.info(format_args!(
        "running {} agents, {} sweeps, model {}, seed {}",
        cfg.agents,
        cfg.sweeps,
        cfg.model.tag(),
        cfg.seed
    ));
    let output = run_scenario(&cfg.run_config(), &cfg.schedule())?;
    let ledger = output.ledger;
    let final_total = output.snapshots.last().map_or(0.0, |s| s.total_money);
    opts.log.info(format_args!(
        "{} snapshots; final total {final_total} (expected {})",
        output.snapshots.len(),
        ledger.expected
    ));

    // Everything is computed before the first byte is written.
    let tables = analysis_tables(cfg, &output.snapshots)?;

    let mut set = OutputSet::new(&dir)?;
    let kept: &[Snapshot] = match cfg.output.snapshots {
        SnapshotSelection::All => &output.snapshots,
        SnapshotSelection::Final => &output.snapshots[output.snapshots.len() - 1..],
        SnapshotSelection::None => &[],
    };
    if !kept.is_empty() {
        set.write("snapshots.csv", |w| render_snapshot_table(kept, w))?;
    }
    tables.stage(&mut set, "")?;
    let mut manifest = RunManifest::new(cfg, set.checksums().clone());
    if opts.record_time {
        manifest.wall_clock = Some(WallClock::since(started));
    }
    stage_manifest(&mut set, &manifest)?;
    let written = set.commit()?;
    for p in &written {
        opts.log.info(format_args!("wrote {}", p.display()));
    }
    Ok(())
}

fn resolve(snapshots: &[Snapshot], r: SnapshotRef) -> Result<&Snapshot, CliError> {
    let found = match r {
        SnapshotRef::Snapshot(i) => {
            let idx = if i < 0 { snapshots.len() as i64 + i } else { i };
            usize::try_from(idx).ok().and_then(|k| snapshots.get(k))
        }
        SnapshotRef::Sweep(t) => snapshots
            .iter()
            .find(|s| s.sweep_index == t && !s.post_event),
        SnapshotRef::AfterEvents(t) => snapshots
            .iter()
            .find(|s| s.sweep_index == t && s.post_event),
    };
    found.ok_or_else(|| CliError::Config(format!("the run has no snapshot matching {r:?}")))
}

fn reference_sample(snapshots: &[Snapshot], r: &Reference) -> Result<Sample, CliError> {
    let r = match r {
        Reference::Snapshot(i) => SnapshotRef::Snapshot(*i),
        Reference::Sweep(t) => SnapshotRef::Sweep(*t),
        Reference::AfterEvents(t) => SnapshotRef::AfterEvents(*t),
        Reference::Sample(path) => {
            return Ok(read_income_table(path, IngestOptions::default())?.pooled());
        }
    };
    Ok(Sample::from(resolve(snapshots, r)?))
}

fn analysis_tables(
    cfg: &ScenarioConfig,
    snapshots: &[Snapshot],
) -> Result<AnalysisTables, CliError> {
    let a = &cfg.analysis;
    let mut tables = AnalysisTables::default();
    let wants = |t: Table| a.tables.contains(&t);
    if wants(Table::Ccdf) {
        let target = Sample::from(resolve(snapshots, a.target)?);
        tables.ccdf = Some(ccdf(&target, a.normalized)?);
    }
    if wants(Table::Alpha) {
        let items = snapshots
            .iter()
            .map(|s| (s.sweep_index.to_string(), Sample::from(s)));
        tables.alpha = Some(alpha_timeseries(items, &a.fit)?);
    }
    if wants(Table::Relative) {
        let target = Sample::from(resolve(snapshots, a.target)?);
        let reference = reference_sample(snapshots, &a.reference)?;
        tables.relative = Some(relative_ccdf(&target, &reference, None)?);
    }
    if wants(Table::Gini) {
        let series = snapshots
            .iter()
            .map(|s| (s.sweep_index.to_string(), gini(&Sample::from(s)).ok()))
            .collect();
        tables.gini = Some(series);
    }
    Ok(tables)
}
