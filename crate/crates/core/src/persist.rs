//! Deterministic table writers and run manifests.
//!
//! Every real number is rendered with 17 significant digits in scientific
//! notation (`{:.16e}`), which round-trips an `f64` exactly. Files are first
//! written under a `.incomplete` suffix and only renamed into place once the
//! whole output set succeeded; an abandoned set removes its staged files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{AlphaPoint, Ccdf, Histogram, RelativeCurve, Sample};
use crate::engine::Snapshot;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.toml";
const STAGING_SUFFIX: &str = ".incomplete";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("checksum mismatch for {file}: manifest {expected}, file {actual}")]
    ChecksumMismatch {
        file: String,
        expected: String,
        actual: String,
    },
}

pub type Result<T, E = PersistError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// A group of files committed together into one directory.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    staged: Vec<(String, PathBuf)>,
    checksums: BTreeMap<String, String>,
    committed: bool,
}

impl OutputSet {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self {
            dir,
            staged: Vec::new(),
            checksums: BTreeMap::new(),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Stages `name`, filling it through `render`, and records its SHA-256.
    pub fn write<F>(&mut self, name: &str, render: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        let temp = self.dir.join(format!("{name}{STAGING_SUFFIX}"));
        self.staged.push((name.to_string(), temp.clone()));
        let file = File::create(&temp).map_err(io_err(&temp))?;
        let mut w = HashingWriter {
            inner: BufWriter::new(file),
            hasher: Sha256::new(),
        };
        render(&mut w).map_err(io_err(&temp))?;
        w.flush().map_err(io_err(&temp))?;
        self.checksums
            .insert(name.to_string(), hex::encode(w.hasher.finalize()));
        Ok(())
    }

    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.checksums
    }

    /// Renames every staged file into place.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.staged.len());
        for (name, temp) in &self.staged {
            let target = self.dir.join(name);
            fs::rename(temp, &target).map_err(io_err(&target))?;
            done.push(target);
        }
        self.committed = true;
        Ok(done)
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            for (_, temp) in &self.staged {
                let _ = fs::remove_file(temp);
            }
        }
    }
}

/// One row per `(snapshot, sweep, agent, income)`. The snapshot ordinal
/// separates a cadence snapshot from a post-event one taken at the same sweep.
pub fn render_snapshot_table(snapshots: &[Snapshot], w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "snapshot,sweep,post_event,agent,income")?;
    for (k, s) in snapshots.iter().enumerate() {
        let flag = u8::from(s.post_event);
        for (agent, x) in s.incomes.iter().enumerate() {
            writeln!(
                w,
                "{k},{},{flag},{agent},{}",
                s.sweep_index,
                format_number(*x)
            )?;
        }
    }
    Ok(())
}

pub fn render_sample_table(sample: &Sample, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "income,weight")?;
    for (i, x) in sample.values().iter().enumerate() {
        writeln!(
            w,
            "{},{}",
            format_number(*x),
            format_number(sample.weight(i))
        )?;
    }
    Ok(())
}

pub fn render_ccdf_table(ccdf: &Ccdf, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "x,Q")?;
    for (x, q) in ccdf.points() {
        writeln!(w, "{},{}", format_number(x), format_number(q))?;
    }
    Ok(())
}

/// Failed fits stay in the table as `gap` rows with empty numeric fields.
pub fn render_alpha_series<T: Display>(
    series: &[AlphaPoint<T>],
    w: &mut dyn Write,
) -> io::Result<()> {
    writeln!(w, "t,alpha,stderr,x_min,n_tail,status")?;
    for p in series {
        match &p.fit {
            Ok(f) => writeln!(
                w,
                "{},{},{},{},{},ok",
                p.t,
                format_number(f.alpha),
                format_number(f.stderr),
                format_number(f.x_min),
                f.n_tail
            )?,
            Err(_) => writeln!(w, "{},,,,,gap", p.t)?,
        }
    }
    Ok(())
}

/// One row per bin: `lo,hi,density`.
pub fn render_histogram(hist: &Histogram, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "lo,hi,density")?;
    for (edge, d) in hist.edges.windows(2).zip(&hist.densities) {
        writeln!(
            w,
            "{},{},{}",
            format_number(edge[0]),
            format_number(edge[1]),
            format_number(*d)
        )?;
    }
    Ok(())
}

pub fn render_relative_curve(curve: &RelativeCurve, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "x,R")?;
    for (x, r) in curve.points() {
        writeln!(w, "{},{}", format_number(x), format_number(r))?;
    }
    Ok(())
}

pub fn render_gini_series<T: Display>(
    series: &[(T, Option<f64>)],
    w: &mut dyn Write,
) -> io::Result<()> {
    writeln!(w, "t,G")?;
    for (t, g) in series {
        match g {
            Some(g) => writeln!(w, "{t},{}", format_number(*g))?,
            None => writeln!(w, "{t},")?,
        }
    }
    Ok(())
}

fn write_single<F>(path: &Path, render: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| PersistError::Manifest(format!("{} is not a file path", path.display())))?
        .to_string_lossy()
        .into_owned();
    let mut set = OutputSet::new(dir)?;
    set.write(&name, render)?;
    set.commit()?;
    Ok(())
}

pub fn write_snapshot_table(snapshots: &[Snapshot], path: impl AsRef<Path>) -> Result<()> {
    if snapshots.is_empty() {
        return Err(PersistError::EmptyInput("no snapshots to write".into()));
    }
    write_single(path.as_ref(), |w| render_snapshot_table(snapshots, w))
}

pub fn write_sample_table(sample: &Sample, path: impl AsRef<Path>) -> Result<()> {
    write_single(path.as_ref(), |w| render_sample_table(sample, w))
}

/// The analysis artifacts of a run; absent members are not written.
#[derive(Debug, Clone, Default)]
pub struct AnalysisTables {
    pub ccdf: Option<Ccdf>,
    pub alpha: Option<Vec<AlphaPoint<String>>>,
    pub relative: Option<RelativeCurve>,
    pub gini: Option<Vec<(String, Option<f64>)>>,
}

impl AnalysisTables {
    pub fn is_empty(&self) -> bool {
        self.ccdf.is_none()
            && self.alpha.is_none()
            && self.relative.is_none()
            && self.gini.is_none()
    }

    /// Stages `<prefix>ccdf.csv`, `<prefix>alpha.csv`, `<prefix>relative.csv`
    /// and `<prefix>gini.csv` for whichever tables are present.
    pub fn stage(&self, set: &mut OutputSet, prefix: &str) -> Result<()> {
        if let Some(c) = &self.ccdf {
            set.write(&format!("{prefix}ccdf.csv"), |w| render_ccdf_table(c, w))?;
        }
        if let Some(a) = &self.alpha {
            set.write(&format!("{prefix}alpha.csv"), |w| render_alpha_series(a, w))?;
        }
        if let Some(r) = &self.relative {
            set.write(&format!("{prefix}relative.csv"), |w| {
                render_relative_curve(r, w)
            })?;
        }
        if let Some(g) = &self.gini {
            set.write(&format!("{prefix}gini.csv"), |w| render_gini_series(g, w))?;
        }
        Ok(())
    }
}

/// Writes the analysis tables plus a manifest into `dir`.
pub fn write_analysis_tables<C: Serialize>(
    results: &AnalysisTables,
    dir: impl Into<PathBuf>,
    prefix: &str,
    config: &C,
) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(PersistError::EmptyInput(
            "no analysis results to write".into(),
        ));
    }
    let mut set = OutputSet::new(dir)?;
    results.stage(&mut set, prefix)?;
    let manifest = RunManifest::new(config, set.checksums().clone());
    stage_manifest(&mut set, &manifest)?;
    set.commit()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub finished_unix_seconds: u64,
    pub elapsed_seconds: f64,
}

impl WallClock {
    pub fn since(start: std::time::Instant) -> Self {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            finished_unix_seconds: now,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// Run provenance: the config echo, the artifact version and the SHA-256 of
/// every emitted file. Wall-clock data is opt-in because it would make
/// otherwise identical replays produce different manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest<C> {
    pub manifest_version: String,
    pub config: C,
    pub files: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<WallClock>,
}

impl<C> RunManifest<C> {
    pub fn new(config: C, files: BTreeMap<String, String>) -> Self {
        Self {
            manifest_version: ARTIFACT_VERSION.to_string(),
            config,
            files,
            wall_clock: None,
        }
    }
}

pub fn render_manifest<C: Serialize>(manifest: &RunManifest<C>) -> Result<String> {
    toml::to_string(manifest).map_err(|e| PersistError::Manifest(e.to_string()))
}

pub fn stage_manifest<C: Serialize>(set: &mut OutputSet, manifest: &RunManifest<C>) -> Result<()> {
    let text = render_manifest(manifest)?;
    set.write(MANIFEST_FILE, |w| w.write_all(text.as_bytes()))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Recomputes the checksum of every file listed in the manifest at
/// `manifest_path`, resolving names against the manifest's directory.
pub fn verify_manifest(manifest_path: impl AsRef<Path>) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let doc: toml::Table =
        toml::from_str(&text).map_err(|e| PersistError::Manifest(e.to_string()))?;
    let files = doc
        .get("files")
        .and_then(|v| v.as_table())
        .ok_or_else(|| PersistError::Manifest("no [files] table".into()))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    for (name, expected) in files {
        let expected = expected
            .as_str()
            .ok_or_else(|| PersistError::Manifest(format!("checksum of {name} is not a string")))?;
        let actual = sha256_file(dir.join(name))?;
        if actual != expected {
            return Err(PersistError::ChecksumMismatch {
                file: name.clone(),
                expected: expected.to_string(),
                actual,
            });
        }
    }
    Ok(())
}
