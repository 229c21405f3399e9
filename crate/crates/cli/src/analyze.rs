//! `analyze` and `ingest` subcommands: statistics on income tables.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use kinex_core::analysis::{
    alpha_timeseries, ccdf, gini, pdf_histogram, relative_ccdf, BinScheme, FitConfig,
    HistogramSpec, Sample, TailFit, ZeroHandling,
};
use kinex_core::ingest::{read_income_table, summarize, IngestOptions, Validation};
use kinex_core::persist::{
    format_number, render_alpha_series, render_ccdf_table, render_gini_series, render_histogram,
    render_relative_curve, OutputSet,
};

use crate::error::CliError;
use crate::Log;

/// How input tables are read.
#[derive(Debug, Clone, Default)]
pub struct InputOptions {
    pub lenient: bool,
    /// Grouping column, `period` by default.
    pub by: Option<String>,
}

impl InputOptions {
    fn ingest(&self) -> IngestOptions {
        IngestOptions {
            validation: if self.lenient {
                Validation::Lenient
            } else {
                Validation::Strict
            },
            period_column: self.by.clone(),
        }
    }
}

/// Labelled samples from every input: one per group, or one per file when
/// the file has no grouping column.
pub fn load_groups(
    inputs: &[PathBuf],
    opts: &InputOptions,
    log: &Log,
) -> Result<Vec<(String, Sample)>, CliError> {
    let mut out = Vec::new();
    for path in inputs {
        let report = read_income_table(path, opts.ingest())?;
        if report.rows_dropped > 0 {
            log.warn(format_args!(
                "{}: dropped {} of {} rows",
                path.display(),
                report.rows_dropped,
                report.rows_in
            ));
        }
        for ps in report.samples {
            let label = ps.period.unwrap_or_else(|| path.display().to_string());
            out.push((label, ps.sample));
        }
    }
    Ok(out)
}

/// One sample: the named group, or everything pooled.
pub fn load_one(
    input: &Path,
    period: Option<&str>,
    opts: &InputOptions,
    log: &Log,
) -> Result<Sample, CliError> {
    let report = read_income_table(input, opts.ingest())?;
    if report.rows_dropped > 0 {
        log.warn(format_args!(
            "{}: dropped {} of {} rows",
            input.display(),
            report.rows_dropped,
            report.rows_in
        ));
    }
    match period {
        None => Ok(report.pooled()),
        Some(label) => report
            .samples
            .into_iter()
            .find(|ps| ps.period.as_deref() == Some(label))
            .map(|ps| ps.sample)
            .ok_or_else(|| {
                CliError::Runtime(format!("{}: no group labelled `{label}`", input.display()))
            }),
    }
}

/// Sends a rendered table to `out`, or to standard output.
pub fn emit<F>(out: Option<&Path>, render: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            render(&mut lock)?;
            lock.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let name = path
                .file_name()
                .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?
                .to_string_lossy()
                .into_owned();
            let mut set = OutputSet::new(dir)?;
            set.write(&name, render)?;
            set.commit()?;
        }
    }
    Ok(())
}

pub fn run_ccdf(sample: &Sample, normalized: bool, out: Option<&Path>) -> Result<(), CliError> {
    let c = ccdf(sample, normalized)?;
    emit(out, |w| render_ccdf_table(&c, w))
}

pub struct PdfOptions {
    pub bins: usize,
    pub log_bins: bool,
    pub range: Option<(f64, f64)>,
    pub include_zeros: bool,
}

pub fn run_pdf(
    sample: &Sample,
    opts: &PdfOptions,
    out: Option<&Path>,
    log: &Log,
) -> Result<(), CliError> {
    let scheme = if opts.log_bins {
        BinScheme::Logarithmic
    } else {
        BinScheme::Linear
    };
    let mut spec = HistogramSpec::new(scheme, opts.bins);
    if let Some((lo, hi)) = opts.range {
        spec = spec.with_range(lo, hi);
    }
    if opts.include_zeros {
        spec.zeros = ZeroHandling::IncludeInNormalization;
    }
    let h = pdf_histogram(sample, &spec)?;
    log.info(format_args!(
        "zero mass {}, out of range {}",
        h.zero_mass_fraction, h.out_of_range_fraction
    ));
    emit(out, |w| render_histogram(&h, w))
}

fn render_fit(fit: &TailFit, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "alpha,stderr,amplitude,x_min,n_tail,method")?;
    writeln!(
        w,
        "{},{},{},{},{},{}",
        format_number(fit.alpha),
        format_number(fit.stderr),
        format_number(fit.amplitude),
        format_number(fit.x_min),
        fit.n_tail,
        fit.method.tag()
    )
}

pub fn run_fit(sample: &Sample, config: &FitConfig, out: Option<&Path>) -> Result<(), CliError> {
    let fit = config.fit(sample)?;
    emit(out, |w| render_fit(&fit, w))
}

pub fn run_relative(
    sample: &Sample,
    reference: &Sample,
    out: Option<&Path>,
    log: &Log,
) -> Result<(), CliError> {
    let curve = relative_ccdf(sample, reference, None)?;
    if curve.dropped > 0 {
        log.info(format_args!(
            "{} grid points dropped where the reference CCDF is zero",
            curve.dropped
        ));
    }
    emit(out, |w| render_relative_curve(&curve, w))
}

pub fn run_gini(groups: &[(String, Sample)], out: Option<&Path>) -> Result<(), CliError> {
    let mut series = Vec::with_capacity(groups.len());
    for (label, s) in groups {
        series.push((label.as_str(), Some(gini(s)?)));
    }
    emit(out, |w| render_gini_series(&series, w))
}

pub fn run_alpha(
    groups: Vec<(String, Sample)>,
    config: &FitConfig,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let series = alpha_timeseries(groups, config)?;
    emit(out, |w| render_alpha_series(&series, w))
}

pub fn run_validate(input: &Path, opts: &InputOptions, log: &Log) -> Result<(), CliError> {
    let report = read_income_table(input, opts.ingest())?;
    let s = summarize(&report);
    for issue in &s.issues {
        log.warn(format_args!(
            "{}: line {}: {}",
            input.display(),
            issue.line,
            issue.message
        ));
    }
    let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "rows_in,rows_kept,rows_dropped,periods,min,max,zero_mass_fraction,total_weight"
    )?;
    writeln!(
        stdout,
        "{},{},{},{},{},{},{},{}",
        s.rows_in,
        s.rows_kept,
        s.rows_dropped,
        s.periods,
        opt(s.min),
        opt(s.max),
        opt(s.zero_mass_fraction),
        format_number(s.total_weight)
    )?;
    Ok(())
}
