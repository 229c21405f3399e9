//! Reading survey-style income tables.
//!
//! Input is comma-separated UTF-8 text with one header row. `income` is
//! required; `weight` (default 1) and `period` are optional. Rows are grouped
//! into one [`Sample`] per period label, in order of first appearance. Another
//! column can stand in for `period` through [`IngestOptions::period_column`],
//! which lets a snapshot table be read back one snapshot per group.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::Sample;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("header: {0}")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Validation {
    /// The first bad row aborts the read.
    #[default]
    Strict,
    /// Bad rows are dropped and counted.
    Lenient,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub validation: Validation,
    /// Grouping column; `period` when unset.
    pub period_column: Option<String>,
}

impl IngestOptions {
    pub fn lenient() -> Self {
        Self {
            validation: Validation::Lenient,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSample {
    pub period: Option<String>,
    pub sample: Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub samples: Vec<PeriodSample>,
    pub rows_in: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub issues: Vec<RowIssue>,
}

impl IngestReport {
    /// All kept rows as one sample, ignoring period labels.
    pub fn pooled(&self) -> Sample {
        let mut values = Vec::new();
        let mut weights = Vec::new();
        let mut weighted = false;
        for ps in &self.samples {
            weighted |= ps.sample.is_weighted();
            for i in 0..ps.sample.len() {
                values.push(ps.sample.values()[i]);
                weights.push(ps.sample.weight(i));
            }
        }
        if weighted {
            Sample::weighted(values, weights).expect("rows were validated")
        } else {
            Sample::new(values).expect("rows were validated")
        }
    }
}

pub fn read_income_table(path: impl AsRef<Path>, options: IngestOptions) -> Result<IngestReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_income_table_from(file, options)
}

pub fn read_income_table_from<R: Read>(reader: R, options: IngestOptions) -> Result<IngestReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let income_col = column("income")
        .ok_or_else(|| IngestError::Header("required column `income` is missing".into()))?;
    let weight_col = column("weight");
    let period_col =
        match &options.period_column {
            Some(name) => Some(column(name).ok_or_else(|| {
                IngestError::Header(format!("grouping column `{name}` is missing"))
            })?),
            None => column("period"),
        };

    let mut groups: Vec<(Option<String>, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut rows_in = 0;
    let mut issues = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows_in += 1;
        match parse_row(&record, income_col, weight_col) {
            Ok((income, weight)) => {
                let period = period_col.map(|c| record.get(c).unwrap_or("").to_string());
                let idx = match groups.iter().position(|g| g.0 == period) {
                    Some(i) => i,
                    None => {
                        groups.push((period, Vec::new(), Vec::new()));
                        groups.len() - 1
                    }
                };
                groups[idx].1.push(income);
                groups[idx].2.push(weight);
            }
            Err(message) => match options.validation {
                Validation::Strict => return Err(IngestError::Row { line, message }),
                Validation::Lenient => issues.push(RowIssue { line, message }),
            },
        }
    }

    let samples = groups
        .into_iter()
        .map(|(period, values, weights)| {
            let sample = if weight_col.is_some() {
                Sample::weighted(values, weights)
            } else {
                Sample::new(values)
            }
            .expect("rows were validated");
            PeriodSample { period, sample }
        })
        .collect();
    let rows_dropped = issues.len();
    Ok(IngestReport {
        samples,
        rows_in,
        rows_kept: rows_in - rows_dropped,
        rows_dropped,
        issues,
    })
}

fn parse_row(
    record: &csv::StringRecord,
    income_col: usize,
    weight_col: Option<usize>,
) -> std::result::Result<(f64, f64), String> {
    let field = |c: usize, name: &str| {
        record
            .get(c)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format!("missing `{name}` field"))
    };
    let raw = field(income_col, "income")?;
    let income: f64 = raw
        .parse()
        .map_err(|_| format!("income `{raw}` is not a number"))?;
    if !(income.is_finite() && income >= 0.0) {
        return Err(format!("income {income} must be a non-negative number"));
    }
    let weight = match weight_col {
        Some(c) => {
            let raw = field(c, "weight")?;
            let w: f64 = raw
                .parse()
                .map_err(|_| format!("weight `{raw}` is not a number"))?;
            if !(w.is_finite() && w > 0.0) {
                return Err(format!("weight {w} must be positive"));
            }
            w
        }
        None => 1.0,
    };
    Ok((income, weight))
}

/// Row counts and basic ranges of a table, without any analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub rows_in: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub periods: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub zero_mass_fraction: Option<f64>,
    pub total_weight: f64,
    pub issues: Vec<RowIssue>,
}

pub fn validate(path: impl AsRef<Path>, options: IngestOptions) -> Result<ValidationSummary> {
    let report = read_income_table(path, options)?;
    Ok(summarize(&report))
}

pub fn summarize(report: &IngestReport) -> ValidationSummary {
    let pooled = report.pooled();
    let values = pooled.values();
    let nonempty = !values.is_empty();
    ValidationSummary {
        rows_in: report.rows_in,
        rows_kept: report.rows_kept,
        rows_dropped: report.rows_dropped,
        periods: report.samples.len(),
        min: nonempty.then(|| values.iter().copied().fold(f64::INFINITY, f64::min)),
        max: nonempty.then(|| values.iter().copied().fold(0.0, f64::max)),
        zero_mass_fraction: nonempty.then(|| pooled.zero_mass_fraction()),
        total_weight: pooled.total_weight(),
        issues: report.issues.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, options: IngestOptions) -> Result<IngestReport> {
        read_income_table_from(text.as_bytes(), options)
    }

    #[test]
    fn minimal_table() {
        let r = read("income\n10\n20\n", IngestOptions::default()).unwrap();
        assert_eq!(r.samples.len(), 1);
        assert_eq!(r.samples[0].period, None);
        assert_eq!(r.samples[0].sample.values(), &[10.0, 20.0]);
        assert!(!r.samples[0].sample.is_weighted());
        assert_eq!((r.rows_in, r.rows_kept, r.rows_dropped), (2, 2, 0));
    }

    #[test]
    fn weighted_table() {
        let r = read("income,weight\n10,2\n", IngestOptions::default()).unwrap();
        assert_eq!(r.samples[0].sample.values(), &[10.0]);
        assert_eq!(r.samples[0].sample.weights(), Some(&[2.0][..]));
    }

    #[test]
    fn strict_mode_names_the_line() {
        let err = read("income\n10\n-5\n", IngestOptions::default()).unwrap_err();
        match err {
            IngestError::Row { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("-5"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_counts_drops() {
        let text = "income,weight\n10,1\n-5,1\nabc,1\n7,0\n0,3\n";
        let r = read(text, IngestOptions::lenient()).unwrap();
        assert_eq!(r.rows_in, 5);
        assert_eq!(r.rows_kept, 2);
        assert_eq!(r.rows_dropped, 3);
        assert_eq!(r.rows_in, r.rows_kept + r.rows_dropped);
        assert_eq!(
            r.issues.iter().map(|i| i.line).collect::<Vec<_>>(),
            vec![3, 4, 5]
        );
        assert_eq!(r.samples[0].sample.values(), &[10.0, 0.0]);
    }

    #[test]
    fn periods_group_in_order() {
        let text = "period,income\n2001,1\n2000,2\n2001,3\n";
        let r = read(text, IngestOptions::default()).unwrap();
        let labels: Vec<_> = r
            .samples
            .iter()
            .map(|p| p.period.clone().unwrap())
            .collect();
        assert_eq!(labels, vec!["2001", "2000"]);
        assert_eq!(r.samples[0].sample.values(), &[1.0, 3.0]);
    }

    #[test]
    fn custom_grouping_column() {
        let text = "snapshot,agent,income\n0,0,5\n0,1,5\n1,0,2\n1,1,8\n";
        let options = IngestOptions {
            period_column: Some("snapshot".into()),
            ..IngestOptions::default()
        };
        let r = read(text, options.clone()).unwrap();
        assert_eq!(r.samples.len(), 2);
        assert_eq!(r.samples[1].period.as_deref(), Some("1"));
        assert_eq!(r.samples[1].sample.values(), &[2.0, 8.0]);
        let missing = IngestOptions {
            period_column: Some("year".into()),
            ..options
        };
        assert!(matches!(read(text, missing), Err(IngestError::Header(_))));
    }

    #[test]
    fn missing_income_column() {
        assert!(matches!(
            read("salary\n1\n", IngestOptions::default()),
            Err(IngestError::Header(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_income_table("/nonexistent/table.csv", IngestOptions::default()),
            Err(IngestError::Io { .. })
        ));
    }

    #[test]
    fn summary_reports_ranges() {
        let r = read("income,weight\n0,1\n4,2\n9,1\n", IngestOptions::default()).unwrap();
        let s = summarize(&r);
        assert_eq!(s.min, Some(0.0));
        assert_eq!(s.max, Some(9.0));
        assert_eq!(s.zero_mass_fraction, Some(0.25));
        assert_eq!(s.total_weight, 4.0);
    }
}
