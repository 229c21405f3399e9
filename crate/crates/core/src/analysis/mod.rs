//! Income-distribution statistics.
//!
//! All operations are pure functions of their inputs and work on weighted
//! [`Sample`]s (unit weights by default). The CCDF convention throughout is
//! `Q(x) = P(X ≥ x)`, so the largest observation has `Q > 0`.

mod ccdf;
mod histogram;
mod inequality;
mod ks;
mod modes;
mod relative;
mod sample;
mod series;
mod tail;

use thiserror::Error;

pub use ccdf::{ccdf, Ccdf};
pub use histogram::{pdf_histogram, BinScheme, Histogram, HistogramSpec, ZeroHandling};
pub use inequality::gini;
pub use ks::{ks_distance, ks_distance_to_law};
pub use modes::{count_modes, DEFAULT_MIN_PROMINENCE};
pub use relative::{relative_ccdf, RelativeCurve};
pub use sample::Sample;
pub use series::{alpha_timeseries, AlphaPoint, FitConfig};
pub use tail::{
    fit_pareto_hill, fit_pareto_ls, select_xmin, FitMethod, TailFit, XminMethod,
    DEFAULT_TOP_FRACTION, KS_MIN_TAIL_POINTS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("insufficient tail: need at least {needed} points at or above x_min, found {found}")]
    InsufficientTail { needed: usize, found: usize },
    #[error("reference and sample supports do not overlap on the grid")]
    NoOverlap,
    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no element of the series admitted a tail fit")]
    EmptySeries,
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;
