//! Kinetic wealth-exchange simulation and income-distribution analysis.
//!
//! The crate is organised around five pieces:
//!
//! - [`engine`]: seeded Monte Carlo pairwise money exchange (DY, CC and CCM variants).
//! - [`open_system`]: perturbation operators (inflation, injections, unemployment,
//!   sector transfers, agent entry/exit) and the event schedule that drives them.
//! - [`analysis`]: CCDFs, histograms, Pareto-tail fits, relative CCDFs, Gini,
//!   mode counting, KS distances and α time series.
//! - [`ingest`]: validated reading of delimited income tables.
//! - [`persist`]: deterministic table writers and run manifests.

pub mod analysis;
pub mod engine;
pub mod ingest;
pub mod open_system;
pub mod persist;

mod numeric;

pub use analysis::{Ccdf, Histogram, RelativeCurve, Sample, TailFit};
pub use engine::{ModelSpec, Population, RunConfig, Snapshot};
pub use open_system::{Event, Operator, Schedule};
