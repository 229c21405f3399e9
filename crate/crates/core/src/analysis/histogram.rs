use serde::{Deserialize, Serialize};

use super::{AnalysisError, Result, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinScheme {
    Linear,
    Logarithmic,
}

/// How zero incomes enter the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroHandling {
    /// Zeros are left out of the density entirely and reported separately.
    #[default]
    Exclude,
    /// Zeros count in the normalising weight, so the binned density
    /// integrates to `1 − zero_mass_fraction`.
    IncludeInNormalization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec {
    pub scheme: BinScheme,
    pub bins: usize,
    /// Binned support; defaults to `[min positive, max positive]`.
    pub range: Option<(f64, f64)>,
    pub zeros: ZeroHandling,
}

impl HistogramSpec {
    pub fn new(scheme: BinScheme, bins: usize) -> Self {
        Self {
            scheme,
            bins,
            range: None,
            zeros: ZeroHandling::Exclude,
        }
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }
}

/// Binned density over positive incomes.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub scheme: BinScheme,
    /// Weight fraction of the whole sample sitting at zero income.
    pub zero_mass_fraction: f64,
    /// Weight fraction of positive incomes falling outside the binned range.
    pub out_of_range_fraction: f64,
}

impl Histogram {
    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| w[1] - w[0])
    }

    /// `Σ densityᵢ · widthᵢ`.
    pub fn integral(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.widths())
            .map(|(d, w)| d * w)
            .sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges
            .windows(2)
            .map(|w| match self.scheme {
                BinScheme::Linear => 0.5 * (w[0] + w[1]),
                BinScheme::Logarithmic => (w[0] * w[1]).sqrt(),
            })
            .collect()
    }
}

fn make_edges(scheme: BinScheme, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut edges: Vec<f64> = match scheme {
        BinScheme::Linear => (0..=bins)
            .map(|k| lo + (hi - lo) * k as f64 / bins as f64)
            .collect(),
        BinScheme::Logarithmic => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..=bins)
                .map(|k| (a + (b - a) * k as f64 / bins as f64).exp())
                .collect()
        }
    };
    edges[0] = lo;
    edges[bins] = hi;
    edges
}

pub fn pdf_histogram(sample: &Sample, spec: &HistogramSpec) -> Result<Histogram> {
    if spec.bins < 2 {
        return Err(AnalysisError::InvalidInput(format!(
            "bin count must be at least 2, got {}",
            spec.bins
        )));
    }
    let positives: Vec<(f64, f64)> = (0..sample.len())
        .filter(|&i| sample.values()[i] > 0.0)
        .map(|i| (sample.values()[i], sample.weight(i)))
        .collect();
    if positives.is_empty() {
        return Err(AnalysisError::EmptyInput(
            "histogram needs at least one positive income".into(),
        ));
    }
    let (lo, hi) = match spec.range {
        Some((lo, hi)) => {
            if !(lo < hi) || lo < 0.0 || (spec.scheme == BinScheme::Logarithmic && lo <= 0.0) {
                return Err(AnalysisError::InvalidInput(format!(
                    "invalid histogram range [{lo}, {hi}] for {:?} bins",
                    spec.scheme
                )));
            }
            (lo, hi)
        }
        None => {
            let min = positives.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let max = positives.iter().map(|p| p.0).fold(0.0, f64::max);
            if min < max {
                (min, max)
            } else {
                // a single repeated value: centre it in the binned support
                match spec.scheme {
                    BinScheme::Linear => (0.5 * min, 1.5 * min),
                    BinScheme::Logarithmic => (0.5 * min, 2.0 * min),
                }
            }
        }
    };
    let edges = make_edges(spec.scheme, lo, hi, spec.bins);
    let mut mass = vec![0.0; spec.bins];
    let mut outside = 0.0;
    for &(x, w) in &positives {
        if x < lo || x > hi {
            outside += w;
            continue;
        }
        let k = edges
            .partition_point(|&e| e <= x)
            .saturating_sub(1)
            .min(spec.bins - 1);
        mass[k] += w;
    }
    let binned: f64 = mass.iter().sum();
    let total = sample.total_weight();
    let zero_weight: f64 = (0..sample.len())
        .filter(|&i| sample.values()[i] == 0.0)
        .map(|i| sample.weight(i))
        .sum();
    let norm = match spec.zeros {
        ZeroHandling::Exclude => binned,
        ZeroHandling::IncludeInNormalization => binned + zero_weight,
    };
    if binned <= 0.0 {
        return Err(AnalysisError::EmptyInput(
            "no positive income falls inside the histogram range".into(),
        ));
    }
    let densities = mass
        .iter()
        .zip(edges.windows(2))
        .map(|(m, w)| m / (norm * (w[1] - w[0])))
        .collect();
    Ok(Histogram {
        edges,
        densities,
        scheme: spec.scheme,
        zero_mass_fraction: zero_weight / total,
        out_of_range_fraction: outside / (total - zero_weight),
    })
}
