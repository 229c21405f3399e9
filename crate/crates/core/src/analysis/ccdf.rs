use super::{AnalysisError, Result, Sample};

/// Empirical complementary CDF, `Q(x) = P(X ≥ x)`, tabulated at the distinct
/// positive sample values.
#[derive(Debug, Clone, PartialEq)]
pub struct Ccdf {
    xs: Vec<f64>,
    qs: Vec<f64>,
    normalized: bool,
    total_weight: f64,
}

impl Ccdf {
    /// Builds a CCDF from explicit points. `xs` must be strictly increasing,
    /// `qs` non-increasing and non-negative.
    pub fn from_points(
        xs: Vec<f64>,
        qs: Vec<f64>,
        normalized: bool,
        total_weight: f64,
    ) -> Result<Self> {
        if xs.len() != qs.len() {
            return Err(AnalysisError::InvalidInput(format!(
                "{} abscissae for {} ordinates",
                xs.len(),
                qs.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AnalysisError::InvalidInput(
                "x values must be strictly increasing".into(),
            ));
        }
        if qs.windows(2).any(|w| w[1] > w[0]) || qs.iter().any(|q| !(*q >= 0.0)) {
            return Err(AnalysisError::InvalidInput(
                "Q must be non-negative and non-increasing".into(),
            ));
        }
        Ok(Self {
            xs,
            qs,
            normalized,
            total_weight,
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn qs(&self) -> &[f64] {
        &self.qs
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.qs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// Step evaluation of `P(X ≥ x)`: the tabulated value at the first point
    /// at or above `x`, the full mass for `x ≤ 0`, and 0 past the last point.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if self.normalized {
                1.0
            } else {
                self.total_weight
            };
        }
        let k = self.xs.partition_point(|&p| p < x);
        self.qs.get(k).copied().unwrap_or(0.0)
    }
}

pub fn ccdf(sample: &Sample, normalized: bool) -> Result<Ccdf> {
    if sample.is_empty() {
        return Err(AnalysisError::EmptyInput("CCDF of an empty sample".into()));
    }
    let total = sample.total_weight();
    let pairs = sample.sorted_pairs();
    let mut xs = Vec::new();
    let mut masses = Vec::new();
    for (x, w) in pairs.into_iter().filter(|p| p.0 > 0.0) {
        if xs.last() == Some(&x) {
            *masses.last_mut().unwrap() += w;
        } else {
            xs.push(x);
            masses.push(w);
        }
    }
    // accumulate from the top so each Q is an exact tail sum
    let mut qs = vec![0.0; xs.len()];
    let mut tail = 0.0;
    for k in (0..xs.len()).rev() {
        tail += masses[k];
        qs[k] = if normalized { tail / total } else { tail };
    }
    Ok(Ccdf {
        xs,
        qs,
        normalized,
        total_weight: total,
    })
}
