use super::{AnalysisError, Result};
use crate::engine::Snapshot;
use crate::numeric::compensated_sum;

/// Weighted income observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_values(&values)?;
        Ok(Self {
            values,
            weights: None,
        })
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_values(&values)?;
        if weights.len() != values.len() {
            return Err(AnalysisError::InvalidInput(format!(
                "{} weights for {} values",
                weights.len(),
                values.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(AnalysisError::InvalidInput(format!(
                "weight {w} is not positive"
            )));
        }
        Ok(Self {
            values,
            weights: Some(weights),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    pub fn total_weight(&self) -> f64 {
        match &self.weights {
            Some(w) => compensated_sum(w.iter().copied()),
            None => self.values.len() as f64,
        }
    }

    pub fn positive_count(&self) -> usize {
        self.values.iter().filter(|&&x| x > 0.0).count()
    }

    /// Weighted mean income.
    pub fn mean(&self) -> f64 {
        let w = self.total_weight();
        compensated_sum((0..self.len()).map(|i| self.weight(i) * self.values[i])) / w
    }

    pub fn zero_mass_fraction(&self) -> f64 {
        let zero = compensated_sum(
            (0..self.len())
                .filter(|&i| self.values[i] == 0.0)
                .map(|i| self.weight(i)),
        );
        zero / self.total_weight()
    }

    /// `(value, weight)` pairs sorted ascending by value.
    pub(crate) fn sorted_pairs(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = (0..self.len())
            .map(|i| (self.values[i], self.weight(i)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let values = self.values.iter().map(|x| x * factor).collect();
        match &self.weights {
            Some(w) => Self::weighted(values, w.clone()),
            None => Self::new(values),
        }
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    match values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        Some(x) => Err(AnalysisError::InvalidInput(format!(
            "income {x} is negative or not finite"
        ))),
        None => Ok(()),
    }
}

impl From<&Snapshot> for Sample {
    fn from(s: &Snapshot) -> Self {
        Sample {
            values: s.incomes.clone(),
            weights: None,
        }
    }
}

impl TryFrom<Vec<f64>> for Sample {
    type Error = AnalysisError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Sample::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_values_and_weights() {
        assert!(Sample::new(vec![1.0, -1.0]).is_err());
        assert!(Sample::new(vec![f64::NAN]).is_err());
        assert!(Sample::weighted(vec![1.0], vec![0.0]).is_err());
        assert!(Sample::weighted(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn weighted_summaries() {
        let s = Sample::weighted(vec![0.0, 2.0, 4.0], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.total_weight(), 4.0);
        assert_eq!(s.mean(), 2.5);
        assert_eq!(s.zero_mass_fraction(), 0.25);
        assert_eq!(s.positive_count(), 2);
    }
}
