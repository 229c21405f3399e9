use super::{ccdf, AnalysisError, Result, Sample};

/// `R(x) = Q_t(x) / Q_ref(x)` on a grid where the reference CCDF is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeCurve {
    pub grid: Vec<f64>,
    pub ratios: Vec<f64>,
    pub reference: String,
    /// Requested grid points dropped because `Q_ref` vanished there.
    pub dropped: usize,
}

impl RelativeCurve {
    pub fn tagged(mut self, reference: impl Into<String>) -> Self {
        self.reference = reference.into();
        self
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.ratios.iter().copied())
    }
}

/// Relative CCDF of `sample` against `reference`, both normalised. The grid
/// defaults to the distinct positive values of the reference sample.
pub fn relative_ccdf(
    sample: &Sample,
    reference: &Sample,
    grid: Option<&[f64]>,
) -> Result<RelativeCurve> {
    if sample.is_empty() || reference.is_empty() {
        return Err(AnalysisError::EmptyInput(
            "relative CCDF needs two non-empty samples".into(),
        ));
    }
    let q_t = ccdf(sample, true)?;
    let q_ref = ccdf(reference, true)?;
    let grid: Vec<f64> = match grid {
        Some(g) => {
            let mut g: Vec<f64> = g.iter().copied().filter(|x| x.is_finite()).collect();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        }
        None => q_ref.xs().to_vec(),
    };
    let mut out_grid = Vec::with_capacity(grid.len());
    let mut ratios = Vec::with_capacity(grid.len());
    let mut dropped = 0;
    for x in grid {
        let r = q_ref.eval(x);
        if r > 0.0 {
            out_grid.push(x);
            ratios.push(q_t.eval(x) / r);
        } else {
            dropped += 1;
        }
    }
    if out_grid.is_empty() {
        return Err(AnalysisError::NoOverlap);
    }
    Ok(RelativeCurve {
        grid: out_grid,
        ratios,
        reference: "reference".into(),
        dropped,
    })
}
