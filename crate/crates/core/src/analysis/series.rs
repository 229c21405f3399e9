use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::{
    ccdf, fit_pareto_hill, fit_pareto_ls, select_xmin, AnalysisError, FitMethod, Result, Sample,
    TailFit, XminMethod,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub xmin: XminMethod,
    #[serde(default = "default_fitter")]
    pub fitter: FitMethod,
}

fn default_fitter() -> FitMethod {
    FitMethod::Hill
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            xmin: XminMethod::default(),
            fitter: FitMethod::Hill,
        }
    }
}

impl FitConfig {
    pub fn fit(&self, sample: &Sample) -> Result<TailFit> {
        let x_min = select_xmin(sample, self.xmin)?;
        match self.fitter {
            FitMethod::Hill => fit_pareto_hill(sample, x_min),
            FitMethod::LogLogLs => fit_pareto_ls(&ccdf(sample, true)?, x_min),
        }
    }
}

/// One element of an α series; failed fits are kept as gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPoint<T> {
    pub t: T,
    pub fit: Result<TailFit>,
}

/// Fits every element of `items`. Elements without a usable tail become gaps;
/// only a series with no successful fit at all is an error.
pub fn alpha_timeseries<T, S, I>(items: I, config: &FitConfig) -> Result<Vec<AlphaPoint<T>>>
where
    I: IntoIterator<Item = (T, S)>,
    S: Borrow<Sample>,
{
    let points: Vec<AlphaPoint<T>> = items
        .into_iter()
        .map(|(t, s)| AlphaPoint {
            t,
            fit: config.fit(s.borrow()),
        })
        .collect();
    if points.iter().all(|p| p.fit.is_err()) {
        return Err(AnalysisError::EmptySeries);
    }
    Ok(points)
}
