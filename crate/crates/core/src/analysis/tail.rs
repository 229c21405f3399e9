//! Pareto-tail fitting of `Q(x) = A·x^(−α)` above a threshold `x_min`.

use serde::{Deserialize, Serialize};

use super::{AnalysisError, Ccdf, Result, Sample};

/// Default tail fraction for threshold selection: the top 1% of the weight.
pub const DEFAULT_TOP_FRACTION: f64 = 0.01;

/// Fewest tail points a KS-minimising threshold may leave.
pub const KS_MIN_TAIL_POINTS: usize = 10;

const DEFAULT_MAX_CANDIDATES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    Hill,
    #[serde(rename = "loglog-ls")]
    LogLogLs,
}

impl FitMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            FitMethod::Hill => "hill",
            FitMethod::LogLogLs => "loglog-ls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub alpha: f64,
    pub amplitude: f64,
    pub x_min: f64,
    pub n_tail: usize,
    pub stderr: f64,
    pub method: FitMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum XminMethod {
    /// Smallest value whose upper tail holds a fraction `q` of the weight.
    TopFraction { q: f64 },
    /// Threshold minimising the KS distance between the empirical tail and
    /// its Hill fit. At most `max_candidates` thresholds are scanned, spread
    /// evenly in rank when there are more.
    KsMin {
        #[serde(default = "default_max_candidates")]
        max_candidates: usize,
    },
    /// A caller-chosen threshold.
    Fixed { value: f64 },
}

fn default_max_candidates() -> usize {
    DEFAULT_MAX_CANDIDATES
}

impl Default for XminMethod {
    fn default() -> Self {
        XminMethod::TopFraction {
            q: DEFAULT_TOP_FRACTION,
        }
    }
}

impl XminMethod {
    pub fn ks_min() -> Self {
        XminMethod::KsMin {
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }

    /// Parameter ranges that can be checked without a sample.
    pub fn validate(&self) -> Result<()> {
        match *self {
            XminMethod::TopFraction { q } if !(q > 0.0 && q <= 1.0) => Err(
                AnalysisError::InvalidInput(format!("tail fraction {q} outside (0, 1]")),
            ),
            XminMethod::KsMin { max_candidates: 0 } => Err(AnalysisError::InvalidInput(
                "max_candidates must be at least 1".into(),
            )),
            XminMethod::Fixed { value } if !(value.is_finite() && value > 0.0) => Err(
                AnalysisError::InvalidInput(format!("fixed x_min must be positive, got {value}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Maximum-likelihood (Hill) estimate over values `≥ x_min`:
/// `α = W_tail / Σ wᵢ ln(xᵢ / x_min)`, `stderr = α / √n_tail`, and `A` chosen
/// so the fitted curve meets the normalised empirical CCDF at `x_min`.
pub fn fit_pareto_hill(sample: &Sample, x_min: f64) -> Result<TailFit> {
    if !(x_min.is_finite() && x_min > 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "x_min must be positive, got {x_min}"
        )));
    }
    let mut n_tail = 0usize;
    let mut tail_weight = 0.0;
    let mut log_sum = 0.0;
    for (i, &x) in sample.values().iter().enumerate() {
        if x >= x_min {
            let w = sample.weight(i);
            n_tail += 1;
            tail_weight += w;
            log_sum += w * (x / x_min).ln();
        }
    }
    if n_tail < 2 {
        return Err(AnalysisError::InsufficientTail {
            needed: 2,
            found: n_tail,
        });
    }
    if log_sum <= 0.0 {
        return Err(AnalysisError::UndefinedMeasure(
            "every tail value equals x_min".into(),
        ));
    }
    let alpha = tail_weight / log_sum;
    let q_at_min = tail_weight / sample.total_weight();
    Ok(TailFit {
        alpha,
        amplitude: q_at_min * x_min.powf(alpha),
        x_min,
        n_tail,
        stderr: alpha / (n_tail as f64).sqrt(),
        method: FitMethod::Hill,
    })
}

/// Ordinary least squares of `ln Q` on `ln x` over CCDF points with
/// `x ≥ x_min` and `Q > 0`. A two-point fit reports a standard error of 0.
pub fn fit_pareto_ls(ccdf: &Ccdf, x_min: f64) -> Result<TailFit> {
    if !(x_min.is_finite() && x_min > 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "x_min must be positive, got {x_min}"
        )));
    }
    let (lx, lq): (Vec<f64>, Vec<f64>) = ccdf
        .points()
        .filter(|&(x, q)| x >= x_min && q > 0.0)
        .map(|(x, q)| (x.ln(), q.ln()))
        .unzip();
    let n = lx.len();
    if n < 2 {
        return Err(AnalysisError::InsufficientTail {
            needed: 2,
            found: n,
        });
    }
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = lq.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&lq).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(slope < 0.0) {
        return Err(AnalysisError::UndefinedMeasure(format!(
            "log-log slope {slope} is not negative"
        )));
    }
    let stderr = if n > 2 {
        let ssr: f64 = lx
            .iter()
            .zip(&lq)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (ssr / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(TailFit {
        alpha: -slope,
        amplitude: intercept.exp(),
        x_min,
        n_tail: n,
        stderr,
        method: FitMethod::LogLogLs,
    })
}

pub fn select_xmin(sample: &Sample, method: XminMethod) -> Result<f64> {
    let positive = sample.positive_count();
    if positive < 2 {
        return Err(AnalysisError::InsufficientTail {
            needed: 2,
            found: positive,
        });
    }
    match method {
        XminMethod::TopFraction { q } => top_fraction(sample, q),
        XminMethod::KsMin { max_candidates } => ks_min(sample, max_candidates.max(1)),
        XminMethod::Fixed { value } if value.is_finite() && value > 0.0 => Ok(value),
        XminMethod::Fixed { value } => Err(AnalysisError::InvalidInput(format!(
            "fixed x_min must be positive, got {value}"
        ))),
    }
}

fn descending_pairs(sample: &Sample) -> Vec<(f64, f64)> {
    let mut pairs = sample.sorted_pairs();
    pairs.reverse();
    pairs
}

fn top_fraction(sample: &Sample, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "tail fraction {q} outside (0, 1]"
        )));
    }
    let target = q * sample.total_weight() * (1.0 - 1e-12);
    let desc = descending_pairs(sample);
    let smallest_positive = desc.iter().rev().find(|p| p.0 > 0.0).map(|p| p.0).unwrap();
    let mut cum = 0.0;
    for &(x, w) in &desc {
        cum += w;
        if cum >= target {
            return Ok(if x > 0.0 { x } else { smallest_positive });
        }
    }
    Ok(smallest_positive)
}

fn ks_min(sample: &Sample, max_candidates: usize) -> Result<f64> {
    let desc: Vec<(f64, f64)> = descending_pairs(sample)
        .into_iter()
        .filter(|p| p.0 > 0.0)
        .collect();
    // candidate thresholds sit at the last index of each run of equal values
    let candidates: Vec<usize> = (0..desc.len())
        .filter(|&i| i + 1 >= KS_MIN_TAIL_POINTS)
        .filter(|&i| i + 1 == desc.len() || desc[i + 1].0 < desc[i].0)
        .filter(|&i| desc[i].0 < desc[0].0)
        .collect();
    if desc.len() >= KS_MIN_TAIL_POINTS && desc.last().is_some_and(|p| p.0 == desc[0].0) {
        return Err(AnalysisError::UndefinedMeasure(
            "ks-min needs at least two distinct positive values".into(),
        ));
    }
    if candidates.is_empty() {
        return Err(AnalysisError::InsufficientTail {
            needed: KS_MIN_TAIL_POINTS,
            found: desc.len(),
        });
    }
    let picked: Vec<usize> = if candidates.len() > max_candidates {
        let step = (candidates.len() - 1) as f64 / (max_candidates.max(2) - 1) as f64;
        let mut p: Vec<usize> = (0..max_candidates.max(2))
            .map(|k| candidates[((k as f64 * step).round() as usize).min(candidates.len() - 1)])
            .collect();
        p.dedup();
        p
    } else {
        candidates
    };

    let mut prefix_w = Vec::with_capacity(desc.len());
    let mut prefix_wlog = Vec::with_capacity(desc.len());
    let (mut w_acc, mut l_acc) = (0.0, 0.0);
    for &(x, w) in &desc {
        w_acc += w;
        l_acc += w * x.ln();
        prefix_w.push(w_acc);
        prefix_wlog.push(l_acc);
    }

    let mut best: Option<(f64, f64)> = None;
    for &i in &picked {
        let x_min = desc[i].0;
        let w_tail = prefix_w[i];
        let log_sum = prefix_wlog[i] - w_tail * x_min.ln();
        if log_sum <= 0.0 {
            continue;
        }
        let alpha = w_tail / log_sum;
        let d = tail_ks(&desc[..=i], w_tail, x_min, alpha);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, x_min));
        }
    }
    best.map(|(_, x)| x).ok_or(AnalysisError::InsufficientTail {
        needed: KS_MIN_TAIL_POINTS,
        found: desc.len(),
    })
}

/// KS distance between the empirical tail CCDF (conditional on `x ≥ x_min`)
/// and `(x / x_min)^(−α)`. `tail` is sorted descending.
fn tail_ks(tail: &[(f64, f64)], w_tail: f64, x_min: f64, alpha: f64) -> f64 {
    let mut d: f64 = 0.0;
    let mut above = 0.0;
    let mut j = 0;
    while j < tail.len() {
        let x = tail[j].0;
        let mut group = 0.0;
        while j < tail.len() && tail[j].0 == x {
            group += tail[j].1;
            j += 1;
        }
        let model = (x / x_min).powf(-alpha);
        let q_at = (above + group) / w_tail;
        let q_after = above / w_tail;
        d = d.max((q_at - model).abs()).max((q_after - model).abs());
        above += group;
    }
    d
}
