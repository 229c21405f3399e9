use super::{AnalysisError, Ccdf, Result};

/// Two-sample Kolmogorov–Smirnov distance between normalised CCDFs.
///
/// Both curves are steps that only move at their own points, so the
/// supremum is attained on the union of the two point sets.
pub fn ks_distance(a: &Ccdf, b: &Ccdf) -> Result<f64> {
    if !(a.is_normalized() && b.is_normalized()) {
        return Err(AnalysisError::InvalidInput(
            "KS distance requires normalised CCDFs".into(),
        ));
    }
    let (xa, xb) = (a.xs(), b.xs());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = (a.eval(f64::MIN_POSITIVE) - b.eval(f64::MIN_POSITIVE)).abs();
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        d = d.max((a.eval(x) - b.eval(x)).abs());
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
    }
    Ok(d)
}

/// KS distance between a normalised empirical CCDF and a continuous
/// survival function `survival(x) = P(X ≥ x)` supported on `x ≥ 0`.
pub fn ks_distance_to_law<F: Fn(f64) -> f64>(c: &Ccdf, survival: F) -> Result<f64> {
    if !c.is_normalized() {
        return Err(AnalysisError::InvalidInput(
            "KS distance requires a normalised CCDF".into(),
        ));
    }
    let mut d: f64 = 0.0;
    let mut prev_law = survival(0.0);
    for (x, q) in c.points() {
        // on (previous point, x] the empirical curve is constant at q
        let law = survival(x);
        d = d.max((q - prev_law).abs()).max((q - law).abs());
        prev_law = law;
    }
    Ok(d.max(prev_law.abs()))
}
