use super::{AnalysisError, Result, Sample};

/// Weighted Gini coefficient,
/// `G = ΣᵢΣⱼ wᵢwⱼ|xᵢ − xⱼ| / (2 W² μ)`, evaluated in `O(n log n)` by
/// sorting and accumulating the weight and money below each value.
pub fn gini(sample: &Sample) -> Result<f64> {
    if sample.is_empty() {
        return Err(AnalysisError::EmptyInput("Gini of an empty sample".into()));
    }
    let total_weight = sample.total_weight();
    let mean = sample.mean();
    if !(mean > 0.0) {
        return Err(AnalysisError::UndefinedMeasure(
            "Gini is undefined for zero mean income".into(),
        ));
    }
    let mut weight_below = 0.0;
    let mut money_below = 0.0;
    let mut pair_sum = 0.0;
    let pairs = sample.sorted_pairs();
    let mut k = 0;
    while k < pairs.len() {
        // equal incomes contribute nothing among themselves
        let x = pairs[k].0;
        let (mut w_group, mut m_group) = (0.0, 0.0);
        while k < pairs.len() && pairs[k].0 == x {
            w_group += pairs[k].1;
            m_group += pairs[k].1 * x;
            k += 1;
        }
        pair_sum += w_group * (x * weight_below - money_below);
        weight_below += w_group;
        money_below += m_group;
    }
    // pair_sum counts each unordered pair once
    let g = pair_sum / (total_weight * total_weight * mean);
    Ok(g.clamp(0.0, 1.0))
}
