use super::Histogram;

/// Default prominence threshold, as a fraction of the peak smoothed density.
pub const DEFAULT_MIN_PROMINENCE: f64 = 0.05;

/// Trailing 3-point moving average; the first bins average what is available.
fn smooth(densities: &[f64]) -> Vec<f64> {
    (0..densities.len())
        .map(|i| {
            let window = &densities[i.saturating_sub(2)..=i];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect()
}

/// Number of density modes.
///
/// The densities are smoothed with a trailing 3-point moving average. A local
/// maximum (a plateau counts once) is a mode when its prominence exceeds
/// `min_prominence` times the highest smoothed density. Prominence is the
/// height above the higher of the two minima found walking outwards until a
/// strictly higher point; density outside the binned support counts as zero.
pub fn count_modes(hist: &Histogram, min_prominence: f64) -> usize {
    let s = smooth(&hist.densities);
    let n = s.len();
    let peak = s.iter().copied().fold(0.0, f64::max);
    if n == 0 || peak <= 0.0 {
        return 0;
    }
    let threshold = min_prominence * peak;
    let mut modes = 0;
    let mut l = 0;
    while l < n {
        let mut r = l;
        while r + 1 < n && s[r + 1] == s[l] {
            r += 1;
        }
        let h = s[l];
        let left_lower = l == 0 || s[l - 1] < h;
        let right_lower = r + 1 == n || s[r + 1] < h;
        if h > 0.0 && left_lower && right_lower {
            let left_min = side_minimum(s[..l].iter().rev(), h);
            let right_min = side_minimum(s[r + 1..].iter(), h);
            if h - left_min.max(right_min) > threshold {
                modes += 1;
            }
        }
        l = r + 1;
    }
    modes
}

fn side_minimum<'a>(mut walk: impl Iterator<Item = &'a f64>, height: f64) -> f64 {
    let mut lowest = height;
    loop {
        match walk.next() {
            Some(&v) if v > height => return lowest,
            Some(&v) => lowest = lowest.min(v),
            // off the support
            None => return 0.0,
        }
    }
}
