//! Small descriptive-statistics helpers shared by the analysis code.

/// `2·sqrt(2·ln 2)`: full width at half maximum of a unit-σ Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation; `NaN` for an empty slice.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

/// Fixed-width histogram of `values` over `[lo, hi)` with `bins` bins.
/// Returns bin centers and counts; values outside the range are ignored.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> (Vec<f64>, Vec<f64>) {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &v in values {
        if !(v >= lo && v < hi) {
            continue;
        }
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1.0;
    }
    let centers = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    (centers, counts)
}

/// Expected ratio `E[s²] / σ²` of the windowed sample variance (mean removed)
/// of a stationary first-order Gauss-Markov process with decay rate `rate`
/// (1/s) observed continuously over `window_s`.
pub fn windowed_variance_ratio(rate: f64, window_s: f64) -> f64 {
    let lt = rate * window_s;
    if lt <= 0.0 {
        return 0.0;
    }
    1.0 - 2.0 / lt + 2.0 * (1.0 - (-lt).exp()) / (lt * lt)
}
