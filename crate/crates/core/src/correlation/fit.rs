use serde::{Deserialize, Serialize};

use super::CorrelationError;
use crate::stats::{histogram, mean, std_dev, FWHM_PER_SIGMA};

/// `y = amplitude·exp(−(x − center)²/(2·sigma²)) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub offset: f64,
    pub fwhm: f64,
    /// Euclidean norm of the residual vector at the solution.
    pub residual_norm: f64,
    pub iterations: u32,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        gaussian(&[self.amplitude, self.center, self.sigma, self.offset], x)
    }
}

const MAX_ITERATIONS: u32 = 500;

fn gaussian(p: &[f64; 4], x: f64) -> f64 {
    let z = (x - p[1]) / p[2];
    p[0] * (-0.5 * z * z).exp() + p[3]
}

fn cost(p: &[f64; 4], x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = yi - gaussian(p, xi);
            r * r
        })
        .sum()
}

/// Solves the 4×4 system `a·x = b` by Gaussian elimination with partial
/// pivoting. `None` if singular.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Moment-based starting point: offset from the lowest sample, center at
/// the highest, sigma from the second moment of the excess.
fn initial_guess(x: &[f64], y: &[f64]) -> [f64; 4] {
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let center = x[imax];
    let (mut w, mut m2) = (0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let e = (yi - ymin).max(0.0);
        w += e;
        m2 += e * (xi - center) * (xi - center);
    }
    let span = x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sigma = if w > 0.0 { (m2 / w).sqrt() } else { 0.0 };
    if !(sigma.is_finite() && sigma > 0.0) {
        sigma = span / 10.0;
    }
    [ymax - ymin, center, sigma, ymin]
}

/// Levenberg-Marquardt least-squares fit of a Gaussian plus constant.
pub fn fit_gaussian(x: &[f64], y: &[f64]) -> Result<GaussianFit, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::Rejected("x and y lengths differ".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(CorrelationError::Rejected("non-finite sample".into()));
    }
    let nonzero = y.iter().filter(|&&v| v != 0.0).count();
    if nonzero < 5 {
        return Err(CorrelationError::TooFewBins(nonzero));
    }
    let mut p = initial_guess(x, y);
    let mut c = cost(&p, x, y);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        for (&xi, &yi) in x.iter().zip(y) {
            let z = (xi - p[1]) / p[2];
            let e = (-0.5 * z * z).exp();
            let j = [e, p[0] * e * z / p[2], p[0] * e * z * z / p[2], 1.0];
            let r = yi - (p[0] * e + p[3]);
            for a in 0..4 {
                jtr[a] += j[a] * r;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut m = jtj;
            for (k, row) in m.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(1e-300);
            }
            let Some(step) = solve4(m, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            trial[2] = trial[2].abs();
            let tc = if trial[2] > 0.0 { cost(&trial, x, y) } else { f64::INFINITY };
            if tc <= c {
                let rel = (c - tc) / c.max(1e-300);
                let step_small = step
                    .iter()
                    .zip(&p)
                    .all(|(s, v)| s.abs() <= 1e-12 * (v.abs() + 1e-12));
                p = trial;
                c = tc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || step_small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !improved {
            // no downhill step left at any damping: at a minimum
            converged = true;
            break;
        }
    }
    let residual_norm = c.sqrt();
    if !converged || !(p[2] > 0.0) || p.iter().any(|v| !v.is_finite()) {
        return Err(CorrelationError::FitFailed {
            iterations,
            residual_norm,
        });
    }
    Ok(GaussianFit {
        amplitude: p[0],
        center: p[1],
        sigma: p[2],
        offset: p[3],
        fwhm: FWHM_PER_SIGMA * p[2],
        residual_norm,
        iterations,
    })
}

/// Width of a cloud of centroid positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadFit {
    pub fit: GaussianFit,
    /// Gaussian-fit FWHM of the pooled histogram, same unit as the input.
    pub fwhm: f64,
    /// `FWHM_PER_SIGMA` times the sample standard deviation, for comparison.
    pub moment_fwhm: f64,
    pub samples: usize,
    pub bin_width: f64,
}

/// Number of histogram bins spanning ±4 standard deviations.
pub const SPREAD_BINS: usize = 64;

/// Pools the per-axis deviations about each axis mean, histograms them over
/// ±4σ and fits a Gaussian. Non-finite samples (beam lost) are skipped.
pub fn centroid_spread(xs: &[f64], ys: &[f64]) -> Result<SpreadFit, CorrelationError> {
    let xs: Vec<f64> = xs.iter().copied().filter(|v| v.is_finite()).collect();
    let ys: Vec<f64> = ys.iter().copied().filter(|v| v.is_finite()).collect();
    if xs.len() < 2 || ys.len() < 2 {
        return Err(CorrelationError::Rejected("need at least two samples per axis".into()));
    }
    let (mx, my) = (mean(&xs), mean(&ys));
    let mut pooled: Vec<f64> = xs.iter().map(|v| v - mx).collect();
    pooled.extend(ys.iter().map(|v| v - my));
    let sd = std_dev(&pooled);
    if !(sd > 0.0) {
        return Err(CorrelationError::Rejected("positions do not vary".into()));
    }
    let half = 4.0 * sd;
    let (centers, counts) = histogram(&pooled, -half, half, SPREAD_BINS);
    let fit = fit_gaussian(&centers, &counts)?;
    Ok(SpreadFit {
        fit,
        fwhm: fit.fwhm,
        moment_fwhm: FWHM_PER_SIGMA * sd,
        samples: pooled.len(),
        bin_width: 2.0 * half / SPREAD_BINS as f64,
    })
}
