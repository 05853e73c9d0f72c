//! Averaged Hausdorff distance and run summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorResult {
    pub gd_p: f64,
    pub igd_p: f64,
    pub delta_p: f64,
    pub p: f64,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Power mean of order `p` of the distances from each point of `from` to
/// the nearest point of `to`: `(1/|from| * sum d(x, to)^p)^(1/p)`.
fn generational_distance<A: AsRef<[f64]>, B: AsRef<[f64]>>(from: &[A], to: &[B], p: f64) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|x| {
            let x = x.as_ref();
            to.iter()
                .map(|y| euclidean(x, y.as_ref()))
                .fold(f64::INFINITY, f64::min)
                .powf(p)
        })
        .sum();
    (sum / from.len() as f64).powf(1.0 / p)
}

/// `GD_p`, `IGD_p` and `Delta_p = max(GD_p, IGD_p)` of `approx` against
/// `reference`, with Euclidean point-to-set distances in raw objective space.
pub fn delta_p<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    approx: &[A],
    reference: &[B],
    p: f64,
) -> Result<IndicatorResult> {
    if approx.is_empty() || reference.is_empty() {
        return Err(Error::invalid("delta_p needs non-empty approximation and reference sets"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("delta_p order must be >= 1, got {p}")));
    }
    let dim = approx[0].as_ref().len();
    if approx.iter().any(|a| a.as_ref().len() != dim) || reference.iter().any(|r| r.as_ref().len() != dim) {
        return Err(Error::invalid("delta_p sets mix objective dimensions"));
    }
    let gd_p = generational_distance(approx, reference, p);
    let igd_p = generational_distance(reference, approx, p);
    Ok(IndicatorResult {
        gd_p,
        igd_p,
        delta_p: gd_p.max(igd_p),
        p,
    })
}

/// Linear-interpolation quantile between order statistics (Hyndman-Fan type 7).
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianIqr {
    pub median: f64,
    pub iqr: f64,
}

/// Median and interquartile range, type-7 quantiles.
pub fn median_iqr(values: &[f64]) -> Result<MedianIqr> {
    if values.is_empty() {
        return Err(Error::invalid("median_iqr needs at least one value"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("median_iqr input contains NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(MedianIqr {
        median: quantile_sorted(&sorted, 0.5),
        iqr: quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
    })
}
