//! Small numeric helpers shared by the imputers and statistics.

use alloc::vec::Vec;
use core::cmp::Ordering;

pub(crate) fn total_cmp(a: &f64, b: &f64) -> Ordering {
    a.total_cmp(b)
}

/// Median of `values`; the mean of the two central order statistics for
/// even counts. `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Percentile with linear interpolation between order statistics
/// (position `p/100 * (n-1)`).
pub fn percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(total_cmp);
    Some(percentile_sorted(&sorted, p))
}

pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (p / 100.0).clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(libm::sqrt(var))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Round half away from zero.
pub fn round_half_away(x: f64) -> f64 {
    libm::round(x)
}

/// Per-feature min-max scaling to `[0, 1]`. A constant feature maps to 0.5
/// and every scaled value maps back to the constant.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Self {
        debug_assert_eq!(min.len(), max.len());
        Self { min, max }
    }

    pub fn scale(&self, col: usize, x: f64) -> f64 {
        let width = self.max[col] - self.min[col];
        if width > 0.0 {
            (x - self.min[col]) / width
        } else {
            0.5
        }
    }

    pub fn unscale(&self, col: usize, s: f64) -> f64 {
        let width = self.max[col] - self.min[col];
        if width > 0.0 {
            self.min[col] + s * width
        } else {
            self.min[col]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 4.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (1..=11).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), Some(6.0));
        assert!((percentile(&v, 5.0).unwrap() - 1.5).abs() < 1e-12);
        assert!((percentile(&v, 95.0).unwrap() - 10.5).abs() < 1e-12);
        assert_eq!(percentile(&[3.0], 95.0), Some(3.0));
    }

    #[test]
    fn constant_feature_scaling() {
        let s = MinMaxScaler::new(alloc::vec![4.0], alloc::vec![4.0]);
        assert_eq!(s.scale(0, 4.0), 0.5);
        assert_eq!(s.unscale(0, 0.93), 4.0);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(0.5), 1.0);
        assert_eq!(round_half_away(2.5), 3.0);
        assert_eq!(round_half_away(0.4), 0.0);
    }
}
