use alloc::vec::Vec;

use thiserror::Error;

use super::metrics::mid_ranks;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WilcoxonError {
    #[error("paired samples differ in length or are empty")]
    InvalidInput,
    #[error("every paired difference is zero")]
    DegeneratePairs,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    /// Non-zero differences.
    pub n: usize,
    pub exact: bool,
}

pub const EXACT_MAX_N: usize = 20;

/// Two-sided Wilcoxon signed-rank test on `a - b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, WilcoxonError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(WilcoxonError::InvalidInput);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(WilcoxonError::DegeneratePairs);
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = mid_ranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v > 0.0).map(|(r, _)| r).sum();
    let w_minus: f64 = ranks.iter().zip(&d).filter(|(_, v)| **v < 0.0).map(|(r, _)| r).sum();
    let w = w_plus.min(w_minus);

    let (p_value, exact) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, w), true)
    } else {
        let nf = n as f64;
        let mut tie_term = 0.0;
        let mut sorted = abs.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < n {
            let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
            let t = j as f64;
            tie_term += t * t * t - t;
            i += j;
        }
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = ((w - mean).abs() - 0.5).max(0.0) / libm::sqrt(var);
        (libm::erfc(z / core::f64::consts::SQRT_2).min(1.0), false)
    };
    Ok(WilcoxonResult {
        statistic: w,
        w_plus,
        w_minus,
        p_value,
        n,
        exact,
    })
}

/// `min(1, 2 P(W+ <= w))` under random signs. Mid-ranks are multiples of
/// one half, so doubled ranks are integers and the null distribution is a
/// subset-sum count.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| libm::round(2.0 * r) as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = alloc::vec![0u64; total + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let limit = libm::round(2.0 * w) as usize;
    let le: u64 = counts[..=limit.min(total)].iter().sum();
    let p = 2.0 * le as f64 / libm::pow(2.0, ranks.len() as f64);
    p.min(1.0)
}
