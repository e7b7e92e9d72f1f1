use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("metric undefined: labels contain a single class")]
    UndefinedMetric,
}

fn check(n_a: usize, n_b: usize) -> Result<(), MetricError> {
    if n_a != n_b {
        return Err(MetricError::InvalidInput("length mismatch"));
    }
    if n_a == 0 {
        return Err(MetricError::InvalidInput("empty input"));
    }
    Ok(())
}

/// 1-based mid-ranks of `values`.
pub(crate) fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve via the Mann–Whitney statistic, ties counting
/// one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::InvalidInput("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::UndefinedMetric);
    }
    let ranks = mid_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Mean of true-positive and true-negative rates.
pub fn balanced_accuracy(preds: &[bool], labels: &[bool]) -> Result<f64, MetricError> {
    check(preds.len(), labels.len())?;
    let (mut tp, mut tn, mut pos, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &l) in preds.iter().zip(labels) {
        if l {
            pos += 1;
            tp += usize::from(p);
        } else {
            neg += 1;
            tn += usize::from(!p);
        }
    }
    if pos == 0 || neg == 0 {
        return Err(MetricError::UndefinedMetric);
    }
    Ok((tp as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0)
}

pub fn accuracy(preds: &[bool], labels: &[bool]) -> Result<f64, MetricError> {
    check(preds.len(), labels.len())?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auroc_examples() {
        let s = [0.9, 0.8, 0.3, 0.2];
        assert_eq!(auroc(&s, &[true, true, false, false]), Ok(1.0));
        assert_eq!(auroc(&s, &[true, false, true, false]), Ok(0.75));
        assert_eq!(auroc(&[0.4; 4], &[true, false, true, false]), Ok(0.5));
        assert_eq!(auroc(&s, &[true; 4]), Err(MetricError::UndefinedMetric));
        assert!(matches!(auroc(&s, &[true]), Err(MetricError::InvalidInput(_))));
    }

    #[test]
    fn balanced_accuracy_examples() {
        let l = [true, true, false, false];
        assert_eq!(balanced_accuracy(&l, &l), Ok(1.0));
        assert_eq!(balanced_accuracy(&[true, false, false, false], &l), Ok(0.75));
        assert_eq!(balanced_accuracy(&l, &[true; 4]), Err(MetricError::UndefinedMetric));
    }

    proptest! {
        #[test]
        fn auroc_matches_pairwise(data in proptest::collection::vec((0u8..6, any::<bool>()), 2..40)) {
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0)).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            match auroc(&scores, &labels) {
                Ok(a) => prop_assert!((a - pairwise(&scores, &labels)).abs() < 1e-12),
                Err(e) => prop_assert_eq!(e, MetricError::UndefinedMetric),
            }
        }

        #[test]
        fn auroc_complement_and_monotone_invariance(data in proptest::collection::vec((-1e3f64..1e3, any::<bool>()), 2..40)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            let tie_free = sorted.windows(2).all(|w| w[0] < w[1]);
            if let (Ok(a), Ok(b)) = (auroc(&scores, &labels), auroc(&scores, &flipped)) {
                if tie_free {
                    prop_assert!((a + b - 1.0).abs() < 1e-12);
                }
                let transformed: Vec<f64> = scores.iter().map(|s| libm::exp(s / 100.0) * 3.0 - 7.0).collect();
                prop_assert_eq!(auroc(&transformed, &labels).unwrap(), a);
            }
        }
    }
}
