use alloc::vec::Vec;

use super::{check_columns, FittedImputer, ImputeError};
use crate::matrix::FeatureMatrix;
use crate::numeric::median;

/// Per-feature median of the fitted observations.
#[derive(Clone, Debug, PartialEq)]
pub struct MedianFit {
    pub medians: Vec<Option<f64>>,
}

impl MedianFit {
    pub fn fit(m: &FeatureMatrix) -> Self {
        Self {
            medians: (0..m.n_cols()).map(|c| median(&m.column_observed(c))).collect(),
        }
    }

    pub(crate) fn fill(&self, m: &FeatureMatrix) -> FeatureMatrix {
        m.filled_with(|_, c| self.medians[c])
    }
}

impl FittedImputer for MedianFit {
    fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ImputeError> {
        check_columns(m, self.medians.len())?;
        Ok(self.fill(m))
    }

    fn parameters(&self) -> Vec<f64> {
        self.medians.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
    }
}

pub fn impute_median(m: &FeatureMatrix) -> FeatureMatrix {
    MedianFit::fit(m).fill(m)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::m;
    use super::*;

    #[test]
    fn fills_with_column_median() {
        let input = m(&[&[Some(1.0), Some(10.0)], &[None, Some(20.0)], &[Some(3.0), None], &[Some(5.0), Some(40.0)]]);
        let out = impute_median(&input);
        assert_eq!(out.get(1, 0), Some(3.0));
        assert_eq!(out.get(2, 1), Some(20.0));
    }

    #[test]
    fn even_count_uses_mean_of_central_pair() {
        let input = m(&[&[Some(1.0)], &[Some(2.0)], &[None], &[Some(4.0)], &[Some(10.0)]]);
        assert_eq!(impute_median(&input).get(2, 0), Some(3.0));
    }

    #[test]
    fn unobserved_feature_stays_missing() {
        let input = m(&[&[Some(1.0), None], &[None, None]]);
        let out = impute_median(&input);
        assert_eq!(out.get(1, 0), Some(1.0));
        assert_eq!(out.get(0, 1), None);
        assert_eq!(out.get(1, 1), None);
    }
}
