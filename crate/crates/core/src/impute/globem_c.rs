use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_columns, FittedImputer, ImputeError};
use crate::matrix::FeatureMatrix;
use crate::numeric::mean;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobemCConfig {
    pub row_thresh: f64,
    pub col_thresh: f64,
}

impl Default for GlobemCConfig {
    fn default() -> Self {
        Self {
            row_thresh: 0.5,
            col_thresh: 0.5,
        }
    }
}

impl GlobemCConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        for (name, v) in [("row_thresh", self.row_thresh), ("col_thresh", self.col_thresh)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ImputeError::InvalidConfig(alloc::format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Output of the filter-then-mean proxy. Dropped rows are absent from
/// `matrix`; dropped columns are kept but left as they were.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobemCOutput {
    pub matrix: FeatureMatrix,
    pub dropped_rows: Vec<usize>,
    pub dropped_cols: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobemCFit {
    cfg: GlobemCConfig,
    /// `None` for dropped or never-observed columns.
    means: Vec<Option<f64>>,
    pub dropped_rows: Vec<usize>,
    pub dropped_cols: Vec<usize>,
}

fn frac_missing(missing: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        missing as f64 / total as f64
    }
}

impl GlobemCFit {
    /// Columns are filtered first, then rows over the kept columns.
    pub fn fit(m: &FeatureMatrix, cfg: &GlobemCConfig) -> Result<Self, ImputeError> {
        let (n, p) = (m.n_rows(), m.n_cols());
        let dropped_cols: Vec<usize> = (0..p)
            .filter(|&c| frac_missing((0..n).filter(|&r| !m.is_observed(r, c)).count(), n) > cfg.col_thresh)
            .collect();
        let kept_cols: Vec<usize> = (0..p).filter(|c| !dropped_cols.contains(c)).collect();
        let dropped_rows: Vec<usize> = (0..n)
            .filter(|&r| {
                let miss = kept_cols.iter().filter(|&&c| !m.is_observed(r, c)).count();
                frac_missing(miss, kept_cols.len()) > cfg.row_thresh
            })
            .collect();
        if kept_cols.is_empty() || dropped_rows.len() == n {
            return Err(ImputeError::AllDataDropped);
        }
        let kept_rows: Vec<usize> = (0..n).filter(|r| !dropped_rows.contains(r)).collect();
        let means = (0..p)
            .map(|c| {
                if dropped_cols.contains(&c) {
                    return None;
                }
                let vals: Vec<f64> = kept_rows.iter().filter_map(|&r| m.get(r, c)).collect();
                mean(&vals)
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            means,
            dropped_rows,
            dropped_cols,
        })
    }
}

impl FittedImputer for GlobemCFit {
    /// Fills every row with the retained means; row dropping is reported by
    /// [`impute_globem_c_proxy`], the pipeline keeps row alignment.
    fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ImputeError> {
        check_columns(m, self.means.len())?;
        Ok(m.filled_with(|_, c| self.means[c]))
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.means.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        p.push(self.cfg.row_thresh);
        p.push(self.cfg.col_thresh);
        p
    }
}

pub fn impute_globem_c_proxy(m: &FeatureMatrix, cfg: &GlobemCConfig) -> Result<GlobemCOutput, ImputeError> {
    let fit = GlobemCFit::fit(m, cfg)?;
    let kept: Vec<usize> = (0..m.n_rows()).filter(|r| !fit.dropped_rows.contains(r)).collect();
    let matrix = fit.transform(&m.select_rows(&kept))?;
    Ok(GlobemCOutput {
        matrix,
        dropped_rows: fit.dropped_rows,
        dropped_cols: fit.dropped_cols,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::m;
    use super::*;

    #[test]
    fn sparse_row_is_dropped() {
        let input = m(&[
            &[Some(1.0), Some(1.0), Some(1.0), Some(1.0), Some(1.0)],
            &[Some(1.0), None, None, None, Some(1.0)],
            &[Some(2.0), Some(2.0), Some(2.0), Some(2.0), Some(2.0)],
        ]);
        let out = impute_globem_c_proxy(&input, &GlobemCConfig::default()).unwrap();
        assert_eq!(out.dropped_rows, [1]);
        assert!(out.dropped_cols.is_empty());
        assert_eq!(out.matrix.n_rows(), 2);
    }

    #[test]
    fn surviving_cell_gets_retained_mean() {
        let input = m(&[&[Some(2.0), Some(0.0)], &[Some(4.0), Some(0.0)], &[None, Some(0.0)]]);
        let out = impute_globem_c_proxy(&input, &GlobemCConfig::default()).unwrap();
        assert_eq!(out.matrix.get(2, 0), Some(3.0));
    }

    #[test]
    fn complete_matrix_unchanged() {
        let input = m(&[&[Some(2.0), Some(5.0)], &[Some(4.0), Some(6.0)]]);
        let out = impute_globem_c_proxy(&input, &GlobemCConfig::default()).unwrap();
        assert_eq!(out.matrix, input);
        assert!(out.dropped_rows.is_empty() && out.dropped_cols.is_empty());
    }

    #[test]
    fn everything_dropped() {
        let input = m(&[&[None, Some(1.0)], &[None, None], &[None, None]]);
        assert_eq!(impute_globem_c_proxy(&input, &GlobemCConfig::default()), Err(ImputeError::AllDataDropped));
    }
}
