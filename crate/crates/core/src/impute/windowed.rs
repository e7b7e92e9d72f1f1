use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_columns, FittedImputer, ImputeError};
use crate::matrix::FeatureMatrix;
use crate::numeric::median;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowedMedianConfig {
    pub window_days: u32,
}

impl Default for WindowedMedianConfig {
    fn default() -> Self {
        Self { window_days: 28 }
    }
}

impl WindowedMedianConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        if self.window_days == 0 {
            return Err(ImputeError::InvalidConfig("window_days must be at least 1".into()));
        }
        Ok(())
    }
}

/// Block medians keyed by `(day - origin) / window`. A block column with no
/// observation contributes 0; a feature never observed at all stays missing.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedMedianFit {
    origin: i64,
    window: i64,
    active: Vec<bool>,
    /// Sorted by block id.
    blocks: Vec<(i64, Vec<f64>)>,
}

impl WindowedMedianFit {
    pub fn fit(m: &FeatureMatrix, cfg: &WindowedMedianConfig) -> Self {
        let window = i64::from(cfg.window_days.max(1));
        let origin = m.days().iter().copied().min().unwrap_or(0);
        let n_cols = m.n_cols();
        let active = (0..n_cols).map(|c| (0..m.n_rows()).any(|r| m.is_observed(r, c))).collect();
        let mut ids: Vec<i64> = m.days().iter().map(|d| (d - origin).div_euclid(window)).collect();
        ids.sort_unstable();
        ids.dedup();
        let blocks = ids
            .into_iter()
            .map(|id| {
                let rows: Vec<usize> = (0..m.n_rows())
                    .filter(|&r| (m.days()[r] - origin).div_euclid(window) == id)
                    .collect();
                let medians = (0..n_cols)
                    .map(|c| {
                        let vals: Vec<f64> = rows.iter().filter_map(|&r| m.get(r, c)).collect();
                        median(&vals).unwrap_or(0.0)
                    })
                    .collect();
                (id, medians)
            })
            .collect();
        Self {
            origin,
            window,
            active,
            blocks,
        }
    }

    /// Exact block if fitted, else the latest fitted block before it, else
    /// the earliest fitted block.
    fn block_for(&self, day: i64) -> Option<&[f64]> {
        let id = (day - self.origin).div_euclid(self.window);
        let idx = match self.blocks.binary_search_by_key(&id, |(b, _)| *b) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.blocks.get(idx).map(|(_, v)| v.as_slice())
    }
}

impl FittedImputer for WindowedMedianFit {
    fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ImputeError> {
        check_columns(m, self.active.len())?;
        Ok(m.filled_with(|r, c| {
            if !self.active[c] {
                return None;
            }
            self.block_for(m.days()[r]).map(|b| b[c])
        }))
    }

    fn parameters(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }
}

pub fn impute_windowed_median(m: &FeatureMatrix, cfg: &WindowedMedianConfig) -> FeatureMatrix {
    WindowedMedianFit::fit(m, cfg)
        .transform(m)
        .expect("fitted on the same columns")
}
