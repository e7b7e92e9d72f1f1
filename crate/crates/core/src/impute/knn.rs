use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_columns, FittedImputer, ImputeError};
use crate::matrix::FeatureMatrix;
use crate::numeric::{mean, median, percentile, std_dev};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimpleKnnConfig {
    pub k: usize,
}

impl Default for SimpleKnnConfig {
    fn default() -> Self {
        Self { k: 5 }
    }
}

impl SimpleKnnConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        if self.k == 0 {
            return Err(ImputeError::InvalidConfig("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundedKnnConfig {
    pub l: usize,
    pub u: usize,
    pub clip_lo_pct: f64,
    pub clip_hi_pct: f64,
}

impl Default for BoundedKnnConfig {
    fn default() -> Self {
        Self {
            l: 2,
            u: 6,
            clip_lo_pct: 5.0,
            clip_hi_pct: 95.0,
        }
    }
}

impl BoundedKnnConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        if self.l < 1 || self.l > self.u {
            return Err(ImputeError::InvalidConfig("bounded kNN requires 1 <= l <= u".into()));
        }
        if !(0.0 <= self.clip_lo_pct && self.clip_lo_pct <= self.clip_hi_pct && self.clip_hi_pct <= 100.0) {
            return Err(ImputeError::InvalidConfig(
                "bounded kNN requires 0 <= clip_lo_pct <= clip_hi_pct <= 100".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Mode {
    /// At most `k` neighbours, participant median when none qualify.
    Simple { k: usize },
    /// Between `l` and `u` neighbours, otherwise the cell stays missing.
    Bounded { l: usize, u: usize },
}

/// Reference rows and the per-feature transforms used for distances.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnFit {
    mode: Mode,
    reference: FeatureMatrix,
    mean: Vec<f64>,
    scale: Vec<f64>,
    clip: Option<Vec<(f64, f64)>>,
    medians: Vec<Option<f64>>,
}

impl KnnFit {
    pub fn simple(m: &FeatureMatrix, cfg: &SimpleKnnConfig) -> Self {
        Self::build(m, Mode::Simple { k: cfg.k }, None)
    }

    pub fn bounded(m: &FeatureMatrix, cfg: &BoundedKnnConfig) -> Self {
        let clip = (0..m.n_cols())
            .map(|c| {
                let obs = m.column_observed(c);
                match (percentile(&obs, cfg.clip_lo_pct), percentile(&obs, cfg.clip_hi_pct)) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    _ => (f64::NEG_INFINITY, f64::INFINITY),
                }
            })
            .collect();
        Self::build(m, Mode::Bounded { l: cfg.l, u: cfg.u }, Some(clip))
    }

    fn build(m: &FeatureMatrix, mode: Mode, clip: Option<Vec<(f64, f64)>>) -> Self {
        let mut means = Vec::with_capacity(m.n_cols());
        let mut scale = Vec::with_capacity(m.n_cols());
        for c in 0..m.n_cols() {
            let obs: Vec<f64> = m
                .column_observed(c)
                .into_iter()
                .map(|v| clip.as_ref().map_or(v, |b| v.clamp(b[c].0, b[c].1)))
                .collect();
            means.push(mean(&obs).unwrap_or(0.0));
            let sd = std_dev(&obs).unwrap_or(0.0);
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Self {
            mode,
            medians: (0..m.n_cols()).map(|c| median(&m.column_observed(c))).collect(),
            reference: m.clone(),
            mean: means,
            scale,
            clip,
        }
    }

    fn z(&self, c: usize, v: f64) -> f64 {
        let v = self.clip.as_ref().map_or(v, |b| v.clamp(b[c].0, b[c].1));
        (v - self.mean[c]) / self.scale[c]
    }

    /// Missing-aware distance; `None` when the rows share no observed feature.
    fn distance(&self, row: &[Option<f64>], q: usize) -> Option<f64> {
        let other = self.reference.row(q);
        let mut sum = 0.0;
        let mut n_co = 0usize;
        for (c, (a, b)) in row.iter().zip(other).enumerate() {
            if let (Some(a), Some(b)) = (a, b) {
                let d = self.z(c, *a) - self.z(c, *b);
                sum += d * d;
                n_co += 1;
            }
        }
        (n_co > 0).then(|| libm::sqrt(sum * row.len() as f64 / n_co as f64))
    }

    fn impute_row(&self, row: &[Option<f64>], out: &mut [Option<f64>]) {
        if row.iter().all(Option::is_some) {
            return;
        }
        let dists: Vec<Option<f64>> = (0..self.reference.n_rows()).map(|q| self.distance(row, q)).collect();
        for f in 0..row.len() {
            if row[f].is_some() || self.medians[f].is_none() {
                continue;
            }
            let mut cands: Vec<(f64, usize, f64)> = dists
                .iter()
                .enumerate()
                .filter_map(|(q, d)| Some((((*d)?), q, self.reference.get(q, f)?)))
                .collect();
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            out[f] = match self.mode {
                Mode::Simple { k } => {
                    if cands.is_empty() {
                        self.medians[f]
                    } else {
                        mean_of(&cands[..k.min(cands.len())])
                    }
                }
                Mode::Bounded { l, u } => {
                    if cands.len() < l {
                        None
                    } else {
                        mean_of(&cands[..u.min(cands.len())])
                    }
                }
            };
        }
    }
}

fn mean_of(cands: &[(f64, usize, f64)]) -> Option<f64> {
    Some(cands.iter().map(|c| c.2).sum::<f64>() / cands.len() as f64)
}

impl FittedImputer for KnnFit {
    fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ImputeError> {
        check_columns(m, self.reference.n_cols())?;
        let mut out = m.clone();
        let mut buf = Vec::new();
        for r in 0..m.n_rows() {
            buf.clear();
            buf.extend_from_slice(m.row(r));
            self.impute_row(m.row(r), &mut buf);
            for (c, v) in buf.iter().enumerate() {
                out.set(r, c, *v);
            }
        }
        Ok(out)
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.reference.cells().iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        p.extend_from_slice(&self.mean);
        p.extend_from_slice(&self.scale);
        if let Some(clip) = &self.clip {
            p.extend(clip.iter().flat_map(|&(lo, hi)| [lo, hi]));
        }
        p
    }
}

pub fn impute_simple_knn(m: &FeatureMatrix, cfg: &SimpleKnnConfig) -> FeatureMatrix {
    KnnFit::simple(m, cfg).transform(m).expect("fitted on the same columns")
}

pub fn impute_bounded_knn(m: &FeatureMatrix, cfg: &BoundedKnnConfig) -> FeatureMatrix {
    KnnFit::bounded(m, cfg).transform(m).expect("fitted on the same columns")
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{m, random_matrix};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_rows_share_value() {
        let input = m(&[&[Some(1.0), Some(7.0)], &[Some(1.0), Some(7.0)], &[Some(1.0), None]]);
        assert_eq!(impute_simple_knn(&input, &SimpleKnnConfig::default()).get(2, 1), Some(7.0));
    }

    #[test]
    fn equidistant_neighbours_are_averaged() {
        // Rows 0 and 1 sit symmetrically around row 2 on the co-feature.
        let input = m(&[&[Some(0.0), Some(2.0)], &[Some(2.0), Some(4.0)], &[Some(1.0), None]]);
        assert_eq!(impute_simple_knn(&input, &SimpleKnnConfig { k: 2 }).get(2, 1), Some(3.0));
    }

    #[test]
    fn no_candidate_falls_back_to_median() {
        // Row 2 shares no observed feature with the only rows holding f.
        let input = m(&[&[None, Some(2.0)], &[None, Some(6.0)], &[Some(1.0), None]]);
        let out = impute_simple_knn(&input, &SimpleKnnConfig::default());
        assert_eq!(out.get(2, 1), Some(4.0));
    }

    #[test]
    fn bounded_below_l_stays_missing() {
        let input = m(&[&[Some(0.0), Some(2.0)], &[Some(1.0), None], &[Some(5.0), None]]);
        let out = impute_bounded_knn(&input, &BoundedKnnConfig::default());
        assert_eq!(out.get(1, 1), None);
    }

    #[test]
    fn bounded_averages_three_equidistant() {
        let input = m(&[
            &[Some(1.0), Some(2.0)],
            &[Some(1.0), Some(4.0)],
            &[Some(1.0), Some(6.0)],
            &[Some(1.0), None],
        ]);
        assert_eq!(impute_bounded_knn(&input, &BoundedKnnConfig::default()).get(3, 1), Some(4.0));
    }

    #[test]
    fn clipping_caps_outlier_distance() {
        // 21 rows on the co-feature 0..20 plus an outlier at 1000.
        let mut rows: Vec<Vec<Option<f64>>> = (0..21).map(|i| alloc::vec![Some(i as f64), Some(i as f64)]).collect();
        rows.push(alloc::vec![Some(1000.0), None]);
        let input = FeatureMatrix::from_rows(&rows);
        let fit = KnnFit::bounded(&input, &BoundedKnnConfig::default());
        let hi = fit.clip.as_ref().unwrap()[0].1;
        assert!(hi < 1000.0);
        assert_eq!(fit.z(0, 1000.0), fit.z(0, hi));
        // The nearest rows to the clipped outlier are the largest ones.
        let out = fit.transform(&input).unwrap();
        let v = out.get(21, 1).unwrap();
        assert!((15.0..=20.0).contains(&v), "{v}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bounded_imputes_no_more_than_simple(seed in 0u64..10_000, rows in 2usize..20, cols in 1usize..5, missing in 0.0f64..0.8) {
            let input = random_matrix(seed, rows, cols, missing);
            let s = impute_simple_knn(&input, &SimpleKnnConfig::default());
            let b = impute_bounded_knn(&input, &BoundedKnnConfig::default());
            prop_assert!(b.n_observed() <= s.n_observed());
        }
    }
}
