//! Controlled removal of observed values to create ground truth for
//! reconstruction scoring.
//!
//! Removal happens independently per (participant, feature) group over that
//! group's observed values. Each group loses `m = round(r/100 * n_obs)`
//! cells (half away from zero):
//!
//! * `Mcar` draws the `m` cells uniformly without replacement from a stream
//!   seeded by `(seed, participant, feature)`.
//! * `MnarCentral` removes the `m` consecutive ranks starting at
//!   `floor((n_obs - m) / 2)`, i.e. the central band of the distribution.
//! * `MnarTails` removes the `floor(m/2)` lowest and `m - floor(m/2)`
//!   highest ranks.
//!
//! Ranks sort ascending by value with ties broken by date, so the band
//! always holds exactly `m` cells regardless of ties or skew.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Cell, DataError, FeatureSet, LongitudinalDataset};
use crate::numeric::round_half_away;
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmputationError {
    #[error("amputation rate r = {0} must lie strictly between 0 and 100")]
    InvalidRate(f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AmputationKind {
    Mcar,
    MnarCentral,
    MnarTails,
}

impl AmputationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AmputationKind::Mcar => "MCAR",
            AmputationKind::MnarCentral => "MNAR_CENTRAL",
            AmputationKind::MnarTails => "MNAR_TAILS",
        }
    }
}

fn default_rate() -> f64 {
    10.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmputationConfig {
    pub kind: AmputationKind,
    /// Percent of each group's observed values to remove.
    #[serde(default = "default_rate")]
    pub r: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AmputationConfig {
    pub fn new(kind: AmputationKind, r: f64, seed: u64) -> Self {
        Self { kind, r, seed }
    }

    pub fn validate(&self) -> Result<(), AmputationError> {
        if self.r > 0.0 && self.r < 100.0 {
            Ok(())
        } else {
            Err(AmputationError::InvalidRate(self.r))
        }
    }
}

impl Default for AmputationConfig {
    fn default() -> Self {
        Self::new(AmputationKind::Mcar, default_rate(), 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovedCell {
    pub participant_id: String,
    pub date: NaiveDate,
    pub feature: String,
    pub original_value: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub participant_id: String,
    pub feature: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmputationPlan {
    /// Ordered by participant, then feature, then date.
    pub removed: Vec<RemovedCell>,
    pub realized_rate_pct: f64,
    /// Groups with no observed values; nothing could be removed there.
    pub skipped: Vec<SkippedGroup>,
}

impl AmputationPlan {
    pub fn removed_for<'a>(&'a self, participant_id: &'a str) -> impl Iterator<Item = &'a RemovedCell> + 'a {
        self.removed.iter().filter(move |c| c.participant_id == participant_id)
    }
}

/// Number of cells removed from a group of `n_obs` observed values.
pub fn removal_count(r: f64, n_obs: usize) -> usize {
    round_half_away(r / 100.0 * n_obs as f64) as usize
}

/// Positions (into `values`) chosen for removal. `values` holds one
/// group's observed values in date order.
fn choose(kind: AmputationKind, values: &[f64], m: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    let n = values.len();
    if m == 0 {
        return Vec::new();
    }
    let mut chosen = match kind {
        AmputationKind::Mcar => rand::seq::index::sample(rng, n, m).into_vec(),
        AmputationKind::MnarCentral | AmputationKind::MnarTails => {
            // stable sort keeps date order among ties
            let mut ranked: Vec<usize> = (0..n).collect();
            ranked.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            if kind == AmputationKind::MnarCentral {
                let start = (n - m) / 2;
                ranked[start..start + m].to_vec()
            } else {
                let low = m / 2;
                let high = m - low;
                let mut v = ranked[..low].to_vec();
                v.extend_from_slice(&ranked[n - high..]);
                v
            }
        }
    };
    chosen.sort_unstable();
    chosen
}

/// Removes observed values from `features` under `config`. The source
/// dataset is untouched; the plan records every removed original.
pub fn ampute(
    dataset: &LongitudinalDataset,
    features: &FeatureSet,
    config: &AmputationConfig,
) -> Result<(LongitudinalDataset, AmputationPlan), AmputationError> {
    config.validate()?;
    let cols = features.resolve(dataset)?;
    let mut out = dataset.clone();
    let mut removed = Vec::new();
    let mut skipped = Vec::new();

    for participant in out.participants_mut() {
        let pid = participant.id().to_string();
        for (name, &c) in features.names().iter().zip(&cols) {
            let rows_obs: Vec<usize> = participant
                .rows()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.values[c].is_observed())
                .map(|(i, _)| i)
                .collect();
            if rows_obs.is_empty() {
                skipped.push(SkippedGroup {
                    participant_id: pid.clone(),
                    feature: name.clone(),
                });
                continue;
            }
            let values: Vec<f64> = rows_obs
                .iter()
                .map(|&i| participant.rows()[i].values[c].value().unwrap_or_default())
                .collect();
            let m = removal_count(config.r, values.len());
            let mut group_rng = rng::stream(config.seed, &["ampute", &pid, name]);
            let rows = participant.rows_mut();
            for pos in choose(config.kind, &values, m, &mut group_rng) {
                let row = &mut rows[rows_obs[pos]];
                row.values[c] = Cell::Missing;
                removed.push(RemovedCell {
                    participant_id: pid.clone(),
                    date: row.date,
                    feature: name.clone(),
                    original_value: values[pos],
                });
            }
        }
    }

    let observed = dataset.observed_cells(&cols);
    let realized_rate_pct = if observed == 0 {
        0.0
    } else {
        100.0 * removed.len() as f64 / observed as f64
    };
    Ok((
        out,
        AmputationPlan {
            removed,
            realized_rate_pct,
            skipped,
        },
    ))
}

/// `100 * |removed| / observed cells` of the pre-amputation dataset over
/// `features`.
pub fn realized_rate(plan: &AmputationPlan, dataset: &LongitudinalDataset, features: &FeatureSet) -> Result<f64, DataError> {
    let cols = features.resolve(dataset)?;
    let observed = dataset.observed_cells(&cols);
    Ok(if observed == 0 {
        0.0
    } else {
        100.0 * plan.removed.len() as f64 / observed as f64
    })
}

/// Writes the plan's originals back into an amputed dataset.
pub fn restore(amputed: &LongitudinalDataset, plan: &AmputationPlan) -> LongitudinalDataset {
    let mut out = amputed.clone();
    let names: Vec<String> = out.feature_names().to_vec();
    for cell in &plan.removed {
        let Some(c) = names.iter().position(|n| *n == cell.feature) else {
            continue;
        };
        if let Some(p) = out.participants_mut().iter_mut().find(|p| p.id() == cell.participant_id) {
            if let Some(i) = p.row_index(cell.date) {
                p.rows_mut()[i].values[c] = Cell::Observed(cell.original_value);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DayRow, ParticipantSeries};
    use alloc::vec;
    use alloc::vec::Vec;

    fn base_date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 1, 4).unwrap()
    }

    fn dataset(columns: &[Vec<Option<f64>>]) -> LongitudinalDataset {
        let n = columns[0].len();
        let rows = (0..n)
            .map(|i| {
                DayRow::new(
                    base_date() + chrono::Days::new(i as u64),
                    1,
                    columns.iter().map(|col| Cell::from_option(col[i])).collect(),
                    None,
                )
            })
            .collect();
        let names = (0..columns.len()).map(|j| alloc::format!("f{j}")).collect();
        LongitudinalDataset::new(names, vec![ParticipantSeries::new("p1", rows).unwrap()]).unwrap()
    }

    fn one_to_hundred() -> LongitudinalDataset {
        dataset(&[(1..=100).map(|v| Some(f64::from(v))).collect()])
    }

    fn removed_values(plan: &AmputationPlan) -> Vec<f64> {
        let mut v: Vec<f64> = plan.removed.iter().map(|c| c.original_value).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn mcar_removes_exactly_ten_percent() {
        let ds = one_to_hundred();
        let fs = FeatureSet::all(&ds).unwrap();
        let (out, plan) = ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::Mcar, 10.0, 42)).unwrap();
        assert_eq!(plan.removed.len(), 10);
        assert_eq!(out.observed_cells(&[0]), 90);
        let (_, again) = ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::Mcar, 10.0, 42)).unwrap();
        assert_eq!(plan, again);
        let (_, other) = ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::Mcar, 10.0, 43)).unwrap();
        assert_ne!(plan.removed, other.removed);
    }

    #[test]
    fn mnar_central_band() {
        let ds = one_to_hundred();
        let fs = FeatureSet::all(&ds).unwrap();
        let (_, plan) = ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::MnarCentral, 10.0, 0)).unwrap();
        let expected: Vec<f64> = (46..=55).map(f64::from).collect();
        assert_eq!(removed_values(&plan), expected);
    }

    #[test]
    fn mnar_tails_band() {
        let ds = one_to_hundred();
        let fs = FeatureSet::all(&ds).unwrap();
        let (_, plan) = ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::MnarTails, 10.0, 0)).unwrap();
        let mut expected: Vec<f64> = (1..=5).map(f64::from).collect();
        expected.extend((96..=100).map(f64::from));
        assert_eq!(removed_values(&plan), expected);
    }

    #[test]
    fn small_groups_round_to_zero() {
        let ds = dataset(&[vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]]);
        let fs = FeatureSet::all(&ds).unwrap();
        for kind in [AmputationKind::Mcar, AmputationKind::MnarCentral, AmputationKind::MnarTails] {
            let (out, plan) = ampute(&ds, &fs, &AmputationConfig::new(kind, 10.0, 1)).unwrap();
            assert!(plan.removed.is_empty());
            assert_eq!(out, ds);
        }
    }

    #[test]
    fn empty_groups_are_skipped_and_missing_cells_untouched() {
        let ds = dataset(&[vec![None; 20], (0..20).map(|v| if v % 3 == 0 { None } else { Some(f64::from(v)) }).collect()]);
        let fs = FeatureSet::all(&ds).unwrap();
        let (out, plan) = ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::MnarTails, 25.0, 3)).unwrap();
        assert_eq!(plan.skipped, vec![SkippedGroup { participant_id: "p1".into(), feature: "f0".into() }]);
        assert_eq!(plan.removed.len(), 3);
        assert_eq!(restore(&out, &plan), ds);
    }

    #[test]
    fn realized_rate_ratios() {
        let ds = one_to_hundred();
        let fs = FeatureSet::all(&ds).unwrap();
        let empty = AmputationPlan { removed: Vec::new(), realized_rate_pct: 0.0, skipped: Vec::new() };
        assert_eq!(realized_rate(&empty, &ds, &fs).unwrap(), 0.0);
        let (_, plan) = ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::Mcar, 10.0, 9)).unwrap();
        assert_eq!(realized_rate(&plan, &ds, &fs).unwrap(), 10.0);
        assert_eq!(plan.realized_rate_pct, 10.0);
    }

    #[test]
    fn rate_must_be_open_interval() {
        let ds = one_to_hundred();
        let fs = FeatureSet::all(&ds).unwrap();
        for r in [0.0, 100.0, -1.0, f64::NAN] {
            assert!(matches!(
                ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::Mcar, r, 0)),
                Err(AmputationError::InvalidRate(_))
            ));
        }
    }

    #[test]
    fn ties_break_by_date() {
        let ds = dataset(&[vec![Some(1.0); 10]]);
        let fs = FeatureSet::all(&ds).unwrap();
        let (_, plan) = ampute(&ds, &fs, &AmputationConfig::new(AmputationKind::MnarCentral, 20.0, 0)).unwrap();
        let days: Vec<i64> = plan.removed.iter().map(|c| (c.date - base_date()).num_days()).collect();
        assert_eq!(days, vec![4, 5]);
    }
}
