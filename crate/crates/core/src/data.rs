//! Longitudinal datasets: participants, day rows, feature sets and
//! availability accounting.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("feature `{0}` not found in dataset")]
    FeatureNotFound(String),
    #[error("feature `{0}` listed more than once")]
    DuplicateFeature(String),
    #[error("feature set is empty")]
    EmptyFeatureSet,
    #[error("participant `{0}` appears more than once")]
    DuplicateParticipant(String),
    #[error("participant `{participant}`: row {date} has {got} values, expected {expected}")]
    RowWidth {
        participant: String,
        date: NaiveDate,
        got: usize,
        expected: usize,
    },
    #[error("participant `{participant}`: dates must be strictly increasing (at {date})")]
    NonIncreasingDates { participant: String, date: NaiveDate },
    #[error("participant `{participant}`: non-finite observed value on {date}")]
    NonFiniteValue { participant: String, date: NaiveDate },
    #[error("participant `{participant}`: week index must be >= 1 (on {date})")]
    InvalidWeek { participant: String, date: NaiveDate },
    #[error("participant `{participant}` cannot be split chronologically: {reason}")]
    SplitInfeasible { participant: String, reason: String },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
}

/// One cell of the day × feature grid. Missingness is a state, never a
/// sentinel value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Observed(f64),
    Missing,
}

impl Cell {
    pub fn from_option(v: Option<f64>) -> Self {
        match v {
            Some(x) => Cell::Observed(x),
            None => Cell::Missing,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Observed(x) => Some(x),
            Cell::Missing => None,
        }
    }

    pub fn is_observed(self) -> bool {
        matches!(self, Cell::Observed(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub date: NaiveDate,
    /// 1-based study week.
    pub week: u32,
    pub values: Vec<Cell>,
    pub label: Option<bool>,
}

impl DayRow {
    pub fn new(date: NaiveDate, week: u32, values: Vec<Cell>, label: Option<bool>) -> Self {
        Self {
            date,
            week,
            values,
            label,
        }
    }
}

/// 1-based week of `date` counted from `first`.
pub fn derived_week(first: NaiveDate, date: NaiveDate) -> u32 {
    let days = date.signed_duration_since(first).num_days();
    1 + days.div_euclid(7) as u32
}

/// Day rows of one participant, sorted by strictly increasing date.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSeries {
    id: String,
    rows: Vec<DayRow>,
}

impl ParticipantSeries {
    /// Builds a series whose rows already carry week indices.
    pub fn new(id: impl Into<String>, rows: Vec<DayRow>) -> Result<Self, DataError> {
        let series = Self {
            id: id.into(),
            rows,
        };
        series.validate()?;
        Ok(series)
    }

    /// Builds a series and assigns `week = 1 + floor(days since first row / 7)`.
    pub fn with_derived_weeks(id: impl Into<String>, mut rows: Vec<DayRow>) -> Result<Self, DataError> {
        if let Some(first) = rows.first().map(|r| r.date) {
            for row in &mut rows {
                row.week = derived_week(first, row.date);
            }
        }
        Self::new(id, rows)
    }

    fn validate(&self) -> Result<(), DataError> {
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 && row.date <= self.rows[i - 1].date {
                return Err(DataError::NonIncreasingDates {
                    participant: self.id.clone(),
                    date: row.date,
                });
            }
            if row.week == 0 {
                return Err(DataError::InvalidWeek {
                    participant: self.id.clone(),
                    date: row.date,
                });
            }
            if row.values.iter().any(|c| matches!(c, Cell::Observed(x) if !x.is_finite())) {
                return Err(DataError::NonFiniteValue {
                    participant: self.id.clone(),
                    date: row.date,
                });
            }
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rows(&self) -> &[DayRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Index of the row dated `date`, if any.
    pub fn row_index(&self, date: NaiveDate) -> Option<usize> {
        self.rows.binary_search_by(|r| r.date.cmp(&date)).ok()
    }

    /// Distinct week indices in ascending order.
    pub fn weeks(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.rows.iter().map(|r| r.week).collect();
        set.into_iter().collect()
    }

    /// Rows whose week satisfies `keep`, as a new series.
    pub fn filter_weeks(&self, keep: impl Fn(u32) -> bool) -> ParticipantSeries {
        ParticipantSeries {
            id: self.id.clone(),
            rows: self.rows.iter().filter(|r| keep(r.week)).cloned().collect(),
        }
    }

    /// Feature matrix over the columns `cols` (indices into the row values).
    pub fn matrix(&self, cols: &[usize]) -> FeatureMatrix {
        let days = self.rows.iter().map(|r| day_number(r.date)).collect();
        let mut cells = Vec::with_capacity(self.rows.len() * cols.len());
        for row in &self.rows {
            cells.extend(cols.iter().map(|&c| row.values[c].value()));
        }
        FeatureMatrix::from_parts(self.rows.len(), cols.len(), cells, days)
    }

    /// Copy of the series with the columns `cols` replaced from `m`.
    pub fn with_matrix(&self, cols: &[usize], m: &FeatureMatrix) -> ParticipantSeries {
        assert_eq!(m.n_rows(), self.rows.len(), "matrix/series row mismatch");
        let mut rows = self.rows.clone();
        for (r, row) in rows.iter_mut().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                row.values[c] = Cell::from_option(m.get(r, j));
            }
        }
        ParticipantSeries {
            id: self.id.clone(),
            rows,
        }
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [DayRow] {
        &mut self.rows
    }
}

/// Day number used as the row key of feature matrices.
pub fn day_number(date: NaiveDate) -> i64 {
    i64::from(chrono::Datelike::num_days_from_ce(&date))
}

/// Participant-keyed grid of day × feature values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalDataset {
    feature_names: Vec<String>,
    participants: Vec<ParticipantSeries>,
}

impl LongitudinalDataset {
    pub fn new(feature_names: Vec<String>, participants: Vec<ParticipantSeries>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateFeature(name.clone()));
            }
        }
        let mut ids = BTreeSet::new();
        for p in &participants {
            if !ids.insert(p.id()) {
                return Err(DataError::DuplicateParticipant(p.id().to_string()));
            }
            for row in p.rows() {
                if row.values.len() != feature_names.len() {
                    return Err(DataError::RowWidth {
                        participant: p.id().to_string(),
                        date: row.date,
                        got: row.values.len(),
                        expected: feature_names.len(),
                    });
                }
            }
        }
        Ok(Self {
            feature_names,
            participants,
        })
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn participants(&self) -> &[ParticipantSeries] {
        &self.participants
    }

    pub fn participant(&self, id: &str) -> Option<&ParticipantSeries> {
        self.participants.iter().find(|p| p.id() == id)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Same features, participants replaced. Each series must keep the
    /// dataset's row width.
    pub fn with_participants(&self, participants: Vec<ParticipantSeries>) -> Result<Self, DataError> {
        Self::new(self.feature_names.clone(), participants)
    }

    pub(crate) fn participants_mut(&mut self) -> &mut [ParticipantSeries] {
        &mut self.participants
    }

    /// Number of observed cells over `cols`.
    pub fn observed_cells(&self, cols: &[usize]) -> usize {
        self.participants
            .iter()
            .flat_map(|p| p.rows())
            .map(|r| cols.iter().filter(|&&c| r.values[c].is_observed()).count())
            .sum()
    }
}

/// Non-empty, duplicate-free list of feature names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    names: Vec<String>,
}

impl FeatureSet {
    pub fn new<I, S>(names: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(DataError::EmptyFeatureSet);
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(DataError::DuplicateFeature(n.clone()));
            }
        }
        Ok(Self { names })
    }

    /// Every feature of `dataset`, in dataset order.
    pub fn all(dataset: &LongitudinalDataset) -> Result<Self, DataError> {
        Self::new(dataset.feature_names().iter().cloned())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Column indices of the set's features in `dataset`.
    pub fn resolve(&self, dataset: &LongitudinalDataset) -> Result<Vec<usize>, DataError> {
        self.names
            .iter()
            .map(|n| dataset.feature_index(n).ok_or_else(|| DataError::FeatureNotFound(n.clone())))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityReport {
    pub overall_pct: f64,
    /// In feature-set order.
    pub per_feature_pct: Vec<(String, f64)>,
    /// In dataset participant order.
    pub per_participant_pct: Vec<(String, f64)>,
}

fn pct(observed: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * observed as f64 / total as f64
    }
}

/// Percentage of non-empty cells over `features`, overall and broken down
/// by feature and by participant. Empty slices report 0.
pub fn availability(dataset: &LongitudinalDataset, features: &FeatureSet) -> Result<AvailabilityReport, DataError> {
    let cols = features.resolve(dataset)?;
    let mut per_feature_obs = alloc::vec![0usize; cols.len()];
    let mut total_rows = 0usize;
    let mut per_participant_pct = Vec::with_capacity(dataset.participants().len());
    for p in dataset.participants() {
        let mut obs = 0usize;
        for row in p.rows() {
            for (j, &c) in cols.iter().enumerate() {
                if row.values[c].is_observed() {
                    obs += 1;
                    per_feature_obs[j] += 1;
                }
            }
        }
        total_rows += p.len();
        per_participant_pct.push((p.id().to_string(), pct(obs, p.len() * cols.len())));
    }
    let observed: usize = per_feature_obs.iter().sum();
    Ok(AvailabilityReport {
        overall_pct: pct(observed, total_rows * cols.len()),
        per_feature_pct: features
            .names()
            .iter()
            .cloned()
            .zip(per_feature_obs.iter().map(|&o| pct(o, total_rows)))
            .collect(),
        per_participant_pct,
    })
}

/// Dataset restricted to the requested columns, in feature-set order.
pub fn select_features(dataset: &LongitudinalDataset, features: &FeatureSet) -> Result<LongitudinalDataset, DataError> {
    let cols = features.resolve(dataset)?;
    let participants = dataset
        .participants()
        .iter()
        .map(|p| ParticipantSeries {
            id: p.id.clone(),
            rows: p
                .rows
                .iter()
                .map(|r| DayRow {
                    date: r.date,
                    week: r.week,
                    values: cols.iter().map(|&c| r.values[c]).collect(),
                    label: r.label,
                })
                .collect(),
        })
        .collect();
    Ok(LongitudinalDataset {
        feature_names: features.names().to_vec(),
        participants,
    })
}

/// Splits a participant by distinct weeks: the first
/// `ceil(train_fraction * n_weeks)` weeks train, the rest test. The train
/// share is capped at `n_weeks - 1` so the test part is never empty.
pub fn chronological_split(
    series: &ParticipantSeries,
    train_fraction: f64,
) -> Result<(ParticipantSeries, ParticipantSeries), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    let weeks = series.weeks();
    if weeks.len() < 2 {
        return Err(DataError::SplitInfeasible {
            participant: series.id().to_string(),
            reason: alloc::format!("{} distinct week(s)", weeks.len()),
        });
    }
    // the epsilon guards fractions like 0.8 * 10 landing just above 8
    let n_train = (libm::ceil(train_fraction * weeks.len() as f64 - 1e-9) as usize).clamp(1, weeks.len() - 1);
    let last_train_week = weeks[n_train - 1];
    Ok((
        series.filter_weeks(|w| w <= last_train_week),
        series.filter_weeks(|w| w > last_train_week),
    ))
}
