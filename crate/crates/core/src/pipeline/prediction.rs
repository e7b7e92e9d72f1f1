use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::pldi::{failure, fit_participant, impute_series, ParticipantFailure};
use super::predictor::{Predictor, WeekExample};
use super::{Executor, PipelineError};
use crate::data::{chronological_split, FeatureSet, LongitudinalDataset, ParticipantSeries};
use crate::impute::Imputer;
use crate::numeric::{mean, median};
use crate::rng::digest_f64;
use crate::stats::{accuracy, auroc, balanced_accuracy, wilcoxon_signed_rank, WilcoxonResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeakageMode {
    /// Imputers see all of a participant's rows.
    #[default]
    Full,
    /// Imputers are fitted on train rows only and then applied to both parts.
    TrainOnly,
}

impl LeakageMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LeakageMode::Full => "full",
            LeakageMode::TrainOnly => "train-only",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeekAggregation {
    #[default]
    Mean,
    Median,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionConfig {
    pub train_fraction: f64,
    pub leakage: LeakageMode,
    pub aggregation: WeekAggregation,
    /// Keys the imputer seeds.
    pub seed: u64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            leakage: LeakageMode::Full,
            aggregation: WeekAggregation::Mean,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub participant_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeekPrediction {
    pub participant_id: String,
    pub week: u32,
    pub label: bool,
    pub score: f64,
    pub pred: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantPrediction {
    pub participant_id: String,
    pub n_test: usize,
    /// Plain accuracy on the participant's test weeks.
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyPrediction {
    pub strategy: String,
    pub pooled_auroc: Option<f64>,
    pub pooled_balanced_accuracy: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    /// Same participants, in the same order, for every strategy.
    pub per_participant: Vec<ParticipantPrediction>,
    pub predictions: Vec<WeekPrediction>,
    /// Digest of every fitted imputer parameter, per participant.
    pub imputer_digests: Vec<(String, u64)>,
    pub predictor_weights: Vec<f64>,
    pub predictor_error: Option<String>,
    pub failures: Vec<ParticipantFailure>,
    /// Paired test of per-participant accuracy against the first strategy.
    pub wilcoxon_vs_first: Option<WilcoxonResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub config: PredictionConfig,
    pub predictor: String,
    /// Participants left out entirely.
    pub excluded: Vec<Exclusion>,
    /// Participants scored but kept out of predictor fitting.
    pub excluded_from_fit: Vec<Exclusion>,
    pub strategies: Vec<StrategyPrediction>,
}

/// Aggregated features and label of one week.
#[derive(Clone, Debug)]
struct Week {
    week: u32,
    features: Vec<Option<f64>>,
    label: bool,
}

/// Label of a week: the label of its last labelled row.
fn week_label(rows: &[&crate::data::DayRow]) -> Option<bool> {
    rows.iter().rev().find_map(|r| r.label)
}

fn labelled_weeks(series: &ParticipantSeries) -> Vec<u32> {
    let mut by_week: BTreeMap<u32, Option<bool>> = BTreeMap::new();
    for row in series.rows() {
        let e = by_week.entry(row.week).or_insert(None);
        if row.label.is_some() {
            *e = row.label;
        }
    }
    by_week.into_iter().filter(|(_, l)| l.is_some()).map(|(w, _)| w).collect()
}

fn aggregate(series: &ParticipantSeries, cols: &[usize], how: WeekAggregation) -> Vec<Week> {
    let mut by_week: BTreeMap<u32, Vec<&crate::data::DayRow>> = BTreeMap::new();
    for row in series.rows() {
        by_week.entry(row.week).or_default().push(row);
    }
    by_week
        .into_iter()
        .filter_map(|(week, rows)| {
            let label = week_label(&rows)?;
            let features = cols
                .iter()
                .map(|&c| {
                    let vals: Vec<f64> = rows.iter().filter_map(|r| r.values[c].value()).collect();
                    match how {
                        WeekAggregation::Mean => mean(&vals),
                        WeekAggregation::Median => median(&vals),
                    }
                })
                .collect();
            Some(Week { week, features, label })
        })
        .collect()
}

/// Imputed train and test weeks of one participant.
struct Split {
    train: Vec<Week>,
    test: Vec<Week>,
    digest: u64,
    failure: Option<ParticipantFailure>,
}

/// Fits on `train` only and transforms both parts.
fn inductive(imputer: &dyn Imputer, train: &ParticipantSeries, test: &ParticipantSeries, cols: &[usize], seed: u64, how: WeekAggregation) -> Split {
    let m_train = train.matrix(cols);
    let m_test = test.matrix(cols);
    let result = fit_participant(imputer, train, &m_train, seed)
        .and_then(|fit| Ok((fit.transform(&m_train)?, fit.transform(&m_test)?, fit.parameters())));
    match result {
        Ok((a, b, params)) => Split {
            train: aggregate(&train.with_matrix(cols, &a), cols, how),
            test: aggregate(&test.with_matrix(cols, &b), cols, how),
            digest: digest_f64(&params),
            failure: None,
        },
        Err(e) => Split {
            train: aggregate(train, cols, how),
            test: aggregate(test, cols, how),
            digest: digest_f64(&[]),
            failure: Some(failure(imputer, train.id(), &e)),
        },
    }
}

/// Fills residual gaps with the participant's train-week median, then the
/// pooled train median, then zero.
fn fill_residual(weeks: &[Week], own_train: &[Week], pooled: &[Option<f64>], pid: &str) -> Vec<WeekExample> {
    let n = pooled.len();
    let own: Vec<Option<f64>> = (0..n)
        .map(|j| median(&own_train.iter().filter_map(|w| w.features[j]).collect::<Vec<_>>()))
        .collect();
    weeks
        .iter()
        .map(|w| WeekExample {
            participant_id: pid.to_string(),
            week: w.week,
            features: (0..n).map(|j| w.features[j].or(own[j]).or(pooled[j]).unwrap_or(0.0)).collect(),
            label: w.label,
        })
        .collect()
}

fn pooled_medians(trains: &[&[Week]], n: usize) -> Vec<Option<f64>> {
    (0..n)
        .map(|j| median(&trains.iter().flat_map(|t| t.iter().filter_map(|w| w.features[j])).collect::<Vec<_>>()))
        .collect()
}

struct Scored {
    auroc: Option<f64>,
    balanced_accuracy: Option<f64>,
    predictions: Vec<WeekPrediction>,
    weights: Vec<f64>,
    error: Option<String>,
}

fn fit_and_score(predictor: &dyn Predictor, train: &[WeekExample], test: &[WeekExample]) -> Scored {
    match predictor.fit_predict(train, test) {
        Ok(out) => {
            let labels: Vec<bool> = test.iter().map(|e| e.label).collect();
            let preds: Vec<bool> = out.scores.iter().map(|&s| s >= out.threshold).collect();
            Scored {
                auroc: auroc(&out.scores, &labels).ok(),
                balanced_accuracy: balanced_accuracy(&preds, &labels).ok(),
                predictions: test
                    .iter()
                    .zip(out.scores.iter().zip(&preds))
                    .map(|(e, (&score, &pred))| WeekPrediction {
                        participant_id: e.participant_id.clone(),
                        week: e.week,
                        label: e.label,
                        score,
                        pred,
                    })
                    .collect(),
                weights: out.weights,
                error: None,
            }
        }
        Err(e) => {
            log::warn!("predictor {} failed: {e}", predictor.name());
            Scored {
                auroc: None,
                balanced_accuracy: None,
                predictions: Vec::new(),
                weights: Vec::new(),
                error: Some(e.to_string()),
            }
        }
    }
}

/// Within-person prediction: every participant's weeks are split
/// chronologically, imputed per participant (with or without test rows in
/// the fit, per `leakage`), aggregated per week and pooled into one
/// predictor fit.
pub fn run_prediction<E: Executor>(
    dataset: &LongitudinalDataset,
    features: &FeatureSet,
    strategies: &[&dyn Imputer],
    predictor: &dyn Predictor,
    config: &PredictionConfig,
    exec: &E,
) -> Result<PredictionResult, PipelineError> {
    if strategies.is_empty() {
        return Err(PipelineError::NoStrategies);
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(crate::data::DataError::InvalidFraction(config.train_fraction).into());
    }
    let cols = features.resolve(dataset)?;
    let n_feat = cols.len();

    let mut excluded = Vec::new();
    let mut excluded_from_fit = Vec::new();
    let mut included: Vec<(ParticipantSeries, ParticipantSeries, ParticipantSeries, bool)> = Vec::new();
    for p in dataset.participants() {
        let exclude = |reason: String| Exclusion {
            participant_id: p.id().to_string(),
            reason,
        };
        if labelled_weeks(p).len() < 2 {
            excluded.push(exclude("fewer than 2 labelled weeks".into()));
            continue;
        }
        match chronological_split(p, config.train_fraction) {
            Ok((train, test)) => {
                let train_labels: Vec<bool> = aggregate(&train, &[], config.aggregation).iter().map(|w| w.label).collect();
                let fit_ok = train_labels.contains(&true) && train_labels.contains(&false);
                if !fit_ok {
                    excluded_from_fit.push(exclude("train weeks contain a single class".into()));
                }
                included.push((p.clone(), train, test, fit_ok));
            }
            Err(e) => excluded.push(exclude(e.to_string())),
        }
    }

    let mut results = Vec::with_capacity(strategies.len());
    let mut first_acc: Vec<Option<f64>> = Vec::new();
    for (s_idx, strategy) in strategies.iter().enumerate() {
        let splits: Vec<Split> = exec.map(&included, |(full, train, test, _)| match config.leakage {
            LeakageMode::TrainOnly => inductive(*strategy, train, test, &cols, config.seed, config.aggregation),
            LeakageMode::Full => {
                let imputed = impute_series(*strategy, full, &cols, config.seed);
                let last_train = train.weeks().last().copied().unwrap_or(0);
                Split {
                    train: aggregate(&imputed.series.filter_weeks(|w| w <= last_train), &cols, config.aggregation),
                    test: aggregate(&imputed.series.filter_weeks(|w| w > last_train), &cols, config.aggregation),
                    digest: digest_f64(&imputed.parameters),
                    failure: imputed.failure,
                }
            }
        });
        let fit_trains: Vec<&[Week]> = splits
            .iter()
            .zip(&included)
            .filter(|(_, inc)| inc.3)
            .map(|(s, _)| s.train.as_slice())
            .collect();
        let pooled = pooled_medians(&fit_trains, n_feat);
        let mut train_ex = Vec::new();
        let mut test_ex = Vec::new();
        for (split, inc) in splits.iter().zip(&included) {
            let pid = inc.0.id();
            if inc.3 {
                train_ex.extend(fill_residual(&split.train, &split.train, &pooled, pid));
            }
            test_ex.extend(fill_residual(&split.test, &split.train, &pooled, pid));
        }
        let scored = fit_and_score(predictor, &train_ex, &test_ex);

        let per_participant: Vec<ParticipantPrediction> = included
            .iter()
            .map(|inc| {
                let mine: Vec<&WeekPrediction> = scored.predictions.iter().filter(|w| w.participant_id == inc.0.id()).collect();
                let preds: Vec<bool> = mine.iter().map(|w| w.pred).collect();
                let labels: Vec<bool> = mine.iter().map(|w| w.label).collect();
                ParticipantPrediction {
                    participant_id: inc.0.id().to_string(),
                    n_test: mine.len(),
                    accuracy: accuracy(&preds, &labels).ok(),
                }
            })
            .collect();
        let acc: Vec<Option<f64>> = per_participant.iter().map(|p| p.accuracy).collect();
        let wilcoxon_vs_first = if s_idx == 0 {
            first_acc = acc;
            None
        } else {
            let (a, b): (Vec<f64>, Vec<f64>) = acc.iter().zip(&first_acc).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip();
            wilcoxon_signed_rank(&a, &b).ok()
        };
        results.push(StrategyPrediction {
            strategy: strategy.name().to_string(),
            pooled_auroc: scored.auroc,
            pooled_balanced_accuracy: scored.balanced_accuracy,
            n_train: train_ex.len(),
            n_test: test_ex.len(),
            per_participant,
            predictions: scored.predictions,
            imputer_digests: splits.iter().zip(&included).map(|(s, inc)| (inc.0.id().to_string(), s.digest)).collect(),
            predictor_weights: scored.weights,
            predictor_error: scored.error,
            failures: splits.into_iter().filter_map(|s| s.failure).collect(),
            wilcoxon_vs_first,
        });
    }
    Ok(PredictionResult {
        config: config.clone(),
        predictor: predictor.name().to_string(),
        excluded,
        excluded_from_fit,
        strategies: results,
    })
}

pub const REALTIME_START_WEEK: u32 = 3;
pub const REALTIME_END_WEEK: u32 = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealtimeWeek {
    pub strategy: String,
    pub week: u32,
    pub auroc: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub imputer_digests: Vec<(String, u64)>,
    pub predictor_weights: Vec<f64>,
    pub predictor_error: Option<String>,
    pub failures: Vec<ParticipantFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealtimeResult {
    pub start_week: u32,
    pub end_week: u32,
    pub predictor: String,
    pub skipped: Vec<Exclusion>,
    /// Strategy-major, weeks ascending.
    pub weeks: Vec<RealtimeWeek>,
}

/// Inductive week-by-week evaluation: for each week `n` from 3 to
/// `min(10, last week)`, imputers and the predictor are fitted on weeks
/// `1..n-1` only and week `n` is imputed and predicted.
pub fn run_realtime<E: Executor>(
    dataset: &LongitudinalDataset,
    features: &FeatureSet,
    strategies: &[&dyn Imputer],
    predictor: &dyn Predictor,
    aggregation: WeekAggregation,
    seed: u64,
    exec: &E,
) -> Result<RealtimeResult, PipelineError> {
    if strategies.is_empty() {
        return Err(PipelineError::NoStrategies);
    }
    let cols = features.resolve(dataset)?;
    let mut skipped = Vec::new();
    let mut kept = Vec::new();
    for p in dataset.participants() {
        if labelled_weeks(p).len() < 3 {
            skipped.push(Exclusion {
                participant_id: p.id().to_string(),
                reason: "fewer than 3 labelled weeks".into(),
            });
        } else {
            kept.push(p);
        }
    }
    let last_week = kept.iter().filter_map(|p| p.weeks().last().copied()).max().unwrap_or(0);
    let end_week = last_week.min(REALTIME_END_WEEK);

    let mut weeks = Vec::new();
    for strategy in strategies {
        for n in REALTIME_START_WEEK..=end_week {
            // Rows after week n are dropped before anything else happens,
            // and eligibility only looks at weeks up to n.
            let parts: Vec<(ParticipantSeries, ParticipantSeries)> = kept
                .iter()
                .filter(|p| labelled_weeks(p).iter().filter(|&&w| w <= n).count() >= 3)
                .map(|p| (p.filter_weeks(|w| w < n), p.filter_weeks(|w| w == n)))
                .filter(|(h, _)| !h.is_empty())
                .collect();
            let splits = exec.map(&parts, |(history, target)| inductive(*strategy, history, target, &cols, seed, aggregation));
            let trains: Vec<&[Week]> = splits.iter().map(|s| s.train.as_slice()).collect();
            let pooled = pooled_medians(&trains, cols.len());
            let mut train_ex = Vec::new();
            let mut test_ex = Vec::new();
            for (split, (history, _)) in splits.iter().zip(&parts) {
                train_ex.extend(fill_residual(&split.train, &split.train, &pooled, history.id()));
                test_ex.extend(fill_residual(&split.test, &split.train, &pooled, history.id()));
            }
            let scored = fit_and_score(predictor, &train_ex, &test_ex);
            weeks.push(RealtimeWeek {
                strategy: strategy.name().to_string(),
                week: n,
                auroc: scored.auroc,
                balanced_accuracy: scored.balanced_accuracy,
                n_train: train_ex.len(),
                n_test: test_ex.len(),
                imputer_digests: splits.iter().zip(&parts).map(|(s, (h, _))| (h.id().to_string(), s.digest)).collect(),
                predictor_weights: scored.weights,
                predictor_error: scored.error,
                failures: splits.into_iter().filter_map(|s| s.failure).collect(),
            });
        }
    }
    Ok(RealtimeResult {
        start_week: REALTIME_START_WEEK,
        end_week,
        predictor: predictor.name().to_string(),
        skipped,
        weeks,
    })
}
