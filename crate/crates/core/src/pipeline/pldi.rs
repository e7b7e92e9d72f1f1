use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{imputer_seed, Executor};
use crate::data::{DataError, FeatureSet, LongitudinalDataset, ParticipantSeries};
use crate::impute::{FittedImputer, ImputeError, Imputer};
use crate::matrix::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParticipantFailure {
    pub participant_id: String,
    pub strategy: String,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct PldiOutcome {
    pub dataset: LongitudinalDataset,
    pub failures: Vec<ParticipantFailure>,
    /// Fitted parameters per participant, in participant order; empty for
    /// participants that failed or had no rows.
    pub parameters: Vec<(String, Vec<f64>)>,
}

pub(crate) struct Imputed {
    pub series: ParticipantSeries,
    pub failure: Option<ParticipantFailure>,
    pub parameters: Vec<f64>,
}

pub(crate) fn fit_participant(
    imputer: &dyn Imputer,
    series: &ParticipantSeries,
    m: &FeatureMatrix,
    seed: u64,
) -> Result<alloc::boxed::Box<dyn FittedImputer>, ImputeError> {
    imputer.fit(series.id(), m, imputer_seed(seed, imputer.name(), series.id()))
}

pub(crate) fn failure(imputer: &dyn Imputer, pid: &str, e: &ImputeError) -> ParticipantFailure {
    log::warn!("strategy {} failed for participant {pid}: {e}; leaving it un-imputed", imputer.name());
    ParticipantFailure {
        participant_id: pid.to_string(),
        strategy: imputer.name().to_string(),
        error: e.to_string(),
    }
}

pub(crate) fn impute_series(imputer: &dyn Imputer, series: &ParticipantSeries, cols: &[usize], seed: u64) -> Imputed {
    if series.is_empty() {
        log::warn!("participant {} has no rows; passing through", series.id());
        return Imputed {
            series: series.clone(),
            failure: None,
            parameters: Vec::new(),
        };
    }
    let m = series.matrix(cols);
    let result = fit_participant(imputer, series, &m, seed).and_then(|fit| Ok((fit.transform(&m)?, fit.parameters())));
    match result {
        Ok((out, parameters)) => Imputed {
            series: series.with_matrix(cols, &out),
            failure: None,
            parameters,
        },
        Err(e) => Imputed {
            series: series.clone(),
            failure: Some(failure(imputer, series.id(), &e)),
            parameters: Vec::new(),
        },
    }
}

/// Participant-level imputation: each participant's feature submatrix is
/// fitted and completed using only that participant's rows. Failures leave
/// the participant un-imputed and are reported.
pub fn pldi<E: Executor>(
    dataset: &LongitudinalDataset,
    features: &FeatureSet,
    imputer: &dyn Imputer,
    seed: u64,
    exec: &E,
) -> Result<PldiOutcome, DataError> {
    let cols = features.resolve(dataset)?;
    let results = exec.map(dataset.participants(), |p| impute_series(imputer, p, &cols, seed));
    let mut participants = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    let mut parameters = Vec::with_capacity(results.len());
    for r in results {
        parameters.push((r.series.id().to_string(), r.parameters));
        participants.push(r.series);
        failures.extend(r.failure);
    }
    Ok(PldiOutcome {
        dataset: dataset.with_participants(participants)?,
        failures,
        parameters,
    })
}
