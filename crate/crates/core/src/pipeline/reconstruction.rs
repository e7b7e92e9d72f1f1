use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::pldi::{impute_series, ParticipantFailure};
use super::{Executor, PipelineError};
use crate::amputation::{ampute, AmputationConfig, AmputationPlan, RemovedCell};
use crate::data::{availability, FeatureSet, LongitudinalDataset};
use crate::impute::Imputer;
use crate::stats::{wilcoxon_signed_rank, WilcoxonResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantScore {
    pub participant_id: String,
    pub strategy: String,
    /// `None` when nothing was removed from this participant or the
    /// strategy imputed none of the removed cells.
    pub r_rmse: Option<f64>,
    pub n_removed: usize,
    pub n_scored: usize,
    /// Removed cells the strategy left missing.
    pub n_declined: usize,
    /// Availability of the participant's source data over the features.
    pub availability_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    /// Mean of the defined per-participant values.
    pub mean_r_rmse: Option<f64>,
    /// r-RMSE over every scored cell of every participant.
    pub pooled_r_rmse: Option<f64>,
    pub n_scored: usize,
    pub n_declined: usize,
    pub failures: Vec<ParticipantFailure>,
    /// Paired test against the first strategy over participants where both
    /// are defined; `None` for the first strategy or degenerate pairs.
    pub wilcoxon_vs_first: Option<WilcoxonResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub amputation: AmputationConfig,
    pub realized_rate_pct: f64,
    pub n_removed: usize,
    /// Strategy-major, participants in dataset order.
    pub per_participant: Vec<ParticipantScore>,
    pub summaries: Vec<StrategySummary>,
    pub plan: AmputationPlan,
}

impl ReconstructionResult {
    pub fn scores_for<'a>(&'a self, strategy: &'a str) -> impl Iterator<Item = &'a ParticipantScore> + 'a {
        self.per_participant.iter().filter(move |s| s.strategy == strategy)
    }
}

/// Squared errors at removed cells plus the declined count.
struct CellErrors {
    sq: Vec<f64>,
    declined: usize,
}

fn score_participant(
    imputed: &crate::data::ParticipantSeries,
    removed: &[&RemovedCell],
    feature_index: &BTreeMap<&str, usize>,
) -> CellErrors {
    let mut sq = Vec::with_capacity(removed.len());
    let mut declined = 0;
    for cell in removed {
        let value = imputed
            .row_index(cell.date)
            .and_then(|i| imputed.rows()[i].values[feature_index[cell.feature.as_str()]].value());
        match value {
            Some(v) => sq.push((v - cell.original_value) * (v - cell.original_value)),
            None => declined += 1,
        }
    }
    CellErrors { sq, declined }
}

fn rmse(sq: &[f64]) -> Option<f64> {
    (!sq.is_empty()).then(|| libm::sqrt(sq.iter().sum::<f64>() / sq.len() as f64))
}

/// Amputes once with `amputation`, imputes the amputed dataset with every
/// strategy (participant by participant) and scores each strategy on the
/// shared removed cells.
pub fn run_reconstruction<E: Executor>(
    dataset: &LongitudinalDataset,
    features: &FeatureSet,
    strategies: &[&dyn Imputer],
    amputation: &AmputationConfig,
    seed: u64,
    exec: &E,
) -> Result<ReconstructionResult, PipelineError> {
    if strategies.is_empty() {
        return Err(PipelineError::NoStrategies);
    }
    let cols = features.resolve(dataset)?;
    if dataset.observed_cells(&cols) == 0 {
        return Err(PipelineError::Invalid("dataset has no observed cells in the selected features".into()));
    }
    let (amputed, plan) = ampute(dataset, features, amputation)?;
    let avail = availability(dataset, features)?;
    let feature_index: BTreeMap<&str, usize> = dataset
        .feature_names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut by_pid: BTreeMap<&str, Vec<&RemovedCell>> = BTreeMap::new();
    for cell in &plan.removed {
        by_pid.entry(cell.participant_id.as_str()).or_default().push(cell);
    }

    let mut per_participant = Vec::new();
    let mut summaries = Vec::new();
    let mut first_scores: Vec<Option<f64>> = Vec::new();
    for (s_idx, strategy) in strategies.iter().enumerate() {
        let results = exec.map(amputed.participants(), |p| {
            let imputed = impute_series(*strategy, p, &cols, seed);
            let removed = by_pid.get(p.id()).map_or(&[][..], Vec::as_slice);
            let errors = score_participant(&imputed.series, removed, &feature_index);
            (imputed.failure, errors, removed.len())
        });
        let mut pooled = Vec::new();
        let mut failures = Vec::new();
        let mut declined_total = 0;
        let mut scores = Vec::with_capacity(results.len());
        for ((failure, errors, n_removed), (pid, avail_pct)) in results.into_iter().zip(&avail.per_participant_pct) {
            failures.extend(failure);
            let r = rmse(&errors.sq);
            declined_total += errors.declined;
            scores.push(r);
            per_participant.push(ParticipantScore {
                participant_id: pid.clone(),
                strategy: strategy.name().to_string(),
                r_rmse: r,
                n_removed,
                n_scored: errors.sq.len(),
                n_declined: errors.declined,
                availability_pct: *avail_pct,
            });
            pooled.extend(errors.sq);
        }
        let defined: Vec<f64> = scores.iter().flatten().copied().collect();
        let wilcoxon_vs_first = if s_idx == 0 {
            first_scores = scores.clone();
            None
        } else {
            let (a, b): (Vec<f64>, Vec<f64>) = scores
                .iter()
                .zip(&first_scores)
                .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
                .unzip();
            wilcoxon_signed_rank(&a, &b).ok()
        };
        summaries.push(StrategySummary {
            strategy: strategy.name().to_string(),
            mean_r_rmse: crate::numeric::mean(&defined),
            pooled_r_rmse: rmse(&pooled),
            n_scored: pooled.len(),
            n_declined: declined_total,
            failures,
            wilcoxon_vs_first,
        });
    }

    Ok(ReconstructionResult {
        amputation: *amputation,
        realized_rate_pct: plan.realized_rate_pct,
        n_removed: plan.removed.len(),
        per_participant,
        summaries,
        plan,
    })
}
