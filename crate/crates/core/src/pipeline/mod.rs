//! Orchestration: participant-level imputation, reconstruction and
//! prediction evaluation, real-time simulation and synthetic data.
//!
//! Participant-level work goes through an [`Executor`] whose `map` must
//! return results in input order; every random stream is keyed by
//! participant and strategy labels, so results do not depend on the
//! executor or its worker count.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::amputation::AmputationError;
use crate::data::DataError;
use crate::rng::stream_seed;

pub mod pldi;
pub mod prediction;
pub mod predictor;
pub mod reconstruction;
pub mod synthetic;

pub use pldi::{pldi, ParticipantFailure, PldiOutcome};
pub use prediction::{
    run_prediction, run_realtime, Exclusion, LeakageMode, ParticipantPrediction, PredictionConfig, PredictionResult,
    RealtimeResult, RealtimeWeek, StrategyPrediction, WeekAggregation, WeekPrediction,
};
pub use predictor::{
    fit_predict_baseline, BaselineConfig, BaselineFit, BaselineLogistic, PredictError, Predictor, PredictorOutput,
    PredictorSpec, WeekExample,
};
pub use reconstruction::{run_reconstruction, ParticipantScore, ReconstructionResult, StrategySummary};
pub use synthetic::{generate_synthetic, SynthConfig};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Amputation(#[from] AmputationError),
    #[error(transparent)]
    Predictor(#[from] PredictError),
    #[error("no strategies given")]
    NoStrategies,
    #[error("{0}")]
    Invalid(String),
}

/// Order-preserving parallel map over participant work items.
pub trait Executor: Sync {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}

/// Seed handed to a strategy fitted on one participant.
pub fn imputer_seed(seed: u64, strategy: &str, participant_id: &str) -> u64 {
    stream_seed(seed, &["impute", strategy, participant_id])
}
