//! Participant-level missing-data imputation for longitudinal sensing data.
//!
//! The crate is `no_std` (with `alloc`) and carries every algorithm: the
//! longitudinal data model, controlled amputation, the imputation strategy
//! catalogue, missingness tests and evaluation metrics, and the
//! reconstruction / prediction / real-time evaluation pipelines. File
//! formats, the command-line front end and thread pools live in the
//! `imputelab` companion crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod amputation;
pub mod data;
pub mod impute;
pub mod matrix;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod stats;

pub use amputation::{ampute, realized_rate, AmputationConfig, AmputationError, AmputationKind, AmputationPlan};
pub use data::{
    availability, chronological_split, select_features, AvailabilityReport, Cell, DataError,
    DayRow, FeatureSet, LongitudinalDataset, ParticipantSeries,
};
pub use impute::{FittedImputer, ImputeError, Imputer, Strategy, StrategySpec};
pub use matrix::FeatureMatrix;
