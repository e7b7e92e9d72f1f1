//! Imputation strategies.
//!
//! Every strategy follows a fit/transform contract over one participant's
//! [`FeatureMatrix`]: `fit` learns whatever the strategy needs from the
//! matrix it is given, and the returned [`FittedImputer`] completes any
//! matrix with the same columns. Two postconditions hold for every
//! strategy: observed cells are returned bit-identical, and a feature with
//! no observed value in the fitted data stays missing.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;

pub mod autoencoder;
pub mod globem_c;
pub mod knn;
pub mod median;
pub mod mice;
pub mod soft_impute;
pub mod windowed;

pub use autoencoder::{impute_autoencoder, Activation, AutoencoderConfig, AutoencoderModel, InitialImputer};
pub use globem_c::{impute_globem_c_proxy, GlobemCConfig, GlobemCOutput};
pub use knn::{impute_bounded_knn, impute_simple_knn, BoundedKnnConfig, SimpleKnnConfig};
pub use median::impute_median;
pub use mice::{impute_mice, MiceConfig};
pub use soft_impute::{impute_soft_impute, SoftImputeConfig};
pub use windowed::{impute_windowed_median, WindowedMedianConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImputeError {
    #[error("every row or column was dropped by the missingness filter")]
    AllDataDropped,
    #[error("soft-impute failed: {0}")]
    SoftImputeFailed(String),
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
    #[error("matrix has {got} columns, fitted imputer expects {expected}")]
    ColumnMismatch { got: usize, expected: usize },
}

/// Strategy catalogue with per-kind parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StrategySpec {
    Median,
    /// 28-day block median with zero fallback (the GLOBEM-R baseline).
    WindowedMedian(WindowedMedianConfig),
    /// Row/column filtering then mean fill (proxy for GLOBEM-C).
    GlobemCProxy(GlobemCConfig),
    SimpleKnn(SimpleKnnConfig),
    BoundedKnn(BoundedKnnConfig),
    Mice(MiceConfig),
    SoftImpute(SoftImputeConfig),
    Autoencoder(AutoencoderConfig),
}

impl StrategySpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            StrategySpec::Median => "MEDIAN",
            StrategySpec::WindowedMedian(_) => "WINDOWED_MEDIAN",
            StrategySpec::GlobemCProxy(_) => "GLOBEM_C_PROXY",
            StrategySpec::SimpleKnn(_) => "SIMPLE_KNN",
            StrategySpec::BoundedKnn(_) => "BOUNDED_KNN",
            StrategySpec::Mice(_) => "MICE",
            StrategySpec::SoftImpute(_) => "SOFT_IMPUTE",
            StrategySpec::Autoencoder(_) => "AUTOENCODER",
        }
    }

    /// Report label used when the configuration does not name the strategy.
    pub fn default_name(&self) -> String {
        let name = match self {
            StrategySpec::Median => "median",
            StrategySpec::WindowedMedian(_) => "globem-r",
            StrategySpec::GlobemCProxy(_) => "globem-c",
            StrategySpec::SimpleKnn(_) => "simple-knn",
            StrategySpec::BoundedKnn(_) => "bounded-knn",
            StrategySpec::Mice(_) => "mice",
            StrategySpec::SoftImpute(_) => "soft-impute",
            StrategySpec::Autoencoder(cfg) => match cfg.initial_imputer {
                InitialImputer::Median => "autoencoder-median",
                InitialImputer::SimpleKnn => "autoencoder-knn",
            },
        };
        name.into()
    }

    pub fn validate(&self) -> Result<(), ImputeError> {
        match self {
            StrategySpec::Median => Ok(()),
            StrategySpec::WindowedMedian(c) => c.validate(),
            StrategySpec::GlobemCProxy(c) => c.validate(),
            StrategySpec::SimpleKnn(c) => c.validate(),
            StrategySpec::BoundedKnn(c) => c.validate(),
            StrategySpec::Mice(c) => c.validate(),
            StrategySpec::SoftImpute(c) => c.validate(),
            StrategySpec::Autoencoder(c) => c.validate(),
        }
    }

    /// Fits the strategy on `m`. `seed` feeds strategies with random
    /// initialisation; the pipeline derives it per participant.
    pub fn fit(&self, m: &FeatureMatrix, seed: u64) -> Result<Box<dyn FittedImputer>, ImputeError> {
        self.validate()?;
        Ok(match self {
            StrategySpec::Median => Box::new(median::MedianFit::fit(m)),
            StrategySpec::WindowedMedian(c) => Box::new(windowed::WindowedMedianFit::fit(m, c)),
            StrategySpec::GlobemCProxy(c) => Box::new(globem_c::GlobemCFit::fit(m, c)?),
            StrategySpec::SimpleKnn(c) => Box::new(knn::KnnFit::simple(m, c)),
            StrategySpec::BoundedKnn(c) => Box::new(knn::KnnFit::bounded(m, c)),
            StrategySpec::Mice(c) => Box::new(mice::MiceFit::fit(m, c)),
            StrategySpec::SoftImpute(c) => Box::new(soft_impute::SoftImputeFit::fit(m, c)?),
            StrategySpec::Autoencoder(c) => Box::new(autoencoder::AutoencoderFit::fit(m, c, seed)),
        })
    }

    /// Fit on `m` and complete `m`.
    pub fn impute(&self, m: &FeatureMatrix, seed: u64) -> Result<FeatureMatrix, ImputeError> {
        self.fit(m, seed)?.transform(m)
    }
}

/// A strategy fitted on one participant's data.
pub trait FittedImputer: Send + Sync {
    fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ImputeError>;

    /// Flat view of every fitted parameter, for leakage and determinism
    /// checks.
    fn parameters(&self) -> Vec<f64>;
}

/// Anything the pipeline can fit per participant. [`Strategy`] is the
/// catalogue implementation; tests plug in oracles.
pub trait Imputer: Sync {
    fn name(&self) -> &str;

    fn fit(&self, participant_id: &str, m: &FeatureMatrix, seed: u64) -> Result<Box<dyn FittedImputer>, ImputeError>;
}

/// A catalogue strategy with its report label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub name: String,
    pub spec: StrategySpec,
}

impl Strategy {
    pub fn new(spec: StrategySpec) -> Self {
        Self {
            name: spec.default_name(),
            spec,
        }
    }

    pub fn named(name: impl Into<String>, spec: StrategySpec) -> Self {
        Self { name: name.into(), spec }
    }
}

impl Imputer for Strategy {
    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, _participant_id: &str, m: &FeatureMatrix, seed: u64) -> Result<Box<dyn FittedImputer>, ImputeError> {
        self.spec.fit(m, seed)
    }
}

pub(crate) fn check_columns(m: &FeatureMatrix, expected: usize) -> Result<(), ImputeError> {
    if m.n_cols() == expected {
        Ok(())
    } else {
        Err(ImputeError::ColumnMismatch {
            got: m.n_cols(),
            expected,
        })
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn m(rows: &[&[Option<f64>]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    /// Random matrix with roughly `missing` fraction of cells missing and
    /// an occasional fully missing column.
    pub fn random_matrix(seed: u64, rows: usize, cols: usize, missing: f64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dead_col = if rng.random_bool(0.3) { Some(rng.random_range(0..cols)) } else { None };
        let data: Vec<Vec<Option<f64>>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|c| {
                        if Some(c) == dead_col || rng.random_bool(missing) {
                            None
                        } else {
                            Some(rng.random_range(-5.0..5.0) + c as f64)
                        }
                    })
                    .collect()
            })
            .collect();
        FeatureMatrix::from_rows(&data)
    }

    pub fn all_specs() -> Vec<StrategySpec> {
        alloc::vec![
            StrategySpec::Median,
            StrategySpec::WindowedMedian(WindowedMedianConfig::default()),
            StrategySpec::SimpleKnn(SimpleKnnConfig::default()),
            StrategySpec::BoundedKnn(BoundedKnnConfig::default()),
            StrategySpec::Mice(MiceConfig::default()),
            StrategySpec::SoftImpute(SoftImputeConfig::default()),
            StrategySpec::Autoencoder(AutoencoderConfig::default()),
            StrategySpec::Autoencoder(AutoencoderConfig {
                initial_imputer: InitialImputer::SimpleKnn,
                activation: Activation::Sigmoid,
                ..AutoencoderConfig::default()
            }),
        ]
    }
}
