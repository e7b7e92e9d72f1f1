use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_columns, FittedImputer, ImputeError};
use crate::matrix::FeatureMatrix;
use crate::numeric::{mean, median};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiceConfig {
    pub n_iterations: usize,
    pub ridge_lambda: f64,
    /// Unused by the deterministic chain; kept so configs round-trip.
    pub seed: Option<u64>,
}

impl Default for MiceConfig {
    fn default() -> Self {
        Self {
            n_iterations: 10,
            ridge_lambda: 1e-3,
            seed: None,
        }
    }
}

impl MiceConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        if self.n_iterations == 0 {
            return Err(ImputeError::InvalidConfig("n_iterations must be at least 1".into()));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(ImputeError::InvalidConfig("ridge_lambda must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Update {
    Linear { intercept: f64, coefs: Vec<f64> },
    Constant(f64),
}

/// One chained-equation update of `feature` from `predictors`.
#[derive(Clone, Debug, PartialEq)]
struct Step {
    feature: usize,
    predictors: Vec<usize>,
    update: Update,
}

/// Initial means plus the full sequence of regression steps learned during
/// fitting. Transform replays the sequence, so transforming the fitted
/// matrix reproduces the fitted completion.
#[derive(Clone, Debug, PartialEq)]
pub struct MiceFit {
    n_cols: usize,
    means: Vec<Option<f64>>,
    steps: Vec<Step>,
}

/// Ridge regression with an unpenalised intercept; `None` if the normal
/// equations are not positive definite.
fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Option<(f64, Vec<f64>)> {
    let (n, p) = x.shape();
    let a = DMatrix::from_fn(n, p + 1, |r, c| if c == 0 { 1.0 } else { x[(r, c - 1)] });
    let mut ata = a.transpose() * &a;
    for i in 1..=p {
        ata[(i, i)] += lambda;
    }
    let aty = a.transpose() * y;
    let beta = ata.cholesky()?.solve(&aty);
    if beta.iter().all(|b| b.is_finite()) {
        Some((beta[0], beta.iter().skip(1).copied().collect()))
    } else {
        None
    }
}

impl MiceFit {
    pub fn fit(m: &FeatureMatrix, cfg: &MiceConfig) -> Self {
        let n_cols = m.n_cols();
        let means: Vec<Option<f64>> = (0..n_cols).map(|c| mean(&m.column_observed(c))).collect();
        let active: Vec<usize> = (0..n_cols).filter(|&c| means[c].is_some()).collect();
        let mut work = fill(m, &means);
        let mut steps = Vec::new();

        if active.len() < 2 {
            for &f in &active {
                steps.push(Step {
                    feature: f,
                    predictors: Vec::new(),
                    update: Update::Constant(median(&m.column_observed(f)).expect("active feature")),
                });
            }
            apply_steps(&steps, m, &mut work);
            return Self { n_cols, means, steps };
        }

        for _ in 0..cfg.n_iterations {
            for &f in &active {
                if (0..m.n_rows()).all(|r| m.is_observed(r, f)) {
                    continue;
                }
                let predictors: Vec<usize> = active.iter().copied().filter(|&c| c != f).collect();
                let rows: Vec<usize> = (0..m.n_rows()).filter(|&r| m.is_observed(r, f)).collect();
                let x = DMatrix::from_fn(rows.len(), predictors.len(), |i, j| work[rows[i] * n_cols + predictors[j]]);
                let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| work[r * n_cols + f]));
                let update = match ridge(&x, &y, cfg.ridge_lambda) {
                    Some((intercept, coefs)) => Update::Linear { intercept, coefs },
                    None => {
                        log::warn!("MICE regression for feature {f} is singular; using the median");
                        Update::Constant(median(&m.column_observed(f)).expect("active feature"))
                    }
                };
                let step = Step {
                    feature: f,
                    predictors,
                    update,
                };
                apply_step(&step, m, &mut work);
                steps.push(step);
            }
        }
        Self { n_cols, means, steps }
    }
}

/// Row-major values with missing cells set to the fitted means; cells of
/// never-observed features hold NaN and are never read.
fn fill(m: &FeatureMatrix, means: &[Option<f64>]) -> Vec<f64> {
    let mut work = Vec::with_capacity(m.n_rows() * m.n_cols());
    for r in 0..m.n_rows() {
        for c in 0..m.n_cols() {
            work.push(m.get(r, c).or(means[c]).unwrap_or(f64::NAN));
        }
    }
    work
}

fn apply_step(step: &Step, m: &FeatureMatrix, work: &mut [f64]) {
    let n_cols = m.n_cols();
    for r in 0..m.n_rows() {
        if m.is_observed(r, step.feature) {
            continue;
        }
        let v = match &step.update {
            Update::Constant(v) => *v,
            Update::Linear { intercept, coefs } => {
                intercept
                    + step
                        .predictors
                        .iter()
                        .zip(coefs)
                        .map(|(&c, b)| b * work[r * n_cols + c])
                        .sum::<f64>()
            }
        };
        work[r * n_cols + step.feature] = v;
    }
}

fn apply_steps(steps: &[Step], m: &FeatureMatrix, work: &mut [f64]) {
    for s in steps {
        apply_step(s, m, work);
    }
}

impl FittedImputer for MiceFit {
    fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ImputeError> {
        check_columns(m, self.n_cols)?;
        let mut work = fill(m, &self.means);
        apply_steps(&self.steps, m, &mut work);
        Ok(m.filled_with(|r, c| self.means[c].map(|_| work[r * self.n_cols + c])))
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.means.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        for s in &self.steps {
            match &s.update {
                Update::Constant(v) => p.push(*v),
                Update::Linear { intercept, coefs } => {
                    p.push(*intercept);
                    p.extend_from_slice(coefs);
                }
            }
        }
        p
    }
}

pub fn impute_mice(m: &FeatureMatrix, cfg: &MiceConfig) -> FeatureMatrix {
    MiceFit::fit(m, cfg).transform(m).expect("fitted on the same columns")
}
