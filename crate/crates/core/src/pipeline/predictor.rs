use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::sigmoid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("training labels contain a single class")]
    SingleClassTrain,
    #[error("no training examples")]
    EmptyTrain,
    #[error("predictor failed: {0}")]
    Failed(String),
}

/// One participant-week with aggregated features and its label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeekExample {
    pub participant_id: String,
    pub week: u32,
    /// Complete after residual filling.
    pub features: Vec<f64>,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorOutput {
    /// One score per test example, higher meaning the positive class.
    pub scores: Vec<f64>,
    /// Score at or above which an example is predicted positive.
    pub threshold: f64,
    /// Every fitted parameter; empty for opaque predictors.
    pub weights: Vec<f64>,
}

/// A model trained on pooled train weeks and scored on test weeks.
pub trait Predictor: Sync {
    fn name(&self) -> &str;

    fn fit_predict(&self, train: &[WeekExample], test: &[WeekExample]) -> Result<PredictorOutput, PredictError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-3,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err("learning_rate must be > 0".into());
        }
        if self.iterations == 0 {
            return Err("iterations must be at least 1".into());
        }
        if !(self.l2 > 0.0 && self.l2.is_finite()) {
            return Err("l2 must be > 0".into());
        }
        Ok(())
    }
}

/// Predictor selection. `External` runs a command through a file contract
/// and is provided by the std front end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PredictorSpec {
    BaselineLogistic(BaselineConfig),
    External {
        /// Program followed by its arguments.
        command: Vec<String>,
    },
}

impl Default for PredictorSpec {
    fn default() -> Self {
        PredictorSpec::BaselineLogistic(BaselineConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineFit {
    pub scores: Vec<f64>,
    pub preds: Vec<bool>,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Standardisation constants from the train rows.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Regularised training loss before each update and after the last.
    pub loss_trace: Vec<f64>,
}

fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// L2-regularised logistic regression by full-batch gradient descent on
/// train-standardised features. The bias is not penalised.
pub fn fit_predict_baseline(
    train_x: &[Vec<f64>],
    train_y: &[bool],
    test_x: &[Vec<f64>],
    cfg: &BaselineConfig,
) -> Result<BaselineFit, PredictError> {
    if train_x.is_empty() {
        return Err(PredictError::EmptyTrain);
    }
    if train_y.iter().all(|&y| y) || train_y.iter().all(|&y| !y) {
        return Err(PredictError::SingleClassTrain);
    }
    let p = train_x[0].len();
    let n = train_x.len() as f64;
    let mut mean = alloc::vec![0.0; p];
    let mut scale = alloc::vec![0.0; p];
    for j in 0..p {
        let col: Vec<f64> = train_x.iter().map(|r| r[j]).collect();
        mean[j] = crate::numeric::mean(&col).unwrap_or(0.0);
        let sd = crate::numeric::std_dev(&col).unwrap_or(0.0);
        scale[j] = if sd > 0.0 { sd } else { 1.0 };
    }
    let standardise = |r: &Vec<f64>| -> Vec<f64> { (0..p).map(|j| (r[j] - mean[j]) / scale[j]).collect() };
    let z: Vec<Vec<f64>> = train_x.iter().map(standardise).collect();
    let y: Vec<f64> = train_y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();

    let mut w = alloc::vec![0.0; p];
    let mut b = 0.0;
    let loss = |w: &[f64], b: f64| -> f64 {
        let data: f64 = z
            .iter()
            .zip(&y)
            .map(|(zi, yi)| {
                let s = b + zi.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
                log1p_exp(s) - yi * s
            })
            .sum::<f64>()
            / n;
        data + 0.5 * cfg.l2 * w.iter().map(|v| v * v).sum::<f64>()
    };
    let mut loss_trace = Vec::with_capacity(cfg.iterations + 1);
    for _ in 0..cfg.iterations {
        loss_trace.push(loss(&w, b));
        let mut gw = alloc::vec![0.0; p];
        let mut gb = 0.0;
        for (zi, yi) in z.iter().zip(&y) {
            let s = b + zi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let e = sigmoid(s) - yi;
            gb += e;
            for j in 0..p {
                gw[j] += e * zi[j];
            }
        }
        for j in 0..p {
            w[j] -= cfg.learning_rate * (gw[j] / n + cfg.l2 * w[j]);
        }
        b -= cfg.learning_rate * gb / n;
    }
    loss_trace.push(loss(&w, b));

    let scores: Vec<f64> = test_x
        .iter()
        .map(|r| {
            let zr = standardise(r);
            sigmoid(b + zr.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>())
        })
        .collect();
    Ok(BaselineFit {
        preds: scores.iter().map(|&s| s >= 0.5).collect(),
        scores,
        weights: w,
        bias: b,
        mean,
        scale,
        loss_trace,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BaselineLogistic {
    pub config: BaselineConfig,
}

impl Predictor for BaselineLogistic {
    fn name(&self) -> &str {
        "baseline-logistic"
    }

    fn fit_predict(&self, train: &[WeekExample], test: &[WeekExample]) -> Result<PredictorOutput, PredictError> {
        let tx: Vec<Vec<f64>> = train.iter().map(|e| e.features.clone()).collect();
        let ty: Vec<bool> = train.iter().map(|e| e.label).collect();
        let sx: Vec<Vec<f64>> = test.iter().map(|e| e.features.clone()).collect();
        let fit = fit_predict_baseline(&tx, &ty, &sx, &self.config)?;
        let mut weights = fit.weights;
        weights.push(fit.bias);
        weights.extend(fit.mean);
        weights.extend(fit.scale);
        Ok(PredictorOutput {
            scores: fit.scores,
            threshold: 0.5,
            weights,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::auroc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(seed: u64, n: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = i % 2 == 0;
            let c = if label { gap } else { -gap };
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x.push(alloc::vec![c + 0.3 * a, c + 0.3 * b]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(1, 60, 2.0);
        let fit = fit_predict_baseline(&x, &y, &x, &BaselineConfig::default()).unwrap();
        assert_eq!(fit.preds, y);
    }

    #[test]
    fn mirrored_data_scores_at_chance() {
        // Every point appears once with each label, so the gradient at the
        // zero initialisation vanishes and all scores stay equal up to
        // summation rounding, which AUROC would still rank.
        let (x, y) = blobs(2, 20, 0.5);
        let flipped: Vec<bool> = y.iter().map(|l| !l).collect();
        let train_x: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let train_y: Vec<bool> = y.iter().chain(&flipped).copied().collect();
        let fit = fit_predict_baseline(&train_x, &train_y, &x, &BaselineConfig::default()).unwrap();
        let spread = fit.scores.iter().map(|s| (s - 0.5).abs()).fold(0.0, f64::max);
        assert!(spread < 1e-9, "{spread}");
        let rounded: Vec<f64> = fit.scores.iter().map(|s| libm::round(s * 1e6) / 1e6).collect();
        assert_eq!(auroc(&rounded, &y).unwrap(), 0.5);
    }

    #[test]
    fn loss_decreases_monotonically() {
        let (x, y) = blobs(3, 80, 0.4);
        let fit = fit_predict_baseline(&x, &y, &[], &BaselineConfig::default()).unwrap();
        for w in fit.loss_trace.windows(2) {
            assert!(w[1] <= w[0], "{:?}", w);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = alloc::vec![alloc::vec![1.0], alloc::vec![2.0]];
        assert_eq!(
            fit_predict_baseline(&x, &[true, true], &x, &BaselineConfig::default()),
            Err(PredictError::SingleClassTrain)
        );
    }
}
