use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::knn::{KnnFit, SimpleKnnConfig};
use super::median::MedianFit;
use super::{check_columns, FittedImputer, ImputeError};
use crate::matrix::FeatureMatrix;
use crate::numeric::{sigmoid, MinMaxScaler};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Activation {
    /// ReLU hidden layer, linear output.
    Relu,
    /// Sigmoid hidden layer, sigmoid output.
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InitialImputer {
    Median,
    SimpleKnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    pub hidden_dim: usize,
    pub activation: Activation,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub initial_imputer: InitialImputer,
    /// Overrides the seed handed down by the pipeline.
    pub seed: Option<u64>,
    /// Rows per Adam step, taken in row order.
    pub batch_size: usize,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 20,
            activation: Activation::Relu,
            epochs: 10,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            initial_imputer: InitialImputer::Median,
            seed: None,
            batch_size: 1,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        let bad = |msg: &str| Err(ImputeError::InvalidConfig(msg.into()));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }
}

/// Single-hidden-layer autoencoder over min-max scaled active features.
/// Parameters are stored flat as `[W1 (h×p), b1 (h), W2 (p×h), b2 (p)]`,
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderModel {
    pub n_features: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
    pub params: Vec<f64>,
    pub scaler: MinMaxScaler,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub converged: bool,
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
}

impl AutoencoderModel {
    /// Uniform in ±1/√fan_in for weights and biases of each layer.
    pub fn init(n_features: usize, hidden_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let (p, h) = (n_features, hidden_dim);
        let b_enc = 1.0 / libm::sqrt(p.max(1) as f64);
        let b_dec = 1.0 / libm::sqrt(h as f64);
        let mut params = Vec::with_capacity(2 * h * p + h + p);
        params.extend((0..h * p + h).map(|_| rng.random_range(-b_enc..=b_enc)));
        params.extend((0..p * h + p).map(|_| rng.random_range(-b_dec..=b_dec)));
        Self {
            n_features: p,
            hidden_dim: h,
            activation,
            params,
            scaler: MinMaxScaler::new(Vec::new(), Vec::new()),
            best_epoch: 0,
            converged: false,
            initial_loss: f64::NAN,
            epoch_losses: Vec::new(),
        }
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (p, h) = (self.n_features, self.hidden_dim);
        let (w1, rest) = self.params.split_at(h * p);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(p * h);
        (w1, b1, w2, b2)
    }

    fn hidden_act(&self, a: f64) -> f64 {
        match self.activation {
            Activation::Relu => a.max(0.0),
            Activation::Sigmoid => sigmoid(a),
        }
    }

    /// Returns hidden pre-activations, hidden activations and outputs.
    fn forward_row(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (p, h) = (self.n_features, self.hidden_dim);
        let (w1, b1, w2, b2) = self.split();
        let pre: Vec<f64> = (0..h)
            .map(|i| b1[i] + (0..p).map(|j| w1[i * p + j] * x[j]).sum::<f64>())
            .collect();
        let hid: Vec<f64> = pre.iter().map(|&a| self.hidden_act(a)).collect();
        let out: Vec<f64> = (0..p)
            .map(|j| {
                let o = b2[j] + (0..h).map(|i| w2[j * h + i] * hid[i]).sum::<f64>();
                match self.activation {
                    Activation::Relu => o,
                    Activation::Sigmoid => sigmoid(o),
                }
            })
            .collect();
        (pre, hid, out)
    }

    /// Reconstruction of one scaled row.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_row(x).2
    }

    /// Masked MSE over `rows` (row-major, `n_features` wide) and its
    /// gradient with respect to `params`. The loss is the mean squared error
    /// over cells whose mask is set; zero with a zero gradient when no cell
    /// is masked in.
    pub fn loss_and_grad(&self, rows: &[f64], mask: &[bool]) -> (f64, Vec<f64>) {
        let (p, h) = (self.n_features, self.hidden_dim);
        let n_obs = mask.iter().filter(|&&m| m).count();
        let mut grad = alloc::vec![0.0; self.params.len()];
        if n_obs == 0 {
            return (0.0, grad);
        }
        let (_, _, w2, _) = self.split();
        let (g_w1_end, g_b1_end, g_w2_end) = (h * p, h * p + h, h * p + h + p * h);
        let mut loss = 0.0;
        for (x, m) in rows.chunks(p).zip(mask.chunks(p)) {
            let (pre, hid, out) = self.forward_row(x);
            let mut d_o = alloc::vec![0.0; p];
            for j in 0..p {
                if m[j] {
                    let e = out[j] - x[j];
                    loss += e * e;
                    let d_out = 2.0 * e / n_obs as f64;
                    d_o[j] = match self.activation {
                        Activation::Relu => d_out,
                        Activation::Sigmoid => d_out * out[j] * (1.0 - out[j]),
                    };
                }
            }
            let mut d_h = alloc::vec![0.0; h];
            for j in 0..p {
                if d_o[j] == 0.0 {
                    continue;
                }
                for i in 0..h {
                    grad[g_b1_end + j * h + i] += d_o[j] * hid[i];
                    d_h[i] += w2[j * h + i] * d_o[j];
                }
                grad[g_w2_end + j] += d_o[j];
            }
            for i in 0..h {
                let d_a = d_h[i]
                    * match self.activation {
                        Activation::Relu => {
                            if pre[i] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Activation::Sigmoid => hid[i] * (1.0 - hid[i]),
                    };
                if d_a == 0.0 {
                    continue;
                }
                for j in 0..p {
                    grad[i * p + j] += d_a * x[j];
                }
                grad[g_w1_end + i] += d_a;
            }
        }
        (loss / n_obs as f64, grad)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, cfg: &AutoencoderConfig) -> Self {
        Self {
            m: alloc::vec![0.0; n],
            v: alloc::vec![0.0; n],
            t: 0,
            lr: cfg.learning_rate,
            b1: cfg.adam_beta1,
            b2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.b1, f64::from(self.t));
        let c2 = 1.0 - libm::pow(self.b2, f64::from(self.t));
        for i in 0..params.len() {
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * grad[i];
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
    }
}

/// Trained model together with the fitted initial imputer and the simple
/// kNN fallback used when training fails to converge.
pub struct AutoencoderFit {
    n_cols: usize,
    active: Vec<usize>,
    initial: Box<dyn FittedImputer>,
    fallback: KnnFit,
    pub model: AutoencoderModel,
}

impl AutoencoderFit {
    pub fn fit(m: &FeatureMatrix, cfg: &AutoencoderConfig, seed: u64) -> Self {
        let active = m.active_columns();
        let initial: Box<dyn FittedImputer> = match cfg.initial_imputer {
            InitialImputer::Median => Box::new(MedianFit::fit(m)),
            InitialImputer::SimpleKnn => Box::new(KnnFit::simple(m, &SimpleKnnConfig::default())),
        };
        let fallback = KnnFit::simple(m, &SimpleKnnConfig::default());
        let mut rng = stream(cfg.seed.unwrap_or(seed), &["autoencoder"]);
        let mut model = AutoencoderModel::init(active.len(), cfg.hidden_dim, cfg.activation, &mut rng);

        let mut lo = Vec::with_capacity(active.len());
        let mut hi = Vec::with_capacity(active.len());
        for &c in &active {
            let obs = m.column_observed(c);
            lo.push(obs.iter().copied().fold(f64::INFINITY, f64::min));
            hi.push(obs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        model.scaler = MinMaxScaler::new(lo, hi);

        let mut fit = Self {
            n_cols: m.n_cols(),
            active,
            initial,
            fallback,
            model,
        };
        if fit.active.is_empty() || m.n_rows() == 0 {
            fit.model.converged = true;
            return fit;
        }

        let x = fit.scaled_initial(m).expect("fitted on the same columns");
        let p = fit.active.len();
        let mask: Vec<bool> = (0..m.n_rows())
            .flat_map(|r| fit.active.iter().map(move |&c| m.is_observed(r, c)))
            .collect();
        let model = &mut fit.model;
        model.initial_loss = model.loss_and_grad(&x, &mask).0;
        let mut best = (f64::INFINITY, model.params.clone(), 0usize);
        let mut finite = model.initial_loss.is_finite();
        let mut adam = Adam::new(model.params.len(), cfg);
        let rows_per_step = cfg.batch_size * p;
        for epoch in 1..=cfg.epochs {
            for (xb, mb) in x.chunks(rows_per_step).zip(mask.chunks(rows_per_step)) {
                let (_, grad) = model.loss_and_grad(xb, mb);
                let mut params = core::mem::take(&mut model.params);
                adam.step(&mut params, &grad);
                model.params = params;
            }
            let loss = model.loss_and_grad(&x, &mask).0;
            model.epoch_losses.push(loss);
            if !loss.is_finite() {
                finite = false;
                break;
            }
            if loss < best.0 {
                best = (loss, model.params.clone(), epoch);
            }
        }
        model.converged = finite && best.0 <= model.initial_loss;
        if best.2 > 0 {
            model.params = best.1;
            model.best_epoch = best.2;
        }
        if !model.converged {
            log::warn!("autoencoder did not converge; falling back to simple kNN");
        }
        fit
    }

    /// Initial imputation of the active columns, min-max scaled, row-major.
    fn scaled_initial(&self, m: &FeatureMatrix) -> Result<Vec<f64>, ImputeError> {
        let filled = self.initial.transform(m)?;
        let mut x = Vec::with_capacity(m.n_rows() * self.active.len());
        for r in 0..m.n_rows() {
            for (j, &c) in self.active.iter().enumerate() {
                let v = filled.get(r, c).expect("initial imputers complete active columns");
                x.push(self.model.scaler.scale(j, v));
            }
        }
        Ok(x)
    }
}

impl FittedImputer for AutoencoderFit {
    fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix, ImputeError> {
        check_columns(m, self.n_cols)?;
        if !self.model.converged {
            return self.fallback.transform(m);
        }
        if self.active.is_empty() {
            return Ok(m.clone());
        }
        let x = self.scaled_initial(m)?;
        let p = self.active.len();
        let mut out = m.clone();
        for r in 0..m.n_rows() {
            if self.active.iter().all(|&c| m.is_observed(r, c)) {
                continue;
            }
            let rec = self.model.forward(&x[r * p..(r + 1) * p]);
            for (j, &c) in self.active.iter().enumerate() {
                if !m.is_observed(r, c) {
                    out.set(r, c, Some(self.model.scaler.unscale(j, rec[j])));
                }
            }
        }
        Ok(out)
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p = self.model.params.clone();
        p.extend_from_slice(&self.model.scaler.min);
        p.extend_from_slice(&self.model.scaler.max);
        p.push(self.model.best_epoch as f64);
        p.extend(self.initial.parameters());
        p
    }
}

pub fn impute_autoencoder(m: &FeatureMatrix, cfg: &AutoencoderConfig, seed: u64) -> (FeatureMatrix, AutoencoderModel) {
    let fit = AutoencoderFit::fit(m, cfg, seed);
    let out = fit.transform(m).expect("fitted on the same columns");
    (out, fit.model)
}
