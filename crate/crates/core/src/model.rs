//! Logistic regression trained on a weighted cross-entropy loss.
//!
//! Features are standardized with the weighted mean and standard deviation of
//! the training rows, then the loss
//! `Σ_i w_i · CE(σ(x_i·θ + b), y_i) + λ‖θ‖²` is minimized by full-batch
//! gradient descent with a backtracking (Armijo) line search. The intercept
//! is not penalized. Everything is sequential and deterministic.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{PredictionSet, DEFAULT_THRESHOLD};
use crate::reweight::SampleWeights;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub l2_penalty: f64,
    pub max_iterations: usize,
    /// Threshold on the max-norm of the loss gradient divided by total weight.
    pub gradient_tolerance: f64,
    /// Recorded for provenance; full-batch descent draws no random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_penalty: 1e-4,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::InvalidConfig("l2_penalty must be finite and ≥ 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err(Error::InvalidConfig("gradient_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    /// 0 for columns that are constant under the training weights.
    pub std_dev: f64,
}

impl ColumnScale {
    fn apply(&self, v: f64) -> f64 {
        if self.std_dev > 0.0 {
            (v - self.mean) / self.std_dev
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub loss: f64,
    pub gradient_norm: f64,
}

/// Fitted parameters. Coefficients act on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub standardization: Vec<ColumnScale>,
    pub convergence: Convergence,
}

impl ModelParams {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Weighted logistic loss over a standardized, row-major design matrix.
///
/// Parameter vectors are laid out as `[θ_0, …, θ_{d-1}, b]`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedLogistic<'a> {
    pub x: &'a [f64],
    pub n_cols: usize,
    pub labels: &'a [u8],
    pub weights: &'a [f64],
    pub l2_penalty: f64,
}

impl WeightedLogistic<'_> {
    fn margin(&self, row: usize, params: &[f64]) -> f64 {
        let d = self.n_cols;
        let x = &self.x[row * d..(row + 1) * d];
        x.iter().zip(params).map(|(a, b)| a * b).sum::<f64>() + params[d]
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        let d = self.n_cols;
        let mut loss = 0.0;
        for (i, (&y, &w)) in self.labels.iter().zip(self.weights).enumerate() {
            let z = self.margin(i, params);
            loss += w * (softplus(z) - y as f64 * z);
        }
        loss + self.l2_penalty * params[..d].iter().map(|t| t * t).sum::<f64>()
    }

    /// Writes the gradient into `grad` and returns the loss.
    pub fn gradient(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.n_cols;
        grad.fill(0.0);
        let mut loss = 0.0;
        for (i, (&y, &w)) in self.labels.iter().zip(self.weights).enumerate() {
            let z = self.margin(i, params);
            loss += w * (softplus(z) - y as f64 * z);
            let r = w * (sigmoid(z) - y as f64);
            let x = &self.x[i * d..(i + 1) * d];
            for (g, xi) in grad[..d].iter_mut().zip(x) {
                *g += r * xi;
            }
            grad[d] += r;
        }
        for (g, t) in grad[..d].iter_mut().zip(params) {
            *g += 2.0 * self.l2_penalty * t;
        }
        loss + self.l2_penalty * params[..d].iter().map(|t| t * t).sum::<f64>()
    }
}

fn weighted_scales(data: &Dataset, w: &[f64], total: f64) -> Vec<ColumnScale> {
    (0..data.n_cols())
        .map(|j| {
            let mean = data.column(j).zip(w).map(|(v, wi)| v * wi).sum::<f64>() / total;
            let var = data
                .column(j)
                .zip(w)
                .map(|(v, wi)| wi * (v - mean) * (v - mean))
                .sum::<f64>()
                / total;
            let std_dev = var.sqrt();
            // Below this the column is constant up to rounding.
            let std_dev = if std_dev > 1e-12 * (1.0 + mean.abs()) { std_dev } else { 0.0 };
            ColumnScale { mean, std_dev }
        })
        .collect()
}

fn standardize(data: &Dataset, scales: &[ColumnScale]) -> Vec<f64> {
    let d = data.n_cols();
    let mut x = Vec::with_capacity(data.n_rows() * d);
    for i in 0..data.n_rows() {
        x.extend(data.row(i).iter().zip(scales).map(|(&v, s)| s.apply(v)));
    }
    x
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

pub fn fit(train: &Dataset, weights: &SampleWeights, config: &TrainConfig) -> Result<ModelParams> {
    config.validate()?;
    if weights.len() != train.n_rows() {
        return Err(Error::LengthMismatch {
            what: "sample weights",
            expected: train.n_rows(),
            found: weights.len(),
        });
    }
    if train.n_rows() < 2 {
        return Err(Error::InvalidDataset("need at least two training rows".into()));
    }
    let w = weights.as_slice();
    let total = weights.total();
    if total <= 0.0 {
        return Err(Error::InvalidWeights("zero total weight".into()));
    }
    let mut has_class = [false; 2];
    for (&y, &wi) in train.labels().iter().zip(w) {
        if wi > 0.0 {
            has_class[y as usize] = true;
        }
    }
    if !(has_class[0] && has_class[1]) {
        return Err(Error::SingleClass);
    }

    let d = train.n_cols();
    let scales = weighted_scales(train, w, total);
    let x = standardize(train, &scales);
    let objective = WeightedLogistic {
        x: &x,
        n_cols: d,
        labels: train.labels(),
        weights: w,
        l2_penalty: config.l2_penalty,
    };

    // 1 / (upper bound on the gradient's Lipschitz constant)
    let lipschitz = 0.25
        * (0..train.n_rows())
            .map(|i| w[i] * (1.0 + x[i * d..(i + 1) * d].iter().map(|v| v * v).sum::<f64>()))
            .sum::<f64>()
        + 2.0 * config.l2_penalty;
    let mut step = 1.0 / lipschitz;

    let mut params = vec![0.0; d + 1];
    let mut grad = vec![0.0; d + 1];
    let mut trial = vec![0.0; d + 1];
    let mut loss = objective.gradient(&params, &mut grad);
    let mut grad_norm = max_norm(&grad) / total;
    let mut iterations = 0;
    let mut converged = grad_norm < config.gradient_tolerance;

    while !converged && iterations < config.max_iterations {
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        step *= 2.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            for ((t, p), g) in trial.iter_mut().zip(&params).zip(&grad) {
                *t = p - step * g;
            }
            let trial_loss = objective.loss(&trial);
            if trial_loss <= loss - ARMIJO * step * grad_sq {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no decrease representable at this precision
            break;
        }
        std::mem::swap(&mut params, &mut trial);
        loss = objective.gradient(&params, &mut grad);
        grad_norm = max_norm(&grad) / total;
        iterations += 1;
        converged = grad_norm < config.gradient_tolerance;
    }

    let intercept = params[d];
    params.truncate(d);
    Ok(ModelParams {
        column_names: train.column_names().to_vec(),
        coefficients: params,
        intercept,
        standardization: scales,
        convergence: Convergence {
            converged,
            iterations,
            loss,
            gradient_norm: grad_norm,
        },
    })
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// σ(x·θ + b) per row, after applying the stored standardization.
pub fn predict_scores(model: &ModelParams, data: &Dataset) -> Result<Vec<f64>> {
    if data.n_cols() != model.coefficients.len() {
        return Err(Error::ColumnMismatch {
            expected: model.coefficients.len(),
            found: data.n_cols(),
        });
    }
    Ok((0..data.n_rows())
        .map(|i| {
            let z = data
                .row(i)
                .iter()
                .zip(&model.standardization)
                .zip(&model.coefficients)
                .map(|((&v, s), c)| s.apply(v) * c)
                .sum::<f64>()
                + model.intercept;
            sigmoid(z)
        })
        .collect())
}

/// Scores thresholded at 0.5, paired with the data's labels.
pub fn predict(model: &ModelParams, data: &Dataset) -> Result<PredictionSet> {
    let scores = predict_scores(model, data)?;
    PredictionSet::from_scores(scores, data.labels().to_vec(), DEFAULT_THRESHOLD)
}
