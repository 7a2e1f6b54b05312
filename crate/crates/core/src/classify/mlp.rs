//! One-hidden-layer perceptron with logistic units, trained online by
//! backpropagation with momentum on squared error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{argmax, Classifier, Dataset, Prediction, Predictor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden units; `None` means `round((F + C) / 2)`.
    pub hidden: Option<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: None,
            learning_rate: 0.3,
            momentum: 0.2,
            epochs: 500,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn hidden_units(&self, inputs: usize, outputs: usize) -> usize {
        self.hidden
            .unwrap_or_else(|| ((inputs + outputs) as f64 / 2.0).round() as usize)
            .max(1)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    /// `hidden x inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `outputs x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    /// Input standardization fitted on the training set.
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Gradient of the per-instance loss, laid out like [`MlpModel::params`].
pub type Gradient = Vec<f64>;

impl MlpModel {
    /// Weights drawn uniformly from `[-0.5, 0.5]`, identity standardization.
    pub fn initialize(inputs: usize, hidden: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.5..=0.5)).collect() };
        let w1 = draw(hidden * inputs);
        let b1 = draw(hidden);
        let w2 = draw(outputs * hidden);
        let b2 = draw(outputs);
        Self {
            inputs,
            hidden,
            outputs,
            w1,
            b1,
            w2,
            b2,
            mean: vec![0.0; inputs],
            scale: vec![1.0; inputs],
        }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params(), "parameter vector length");
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    /// Hidden and output activations for an already-standardized input.
    pub fn forward(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
                sigmoid(self.b1[j] + row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>())
            })
            .collect();
        let o = (0..self.outputs)
            .map(|k| {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                sigmoid(self.b2[k] + row.iter().zip(&h).map(|(w, x)| w * x).sum::<f64>())
            })
            .collect();
        (h, o)
    }

    /// Loss `0.5 * sum (o - t)^2` and its gradient for a standardized input.
    pub fn loss_and_gradient(&self, z: &[f64], target: &[f64]) -> (f64, Gradient) {
        let (h, o) = self.forward(z);
        let loss = 0.5 * o.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let delta_out: Vec<f64> = o
            .iter()
            .zip(target)
            .map(|(&ok, &tk)| (ok - tk) * ok * (1.0 - ok))
            .collect();
        let delta_hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let back: f64 = (0..self.outputs)
                    .map(|k| self.w2[k * self.hidden + j] * delta_out[k])
                    .sum();
                back * h[j] * (1.0 - h[j])
            })
            .collect();
        let mut grad = Vec::with_capacity(self.n_params());
        for dj in &delta_hidden {
            grad.extend(z.iter().map(|x| dj * x));
        }
        grad.extend(&delta_hidden);
        for dk in &delta_out {
            grad.extend(h.iter().map(|hj| dk * hj));
        }
        grad.extend(&delta_out);
        (loss, grad)
    }

    pub fn n_features(&self) -> usize {
        self.inputs
    }
}

fn one_hot(label: usize, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k == label { 1.0 } else { 0.0 }).collect()
}

/// Trains on z-scored inputs. Deterministic given `config.seed`.
pub fn train_mlp(data: &Dataset, config: &MlpConfig) -> Result<MlpModel> {
    if data.is_empty() {
        return Err(Error::Training("empty dataset".into()));
    }
    let f = data.n_features();
    let c = data.n_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = MlpModel::initialize(f, config.hidden_units(f, c), c, &mut rng);
    let n = data.len() as f64;
    for j in 0..f {
        let mean = data.features.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = data.features.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        model.mean[j] = mean;
        model.scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let inputs: Vec<Vec<f64>> = data.features.iter().map(|r| model.standardize(r)).collect();
    let targets: Vec<Vec<f64>> = data.labels.iter().map(|&l| one_hot(l, c)).collect();
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let (loss, grad) = model.loss_and_gradient(&inputs[i], &targets[i]);
            epoch_loss += loss;
            for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
            model.set_params(&params);
        }
        if !epoch_loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
    }
    Ok(model)
}

/// Label and per-class output activations.
pub fn predict_mlp(model: &MlpModel, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    if x.len() != model.inputs {
        return Err(Error::Dimension {
            expected: model.inputs,
            got: x.len(),
        });
    }
    let (_, o) = model.forward(&model.standardize(x));
    Ok((argmax(&o), o))
}

impl Predictor for MlpModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let (label, scores) = predict_mlp(self, x)?;
        Ok(Prediction { label, scores })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Mlp(pub MlpConfig);

impl Classifier for Mlp {
    type Model = MlpModel;

    fn fit(&self, data: &Dataset) -> Result<MlpModel> {
        train_mlp(data, &self.0)
    }
}
