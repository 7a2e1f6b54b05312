//! Gaussian naive Bayes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dataset::{argmax, Classifier, Dataset, Prediction, Predictor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub priors: Vec<f64>,
    /// `means[class][feature]`
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

/// Relative variance floor; scaled by each feature's global variance.
pub const VARIANCE_FLOOR: f64 = 1e-9;

fn mean_var(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Maximum-likelihood fit. Classes with no instances get prior 0.
pub fn train_gnb(data: &Dataset) -> Result<GnbModel> {
    let counts = data.class_counts();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Training(format!(
            "need at least two classes, found {present}"
        )));
    }
    if let Some((c, &n)) = counts.iter().enumerate().find(|(_, &n)| n == 1) {
        return Err(Error::Training(format!(
            "class `{}` has {n} instance; need at least 2",
            data.classes[c]
        )));
    }
    let f = data.n_features();
    let floors: Vec<f64> = (0..f)
        .map(|j| {
            let (_, var) = mean_var(data.features.iter().map(|r| r[j]));
            VARIANCE_FLOOR * (var + 1e-12)
        })
        .collect();
    let total = data.len() as f64;
    let mut means = vec![vec![0.0; f]; data.n_classes()];
    let mut variances = vec![floors.clone(); data.n_classes()];
    for c in 0..data.n_classes() {
        if counts[c] == 0 {
            continue;
        }
        for j in 0..f {
            let col = data
                .features
                .iter()
                .zip(&data.labels)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r[j]);
            let (m, v) = mean_var(col);
            means[c][j] = m;
            variances[c][j] = v.max(floors[j]);
        }
    }
    Ok(GnbModel {
        priors: counts.iter().map(|&n| n as f64 / total).collect(),
        means,
        variances,
    })
}

impl GnbModel {
    pub fn n_features(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    /// Unnormalized log joint `log P(c) + sum_j log N(x_j; mu, var)`.
    pub fn log_joint(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self
            .priors
            .iter()
            .enumerate()
            .map(|(c, &prior)| {
                if prior == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let ll: f64 = x
                    .iter()
                    .zip(&self.means[c])
                    .zip(&self.variances[c])
                    .map(|((&xi, &m), &v)| -0.5 * (2.0 * PI * v).ln() - (xi - m).powi(2) / (2.0 * v))
                    .sum();
                prior.ln() + ll
            })
            .collect())
    }
}

/// Label and normalized log-posteriors.
pub fn predict_gnb(model: &GnbModel, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    let joint = model.log_joint(x)?;
    let max = joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = max + joint.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    let posts: Vec<f64> = joint.iter().map(|&l| l - log_norm).collect();
    Ok((argmax(&posts), posts))
}

impl Predictor for GnbModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let (label, logp) = predict_gnb(self, x)?;
        Ok(Prediction {
            label,
            scores: logp.into_iter().map(f64::exp).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianNb;

impl Classifier for GaussianNb {
    type Model = GnbModel;

    fn fit(&self, data: &Dataset) -> Result<GnbModel> {
        train_gnb(data)
    }
}
