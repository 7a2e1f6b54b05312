//! Stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Classifier, Dataset, Prediction, Predictor};
use super::metrics::EvalReport;
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Test-instance indices of each fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Shuffles each class with `seed` and deals it round-robin across folds,
    /// carrying the fold cursor from one class to the next so fold sizes
    /// stay within one of each other.
    pub fn stratified(labels: &[usize], classes: &[String], k: usize, seed: u64) -> Result<Self> {
        if k < 2 || k > labels.len() {
            return Err(Error::Parameter(format!(
                "k = {k}; need 2 <= k <= {} instances",
                labels.len()
            )));
        }
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
        for (i, &l) in labels.iter().enumerate() {
            by_class[l].push(i);
        }
        // k == n is leave-one-out, where per-fold class balance is moot
        let leave_one_out = k == labels.len();
        for (c, members) in by_class.iter().enumerate() {
            if !leave_one_out && !members.is_empty() && members.len() < k {
                return Err(Error::Stratification {
                    class: classes[c].clone(),
                    count: members.len(),
                    folds: k,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut folds = vec![Vec::new(); k];
        let mut cursor = 0;
        for members in &mut by_class {
            members.shuffle(&mut rng);
            for &i in members.iter() {
                folds[cursor].push(i);
                cursor = (cursor + 1) % k;
            }
        }
        for f in &mut folds {
            f.sort_unstable();
        }
        Ok(Self { k, folds })
    }

    /// Indices outside fold `f`.
    pub fn training(&self, f: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub overall: EvalReport,
    pub folds: Vec<EvalReport>,
    pub plan: FoldPlan,
}

/// Fits on k-1 folds and predicts the held-out fold, for every fold.
/// Predictions from all folds are pooled into the overall report.
pub fn kfold_evaluate<C: Classifier>(data: &Dataset, k: usize, classifier: &C, seed: u64) -> Result<CvReport> {
    let plan = FoldPlan::stratified(&data.labels, &data.classes, k, seed)?;
    let per_fold: Vec<Result<Vec<Prediction>>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let model = classifier.fit(&data.subset(&plan.training(f)))?;
            plan.folds[f]
                .iter()
                .map(|&i| model.predict(&data.features[i]))
                .collect()
        })
        .collect();
    let mut truth = Vec::with_capacity(data.len());
    let mut preds = Vec::with_capacity(data.len());
    let mut folds = Vec::with_capacity(k);
    for (f, result) in per_fold.into_iter().enumerate() {
        let fold_preds = result?;
        let fold_truth: Vec<usize> = plan.folds[f].iter().map(|&i| data.labels[i]).collect();
        folds.push(EvalReport::from_predictions(&data.classes, &fold_truth, &fold_preds));
        truth.extend(fold_truth);
        preds.extend(fold_preds);
    }
    Ok(CvReport {
        overall: EvalReport::from_predictions(&data.classes, &truth, &preds),
        folds,
        plan,
    })
}
