//! Classifiers and their evaluation.

pub mod cv;
pub mod dataset;
pub mod gnb;
pub mod metrics;
pub mod mlp;

use serde::{Deserialize, Serialize};

pub use cv::{kfold_evaluate, CvReport, FoldPlan, DEFAULT_FOLDS};
pub use dataset::{argmax, Classifier, Dataset, Prediction, Predictor, Problem};
pub use gnb::{predict_gnb, train_gnb, GaussianNb, GnbModel};
pub use metrics::{auc, normalized_confusion, EvalReport, NormalizedConfusion};
pub use mlp::{predict_mlp, train_mlp, Mlp, MlpConfig, MlpModel};

use crate::error::{Error, Result};

/// Classifier choice as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierSpec {
    Gnb,
    Mlp(MlpConfig),
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Gnb => "gnb",
            ClassifierSpec::Mlp(_) => "mlp",
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Gnb(GnbModel),
    Mlp(MlpModel),
}

impl Predictor for TrainedModel {
    fn predict(&self, x: &[f64]) -> Result<Prediction> {
        match self {
            TrainedModel::Gnb(m) => m.predict(x),
            TrainedModel::Mlp(m) => m.predict(x),
        }
    }
}

impl Classifier for ClassifierSpec {
    type Model = TrainedModel;

    fn fit(&self, data: &Dataset) -> Result<TrainedModel> {
        match self {
            ClassifierSpec::Gnb => train_gnb(data).map(TrainedModel::Gnb),
            ClassifierSpec::Mlp(cfg) => train_mlp(data, cfg).map(TrainedModel::Mlp),
        }
    }
}

impl std::str::FromStr for ClassifierSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gnb" | "bayes" => Ok(ClassifierSpec::Gnb),
            "mlp" => Ok(ClassifierSpec::Mlp(MlpConfig::default())),
            _ => Err(Error::Parameter(format!("unknown classifier `{s}`"))),
        }
    }
}
