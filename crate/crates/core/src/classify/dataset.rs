use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureVector, TaskLabel};

/// Which labeling of the tasks to learn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    /// Base versus any distraction; distraction is the positive class.
    Two,
    /// All five task labels.
    Five,
}

impl std::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two" | "2" => Ok(Problem::Two),
            "five" | "5" => Ok(Problem::Five),
            _ => Err(Error::Parameter(format!("unknown class problem `{s}`"))),
        }
    }
}

/// Dense numeric dataset with class indices into `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: Vec<String>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: Vec<String>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Training(format!(
                "{} rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(first) = features.first() {
            if let Some(row) = features.iter().find(|r| r.len() != first.len()) {
                return Err(Error::Dimension {
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::Training(format!("label {bad} has no class name")));
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    /// Labels from feature vectors under the chosen problem.
    pub fn from_vectors(vectors: &[FeatureVector], problem: Problem) -> Result<Self> {
        let (classes, labels): (Vec<String>, Vec<usize>) = match problem {
            Problem::Five => (
                TaskLabel::ALL.iter().map(|t| t.to_string()).collect(),
                vectors.iter().map(|v| v.label.index()).collect(),
            ),
            Problem::Two => (
                vec!["Base".into(), "Distracted".into()],
                vectors.iter().map(|v| usize::from(v.label.is_distraction())).collect(),
            ),
        };
        Self::new(vectors.iter().map(|v| v.values.clone()).collect(), labels, classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes.clone(),
        }
    }
}

/// Per-class scores plus the chosen class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    /// Higher means more likely; one entry per class.
    pub scores: Vec<f64>,
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub trait Predictor {
    fn predict(&self, x: &[f64]) -> Result<Prediction>;
}

/// Something that can be fit to a dataset.
pub trait Classifier: Sync {
    type Model: Predictor;

    fn fit(&self, data: &Dataset) -> Result<Self::Model>;
}
