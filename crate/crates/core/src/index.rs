//! Distraction Index, `theta/alpha + alpha/beta + beta/gamma`, and per-task
//! ranking by mean index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BandPowers, TaskLabel};

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistractionIndex(f64);

impl DistractionIndex {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Delta power does not enter the index.
pub fn distraction_index(bp: &BandPowers) -> Result<DistractionIndex> {
    for (band, value) in [("alpha", bp.alpha), ("beta", bp.beta), ("gamma", bp.gamma)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::UndefinedIndex { band, value });
        }
    }
    if !(bp.theta >= 0.0 && bp.theta.is_finite()) {
        return Err(Error::UndefinedIndex {
            band: "theta",
            value: bp.theta,
        });
    }
    Ok(DistractionIndex(
        bp.theta / bp.alpha + bp.alpha / bp.beta + bp.beta / bp.gamma,
    ))
}

/// Relative gap under which two task means count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTask {
    pub task: TaskLabel,
    pub mean_di: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRanking {
    /// Distraction tasks by descending mean index; ties in enum order.
    pub ranking: Vec<RankedTask>,
    /// Groups of tasks whose means are tied.
    pub ties: Vec<Vec<TaskLabel>>,
    /// Mean index over Base trials, when any were supplied.
    pub base: Option<RankedTask>,
}

impl TaskRanking {
    pub fn order(&self) -> Vec<TaskLabel> {
        self.ranking.iter().map(|r| r.task).collect()
    }

    pub fn has_ties(&self) -> bool {
        !self.ties.is_empty()
    }

    /// `task,mean_di,trials,rank` rows; Base, if present, gets an empty rank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,mean_di,trials,rank\n");
        for (i, r) in self.ranking.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", r.task, r.mean_di, r.trials, i + 1));
        }
        if let Some(b) = &self.base {
            out.push_str(&format!("{},{},{},\n", b.task, b.mean_di, b.trials));
        }
        out
    }
}

/// Order-independent mean: values are summed in sorted order.
fn stable_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Ranks the four distraction tasks by mean index over their trials.
pub fn rank_tasks(trials: &[(TaskLabel, BandPowers)]) -> Result<TaskRanking> {
    let mut per_task: [Vec<f64>; 5] = Default::default();
    for (task, bp) in trials {
        per_task[task.index()].push(distraction_index(bp)?.value());
    }
    let missing: Vec<TaskLabel> = TaskLabel::DISTRACTIONS
        .into_iter()
        .filter(|t| per_task[t.index()].is_empty())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingTasks(missing));
    }
    let mut ranking: Vec<RankedTask> = TaskLabel::DISTRACTIONS
        .into_iter()
        .map(|task| {
            let v = &mut per_task[task.index()];
            RankedTask {
                task,
                trials: v.len(),
                mean_di: stable_mean(v),
            }
        })
        .collect();
    ranking.sort_by(|a, b| b.mean_di.total_cmp(&a.mean_di).then(a.task.cmp(&b.task)));
    // runs of near-equal means are tie groups, reported and put in enum order
    let mut ties: Vec<Vec<TaskLabel>> = Vec::new();
    let mut start = 0;
    for end in 1..=ranking.len() {
        if end < ranking.len() && tied(ranking[end - 1].mean_di, ranking[end].mean_di) {
            continue;
        }
        if end - start > 1 {
            ranking[start..end].sort_by_key(|r| r.task);
            ties.push(ranking[start..end].iter().map(|r| r.task).collect());
        }
        start = end;
    }
    let base_values = &mut per_task[TaskLabel::Base.index()];
    let base = (!base_values.is_empty()).then(|| RankedTask {
        task: TaskLabel::Base,
        trials: base_values.len(),
        mean_di: stable_mean(base_values),
    });
    Ok(TaskRanking {
        ranking,
        ties,
        base,
    })
}
