//! Metrics, confusion matrices and the two ablation harnesses.

mod ablation;
mod confusion;
mod table;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use ablation::{
    ablate_temporal, ablate_views, run_pipeline, AblationSpec, PipelineRun, TemporalAblation, ViewAblation, ViewSource,
    ViewSubset,
};
pub use confusion::ConfusionMatrix;
pub use table::render as render_table;

use crate::dataset::{Manifest, Split};
use crate::error::{Error, Result};
use crate::model::{MvfModel, Prediction, Task};
use crate::tensor::top_k;
use crate::training::{prepare_split, PreparedAction};

/// Mean recall over classes that occur in the ground truth.
pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let recalls: Vec<f64> = (0..cm.len()).filter_map(|i| cm.recall(i)).collect();
    if recalls.is_empty() {
        return Err(Error::Domain("balanced accuracy of an empty confusion matrix".into()));
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Share of rows whose label is among the `k` highest scores (ties go to
/// the lower class index).
pub fn topk_accuracy(scores: &[Vec<f64>], labels: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Domain(format!(
            "{} score rows for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Domain("top-k accuracy of an empty prediction set".into()));
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, &l)| top_k(s, k.min(s.len())).contains(&l))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task: Task,
    pub acc_at_1: f64,
    pub acc_at_2: f64,
    pub balanced_accuracy: f64,
    /// Per class; `None` when undefined (class absent, or never predicted).
    pub recall: Vec<Option<f64>>,
    pub precision: Vec<Option<f64>>,
    pub evaluated: usize,
    /// Actions in the split without a label for this task.
    pub excluded: usize,
    /// Classes absent from the ground truth, left out of the balanced accuracy.
    pub absent_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub actions: usize,
    pub tasks: Vec<TaskMetrics>,
}

impl MetricsReport {
    pub fn task(&self, task: Task) -> Option<&TaskMetrics> {
        self.tasks.iter().find(|t| t.task == task)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// One row per task: `label | task | Acc@1 | Acc@2 | BA | n | excluded`.
    pub fn to_table(&self, label: &str) -> String {
        metrics_table(&[(label.to_string(), self.clone())])
    }
}

/// Several labelled reports in one table (the encoder/pooling comparison layout).
pub fn metrics_table(runs: &[(String, MetricsReport)]) -> String {
    let header = ["Run", "Task", "Acc.@1", "Acc.@2", "BA", "n", "excluded"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for (label, report) in runs {
        for t in &report.tasks {
            rows.push(vec![
                label.clone(),
                t.task.to_string(),
                format!("{:.2}", t.acc_at_1),
                format!("{:.2}", t.acc_at_2),
                format!("{:.2}", t.balanced_accuracy),
                t.evaluated.to_string(),
                t.excluded.to_string(),
            ]);
        }
    }
    table::render(&[header], &rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub confusion: BTreeMap<Task, ConfusionMatrix>,
    /// Per evaluated action, in input order.
    pub predictions: Vec<(String, Prediction)>,
}

/// Metrics for one task from `(scores, truth)` pairs.
pub fn task_metrics(task: Task, scores: &[Vec<f64>], labels: &[usize], excluded: usize) -> Result<(TaskMetrics, ConfusionMatrix)> {
    if labels.is_empty() {
        return Err(Error::Domain(format!("no actions with a mappable {task} label to evaluate")));
    }
    let mut cm = ConfusionMatrix::new(task.class_names());
    for (s, &l) in scores.iter().zip(labels) {
        cm.record(l, top_k(s, 1)[0])?;
    }
    let n = cm.len();
    let metrics = TaskMetrics {
        task,
        acc_at_1: topk_accuracy(scores, labels, 1)?,
        acc_at_2: topk_accuracy(scores, labels, 2)?,
        balanced_accuracy: balanced_accuracy(&cm)?,
        recall: (0..n).map(|i| cm.recall(i)).collect(),
        precision: (0..n).map(|i| cm.precision(i)).collect(),
        evaluated: labels.len(),
        excluded,
        absent_classes: (0..n)
            .filter(|&i| cm.recall(i).is_none())
            .map(|i| cm.classes()[i].clone())
            .collect(),
    };
    Ok((metrics, cm))
}

/// Evaluates each head of `model` on the actions carrying its label.
pub fn evaluate_prepared(model: &MvfModel, actions: &[PreparedAction]) -> Result<Evaluation> {
    evaluate_with_views(model, actions, |a| Ok(a.views.clone()))
}

pub(crate) fn evaluate_with_views(
    model: &MvfModel,
    actions: &[PreparedAction],
    views: impl Fn(&PreparedAction) -> Result<Vec<crate::tensor::Tensor>>,
) -> Result<Evaluation> {
    let mut predictions = Vec::with_capacity(actions.len());
    for a in actions {
        predictions.push((a.action_id.clone(), model.predict(&views(a)?)?));
    }
    let mut report = MetricsReport {
        actions: actions.len(),
        tasks: Vec::new(),
    };
    let mut confusion = BTreeMap::new();
    for &task in model.config().task_mode.tasks() {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (a, (_, p)) in actions.iter().zip(&predictions) {
            if let (Some(l), Some(tp)) = (a.label(task), p.task(task)) {
                scores.push(tp.probabilities.clone());
                labels.push(l);
            }
        }
        let (metrics, cm) = task_metrics(task, &scores, &labels, actions.len() - labels.len())?;
        report.tasks.push(metrics);
        confusion.insert(task, cm);
    }
    Ok(Evaluation {
        report,
        confusion,
        predictions,
    })
}

/// Loads `split` at `fps` and evaluates `model` on it.
pub fn evaluate(model: &MvfModel, manifest: &Manifest, split: Split, fps: f64) -> Result<Evaluation> {
    let actions = prepare_split(manifest, Some(split), fps)?;
    if actions.is_empty() {
        return Err(Error::Domain(format!("split {split:?} has no actions")));
    }
    evaluate_prepared(model, &actions)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_accuracy_examples() {
        let diag = ConfusionMatrix::from_square(vec![vec![4, 0, 0], vec![0, 1, 0], vec![0, 0, 9]]).unwrap();
        assert_eq!(balanced_accuracy(&diag).unwrap(), 1.0);
        let half = ConfusionMatrix::from_square(vec![vec![5, 0], vec![3, 0]]).unwrap();
        assert_eq!(balanced_accuracy(&half).unwrap(), 0.5);
        let cm = ConfusionMatrix::from_square(vec![vec![3, 1], vec![2, 2]]).unwrap();
        assert!((balanced_accuracy(&cm).unwrap() - 0.625).abs() < 1e-15);
        let empty = ConfusionMatrix::from_square(vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert!(matches!(balanced_accuracy(&empty), Err(Error::Domain(_))));
    }

    #[test]
    fn absent_classes_are_skipped() {
        let cm = ConfusionMatrix::from_square(vec![vec![2, 0, 0], vec![0, 0, 0], vec![1, 0, 1]]).unwrap();
        assert_eq!(balanced_accuracy(&cm).unwrap(), 0.75);
    }

    #[test]
    fn topk_examples() {
        let scores = vec![vec![0.1, 0.7, 0.2], vec![0.5, 0.25, 0.25], vec![0.2, 0.2, 0.6]];
        let labels = [1, 2, 0];
        assert_eq!(topk_accuracy(&scores, &labels, 3).unwrap(), 1.0);
        assert_eq!(topk_accuracy(&scores, &labels, 1).unwrap(), 1.0 / 3.0);
        // row 1 ties 0.25/0.25: class 1 wins the second slot
        assert_eq!(topk_accuracy(&scores, &labels, 2).unwrap(), 2.0 / 3.0);
        assert!(topk_accuracy(&scores, &labels, 0).is_err());
        assert!(topk_accuracy(&scores, &labels[..2], 1).is_err());
    }

    #[test]
    fn constant_predictor_on_uniform_labels() {
        let scores: Vec<Vec<f64>> = (0..16).map(|_| {
            let mut s = vec![0.0; 8];
            s[0] = 1.0;
            s
        }).collect();
        let labels: Vec<usize> = (0..16).map(|i| i % 8).collect();
        let (m, _) = task_metrics(Task::Foul, &scores, &labels, 0).unwrap();
        assert_eq!(m.acc_at_1, 0.125);
        assert_eq!(m.balanced_accuracy, 0.125);
        assert!(m.acc_at_2 >= m.acc_at_1);
    }

    #[test]
    fn empty_task_is_a_domain_error_naming_the_task() {
        let err = task_metrics(Task::Offence, &[], &[], 3).unwrap_err();
        assert!(err.to_string().contains("offence"), "{err}");
    }
}
