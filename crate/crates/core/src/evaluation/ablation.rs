use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::table::{rate, render};
use super::{evaluate_prepared, evaluate_with_views, Evaluation, MetricsReport};
use crate::dataset::{CameraKind, Manifest, Split};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, MvfModel, Task};
use crate::training::{context_seconds, prepare_split, train_prepared, PreparedAction, TrainConfig, TrainOutcome, ABLATION_FPS};

/// A view picked by role: the live clip, or the n-th replay (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewSource {
    Live,
    Replay(u8),
}

impl ViewSource {
    fn locate(self, action: &PreparedAction) -> Option<usize> {
        match self {
            ViewSource::Live => action.camera_kinds.iter().position(|&k| k == CameraKind::Live),
            ViewSource::Replay(n) => action
                .camera_kinds
                .iter()
                .enumerate()
                .filter(|(_, &k)| k == CameraKind::Replay)
                .nth(usize::from(n).checked_sub(1)?)
                .map(|(i, _)| i),
        }
    }
}

impl fmt::Display for ViewSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewSource::Live => f.write_str("L"),
            ViewSource::Replay(n) => write!(f, "R{n}"),
        }
    }
}

impl FromStr for ViewSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("L") {
            return Ok(ViewSource::Live);
        }
        s.strip_prefix(['R', 'r'])
            .and_then(|n| n.parse::<u8>().ok())
            .filter(|&n| (1..=3).contains(&n))
            .map(ViewSource::Replay)
            .ok_or_else(|| Error::Config(format!("unknown view {s:?}; expected L, R1, R2 or R3")))
    }
}

/// A non-empty set of views such as `L+R1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ViewSubset(Vec<ViewSource>);

impl ViewSubset {
    pub fn new(mut views: Vec<ViewSource>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Config("a view subset needs at least one view".into()));
        }
        views.sort();
        views.dedup();
        Ok(Self(views))
    }

    pub fn views(&self) -> &[ViewSource] {
        &self.0
    }

    /// Indices into the action's clips, or `None` if a view is missing.
    pub fn select(&self, action: &PreparedAction) -> Option<Vec<usize>> {
        self.0.iter().map(|v| v.locate(action)).collect()
    }
}

impl fmt::Display for ViewSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for ViewSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ViewSubset::new(s.split('+').map(str::parse).collect::<Result<Vec<_>>>()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub subsets: Vec<ViewSubset>,
    pub fps: Vec<f64>,
}

impl Default for AblationSpec {
    fn default() -> Self {
        let subsets = ["L", "R1", "L+R1", "R1+R2", "L+R1+R2"]
            .iter()
            .map(|s| s.parse().expect("default subsets parse"))
            .collect();
        Self {
            subsets,
            fps: ABLATION_FPS.iter().map(|&f| f64::from(f)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewAblation {
    pub subsets: Vec<String>,
    pub reports: Vec<MetricsReport>,
    /// Actions having every view any subset asks for.
    pub actions_used: usize,
    pub actions_skipped: usize,
}

impl ViewAblation {
    pub fn report(&self, subset: &str) -> Option<&MetricsReport> {
        self.subsets.iter().position(|s| s == subset).map(|i| &self.reports[i])
    }

    /// Metric rows by view-subset columns.
    pub fn to_table(&self) -> String {
        let mut header = vec!["Metric".to_string()];
        header.extend(self.subsets.iter().cloned());
        let mut rows = Vec::new();
        for task in [Task::Foul, Task::Offence] {
            let tag = match task {
                Task::Foul => "T1",
                Task::Offence => "T2",
            };
            if self.reports.first().and_then(|r| r.task(task)).is_none() {
                continue;
            }
            type Pick = fn(&super::TaskMetrics) -> f64;
            let metrics: [(String, Pick); 3] = [
                (format!("Acc_{tag}"), |t| t.acc_at_1),
                (format!("Acc_{tag}@2"), |t| t.acc_at_2),
                (format!("BA_{tag}"), |t| t.balanced_accuracy),
            ];
            for (name, pick) in metrics {
                let mut row = vec![name];
                row.extend(self.reports.iter().map(|r| rate(r.task(task).map(pick))));
                rows.push(row);
            }
        }
        render(&[header], &rows)
    }
}

/// Evaluates `model` once per subset, feeding only the chosen views.
pub fn ablate_views(model: &MvfModel, actions: &[PreparedAction], spec: &AblationSpec) -> Result<ViewAblation> {
    if spec.subsets.is_empty() {
        return Err(Error::Config("no view subsets to evaluate".into()));
    }
    let mut union: Vec<ViewSource> = spec.subsets.iter().flat_map(|s| s.views().iter().copied()).collect();
    union.sort();
    union.dedup();
    let all = ViewSubset::new(union)?;
    let eligible: Vec<PreparedAction> = actions.iter().filter(|a| all.select(a).is_some()).cloned().collect();
    if eligible.is_empty() {
        return Err(Error::Domain(format!("no action has all of the views {all}")));
    }
    let mut reports = Vec::with_capacity(spec.subsets.len());
    for subset in &spec.subsets {
        let eval = evaluate_with_views(model, &eligible, |a| {
            let idx = subset.select(a).expect("eligible actions have every view");
            Ok(idx.into_iter().map(|i| a.views[i].clone()).collect())
        })?;
        reports.push(eval.report);
    }
    Ok(ViewAblation {
        subsets: spec.subsets.iter().map(ToString::to_string).collect(),
        reports,
        actions_used: eligible.len(),
        actions_skipped: actions.len() - eligible.len(),
    })
}

/// Result of training one model and evaluating it.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub outcome: TrainOutcome,
    pub evaluation: Evaluation,
}

/// The default pipeline: resample at `train.fps`, initialise with
/// `train.seed`, train on Train/Valid, evaluate on `eval_split`.
pub fn run_pipeline(manifest: &Manifest, model: &ModelConfig, train: &TrainConfig, eval_split: Split) -> Result<PipelineRun> {
    train.validate()?;
    let train_set = prepare_split(manifest, Some(Split::Train), train.fps)?;
    let valid_set = prepare_split(manifest, Some(Split::Valid), train.fps)?;
    let eval_set = prepare_split(manifest, Some(eval_split), train.fps)?;
    if eval_set.is_empty() {
        return Err(Error::Domain(format!("split {eval_split:?} has no actions")));
    }
    let init = MvfModel::init(model.clone(), train.seed)?;
    let outcome = train_prepared(init, &train_set, &valid_set, train, &mut |_, _| {})?;
    let evaluation = evaluate_prepared(&outcome.model, &eval_set)?;
    Ok(PipelineRun { outcome, evaluation })
}

#[derive(Debug, Clone)]
pub struct TemporalAblation {
    pub fps: Vec<f64>,
    pub runs: Vec<PipelineRun>,
}

impl TemporalAblation {
    pub fn context_seconds(&self) -> Vec<f64> {
        self.fps.iter().map(|&f| context_seconds(f)).collect()
    }

    pub fn accuracy(&self, task: Task) -> Vec<Option<f64>> {
        self.runs
            .iter()
            .map(|r| r.evaluation.report.task(task).map(|t| t.acc_at_1))
            .collect()
    }

    /// Frame-rate and context header rows, then one accuracy row per task.
    pub fn to_table(&self) -> String {
        let mut fps_row = vec!["Frame rate (FPS)".to_string()];
        fps_row.extend(self.fps.iter().map(|f| format!("{f}")));
        let mut ctx_row = vec!["Temporal context".to_string()];
        ctx_row.extend(self.context_seconds().iter().map(|c| format!("{c:.1}s")));
        let mut rows = Vec::new();
        for (task, name) in [(Task::Foul, "Accuracy (Foul class.)"), (Task::Offence, "Accuracy (Off. sev. class.)")] {
            let acc = self.accuracy(task);
            if acc.iter().all(Option::is_none) {
                continue;
            }
            let mut row = vec![name.to_string()];
            row.extend(acc.into_iter().map(rate));
            rows.push(row);
        }
        render(&[fps_row, ctx_row], &rows)
    }
}

/// Trains and evaluates one model per frame rate, all else equal.
pub fn ablate_temporal(
    manifest: &Manifest,
    model: &ModelConfig,
    train: &TrainConfig,
    fps: &[f64],
    eval_split: Split,
) -> Result<TemporalAblation> {
    if fps.is_empty() {
        return Err(Error::Config("no frame rates to evaluate".into()));
    }
    let mut runs = Vec::with_capacity(fps.len());
    for &f in fps {
        log::info!("temporal ablation: {f} fps ({:.1} s context)", context_seconds(f));
        let config = TrainConfig { fps: f, ..train.clone() };
        runs.push(run_pipeline(manifest, model, &config, eval_split)?);
    }
    Ok(TemporalAblation { fps: fps.to_vec(), runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn action(kinds: &[CameraKind]) -> PreparedAction {
        PreparedAction {
            action_id: "a".into(),
            clip_ids: (0..kinds.len()).map(|i| format!("c{i}")).collect(),
            camera_kinds: kinds.to_vec(),
            views: kinds.iter().map(|_| Tensor::zeros(&[1])).collect(),
            foul: Some(0),
            offence: Some(0),
        }
    }

    #[test]
    fn subsets_parse_and_print() {
        let s: ViewSubset = "R2+L".parse().unwrap();
        assert_eq!(s.to_string(), "L+R2");
        assert!("".parse::<ViewSubset>().is_err());
        assert!("L+X".parse::<ViewSubset>().is_err());
        assert_eq!(AblationSpec::default().subsets.len(), 5);
    }

    #[test]
    fn selection_by_role() {
        use CameraKind::*;
        let a = action(&[Live, Replay, Replay]);
        assert_eq!("L+R1+R2".parse::<ViewSubset>().unwrap().select(&a), Some(vec![0, 1, 2]));
        assert_eq!("R2".parse::<ViewSubset>().unwrap().select(&a), Some(vec![2]));
        assert_eq!("R3".parse::<ViewSubset>().unwrap().select(&a), None);
        let b = action(&[Replay, Replay]);
        assert_eq!("L".parse::<ViewSubset>().unwrap().select(&b), None);
    }
}
