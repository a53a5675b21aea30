use crate::dataset::{load_clip_frames, map_task1, map_task2, CameraKind, ClassLabel, FoulAction, Manifest, Split};
use crate::error::{Error, Result};
use crate::model::{Task, TaskMode};
use crate::tensor::Tensor;

use super::resample::resample_frames;

/// One action ready for the network: every view resampled to 16 frames,
/// plus whichever task labels its annotation maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedAction {
    pub action_id: String,
    pub clip_ids: Vec<String>,
    pub camera_kinds: Vec<CameraKind>,
    pub views: Vec<Tensor>,
    pub foul: Option<usize>,
    pub offence: Option<usize>,
}

impl PreparedAction {
    pub fn label(&self, task: Task) -> Option<usize> {
        match task {
            Task::Foul => self.foul,
            Task::Offence => self.offence,
        }
    }

    /// True when the action has a label for every task of `mode`.
    pub fn usable_for(&self, mode: TaskMode) -> bool {
        mode.tasks().iter().all(|&t| self.label(t).is_some())
    }
}

pub fn prepare_action(manifest: &Manifest, action: &FoulAction, fps: f64) -> Result<PreparedAction> {
    let mut views = Vec::with_capacity(action.clips.len());
    for clip in &action.clips {
        let frames = load_clip_frames(manifest, clip)?;
        views.push(resample_frames(&frames, clip.contact_frame.map(|c| c as usize), fps)?);
    }
    let annotation = action.annotation.as_ref();
    Ok(PreparedAction {
        action_id: action.action_id.clone(),
        clip_ids: action.clips.iter().map(|c| c.clip_id.clone()).collect(),
        camera_kinds: action.clips.iter().map(|c| c.camera_kind).collect(),
        views,
        foul: annotation.and_then(map_task1).map(|l| l.index()),
        offence: annotation.and_then(map_task2).map(|l| l.index()),
    })
}

/// Loads and resamples every action in `split` (all actions when `None`),
/// in manifest order.
pub fn prepare_split(manifest: &Manifest, split: Option<Split>, fps: f64) -> Result<Vec<PreparedAction>> {
    manifest
        .actions
        .iter()
        .filter(|a| split.is_none_or(|s| a.split == s))
        .map(|a| prepare_action(manifest, a, fps))
        .collect()
}

/// Actions usable for `mode`, and how many were dropped.
pub fn filter_for_mode(actions: &[PreparedAction], mode: TaskMode) -> (Vec<&PreparedAction>, usize) {
    let kept: Vec<&PreparedAction> = actions.iter().filter(|a| a.usable_for(mode)).collect();
    let dropped = actions.len() - kept.len();
    (kept, dropped)
}

/// Inverse-frequency class weights `n / (present_classes · n_c)`; absent
/// classes get weight 0.
pub fn inverse_frequency_weights(labels: &[usize], classes: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; classes];
    for (row, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Label {
                label: l,
                classes,
                row,
            });
        }
        counts[l] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let n = labels.len() as f64;
    Ok(counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n / (present as f64 * c as f64) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_balance_class_mass() {
        let w = inverse_frequency_weights(&[0, 0, 0, 1, 2, 2], 4).unwrap();
        assert_eq!(w[3], 0.0);
        // every present class carries the same total weight
        let mass: Vec<f64> = [(0, 3.0), (1, 1.0), (2, 2.0)].iter().map(|&(c, n)| w[c] * n).collect();
        assert!(mass.iter().all(|&m| (m - 2.0).abs() < 1e-12), "{mass:?}");
        assert!(inverse_frequency_weights(&[5], 4).is_err());
    }
}
