//! Optimisation: Adam with an exponentially decaying learning rate over
//! shuffled mini-batches of actions, single- or multi-task cross-entropy.

mod adam;
mod data;
mod resample;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, OptimState};
pub use data::{filter_for_mode, inverse_frequency_weights, prepare_action, prepare_split, PreparedAction};
pub use resample::{context_seconds, resample_frames, resample_indices, ABLATION_FPS, CLIP_FRAMES, SOURCE_FPS};

use crate::dataset::{Manifest, Split};
use crate::error::{Error, Result};
use crate::model::{bind_vars, MvfModel, Task, TaskMode};
use crate::tensor::{grad_check_many, Bound, GradCheckReport, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub lr_decay_per_epoch: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub alpha_foul: f64,
    pub alpha_off: f64,
    pub seed: u64,
    /// Inverse-frequency weights in the cross-entropy.
    pub class_weighting: bool,
    /// Target frame rate for resampling clips.
    pub fps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-4,
            lr_decay_per_epoch: 0.95,
            batch_size: 8,
            max_epochs: 10,
            alpha_foul: 1.0,
            alpha_off: 1.0,
            seed: 0,
            class_weighting: false,
            fps: SOURCE_FPS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.lr_decay_per_epoch > 0.0 && self.lr_decay_per_epoch <= 1.0) {
            return Err(Error::Config(format!(
                "lr_decay_per_epoch must be in (0, 1], got {}",
                self.lr_decay_per_epoch
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.alpha_foul >= 0.0 && self.alpha_off >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        Ok(())
    }
}

pub fn epoch_lr(config: &TrainConfig, epoch: usize) -> f64 {
    config.lr0 * config.lr_decay_per_epoch.powi(epoch as i32)
}

/// Task weights and optional class weights applied to the loss.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossWeights {
    pub alpha_foul: f64,
    pub alpha_off: f64,
    pub class_weights_foul: Option<Vec<f64>>,
    pub class_weights_off: Option<Vec<f64>>,
}

impl LossWeights {
    pub fn plain(alpha_foul: f64, alpha_off: f64) -> Self {
        Self {
            alpha_foul,
            alpha_off,
            ..Self::default()
        }
    }

    fn class_weights(&self, task: Task) -> Option<&[f64]> {
        match task {
            Task::Foul => self.class_weights_foul.as_deref(),
            Task::Offence => self.class_weights_off.as_deref(),
        }
    }
}

/// Loss nodes for one batch. `total` is what gets differentiated.
#[derive(Debug, Clone, Copy)]
pub struct BatchLoss {
    pub total: Var,
    pub foul: Option<Var>,
    pub offence: Option<Var>,
}

/// Builds the batch loss on `tape`. Each head's cross-entropy is averaged
/// over the batch; in multi-task mode they are combined as
/// `alpha_foul·L_foul + alpha_off·L_off`, a single head's loss is used as is.
pub fn batch_loss(
    model: &MvfModel,
    tape: &mut Tape,
    bound: &Bound,
    batch: &[&PreparedAction],
    weights: &LossWeights,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let reps = batch
        .iter()
        .map(|a| model.represent(tape, bound, &a.views))
        .collect::<Result<Vec<_>>>()?;
    let reps = tape.stack(&reps)?;
    let mode = model.config().task_mode;
    let mut per_task = Vec::new();
    for &task in mode.tasks() {
        let labels = batch
            .iter()
            .map(|a| {
                a.label(task).ok_or_else(|| {
                    Error::Contract(format!("action {} has no {task} label", a.action_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let logits = model.head_logits(tape, bound, task, reps)?;
        per_task.push(tape.weighted_softmax_cross_entropy(logits, &labels, weights.class_weights(task))?);
    }
    Ok(match mode {
        TaskMode::SingleFoul => BatchLoss {
            total: per_task[0],
            foul: Some(per_task[0]),
            offence: None,
        },
        TaskMode::SingleOffence => BatchLoss {
            total: per_task[0],
            foul: None,
            offence: Some(per_task[0]),
        },
        TaskMode::MultiTask => {
            let f = tape.scale(per_task[0], weights.alpha_foul);
            let o = tape.scale(per_task[1], weights.alpha_off);
            BatchLoss {
                total: tape.add(f, o)?,
                foul: Some(per_task[0]),
                offence: Some(per_task[1]),
            }
        }
    })
}

/// Runs forward and backward on one batch and leaves the gradient (mean over
/// the batch) on the model's parameters. Returns `(total, foul, offence)` losses.
pub fn accumulate_batch_gradients(
    model: &mut MvfModel,
    batch: &[&PreparedAction],
    weights: &LossWeights,
) -> Result<(f64, Option<f64>, Option<f64>)> {
    let mut tape = Tape::new();
    let bound = model.params().bind(&mut tape);
    let loss = batch_loss(model, &mut tape, &bound, batch, weights)?;
    tape.backward(loss.total)?;
    model.params_mut().absorb_grads(&tape, &bound)?;
    let value = |v: Option<Var>| v.map(|v| tape.data(v)[0]);
    Ok((tape.data(loss.total)[0], value(loss.foul), value(loss.offence)))
}

/// Central-difference check of the batch loss gradient with respect to every
/// model parameter.
pub fn model_grad_check(
    model: &MvfModel,
    batch: &[&PreparedAction],
    weights: &LossWeights,
    h: f64,
) -> Result<GradCheckReport> {
    let inputs: Vec<Tensor> = model.params().iter().map(|(_, t)| t.clone()).collect();
    grad_check_many(
        |tape, vars| {
            let bound = bind_vars(model, vars);
            Ok(batch_loss(model, tape, &bound, batch, weights)?.total)
        },
        &inputs,
        h,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_loss_foul: Option<f64>,
    pub train_loss_offence: Option<f64>,
    pub valid_loss: Option<f64>,
    pub valid_loss_foul: Option<f64>,
    pub valid_loss_offence: Option<f64>,
    pub valid_acc_foul: Option<f64>,
    pub valid_acc_offence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept: lowest valid loss, or the last epoch
    /// when there is no validation data.
    pub best_epoch: Option<usize>,
    pub train_actions: usize,
    pub valid_actions: usize,
    pub excluded_actions: usize,
}

impl TrainHistory {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("history serialises")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best epoch.
    pub model: MvfModel,
    /// Parameters after the final epoch.
    pub last: MvfModel,
    pub history: TrainHistory,
}

/// Mean losses and top-1 accuracies over `actions` without touching gradients.
fn measure(model: &MvfModel, actions: &[&PreparedAction], weights: &LossWeights, batch_size: usize) -> Result<EpochRecord> {
    let mut sums = [0.0f64; 3];
    let mut hits = [0usize; 2];
    for batch in actions.chunks(batch_size) {
        let mut tape = Tape::new();
        let bound = model.params().bind(&mut tape);
        let loss = batch_loss(model, &mut tape, &bound, batch, weights)?;
        let n = batch.len() as f64;
        sums[0] += tape.data(loss.total)[0] * n;
        sums[1] += loss.foul.map_or(0.0, |v| tape.data(v)[0] * n);
        sums[2] += loss.offence.map_or(0.0, |v| tape.data(v)[0] * n);
        for a in batch {
            let p = model.predict(&a.views)?;
            if let (Some(tp), Some(l)) = (&p.foul, a.foul) {
                hits[0] += usize::from(tp.argmax() == l);
            }
            if let (Some(tp), Some(l)) = (&p.offence, a.offence) {
                hits[1] += usize::from(tp.argmax() == l);
            }
        }
    }
    let n = actions.len() as f64;
    let mode = model.config().task_mode;
    let foul = mode.has(Task::Foul);
    let off = mode.has(Task::Offence);
    Ok(EpochRecord {
        epoch: 0,
        lr: 0.0,
        train_loss: 0.0,
        train_loss_foul: None,
        train_loss_offence: None,
        valid_loss: Some(sums[0] / n),
        valid_loss_foul: foul.then(|| sums[1] / n),
        valid_loss_offence: off.then(|| sums[2] / n),
        valid_acc_foul: foul.then(|| hits[0] as f64 / n),
        valid_acc_offence: off.then(|| hits[1] as f64 / n),
    })
}

fn loss_weights(config: &TrainConfig, mode: TaskMode, train: &[&PreparedAction]) -> Result<LossWeights> {
    let mut weights = LossWeights::plain(config.alpha_foul, config.alpha_off);
    if config.class_weighting {
        for &task in mode.tasks() {
            let labels: Vec<usize> = train.iter().filter_map(|a| a.label(task)).collect();
            let w = inverse_frequency_weights(&labels, task.classes())?;
            match task {
                Task::Foul => weights.class_weights_foul = Some(w),
                Task::Offence => weights.class_weights_off = Some(w),
            }
        }
    }
    Ok(weights)
}

/// Trains on prepared actions. `observer` sees the model after every epoch.
pub fn train_prepared(
    mut model: MvfModel,
    train: &[PreparedAction],
    valid: &[PreparedAction],
    config: &TrainConfig,
    observer: &mut dyn FnMut(usize, &MvfModel),
) -> Result<TrainOutcome> {
    config.validate()?;
    let mode = model.config().task_mode;
    let (train_set, train_dropped) = filter_for_mode(train, mode);
    let (valid_set, valid_dropped) = filter_for_mode(valid, mode);
    if train_set.is_empty() {
        return Err(Error::Config(format!(
            "no training actions with labels for {mode:?} ({train_dropped} excluded)"
        )));
    }
    let weights = loss_weights(config, mode, &train_set)?;
    let mut history = TrainHistory {
        train_actions: train_set.len(),
        valid_actions: valid_set.len(),
        excluded_actions: train_dropped + valid_dropped,
        ..TrainHistory::default()
    };
    let mut state = OptimState::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, MvfModel)> = None;

    for epoch in 0..config.max_epochs {
        let lr = epoch_lr(config, epoch);
        order.shuffle(&mut rng);
        let mut sums = [0.0f64; 3];
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&PreparedAction> = chunk.iter().map(|&i| train_set[i]).collect();
            model.params_mut().zero_grads();
            let (total, foul, off) = accumulate_batch_gradients(&mut model, &batch, &weights)?;
            adam_step(model.params_mut(), &mut state, lr)?;
            let n = batch.len() as f64;
            sums[0] += total * n;
            sums[1] += foul.unwrap_or(0.0) * n;
            sums[2] += off.unwrap_or(0.0) * n;
        }
        model.params_mut().zero_grads();
        let n = train_set.len() as f64;
        let mut record = if valid_set.is_empty() {
            EpochRecord {
                epoch,
                lr,
                train_loss: 0.0,
                train_loss_foul: None,
                train_loss_offence: None,
                valid_loss: None,
                valid_loss_foul: None,
                valid_loss_offence: None,
                valid_acc_foul: None,
                valid_acc_offence: None,
            }
        } else {
            measure(&model, &valid_set, &weights, config.batch_size)?
        };
        record.epoch = epoch;
        record.lr = lr;
        record.train_loss = sums[0] / n;
        record.train_loss_foul = mode.has(Task::Foul).then(|| sums[1] / n);
        record.train_loss_offence = mode.has(Task::Offence).then(|| sums[2] / n);
        info!(
            "epoch {} lr {:.3e} train loss {:.4}{}",
            epoch + 1,
            lr,
            record.train_loss,
            record.valid_loss.map(|v| format!(" valid loss {v:.4}")).unwrap_or_default()
        );
        match record.valid_loss {
            Some(v) if best.as_ref().is_none_or(|(b, _)| v < *b) => {
                best = Some((v, model.clone()));
                history.best_epoch = Some(epoch);
            }
            None => history.best_epoch = Some(epoch),
            _ => {}
        }
        history.epochs.push(record);
        observer(epoch, &model);
    }
    let kept = match best {
        Some((_, m)) => m,
        None => model.clone(),
    };
    Ok(TrainOutcome {
        model: kept,
        last: model,
        history,
    })
}

/// Loads the Train and Valid splits of `manifest` and trains `model` on them.
pub fn train(model: MvfModel, manifest: &Manifest, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let train_set = prepare_split(manifest, Some(Split::Train), config.fps)?;
    if train_set.is_empty() {
        return Err(Error::Config("manifest has no Train actions".into()));
    }
    let valid_set = prepare_split(manifest, Some(Split::Valid), config.fps)?;
    train_prepared(model, &train_set, &valid_set, config, &mut |_, _| {})
}
