//! Resampling index oracle, gradient-averaging and multi-task gradient
//! identities, determinism and the multi-task/single-task trajectory match.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vars_core::dataset::Split;
use vars_core::model::{Aggregation, EncoderKind, MvfModel, TaskMode};
use vars_core::training::{
    accumulate_batch_gradients, prepare_split, resample_indices, train, train_prepared, LossWeights,
    PreparedAction, TrainConfig,
};
use vars_core::Error;

/// Integer-only index rule: round(contact + 16(k−8)/fps), ties away from zero.
fn index_oracle(frames: usize, contact: usize, fps: u32) -> Vec<usize> {
    (0..16i64)
        .map(|k| {
            let num = 16 * (k - 8);
            let den = i64::from(fps);
            let rounded = num.signum() * ((2 * num.abs() + den) / (2 * den));
            (contact as i64 + rounded).clamp(0, frames as i64 - 1) as usize
        })
        .collect()
}

#[test]
fn resample_indices_match_integer_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let frames = rng.random_range(16..120);
        let contact = rng.random_range(0..frames);
        let fps = [5u32, 8, 12, 16][rng.random_range(0..4)];
        let got = resample_indices(frames, Some(contact), f64::from(fps), 16).unwrap();
        assert_eq!(got, index_oracle(frames, contact, fps), "F={frames} c={contact} fps={fps}");
        assert!(got.windows(2).all(|w| w[0] <= w[1]));
        assert!(got.iter().all(|&i| i < frames));
    }
}

fn gradients(model: &MvfModel) -> Vec<Vec<f64>> {
    model.params().iter().map(|(_, t)| t.grad().unwrap().to_vec()).collect()
}

fn grads_for(model: &MvfModel, batch: &[&PreparedAction], weights: &LossWeights) -> Vec<Vec<f64>> {
    let mut m = model.clone();
    m.params_mut().zero_grads();
    accumulate_batch_gradients(&mut m, batch, weights).unwrap();
    gradients(&m)
}

#[test]
fn full_batch_gradient_is_mean_of_per_action_gradients() {
    let config = common::tiny_config(EncoderKind::TemporalConv, Aggregation::Max, TaskMode::MultiTask);
    let model = MvfModel::init(config.clone(), 2).unwrap();
    let actions = common::random_actions(3, 6, &config);
    let all: Vec<_> = actions.iter().collect();
    let weights = LossWeights::plain(1.0, 1.0);
    let batch = grads_for(&model, &all, &weights);
    let singles: Vec<_> = actions.iter().map(|a| grads_for(&model, &[a], &weights)).collect();
    for (p, g) in batch.iter().enumerate() {
        for (i, &v) in g.iter().enumerate() {
            let mean = singles.iter().map(|s| s[p][i]).sum::<f64>() / actions.len() as f64;
            assert!((v - mean).abs() < 1e-12, "param {p} coord {i}: {v} vs {mean}");
        }
    }
}

#[test]
fn multitask_gradient_is_weighted_sum_of_task_gradients() {
    let config = common::tiny_config(EncoderKind::FramePool, Aggregation::Mean, TaskMode::MultiTask);
    let model = MvfModel::init(config.clone(), 5).unwrap();
    let actions = common::random_actions(8, 4, &config);
    let batch: Vec<_> = actions.iter().collect();
    let (af, ao) = (0.7, 1.3);
    let total = grads_for(&model, &batch, &LossWeights::plain(af, ao));
    let foul = grads_for(&model, &batch, &LossWeights::plain(1.0, 0.0));
    let off = grads_for(&model, &batch, &LossWeights::plain(0.0, 1.0));
    for p in 0..total.len() {
        for i in 0..total[p].len() {
            let expect = af * foul[p][i] + ao * off[p][i];
            assert!((total[p][i] - expect).abs() < 1e-12);
        }
    }
}

fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs: epochs,
        lr0: 1e-3,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let (_dir, manifest) = common::small_dataset(240, 3, 1.0, [0.8, 0.2, 0.0]);
    let config = common::model_for(&manifest, EncoderKind::TemporalConv, TaskMode::SingleFoul);
    let run = || train(MvfModel::init(config.clone(), 0).unwrap(), &manifest, &quick_config(10)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    let losses: Vec<f64> = a.history.epochs.iter().map(|e| e.train_loss).collect();
    assert_eq!(losses.len(), 10);
    assert!(losses[9] < 0.5 * losses[0], "{losses:?}");
    assert!(a.history.epochs.iter().all(|e| e.valid_loss.is_some()));
    let best = a.history.best_epoch.unwrap();
    let best_loss = a.history.epochs[best].valid_loss.unwrap();
    assert!(a.history.epochs.iter().all(|e| e.valid_loss.unwrap() >= best_loss));
}

#[test]
fn best_epoch_parameters_are_the_ones_kept() {
    let (_dir, manifest) = common::small_dataset(64, 4, 1.0, [0.5, 0.5, 0.0]);
    let config = common::model_for(&manifest, EncoderKind::FramePool, TaskMode::SingleFoul);
    let train_set = prepare_split(&manifest, Some(Split::Train), 16.0).unwrap();
    let valid_set = prepare_split(&manifest, Some(Split::Valid), 16.0).unwrap();
    let mut snapshots = Vec::new();
    let outcome = train_prepared(
        MvfModel::init(config, 1).unwrap(),
        &train_set,
        &valid_set,
        &quick_config(6),
        &mut |_, m| snapshots.push(m.clone()),
    )
    .unwrap();
    assert_eq!(snapshots.len(), 6);
    assert_eq!(outcome.model, snapshots[outcome.history.best_epoch.unwrap()]);
    assert_eq!(outcome.last, snapshots[5]);
}

#[test]
fn zero_offence_weight_reproduces_single_task_trajectory() {
    let (_dir, manifest) = common::small_dataset(48, 6, 0.5, [1.0, 0.0, 0.0]);
    let train_set = prepare_split(&manifest, Some(Split::Train), 16.0).unwrap();
    let tc = TrainConfig {
        alpha_off: 0.0,
        ..quick_config(3)
    };
    let trajectory = |mode| {
        let config = common::model_for(&manifest, EncoderKind::TemporalConv, mode);
        let mut snaps = Vec::new();
        train_prepared(MvfModel::init(config, 7).unwrap(), &train_set, &[], &tc, &mut |_, m| {
            snaps.push(m.params().clone())
        })
        .unwrap();
        snaps
    };
    let single = trajectory(TaskMode::SingleFoul);
    let multi = trajectory(TaskMode::MultiTask);
    for (s, m) in single.iter().zip(&multi) {
        for (name, t) in s.iter() {
            let u = m.get(name).unwrap();
            let worst = t.data().iter().zip(u.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst <= 1e-12, "{name}: {worst}");
        }
    }
}

#[test]
fn empty_train_split_is_a_config_error() {
    let (_dir, manifest) = common::small_dataset(16, 1, 1.0, [0.0, 0.5, 0.5]);
    let config = common::model_for(&manifest, EncoderKind::FramePool, TaskMode::SingleFoul);
    let err = train(MvfModel::init(config, 0).unwrap(), &manifest, &quick_config(1)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}
