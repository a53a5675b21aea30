#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;
use vars_core::dataset::{CameraKind, Manifest};
use vars_core::model::{Aggregation, EncoderKind, ModelConfig, TaskMode};
use vars_core::synthgen::{generate, GenConfig};
use vars_core::tensor::Tensor;
use vars_core::training::PreparedAction;

pub fn tiny_config(encoder_kind: EncoderKind, aggregation: Aggregation, task_mode: TaskMode) -> ModelConfig {
    ModelConfig {
        encoder_kind,
        feature_dim: 4,
        aggregation,
        task_mode,
        hidden_dim: 5,
        frames: 16,
        height: 3,
        width: 4,
    }
}

pub fn random_clip(rng: &mut impl Rng, config: &ModelConfig) -> Tensor {
    let n = config.frames * config.height * config.width;
    let data = (0..n).map(|_| rng.random::<f64>()).collect();
    Tensor::new(&[config.frames, config.height, config.width], data).unwrap()
}

/// Random actions with random labels for both tasks.
pub fn random_actions(seed: u64, n: usize, config: &ModelConfig) -> Vec<PreparedAction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let views = rng.random_range(2..=4);
            PreparedAction {
                action_id: format!("a{i}"),
                clip_ids: (0..views).map(|v| format!("c{v}")).collect(),
                camera_kinds: (0..views)
                    .map(|v| if v == 0 { CameraKind::Live } else { CameraKind::Replay })
                    .collect(),
                views: (0..views).map(|_| random_clip(&mut rng, config)).collect(),
                foul: Some(rng.random_range(0..8)),
                offence: Some(rng.random_range(0..4)),
            }
        })
        .collect()
}

/// A small generated dataset at the default 24×40 frame size.
pub fn small_dataset(n_actions: usize, seed: u64, live_informative_prob: f64, split: [f64; 3]) -> (TempDir, Manifest) {
    let dir = tempfile::tempdir().unwrap();
    let config = GenConfig {
        n_actions,
        live_informative_prob,
        seed,
        split: Some(split),
        ..GenConfig::default()
    };
    let manifest = generate(&config, dir.path()).unwrap();
    (dir, manifest)
}

pub fn model_for(manifest: &Manifest, encoder_kind: EncoderKind, task_mode: TaskMode) -> ModelConfig {
    let clip = &manifest.actions[0].clips[0];
    ModelConfig {
        encoder_kind,
        feature_dim: 16,
        aggregation: Aggregation::Max,
        task_mode,
        hidden_dim: 16,
        frames: 16,
        height: clip.height as usize,
        width: clip.width as usize,
    }
}

/// Proptest settings with a pinned seed, so runs are repeatable.
pub fn pinned(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed_f001),
        failure_persistence: None,
        ..proptest::test_runner::Config::default()
    }
}
