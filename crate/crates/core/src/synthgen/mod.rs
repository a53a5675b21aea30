//! Deterministic synthetic multi-view foul clips.
//!
//! Every action gets one live clip and one to three replays. The foul class
//! fixes a moving-blob signature; the offence outcome sets the brightness of
//! a ring drawn around the contact point. Replays always show the signature
//! (slowed to half speed, with a random alignment offset); the live clip shows
//! it only with probability `live_informative_prob`.

mod annotate;
mod scene;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use annotate::{annotate_synthetic, card_distribution, success_rate};
pub use scene::{collision_amplitude, signature, Scene, Signature};

use crate::dataset::payload::write_frames;
use crate::dataset::{
    map_task2, split_actions, CameraKind, ClassLabel, ClipMeta, FoulAction, Manifest, Split, SplitFractions,
    Task1Label,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BASE_FPS: f64 = 16.0;
/// Contact happens three seconds into the live clip.
pub const CONTACT_SECONDS: f64 = 3.0;
pub const REPLAY_SPEED: f64 = 0.5;
/// Frames needed for the widest temporal context (16 frames at 5 fps = 3.2 s).
pub const TEMPORAL_ABLATION_FRAMES: usize = 52;

/// Foul-class shares observed in the real annotation release, in
/// [`Task1Label`] order (they sum to 97.9; the rest is "don't know").
pub const OBSERVED_CLASS_SHARES: [f64; 8] = [43.6, 15.6, 3.5, 2.9, 12.5, 5.9, 13.0, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_actions: usize,
    pub frames_per_clip: usize,
    pub height: usize,
    pub width: usize,
    /// Probability of each [`Task1Label`], in label order.
    pub class_distribution: Vec<f64>,
    pub live_informative_prob: f64,
    /// Probability of 1, 2 and 3 replays.
    pub replay_count_distribution: [f64; 3],
    pub noise_std: f64,
    pub seed: u64,
    /// Train/valid/test fractions; `None` puts everything in Train.
    pub split: Option<[f64; 3]>,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_actions: 64,
            frames_per_clip: TEMPORAL_ABLATION_FRAMES,
            height: 24,
            width: 40,
            class_distribution: uniform_classes(),
            live_informative_prob: 0.5,
            replay_count_distribution: [0.75, 0.20, 0.05],
            noise_std: 0.05,
            seed: 0,
            split: None,
        }
    }
}

pub fn uniform_classes() -> Vec<f64> {
    vec![1.0 / 8.0; 8]
}

/// The observed foul-class shares, renormalised over the eight classes.
pub fn observed_classes() -> Vec<f64> {
    let total: f64 = OBSERVED_CLASS_SHARES.iter().sum();
    OBSERVED_CLASS_SHARES.iter().map(|p| p / total).collect()
}

fn check_distribution(name: &str, probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Config(format!("{name} has negative or non-finite entries: {probs:?}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("{name} must sum to 1, got {sum}")));
    }
    Ok(())
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_actions == 0 {
            return Err(Error::Config("n_actions must be positive".into()));
        }
        if self.frames_per_clip < 16 {
            return Err(Error::Config(format!(
                "frames_per_clip must be at least 16, got {}",
                self.frames_per_clip
            )));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::Config("frame size must be positive".into()));
        }
        if self.class_distribution.len() != Task1Label::count() {
            return Err(Error::Config(format!(
                "class_distribution needs {} entries, got {}",
                Task1Label::count(),
                self.class_distribution.len()
            )));
        }
        check_distribution("class_distribution", &self.class_distribution)?;
        check_distribution("replay_count_distribution", &self.replay_count_distribution)?;
        if !(0.0..=1.0).contains(&self.live_informative_prob) {
            return Err(Error::Config(format!(
                "live_informative_prob must be in [0, 1], got {}",
                self.live_informative_prob
            )));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config(format!("noise_std must be non-negative, got {}", self.noise_std)));
        }
        if let Some([a, b, c]) = self.split {
            SplitFractions::new(a, b, c)?;
        }
        Ok(())
    }

    /// Live-clip frame at which contact happens.
    pub fn contact_frame(&self) -> usize {
        ((CONTACT_SECONDS * BASE_FPS) as usize).min(self.frames_per_clip - 4)
    }

    pub fn supports_temporal_ablation(&self) -> bool {
        self.frames_per_clip >= TEMPORAL_ABLATION_FRAMES
    }
}

/// Splits `n` into integer counts proportional to `weights` (largest remainder).
fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

fn action_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Per-action plan drawn before any rendering.
struct Plan {
    class: Task1Label,
    replays: usize,
}

fn plan(config: &GenConfig) -> Vec<Plan> {
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let mut classes: Vec<Task1Label> = apportion(config.n_actions, &config.class_distribution)
        .into_iter()
        .enumerate()
        .flat_map(|(i, n)| std::iter::repeat_n(Task1Label::ALL[i], n))
        .collect();
    classes.shuffle(&mut master);
    let mut replays: Vec<usize> = apportion(config.n_actions, &config.replay_count_distribution)
        .into_iter()
        .enumerate()
        .flat_map(|(i, n)| std::iter::repeat_n(i + 1, n))
        .collect();
    replays.shuffle(&mut master);
    classes
        .into_iter()
        .zip(replays)
        .map(|(class, replays)| Plan { class, replays })
        .collect()
}

fn render_clip(
    config: &GenConfig,
    scene: &Scene,
    contact_frame: usize,
    speed: f64,
    informative: bool,
    rng: &mut ChaCha8Rng,
) -> Tensor {
    let (h, w) = (config.height, config.width);
    let frames = config.frames_per_clip;
    let mut data = vec![0.0; frames * h * w];
    let noise = Normal::new(0.0, config.noise_std.max(f64::MIN_POSITIVE)).expect("valid std");
    for (j, frame) in data.chunks_mut(h * w).enumerate() {
        let t = (j as f64 - contact_frame as f64) * speed / BASE_FPS;
        scene.render(t, informative, frame);
        for v in frame.iter_mut() {
            if config.noise_std > 0.0 {
                *v += noise.sample(rng);
            }
            *v = v.clamp(0.0, 1.0);
        }
    }
    Tensor::new(&[frames, h, w], data).expect("consistent clip shape")
}

/// Writes `manifest.json` and MVFC payloads under `out_dir`.
///
/// Output is a pure function of the config: the class and replay-count
/// assignments come from the master seed, and each action draws from its own
/// stream keyed by its index.
pub fn generate(config: &GenConfig, out_dir: &Path) -> Result<Manifest> {
    config.validate()?;
    let mut manifest = Manifest::new(format!("synthetic-seed{}", config.seed), "clips", out_dir);
    let live_contact = config.contact_frame();

    for (index, plan) in plan(config).into_iter().enumerate() {
        let mut rng = action_rng(config.seed, index);
        let action_id = format!("action_{index:05}");
        let annotation = annotate_synthetic(plan.class, &mut rng);
        let outcome = map_task2(&annotation).expect("synthetic annotations always map");
        let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-2.0..=2.0);
        let scene = Scene {
            class: plan.class,
            outcome,
            contact: (
                config.height as f64 / 2.0 + jitter(&mut rng),
                config.width as f64 / 2.0 + jitter(&mut rng),
            ),
            height: config.height,
            width: config.width,
        };

        let mut clips = Vec::with_capacity(plan.replays + 1);
        let live_informative = rng.random_bool(config.live_informative_prob);
        let live = render_clip(config, &scene, live_contact, 1.0, live_informative, &mut rng);
        clips.push((clip_meta(config, &action_id, "live", CameraKind::Live, live_contact, 1.0), live));

        for r in 1..=plan.replays {
            let lag = rng.random_range(0..=12usize);
            let contact = live_contact.saturating_sub(lag);
            let frames = render_clip(config, &scene, contact, REPLAY_SPEED, true, &mut rng);
            let id = format!("replay{r}");
            clips.push((
                clip_meta(config, &action_id, &id, CameraKind::Replay, contact, REPLAY_SPEED),
                frames,
            ));
        }

        let mut metas = Vec::with_capacity(clips.len());
        for (meta, frames) in clips {
            write_frames(&manifest.payload_path(&meta), &frames)?;
            metas.push(meta);
        }
        manifest.actions.push(FoulAction {
            action_id,
            clips: metas,
            annotation: Some(annotation),
            split: Split::Train,
            revision: 0,
        });
    }

    if let Some([a, b, c]) = config.split {
        manifest = split_actions(&manifest, config.seed, SplitFractions::new(a, b, c)?)?;
    }
    manifest.validate()?;
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

fn clip_meta(
    config: &GenConfig,
    action_id: &str,
    clip_id: &str,
    kind: CameraKind,
    contact: usize,
    speed: f64,
) -> ClipMeta {
    ClipMeta {
        clip_id: clip_id.to_string(),
        camera_kind: kind,
        frame_count: config.frames_per_clip as u32,
        fps: BASE_FPS,
        height: config.height as u32,
        width: config.width as u32,
        offset_frames: contact as i32 - (config.contact_frame() as f64 * speed).round() as i32,
        replay_speed: speed,
        contact_frame: Some(contact as u32),
        payload_path: format!("{action_id}/{clip_id}.mvfc"),
    }
}
