//! The multi-view network: a per-view encoder shared across views, a view
//! aggregator, and one or two classification heads.

mod checkpoint;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::dataset::{ClassLabel, Task1Label, Task2Label};
use crate::error::{Error, Result};
use crate::tensor::{softmax, top_k, Bound, ParamStore, Reduction, Tape, Tensor, Var};

pub const DEFAULT_FRAMES: usize = 16;
pub const TEMPORAL_KERNEL: usize = 3;
pub const MAX_VIEWS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncoderKind {
    /// Per-frame MLP, then mean over time. Spatial features only.
    FramePool,
    /// Per-frame projection, then a width-3 temporal convolution, then mean over time.
    TemporalConv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggregation {
    Mean,
    Max,
}

impl Aggregation {
    fn reduction(self) -> Reduction {
        match self {
            Aggregation::Mean => Reduction::Mean,
            Aggregation::Max => Reduction::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskMode {
    SingleFoul,
    SingleOffence,
    MultiTask,
}

/// One classification task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    Foul,
    Offence,
}

impl Task {
    pub fn classes(self) -> usize {
        match self {
            Task::Foul => Task1Label::count(),
            Task::Offence => Task2Label::count(),
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Foul => Task1Label::names(),
            Task::Offence => Task2Label::names(),
        }
    }

    fn head_prefix(self) -> &'static str {
        match self {
            Task::Foul => "head_foul",
            Task::Offence => "head_off",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Foul => "foul",
            Task::Offence => "offence",
        })
    }
}

impl TaskMode {
    pub fn tasks(self) -> &'static [Task] {
        match self {
            TaskMode::SingleFoul => &[Task::Foul],
            TaskMode::SingleOffence => &[Task::Offence],
            TaskMode::MultiTask => &[Task::Foul, Task::Offence],
        }
    }

    pub fn has(self, task: Task) -> bool {
        self.tasks().contains(&task)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder_kind: EncoderKind,
    pub feature_dim: usize,
    pub aggregation: Aggregation,
    pub task_mode: TaskMode,
    pub hidden_dim: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder_kind: EncoderKind::TemporalConv,
            feature_dim: 64,
            aggregation: Aggregation::Max,
            task_mode: TaskMode::MultiTask,
            hidden_dim: 64,
            frames: DEFAULT_FRAMES,
            height: 24,
            width: 40,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("feature_dim and hidden_dim must be at least 1".into()));
        }
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::Config("frames, height and width must be positive".into()));
        }
        if self.encoder_kind == EncoderKind::TemporalConv && self.frames < TEMPORAL_KERNEL {
            return Err(Error::Config(format!(
                "temporal encoder needs at least {TEMPORAL_KERNEL} frames, got {}",
                self.frames
            )));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// `(name, shape, fan_in)` of every parameter, sorted by name.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>, usize)> {
        let (p, d, h) = (self.pixels(), self.feature_dim, self.hidden_dim);
        let mut out = Vec::new();
        let mut dense = |prefix: &str, fan_in: usize, fan_out: usize| {
            out.push((format!("{prefix}.weight"), vec![fan_in, fan_out], fan_in));
            out.push((format!("{prefix}.bias"), vec![fan_out], fan_in));
        };
        match self.encoder_kind {
            EncoderKind::FramePool => {
                dense("encoder.frame1", p, d);
                dense("encoder.frame2", d, d);
            }
            EncoderKind::TemporalConv => {
                dense("encoder.frame", p, d);
            }
        }
        for &task in self.task_mode.tasks() {
            let prefix = task.head_prefix();
            dense(&format!("{prefix}.hidden"), d, h);
            dense(&format!("{prefix}.out"), h, task.classes());
        }
        if self.encoder_kind == EncoderKind::TemporalConv {
            let fan_in = TEMPORAL_KERNEL * d;
            out.push(("encoder.temporal.kernel".into(), vec![TEMPORAL_KERNEL, d, d], fan_in));
            out.push(("encoder.temporal.bias".into(), vec![d], fan_in));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// Stable 64-bit FNV-1a, used to give each parameter its own RNG stream.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvfModel {
    config: ModelConfig,
    params: ParamStore,
}

/// Probabilities and ranked classes for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPrediction {
    pub task: Task,
    pub probabilities: Vec<f64>,
    /// `(class index, label, confidence)`, most confident first.
    pub top: Vec<(usize, String, f64)>,
}

impl TaskPrediction {
    fn from_logits(task: Task, logits: &[f64], k: usize) -> Self {
        let probs = softmax(&Tensor::from_vec(logits.to_vec())).into_data();
        let names = task.class_names();
        let top = top_k(&probs, k.min(probs.len()))
            .into_iter()
            .map(|i| (i, names[i].to_string(), probs[i]))
            .collect();
        Self {
            task,
            probabilities: probs,
            top,
        }
    }

    /// Index of the most probable class (lowest index on ties).
    pub fn argmax(&self) -> usize {
        self.top[0].0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub foul: Option<TaskPrediction>,
    pub offence: Option<TaskPrediction>,
}

impl Prediction {
    pub fn task(&self, task: Task) -> Option<&TaskPrediction> {
        match task {
            Task::Foul => self.foul.as_ref(),
            Task::Offence => self.offence.as_ref(),
        }
    }
}

impl MvfModel {
    /// Uniform `±1/√fan_in` initialisation; each parameter draws from its own
    /// stream keyed by `(seed, name)`, so adding a head never perturbs the rest.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        for (name, shape, fan_in) in config.parameter_shapes() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_id(&name));
            let bound = 1.0 / (fan_in as f64).sqrt();
            let numel = shape.iter().product();
            let data = (0..numel).map(|_| rng.random_range(-bound..bound)).collect();
            params.insert(name, Tensor::new(&shape, data)?)?;
        }
        Ok(Self { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let expected = config.parameter_shapes();
        if expected.len() != params.len() {
            return Err(Error::Config(format!(
                "config expects {} parameters, got {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, shape, _) in &expected {
            let t = params
                .get(name)
                .ok_or_else(|| Error::Config(format!("missing parameter {name}")))?;
            if t.shape() != shape.as_slice() {
                return Err(Error::shape("parameter", shape, t.shape()));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.numel()
    }

    /// Zeroes the output layer of every head, making all predictions uniform.
    pub fn zero_head_outputs(&mut self) {
        for (name, t) in self.params.iter_mut() {
            if name.starts_with("head_") && name.contains(".out.") {
                t.data_mut().fill(0.0);
            }
        }
    }

    pub fn check_clip(&self, clip: &Tensor) -> Result<()> {
        let c = &self.config;
        let want = [c.frames, c.height, c.width];
        if clip.shape() != want {
            return Err(Error::shape("clip", &want, clip.shape()));
        }
        Ok(())
    }

    /// Per-view feature vector `[D]`.
    pub fn encode_view(&self, tape: &mut Tape, bound: &Bound, clip: &Tensor) -> Result<Var> {
        self.check_clip(clip)?;
        let c = &self.config;
        let x = tape.constant(clip.reshape(&[c.frames, c.pixels()])?);
        let per_time = match c.encoder_kind {
            EncoderKind::FramePool => {
                let h = tape.linear(x, bound.get("encoder.frame1.weight")?, bound.get("encoder.frame1.bias")?)?;
                let h = tape.relu(h);
                tape.linear(h, bound.get("encoder.frame2.weight")?, bound.get("encoder.frame2.bias")?)?
            }
            EncoderKind::TemporalConv => {
                let h = tape.linear(x, bound.get("encoder.frame.weight")?, bound.get("encoder.frame.bias")?)?;
                let h = tape.relu(h);
                let h = tape.temporal_conv1d(
                    h,
                    bound.get("encoder.temporal.kernel")?,
                    bound.get("encoder.temporal.bias")?,
                )?;
                tape.relu(h)
            }
        };
        tape.reduce(per_time, 0, Reduction::Mean)
    }

    /// Encodes every view with the shared encoder and pools the features.
    pub fn represent(&self, tape: &mut Tape, bound: &Bound, clips: &[Tensor]) -> Result<Var> {
        if clips.is_empty() || clips.len() > MAX_VIEWS {
            return Err(Error::Domain(format!(
                "an action needs 1 to {MAX_VIEWS} views, got {}",
                clips.len()
            )));
        }
        let features = clips
            .iter()
            .map(|clip| self.encode_view(tape, bound, clip))
            .collect::<Result<Vec<_>>>()?;
        aggregate_vars(tape, &features, self.config.aggregation)
    }

    /// Logits `[B×N]` of one head for stacked representations `[B×D]`.
    pub fn head_logits(&self, tape: &mut Tape, bound: &Bound, task: Task, reps: Var) -> Result<Var> {
        if !self.config.task_mode.has(task) {
            return Err(Error::Contract(format!(
                "model in {:?} mode has no {task} head",
                self.config.task_mode
            )));
        }
        let prefix = task.head_prefix();
        let h = tape.linear(
            reps,
            bound.get(&format!("{prefix}.hidden.weight"))?,
            bound.get(&format!("{prefix}.hidden.bias"))?,
        )?;
        let h = tape.relu(h);
        tape.linear(
            h,
            bound.get(&format!("{prefix}.out.weight"))?,
            bound.get(&format!("{prefix}.out.bias"))?,
        )
    }

    /// Per-task softmax probabilities and top-2 classes for one action.
    pub fn predict(&self, clips: &[Tensor]) -> Result<Prediction> {
        self.predict_top_k(clips, 2)
    }

    pub fn predict_top_k(&self, clips: &[Tensor], k: usize) -> Result<Prediction> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let rep = self.represent(&mut tape, &bound, clips)?;
        let rep = tape.reshape(rep, &[1, self.config.feature_dim])?;
        let mut prediction = Prediction {
            foul: None,
            offence: None,
        };
        for &task in self.config.task_mode.tasks() {
            let logits = self.head_logits(&mut tape, &bound, task, rep)?;
            let p = TaskPrediction::from_logits(task, tape.data(logits), k);
            match task {
                Task::Foul => prediction.foul = Some(p),
                Task::Offence => prediction.offence = Some(p),
            }
        }
        Ok(prediction)
    }
}

fn aggregate_vars(tape: &mut Tape, features: &[Var], mode: Aggregation) -> Result<Var> {
    if features.is_empty() {
        return Err(Error::Domain("cannot aggregate an empty list of views".into()));
    }
    // pool in a canonical order (sorted by value) so float rounding in the
    // mean cannot depend on the order the views arrived in
    let mut ordered = features.to_vec();
    ordered.sort_by(|&a, &b| {
        let (a, b) = (tape.data(a), tape.data(b));
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let stacked = tape.stack(&ordered)?;
    tape.reduce(stacked, 0, mode.reduction())
}

/// Elementwise mean or max over per-view feature vectors.
pub fn aggregate(features: &[Tensor], mode: Aggregation) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = features.iter().map(|f| tape.constant(f.clone())).collect();
    let out = aggregate_vars(&mut tape, &vars, mode)?;
    Ok(tape.value(out).clone())
}

/// Builds a [`Bound`] from parameter names and tape variables in name order.
pub fn bind_vars(model: &MvfModel, vars: &[Var]) -> Bound {
    Bound::from_pairs(model.params().names().map(str::to_string).zip(vars.iter().copied()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: EncoderKind, aggregation: Aggregation, task_mode: TaskMode) -> ModelConfig {
        ModelConfig {
            encoder_kind: kind,
            feature_dim: 6,
            aggregation,
            task_mode,
            hidden_dim: 5,
            frames: 16,
            height: 3,
            width: 4,
        }
    }

    fn clip(seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..16 * 12).map(|_| rng.random::<f64>()).collect();
        Tensor::new(&[16, 3, 4], data).unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = small(EncoderKind::TemporalConv, Aggregation::Max, TaskMode::MultiTask);
        let a = MvfModel::init(cfg.clone(), 7).unwrap();
        let b = MvfModel::init(cfg.clone(), 7).unwrap();
        let c = MvfModel::init(cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn extra_head_leaves_shared_parameters_untouched() {
        let multi = MvfModel::init(small(EncoderKind::FramePool, Aggregation::Mean, TaskMode::MultiTask), 3).unwrap();
        let single = MvfModel::init(small(EncoderKind::FramePool, Aggregation::Mean, TaskMode::SingleFoul), 3).unwrap();
        for (name, t) in single.params().iter() {
            assert_eq!(multi.params().get(name).unwrap(), t, "{name}");
        }
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let m = MvfModel::init(small(EncoderKind::FramePool, Aggregation::Mean, TaskMode::MultiTask), 1).unwrap();
        let w = m.params().get("encoder.frame1.weight").unwrap();
        let bound = 1.0 / 12f64.sqrt();
        assert!(w.data().iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn zero_clip_zero_bias_gives_zero_feature() {
        for kind in [EncoderKind::FramePool, EncoderKind::TemporalConv] {
            let mut m = MvfModel::init(small(kind, Aggregation::Mean, TaskMode::SingleFoul), 2).unwrap();
            for (name, t) in m.params_mut().iter_mut() {
                if name.ends_with("bias") {
                    t.data_mut().fill(0.0);
                }
            }
            let mut tape = Tape::new();
            let bound = m.params().bind(&mut tape);
            let f = m.encode_view(&mut tape, &bound, &Tensor::zeros(&[16, 3, 4])).unwrap();
            assert!(tape.data(f).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn frame_pool_of_identical_frames_equals_single_frame_encoding() {
        let cfg = small(EncoderKind::FramePool, Aggregation::Mean, TaskMode::SingleFoul);
        let m = MvfModel::init(cfg.clone(), 4).unwrap();
        let frame: Vec<f64> = clip(1).data()[..12].to_vec();
        let repeated = Tensor::new(&[16, 3, 4], frame.repeat(16)).unwrap();
        let mut tape = Tape::new();
        let bound = m.params().bind(&mut tape);
        let v = m.encode_view(&mut tape, &bound, &repeated).unwrap();
        let f16 = tape.data(v).to_vec();

        let one = MvfModel::from_parts(ModelConfig { frames: 1, ..cfg }, m.params().clone()).unwrap();
        let mut tape = Tape::new();
        let bound = one.params().bind(&mut tape);
        let v = one.encode_view(&mut tape, &bound, &Tensor::new(&[1, 3, 4], frame).unwrap()).unwrap();
        let f1 = tape.data(v).to_vec();
        for (a, b) in f16.iter().zip(&f1) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = Tensor::from_vec(vec![1.0, -2.0, 3.0]);
        let b = Tensor::from_vec(vec![0.0, 5.0, -1.0]);
        assert_eq!(aggregate(&[a.clone(), b.clone()], Aggregation::Max).unwrap().data(), &[1.0, 5.0, 3.0]);
        assert_eq!(aggregate(std::slice::from_ref(&a), Aggregation::Mean).unwrap().data(), a.data());
        assert!(matches!(aggregate(&[], Aggregation::Mean), Err(Error::Domain(_))));
        for mode in [Aggregation::Mean, Aggregation::Max] {
            assert_eq!(
                aggregate(&[a.clone(), b.clone()], mode).unwrap(),
                aggregate(&[b.clone(), a.clone()], mode).unwrap()
            );
        }
    }

    #[test]
    fn zeroed_heads_predict_uniform() {
        let mut m = MvfModel::init(small(EncoderKind::TemporalConv, Aggregation::Max, TaskMode::MultiTask), 0).unwrap();
        m.zero_head_outputs();
        let p = m.predict(&[clip(1), clip(2)]).unwrap();
        assert!(p.foul.as_ref().unwrap().probabilities.iter().all(|&v| v == 0.125));
        assert!(p.offence.as_ref().unwrap().probabilities.iter().all(|&v| v == 0.25));
        assert_eq!(p.foul.unwrap().top[0].0, 0);
    }

    #[test]
    fn predict_rejects_bad_inputs() {
        let m = MvfModel::init(small(EncoderKind::FramePool, Aggregation::Max, TaskMode::SingleFoul), 0).unwrap();
        assert!(matches!(m.predict(&[]), Err(Error::Domain(_))));
        assert!(matches!(m.predict(&[Tensor::zeros(&[16, 4, 3])]), Err(Error::Shape { .. })));
        let five: Vec<Tensor> = (0..5).map(clip).collect();
        assert!(m.predict(&five).is_err());
    }

    #[test]
    fn single_mode_has_one_head() {
        let m = MvfModel::init(small(EncoderKind::FramePool, Aggregation::Max, TaskMode::SingleOffence), 0).unwrap();
        let p = m.predict(&[clip(0)]).unwrap();
        assert!(p.foul.is_none());
        assert_eq!(p.offence.unwrap().probabilities.len(), 4);
    }
}
