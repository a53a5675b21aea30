// A closed stdout (`vars predict | head`) just means nobody is reading.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use vars_core::dataset::{
    dataset_stats, load_manifest, resolve_manifest_path, split_actions, CameraKind, Manifest, Split, SplitFractions,
};
use vars_core::evaluation::{
    ablate_temporal, ablate_views, evaluate, AblationSpec, Evaluation, ViewSource, ViewSubset,
};
use vars_core::model::{load_checkpoint, save_checkpoint, ModelConfig, MvfModel, Task};
use vars_core::synthgen::{generate, observed_classes, uniform_classes, GenConfig};
use vars_core::tensor::Tensor;
use vars_core::training::{
    model_grad_check, prepare_action, prepare_split, train_prepared, LossWeights, PreparedAction, TrainConfig,
    CLIP_FRAMES,
};
use vars_service::{resolve_manifest, ServiceState};

use crate::{
    AblateTemporalArgs, AblateViewsArgs, ClassesArg, Command, EvaluateArgs, GenerateArgs, GradCheckArgs, PredictArgs,
    ServeArgs, SplitArgs, StatsArgs, TrainArgs, TrainFlags,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] vars_core::Error),
    #[error(transparent)]
    Serve(#[from] vars_service::StartError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Check(String),
}

impl CliError {
    /// Usage errors never get this far; clap exits with 1 before dispatch.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::AblateViews(a) => cmd_ablate_views(a),
        Command::AblateTemporal(a) => cmd_ablate_temporal(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Serve(a) => cmd_serve(a),
        Command::GradCheck(a) => cmd_grad_check(a),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            context: format!("creating {}", dir.display()),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        context: format!("writing {}", path.display()),
        source,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write(path, serde_json::to_string_pretty(value).expect("serialisable") + "\n")
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(vars_core::Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut config: GenConfig = match &a.config {
        Some(path) => read_config(path)?,
        None => GenConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { config.$field = v; })*
        };
    }
    set!(n_actions => n_actions, seed => seed, frames => frames_per_clip, height => height, width => width,
         live_p => live_informative_prob, noise => noise_std, replays => replay_count_distribution);
    if let Some(split) = a.split {
        config.split = Some(split);
    }
    match a.classes {
        Some(ClassesArg::Uniform) => config.class_distribution = uniform_classes(),
        Some(ClassesArg::Observed) => config.class_distribution = observed_classes(),
        None => {}
    }
    let manifest = generate(&config, &a.out)?;
    write_json(&a.out.join("gen_config.json"), &config)?;
    outln!(
        "generated {} actions ({} clips) in {}",
        manifest.actions.len(),
        manifest.actions.iter().map(|x| x.clips.len()).sum::<usize>(),
        a.out.display()
    );
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let stats = dataset_stats(&manifest)?;
    let table = stats.to_table();
    out!("{table}");
    if let Some(out) = a.out {
        write_json(&out.join("stats.json"), &stats)?;
        write(&out.join("tables/stats.txt"), table)?;
    }
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let [train, valid, test] = a.fractions;
    let fractions = SplitFractions::new(train, valid, test)?;
    let source = resolve_manifest_path(&a.manifest);
    let manifest = load_manifest(&source)?;
    let mut split = split_actions(&manifest, a.seed, fractions)?;
    let target = match &a.out {
        Some(out) => {
            let target = resolve_manifest_path(out);
            let target = if out.extension().is_none() && !out.is_file() { out.join("manifest.json") } else { target };
            // payloads stay where they are
            let payloads = fs::canonicalize(manifest.payload_dir()).map_err(|source| CliError::Io {
                context: format!("resolving {}", manifest.payload_dir().display()),
                source,
            })?;
            split.base_dir = payloads.display().to_string();
            target
        }
        None => source,
    };
    split.save(&target)?;
    let count = |s: Split| split.split(s).count();
    outln!(
        "train {}  valid {}  test {}  -> {}",
        count(Split::Train),
        count(Split::Valid),
        count(Split::Test),
        target.display()
    );
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainFile {
    model: Option<ModelConfig>,
    train: Option<TrainConfig>,
}

/// Flags over config file over defaults. Frame size always comes from the data.
fn resolve_train(flags: &TrainFlags, manifest: &Manifest) -> Result<(ModelConfig, TrainConfig)> {
    let file: TrainFile = match &flags.config {
        Some(path) => read_config(path)?,
        None => TrainFile::default(),
    };
    let mut model = file.model.unwrap_or_default();
    let mut train = file.train.unwrap_or_default();
    if let Some(v) = flags.task {
        model.task_mode = v.into();
    }
    if let Some(v) = flags.encoder {
        model.encoder_kind = v.into();
    }
    if let Some(v) = flags.aggregation {
        model.aggregation = v.into();
    }
    macro_rules! set {
        ($target:ident: $($flag:ident => $field:ident),*) => {
            $(if let Some(v) = flags.$flag { $target.$field = v; })*
        };
    }
    set!(model: feature_dim => feature_dim, hidden_dim => hidden_dim);
    set!(train: epochs => max_epochs, batch_size => batch_size, lr => lr0, lr_decay => lr_decay_per_epoch,
         alpha_foul => alpha_foul, alpha_off => alpha_off, seed => seed);
    if flags.class_weighting {
        train.class_weighting = true;
    }
    let clip = manifest
        .actions
        .first()
        .and_then(|x| x.clips.first())
        .ok_or_else(|| vars_core::Error::Domain("manifest has no actions".into()))?;
    model.frames = CLIP_FRAMES;
    model.height = clip.height as usize;
    model.width = clip.width as usize;
    model.validate()?;
    train.validate()?;
    Ok((model, train))
}

fn write_evaluation(out: &Path, eval: &Evaluation, label: &str) -> Result<()> {
    write(&out.join("metrics.json"), eval.report.to_json() + "\n")?;
    write(&out.join("tables/metrics.txt"), eval.report.to_table(label))?;
    for (task, cm) in &eval.confusion {
        write(&out.join(format!("confusion/{task}.csv")), cm.to_csv())?;
        write(&out.join(format!("tables/confusion_{task}.txt")), cm.to_table())?;
    }
    let predictions: Vec<_> = eval
        .predictions
        .iter()
        .map(|(id, p)| json!({"action_id": id, "prediction": p}))
        .collect();
    write_json(&out.join("predictions.json"), &predictions)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let (model_cfg, mut train_cfg) = resolve_train(&a.flags, &manifest)?;
    if let Some(fps) = a.fps {
        train_cfg.fps = fps;
    }
    train_cfg.validate()?;
    write_json(&a.out.join("config.json"), &json!({"model": model_cfg, "train": train_cfg}))?;
    let train_set = prepare_split(&manifest, Some(Split::Train), train_cfg.fps)?;
    let valid_set = prepare_split(&manifest, Some(Split::Valid), train_cfg.fps)?;
    let init = MvfModel::init(model_cfg, train_cfg.seed)?;
    let outcome = train_prepared(init, &train_set, &valid_set, &train_cfg, &mut |_, _| {})?;
    save_checkpoint(&outcome.model, &a.out.join("checkpoint.mvfm"))?;
    write(&a.out.join("history.json"), outcome.history.to_json() + "\n")?;
    outln!(
        "trained {} epochs on {} actions; kept epoch {}",
        outcome.history.epochs.len(),
        outcome.history.train_actions,
        outcome.history.best_epoch.map_or_else(|| "-".to_string(), |e| e.to_string())
    );
    if manifest.split(Split::Test).next().is_some() {
        let eval = evaluate(&outcome.model, &manifest, Split::Test, train_cfg.fps)?;
        write_evaluation(&a.out, &eval, "test")?;
        out!("{}", eval.report.to_table("test"));
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let split: Split = a.split.into();
    write_json(
        &a.out.join("config.json"),
        &json!({"checkpoint": a.checkpoint, "split": split, "fps": a.fps, "model": model.config()}),
    )?;
    let eval = evaluate(&model, &manifest, split, a.fps)?;
    write_evaluation(&a.out, &eval, &format!("{split:?}").to_lowercase())?;
    out!("{}", eval.report.to_table(&format!("{split:?}").to_lowercase()));
    Ok(())
}

fn cmd_ablate_views(a: AblateViewsArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let mut spec = AblationSpec::default();
    if let Some(subsets) = a.subsets {
        spec.subsets = subsets;
    }
    let split: Split = a.split.into();
    let subsets: Vec<String> = spec.subsets.iter().map(ToString::to_string).collect();
    write_json(
        &a.out.join("config.json"),
        &json!({"checkpoint": a.checkpoint, "split": split, "fps": a.fps, "subsets": subsets}),
    )?;
    let actions = prepare_split(&manifest, Some(split), a.fps)?;
    let ablation = ablate_views(&model, &actions, &spec)?;
    let table = ablation.to_table();
    write_json(&a.out.join("views.json"), &ablation)?;
    write(&a.out.join("tables/views.txt"), &table)?;
    outln!("{} actions with every view ({} skipped)", ablation.actions_used, ablation.actions_skipped);
    out!("{table}");
    Ok(())
}

fn cmd_ablate_temporal(a: AblateTemporalArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let (model_cfg, train_cfg) = resolve_train(&a.flags, &manifest)?;
    let split: Split = a.split.into();
    write_json(
        &a.out.join("config.json"),
        &json!({"model": model_cfg, "train": train_cfg, "fps": a.fps, "split": split}),
    )?;
    let ablation = ablate_temporal(&manifest, &model_cfg, &train_cfg, &a.fps, split)?;
    let table = ablation.to_table();
    let runs: Vec<_> = ablation
        .fps
        .iter()
        .zip(&ablation.runs)
        .map(|(fps, run)| json!({"fps": fps, "metrics": run.evaluation.report, "history": run.outcome.history}))
        .collect();
    write_json(
        &a.out.join("temporal.json"),
        &json!({"fps": ablation.fps, "context_seconds": ablation.context_seconds(), "runs": runs}),
    )?;
    for (fps, run) in ablation.fps.iter().zip(&ablation.runs) {
        save_checkpoint(&run.outcome.model, &a.out.join(format!("checkpoints/fps_{fps}.mvfm")))?;
    }
    write(&a.out.join("tables/temporal.txt"), &table)?;
    out!("{table}");
    Ok(())
}

fn roles(kinds: &[CameraKind]) -> Vec<String> {
    let mut replays = 0u8;
    kinds
        .iter()
        .map(|k| match k {
            CameraKind::Live => ViewSource::Live.to_string(),
            CameraKind::Replay => {
                replays += 1;
                ViewSource::Replay(replays).to_string()
            }
        })
        .collect()
}

fn select_views(action: &PreparedAction, subset: Option<&ViewSubset>) -> Result<Vec<usize>> {
    match subset {
        None => Ok((0..action.views.len()).collect()),
        Some(s) => s.select(action).ok_or_else(|| {
            CliError::Core(vars_core::Error::Domain(format!(
                "action {} lacks some of the views {s}",
                action.action_id
            )))
        }),
    }
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let model = load_checkpoint(&a.checkpoint)?;
    let action = manifest
        .action(&a.action)
        .ok_or_else(|| vars_core::Error::Domain(format!("unknown action {:?}", a.action)))?;
    let prepared = prepare_action(&manifest, action, a.fps)?;
    let picked = select_views(&prepared, a.views.as_ref())?;
    let clips: Vec<Tensor> = picked.iter().map(|&i| prepared.views[i].clone()).collect();
    let prediction = model.predict(&clips)?;
    let all_roles = roles(&prepared.camera_kinds);
    let mut tasks = serde_json::Map::new();
    for task in [Task::Foul, Task::Offence] {
        if let Some(p) = prediction.task(task) {
            let top: Vec<_> = p.top.iter().map(|(_, l, c)| json!({"label": l, "confidence": c})).collect();
            let truth = prepared.label(task).map(|i| task.class_names()[i]);
            tasks.insert(task.to_string(), json!({"top": top, "ground_truth": truth}));
        }
    }
    let out = json!({
        "action_id": a.action,
        "views": picked.iter().map(|&i| all_roles[i].clone()).collect::<Vec<_>>(),
        "tasks": tasks,
    });
    outln!("{}", serde_json::to_string_pretty(&out).expect("serialisable"));
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let manifest = resolve_manifest(a.manifest.as_deref())?;
    let state = ServiceState::open(&manifest, &a.checkpoint)?;
    let addr = std::net::SocketAddr::new(a.host, a.port);
    outln!("listening on http://{addr}");
    vars_service::serve_blocking(state, addr)?;
    Ok(())
}

fn cmd_grad_check(a: GradCheckArgs) -> Result<()> {
    let config = ModelConfig {
        encoder_kind: a.encoder.into(),
        feature_dim: 4,
        aggregation: a.aggregation.into(),
        task_mode: a.task.into(),
        hidden_dim: 5,
        frames: CLIP_FRAMES,
        height: 3,
        width: 4,
    };
    let model = MvfModel::init(config.clone(), a.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed ^ 0x9e37_79b9);
    let pixels = config.frames * config.height * config.width;
    let actions: Vec<PreparedAction> = (0..3)
        .map(|i| {
            let n = rng.random_range(2..=4);
            PreparedAction {
                action_id: format!("g{i}"),
                clip_ids: (0..n).map(|v| format!("c{v}")).collect(),
                camera_kinds: (0..n).map(|v| if v == 0 { CameraKind::Live } else { CameraKind::Replay }).collect(),
                views: (0..n)
                    .map(|_| {
                        let data = (0..pixels).map(|_| rng.random::<f64>()).collect();
                        Tensor::new(&[config.frames, config.height, config.width], data).expect("shape")
                    })
                    .collect(),
                foul: Some(rng.random_range(0..8)),
                offence: Some(rng.random_range(0..4)),
            }
        })
        .collect();
    let batch: Vec<&PreparedAction> = actions.iter().collect();
    let report = model_grad_check(&model, &batch, &LossWeights::plain(1.0, 1.0), a.step)?;
    outln!(
        "{} coordinates, max relative error {:.3e} (worst at input {}, index {})",
        report.coordinates, report.max_rel_error, report.worst.0, report.worst.1
    );
    if report.max_rel_error > a.tolerance {
        return Err(CliError::Check(format!(
            "max relative error {:.3e} exceeds {:.1e}",
            report.max_rel_error, a.tolerance
        )));
    }
    Ok(())
}
