//! HTTP API for browsing, annotating and querying a foul-action dataset.
//!
//! Routes:
//! - `GET  /api/actions?page=&page_size=`: action summaries ordered by id.
//! - `GET  /api/actions/{id}`: one action with its annotation and revision.
//! - `GET  /api/actions/{id}/clips/{clip}/frames/{k}`: frame `k` as binary P5.
//! - `PUT  /api/actions/{id}/annotation`: optimistic write of an [`AnnotationEnvelope`].
//! - `POST /api/actions/{id}/predict`: top-2 per task from a loaded checkpoint.
//! - `GET  /api/checkpoints`: names accepted by `predict`.
//!
//! Every error is a JSON body `{code, message, field?}`.

mod error;
mod pgm;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::{PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use vars_core::dataset::{
    load_manifest, map_task1, map_task2, resolve_manifest_path, Annotation, CameraKind, ClassLabel, FoulAction,
    Manifest, Split,
};
use vars_core::evaluation::{ViewSource, ViewSubset};
use vars_core::model::{load_checkpoint, MvfModel, Task, TaskPrediction};
use vars_core::training::{prepare_action, SOURCE_FPS};

pub use error::{ApiError, ErrorBody};
pub use pgm::{encode_p5, quantize};

/// Environment variable naming the dataset directory when `--manifest` is absent.
pub const DATA_DIR_ENV: &str = "MVF_DATA_DIR";
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("no manifest given: pass --manifest or set {DATA_DIR_ENV}")]
    NoManifest,
    #[error(transparent)]
    Load(#[from] vars_core::Error),
    #[error("duplicate checkpoint name {0:?}")]
    DuplicateCheckpoint(String),
    #[error("cannot serve on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

/// `--manifest` wins over the environment.
pub fn resolve_manifest(flag: Option<&FsPath>) -> Result<PathBuf, StartError> {
    flag.map(FsPath::to_path_buf)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .map(|p| resolve_manifest_path(&p))
        .ok_or(StartError::NoManifest)
}

pub struct ServiceState {
    manifest_path: PathBuf,
    manifest: RwLock<Manifest>,
    gates: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    checkpoints: BTreeMap<String, MvfModel>,
}

impl ServiceState {
    /// Loads and validates the manifest and every checkpoint. Checkpoints are
    /// named by file stem.
    pub fn open(manifest: &FsPath, checkpoints: &[PathBuf]) -> Result<Self, StartError> {
        let manifest_path = resolve_manifest_path(manifest);
        let loaded = load_manifest(&manifest_path)?;
        let mut models = BTreeMap::new();
        for path in checkpoints {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("checkpoint")
                .to_string();
            let model = load_checkpoint(path)?;
            if models.insert(name.clone(), model).is_some() {
                return Err(StartError::DuplicateCheckpoint(name));
            }
        }
        Ok(Self::from_parts(manifest_path, loaded, models))
    }

    pub fn from_parts(manifest_path: PathBuf, manifest: Manifest, checkpoints: BTreeMap<String, MvfModel>) -> Self {
        Self {
            manifest_path,
            manifest: RwLock::new(manifest),
            gates: Mutex::new(HashMap::new()),
            checkpoints,
        }
    }

    pub fn manifest_path(&self) -> &FsPath {
        &self.manifest_path
    }

    pub fn checkpoint_names(&self) -> Vec<String> {
        self.checkpoints.keys().cloned().collect()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Manifest> {
        self.manifest.read().unwrap_or_else(|p| p.into_inner())
    }

    fn action(&self, id: &str) -> ApiResult<FoulAction> {
        self.read()
            .action(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown action {id:?}")))
    }

    fn gate(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut gates = self.gates.lock().unwrap_or_else(|p| p.into_inner());
        gates.entry(id.to_string()).or_default().clone()
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/actions", get(list_actions))
        .route("/api/actions/{id}", get(get_action))
        .route("/api/actions/{id}/clips/{clip}/frames/{k}", get(get_frame))
        .route("/api/actions/{id}/annotation", put(put_annotation))
        .route("/api/actions/{id}/predict", post(predict))
        .route("/api/checkpoints", get(list_checkpoints))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(state)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(state: Arc<ServiceState>, addr: SocketAddr) -> Result<(), StartError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| StartError::Bind { addr, source })?;
    log::info!("serving {} on http://{addr}", state.manifest_path.display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| StartError::Bind { addr, source })
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(state: ServiceState, addr: SocketAddr) -> Result<(), StartError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|source| StartError::Bind { addr, source })?;
    runtime.block_on(serve(Arc::new(state), addr))
}

fn path_error(e: PathRejection) -> ApiError {
    ApiError::bad_request(e.body_text())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PageQuery {
    page: Option<usize>,
    page_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSummary {
    pub clip_id: String,
    pub camera_kind: CameraKind,
    pub frame_count: u32,
    pub height: u32,
    pub width: u32,
    pub offset_frames: i32,
    pub replay_speed: f64,
    pub contact_frame: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSummary {
    pub action_id: String,
    pub split: Split,
    pub annotated: bool,
    pub revision: u64,
    pub clips: Vec<ClipSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPage {
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub actions: Vec<ActionSummary>,
}

fn summarize(a: &FoulAction) -> ActionSummary {
    ActionSummary {
        action_id: a.action_id.clone(),
        split: a.split,
        annotated: a.annotation.is_some(),
        revision: a.revision,
        clips: a
            .clips
            .iter()
            .map(|c| ClipSummary {
                clip_id: c.clip_id.clone(),
                camera_kind: c.camera_kind,
                frame_count: c.frame_count,
                height: c.height,
                width: c.width,
                offset_frames: c.offset_frames,
                replay_speed: c.replay_speed,
                contact_frame: c.contact_frame,
            })
            .collect(),
    }
}

async fn list_actions(
    State(state): State<Arc<ServiceState>>,
    query: std::result::Result<Query<PageQuery>, QueryRejection>,
) -> ApiResult<Json<ActionPage>> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let page = q.page.unwrap_or(0);
    let page_size = q.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    if !(1..=MAX_PAGE_SIZE).contains(&page_size) {
        return Err(ApiError::bad_request(format!("page_size must be in 1..={MAX_PAGE_SIZE}")).with_field("page_size"));
    }
    let manifest = state.read();
    let mut ids: Vec<&FoulAction> = manifest.actions.iter().collect();
    ids.sort_by(|a, b| a.action_id.cmp(&b.action_id));
    let actions = ids
        .iter()
        .skip(page.saturating_mul(page_size))
        .take(page_size)
        .map(|a| summarize(a))
        .collect();
    Ok(Json(ActionPage {
        page,
        page_size,
        total: ids.len(),
        actions,
    }))
}

async fn get_action(
    State(state): State<Arc<ServiceState>>,
    path: std::result::Result<Path<String>, PathRejection>,
) -> ApiResult<Json<FoulAction>> {
    let Path(id) = path.map_err(path_error)?;
    state.action(&id).map(Json)
}

async fn get_frame(
    State(state): State<Arc<ServiceState>>,
    path: std::result::Result<Path<(String, String, String)>, PathRejection>,
) -> ApiResult<Response> {
    let Path((id, clip_key, k)) = path.map_err(path_error)?;
    let action = state.action(&id)?;
    let clip = action
        .find_clip(&clip_key)
        .map(|i| action.clips[i].clone())
        .ok_or_else(|| ApiError::not_found(format!("action {id:?} has no clip {clip_key:?}")))?;
    let k: u64 = k
        .parse()
        .map_err(|_| ApiError::out_of_range(format!("frame index {k:?} is not a non-negative integer")))?;
    if k >= u64::from(clip.frame_count) {
        return Err(ApiError::out_of_range(format!(
            "frame {k} outside [0, {}) for clip {}",
            clip.frame_count, clip.clip_id
        )));
    }
    let frames = {
        let manifest = state.read();
        vars_core::dataset::load_clip_frames(&manifest, &clip)?
    };
    let (h, w) = (clip.height as usize, clip.width as usize);
    let start = k as usize * h * w;
    let body = encode_p5(&frames.data()[start..start + h * w], h, w);
    Ok(([(header::CONTENT_TYPE, "image/x-portable-graymap")], body).into_response())
}

/// Per-clip alignment carried with an annotation write.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipAlignment {
    pub clip_id: String,
    pub offset_frames: i32,
    pub replay_speed: f64,
    pub contact_frame: Option<u32>,
}

/// Body of `PUT /api/actions/{id}/annotation`. `revision` must equal the
/// stored revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationEnvelope {
    #[serde(default)]
    pub action_id: Option<String>,
    pub annotation: Annotation,
    #[serde(default)]
    pub alignment: Vec<ClipAlignment>,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRevision {
    pub action_id: String,
    pub revision: u64,
}

fn apply_envelope(action: &FoulAction, env: &AnnotationEnvelope) -> ApiResult<FoulAction> {
    if let Some(body_id) = &env.action_id {
        if *body_id != action.action_id {
            return Err(ApiError::invalid(format!(
                "body action_id {body_id:?} does not match the URL ({:?})",
                action.action_id
            ))
            .with_field("action_id"));
        }
    }
    let violations = env.annotation.violations();
    if let Some(first) = violations.first() {
        let all: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(ApiError::invalid(all.join("; ")).with_field(format!("annotation.{}", first.field)));
    }
    let mut next = action.clone();
    for (i, a) in env.alignment.iter().enumerate() {
        let clip = next
            .clips
            .iter_mut()
            .find(|c| c.clip_id == a.clip_id)
            .ok_or_else(|| {
                ApiError::invalid(format!("unknown clip {:?}", a.clip_id)).with_field(format!("alignment[{i}].clip_id"))
            })?;
        clip.offset_frames = a.offset_frames;
        clip.replay_speed = a.replay_speed;
        clip.contact_frame = a.contact_frame;
    }
    next.annotation = Some(env.annotation.clone());
    if let Err(e) = next.validate() {
        let field = match env.alignment.is_empty() {
            true => "annotation",
            false => "alignment",
        };
        return Err(ApiError::invalid(e.to_string()).with_field(field));
    }
    Ok(next)
}

async fn put_annotation(
    State(state): State<Arc<ServiceState>>,
    path: std::result::Result<Path<String>, PathRejection>,
    body: Bytes,
) -> ApiResult<Json<StoredRevision>> {
    let Path(id) = path.map_err(path_error)?;
    state.action(&id)?;
    let envelope: AnnotationEnvelope = serde_json::from_slice(&body)?;

    let gate = state.gate(&id);
    let _held = gate.lock().await;
    let current = state.action(&id)?;
    let mut next = apply_envelope(&current, &envelope)?;
    if envelope.revision != current.revision {
        return Err(ApiError::conflict(format!(
            "revision {} is stale; action {id} is at revision {}",
            envelope.revision, current.revision
        ))
        .with_field("revision"));
    }
    next.revision = current.revision + 1;

    let mut manifest = state.manifest.write().unwrap_or_else(|p| p.into_inner());
    let mut updated = manifest.clone();
    let slot = updated
        .actions
        .iter_mut()
        .find(|a| a.action_id == id)
        .ok_or_else(|| ApiError::not_found(format!("unknown action {id:?}")))?;
    *slot = next;
    updated.save(&state.manifest_path)?;
    *manifest = updated;
    log::info!("action {id}: stored revision {}", current.revision + 1);
    Ok(Json(StoredRevision {
        action_id: id,
        revision: current.revision + 1,
    }))
}

/// Body of `POST /api/actions/{id}/predict`. `checkpoint` may be omitted
/// when exactly one is loaded; `views` defaults to every clip.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    #[serde(default)]
    pub checkpoint: Option<String>,
    #[serde(default)]
    pub views: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfidence {
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAnswer {
    pub top: Vec<LabelConfidence>,
    /// Mapped label of the stored annotation, when there is one.
    pub ground_truth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub action_id: String,
    pub checkpoint: String,
    /// The view subset actually used, e.g. `["L", "R1"]`.
    pub views: Vec<String>,
    pub clip_ids: Vec<String>,
    pub foul: Option<TaskAnswer>,
    pub offence: Option<TaskAnswer>,
}

fn roles(kinds: &[CameraKind]) -> Vec<ViewSource> {
    let mut replays = 0u8;
    kinds
        .iter()
        .map(|k| match k {
            CameraKind::Live => ViewSource::Live,
            CameraKind::Replay => {
                replays += 1;
                ViewSource::Replay(replays)
            }
        })
        .collect()
}

fn answer(p: Option<&TaskPrediction>, truth: Option<String>) -> Option<TaskAnswer> {
    p.map(|p| TaskAnswer {
        top: p
            .top
            .iter()
            .map(|(_, label, confidence)| LabelConfidence {
                label: label.clone(),
                confidence: *confidence,
            })
            .collect(),
        ground_truth: truth,
    })
}

async fn predict(
    State(state): State<Arc<ServiceState>>,
    path: std::result::Result<Path<String>, PathRejection>,
    body: Bytes,
) -> ApiResult<Json<PredictResponse>> {
    let Path(id) = path.map_err(path_error)?;
    let action = state.action(&id)?;
    let request: PredictRequest = if body.iter().all(u8::is_ascii_whitespace) {
        PredictRequest::default()
    } else {
        serde_json::from_slice(&body)?
    };
    let name = match &request.checkpoint {
        Some(name) => name.clone(),
        None if state.checkpoints.len() == 1 => state.checkpoints.keys().next().cloned().unwrap_or_default(),
        None => {
            return Err(ApiError::invalid(format!(
                "name a checkpoint; loaded: {:?}",
                state.checkpoint_names()
            ))
            .with_field("checkpoint"))
        }
    };
    let model = state
        .checkpoints
        .get(&name)
        .ok_or_else(|| ApiError::invalid(format!("unknown checkpoint {name:?}")).with_field("checkpoint"))?;

    let prepared = {
        let manifest = state.read();
        prepare_action(&manifest, &action, SOURCE_FPS)?
    };
    let picked: Vec<usize> = match &request.views {
        None => (0..prepared.views.len()).collect(),
        Some(views) => {
            let subset = ViewSubset::new(
                views
                    .iter()
                    .map(|v| v.parse::<ViewSource>())
                    .collect::<vars_core::Result<Vec<_>>>()
                    .map_err(|e| ApiError::invalid(e.to_string()).with_field("views"))?,
            )
            .map_err(|e| ApiError::invalid(e.to_string()).with_field("views"))?;
            subset.select(&prepared).ok_or_else(|| {
                ApiError::invalid(format!("action {id} lacks some of the views {subset}")).with_field("views")
            })?
        }
    };
    let all_roles = roles(&prepared.camera_kinds);
    let clips: Vec<_> = picked.iter().map(|&i| prepared.views[i].clone()).collect();
    let prediction = model
        .predict(&clips)
        .map_err(|e| ApiError::invalid(format!("checkpoint {name:?} cannot score this action: {e}")))?;
    let truth = |task: Task| -> Option<String> {
        let a = action.annotation.as_ref()?;
        match task {
            Task::Foul => map_task1(a).map(|l| l.name().to_string()),
            Task::Offence => map_task2(a).map(|l| l.name().to_string()),
        }
    };
    Ok(Json(PredictResponse {
        action_id: id,
        checkpoint: name,
        views: picked.iter().map(|&i| all_roles[i].to_string()).collect(),
        clip_ids: picked.iter().map(|&i| prepared.clip_ids[i].clone()).collect(),
        foul: answer(prediction.task(Task::Foul), truth(Task::Foul)),
        offence: answer(prediction.task(Task::Offence), truth(Task::Offence)),
    }))
}

async fn list_checkpoints(State(state): State<Arc<ServiceState>>) -> impl IntoResponse {
    (StatusCode::OK, Json(state.checkpoint_names()))
}
