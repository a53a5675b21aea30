//! Dataset model: annotations, clip metadata, manifests, MVFC payloads,
//! task labels, statistics and splits.

pub mod annotation;
pub mod labels;
pub mod manifest;
pub mod payload;
pub mod split;
pub mod stats;

pub use annotation::{
    ActionClass, Annotation, Bodypart, Contact, FieldViolation, Handball, HandballOffence, Offence, PlayBall,
    Severity, TryToPlay, UpperBodyPart,
};
pub use labels::{map_task1, map_task2, ClassLabel, Task1Label, Task2Label};
pub use manifest::{
    load_clip_frames, load_manifest, parse_manifest, resolve_manifest_path, CameraKind, ClipMeta, FoulAction,
    Manifest, Split,
};
pub use split::{split_actions, SplitFractions};
pub use stats::{dataset_stats, StatsReport};
