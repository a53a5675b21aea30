use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::annotation::Annotation;
use super::payload;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;
pub const MIN_VIEWS: usize = 2;
pub const MAX_VIEWS: usize = 4;
pub const MIN_FRAMES: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CameraKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub clip_id: String,
    pub camera_kind: CameraKind,
    pub frame_count: u32,
    /// Nominal frame rate; 16 unless the source says otherwise.
    pub fps: f64,
    pub height: u32,
    pub width: u32,
    /// Alignment shift against the live timeline, in frames.
    pub offset_frames: i32,
    /// Playback factor; replays are commonly slowed (< 1).
    pub replay_speed: f64,
    pub contact_frame: Option<u32>,
    /// Relative to the manifest's payload directory.
    pub payload_path: String,
}

impl ClipMeta {
    fn check(&self) -> std::result::Result<(), String> {
        if self.frame_count < MIN_FRAMES {
            return Err(format!(
                "clip {} has {} frames, need at least {MIN_FRAMES}",
                self.clip_id, self.frame_count
            ));
        }
        if let Some(c) = self.contact_frame {
            if c >= self.frame_count {
                return Err(format!(
                    "clip {} contact frame {c} outside [0, {})",
                    self.clip_id, self.frame_count
                ));
            }
        }
        if !(self.replay_speed.is_finite() && self.replay_speed > 0.0) {
            return Err(format!(
                "clip {} replay speed must be positive, got {}",
                self.clip_id, self.replay_speed
            ));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(format!("clip {} fps must be positive, got {}", self.clip_id, self.fps));
        }
        if self.height == 0 || self.width == 0 {
            return Err(format!("clip {} has a zero spatial dimension", self.clip_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoulAction {
    pub action_id: String,
    /// Live clip first when there is one.
    pub clips: Vec<ClipMeta>,
    /// Absent until someone annotates the action.
    #[serde(default)]
    pub annotation: Option<Annotation>,
    pub split: Split,
    /// Bumped on every accepted annotation write.
    #[serde(default)]
    pub revision: u64,
}

impl FoulAction {
    /// Checks the per-action rules; the message names the broken rule.
    pub fn validate(&self) -> Result<()> {
        let fail = |rule: String| Error::Invariant {
            action_id: self.action_id.clone(),
            rule,
        };
        let n = self.clips.len();
        if n < MIN_VIEWS {
            return Err(fail(format!(
                "has {n} clip(s); every action needs at least {MIN_VIEWS} views"
            )));
        }
        if n > MAX_VIEWS {
            return Err(fail(format!("has {n} clips; at most {MAX_VIEWS} views are allowed")));
        }
        let mut ids = HashSet::new();
        for (i, clip) in self.clips.iter().enumerate() {
            if !ids.insert(clip.clip_id.as_str()) {
                return Err(fail(format!("duplicate clip id {}", clip.clip_id)));
            }
            if i > 0 && clip.camera_kind == CameraKind::Live {
                return Err(fail(format!("live clip {} must be the first clip", clip.clip_id)));
            }
            clip.check().map_err(fail)?;
        }
        if let Some(a) = &self.annotation {
            let violations = a.violations();
            if !violations.is_empty() {
                let joined: Vec<String> = violations.iter().map(ToString::to_string).collect();
                return Err(fail(format!("annotation rule broken: {}", joined.join("; "))));
            }
        }
        Ok(())
    }

    /// Position of a clip by id, falling back to a numeric index.
    pub fn find_clip(&self, key: &str) -> Option<usize> {
        self.clips
            .iter()
            .position(|c| c.clip_id == key)
            .or_else(|| key.parse::<usize>().ok().filter(|&i| i < self.clips.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    /// Payload directory, relative to the manifest file when not absolute.
    pub base_dir: String,
    pub actions: Vec<FoulAction>,
    #[serde(skip)]
    root: PathBuf,
}

impl Manifest {
    pub fn new(name: impl Into<String>, base_dir: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            name: name.into(),
            base_dir: base_dir.into(),
            actions: Vec::new(),
            root: root.into(),
        }
    }

    /// Directory holding the manifest file; payload paths resolve against it.
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn set_root(&mut self, root: impl Into<PathBuf>) {
        self.root = root.into();
    }

    pub fn payload_dir(&self) -> PathBuf {
        self.root.join(&self.base_dir)
    }

    pub fn payload_path(&self, clip: &ClipMeta) -> PathBuf {
        self.payload_dir().join(&clip.payload_path)
    }

    pub fn action(&self, action_id: &str) -> Option<&FoulAction> {
        self.actions.iter().find(|a| a.action_id == action_id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &FoulAction> {
        self.actions.iter().filter(move |a| a.split == split)
    }

    /// Structural validation without touching payload files.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported manifest format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mut seen = HashSet::new();
        for action in &self.actions {
            if !seen.insert(action.action_id.as_str()) {
                return Err(Error::Invariant {
                    action_id: action.action_id.clone(),
                    rule: "action ids must be unique".into(),
                });
            }
            action.validate()?;
        }
        Ok(())
    }

    /// [`Manifest::validate`] plus a check that every payload file exists.
    pub fn validate_payloads(&self) -> Result<()> {
        for action in &self.actions {
            for clip in &action.clips {
                let path = self.payload_path(clip);
                if !path.is_file() {
                    return Err(Error::Invariant {
                        action_id: action.action_id.clone(),
                        rule: format!("payload {} for clip {} not found", path.display(), clip.clip_id),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Writes the manifest atomically (temp file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("manifest.json");
        let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
        let mut file = fs::File::create(&tmp).map_err(|e| Error::io(format!("creating {}", tmp.display()), e))?;
        file.write_all(self.to_json().as_bytes())
            .and_then(|_| file.write_all(b"\n"))
            .and_then(|_| file.sync_all())
            .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming onto {}", path.display()), e))
    }
}

/// Accepts either the manifest file or the directory containing `manifest.json`.
pub fn resolve_manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    }
}

pub fn parse_manifest(path: &Path, text: &str) -> Result<Manifest> {
    let mut manifest: Manifest = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest.set_root(root);
    manifest.validate()?;
    Ok(manifest)
}

/// Reads and fully validates a manifest, including payload presence.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let path = resolve_manifest_path(path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest = parse_manifest(&path, &text)?;
    manifest.validate_payloads()?;
    Ok(manifest)
}

/// Reads a clip payload and checks its header against the metadata.
pub fn load_clip_frames(manifest: &Manifest, meta: &ClipMeta) -> Result<Tensor> {
    let path = manifest.payload_path(meta);
    let bytes = fs::read(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let header = payload::decode_header(&path, &bytes)?;
    if header.frame_count != meta.frame_count {
        return Err(Error::format(
            &path,
            format!(
                "header frame_count {} disagrees with manifest frame_count {}",
                header.frame_count, meta.frame_count
            ),
        ));
    }
    if (header.height, header.width) != (meta.height, meta.width) {
        return Err(Error::format(
            &path,
            format!(
                "header size {}x{} disagrees with manifest size {}x{}",
                header.height, header.width, meta.height, meta.width
            ),
        ));
    }
    payload::decode_frames(&path, &bytes)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::annotation::tests::sample;
    use crate::dataset::annotation::{Bodypart, UpperBodyPart};

    pub(crate) fn clip(id: &str, kind: CameraKind) -> ClipMeta {
        ClipMeta {
            clip_id: id.into(),
            camera_kind: kind,
            frame_count: 16,
            fps: 16.0,
            height: 2,
            width: 3,
            offset_frames: 0,
            replay_speed: 1.0,
            contact_frame: Some(8),
            payload_path: format!("{id}.mvfc"),
        }
    }

    pub(crate) fn action(id: &str) -> FoulAction {
        FoulAction {
            action_id: id.into(),
            clips: vec![
                clip(&format!("{id}_live"), CameraKind::Live),
                clip(&format!("{id}_r1"), CameraKind::Replay),
            ],
            annotation: Some(sample()),
            split: Split::Train,
            revision: 0,
        }
    }

    fn write_fixture(dir: &Path, actions: Vec<FoulAction>) -> PathBuf {
        let mut m = Manifest::new("fixture", "clips", dir);
        for a in &actions {
            for c in &a.clips {
                let frames = Tensor::filled(&[16, 2, 3], 0.5);
                payload::write_frames(&m.payload_dir().join(&c.payload_path), &frames).unwrap();
            }
        }
        m.actions = actions;
        let path = dir.join("manifest.json");
        fs::write(&path, m.to_json()).unwrap();
        path
    }

    #[test]
    fn loads_well_formed_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), vec![action("a0"), action("a1")]);
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.actions.len(), 2);
        // directory form resolves too
        assert_eq!(load_manifest(dir.path()).unwrap(), m);
    }

    #[test]
    fn single_view_action_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = action("a0");
        a.clips.truncate(1);
        let path = write_fixture(dir.path(), vec![a]);
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("a0") && err.contains("at least 2 views"), "{err}");
    }

    #[test]
    fn five_views_are_rejected() {
        let mut a = action("a0");
        for i in 0..3 {
            a.clips.push(clip(&format!("x{i}"), CameraKind::Replay));
        }
        assert!(a.validate().unwrap_err().to_string().contains("at most 4"));
    }

    #[test]
    fn conditional_property_violation_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = action("bad");
        a.annotation = Some(Annotation {
            bodypart: Bodypart::Under,
            upper_body_part: UpperBodyPart::Arm,
            ..sample()
        });
        let path = write_fixture(dir.path(), vec![a]);
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("bad") && err.contains("upper_body_part"), "{err}");
    }

    #[test]
    fn duplicate_ids_and_bad_clips() {
        let m = {
            let mut m = Manifest::new("x", ".", ".");
            m.actions = vec![action("a"), action("a")];
            m
        };
        assert!(m.validate().unwrap_err().to_string().contains("unique"));

        let mut a = action("c");
        a.clips[1].contact_frame = Some(16);
        assert!(a.validate().is_err());
        let mut a = action("s");
        a.clips[1].replay_speed = 0.0;
        assert!(a.validate().is_err());
        let mut a = action("f");
        a.clips[0].frame_count = 15;
        assert!(a.validate().is_err());
        let mut a = action("l");
        a.clips[1].camera_kind = CameraKind::Live;
        assert!(a.validate().is_err());
    }

    #[test]
    fn parse_error_reports_position() {
        let err = parse_manifest(Path::new("m.json"), "{\n  \"format_version\": 1,\n  oops\n}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_payload_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), vec![action("a0")]);
        fs::remove_file(dir.path().join("clips/a0_r1.mvfc")).unwrap();
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("a0_r1"), "{err}");
    }

    #[test]
    fn save_then_load_is_value_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), vec![action("a0"), action("a1")]);
        let m = load_manifest(&path).unwrap();
        let copy = dir.path().join("copy.json");
        m.save(&copy).unwrap();
        assert_eq!(load_manifest(&copy).unwrap(), m);
    }

    #[test]
    fn clip_header_must_match_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_fixture(dir.path(), vec![action("a0")]);
        let mut m = load_manifest(&path).unwrap();
        let frames = load_clip_frames(&m, &m.actions[0].clips[0]).unwrap();
        assert_eq!(frames.shape(), &[16, 2, 3]);

        m.actions[0].clips[0].frame_count = 20;
        let err = load_clip_frames(&m, &m.actions[0].clips[0]).unwrap_err().to_string();
        assert!(err.contains("16") && err.contains("20"), "{err}");
    }
}
