use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Frame rate the clips are recorded at; a target of this rate means stride 1.
pub const SOURCE_FPS: f64 = 16.0;
pub const CLIP_FRAMES: usize = 16;
/// The temporal-ablation settings.
pub const ABLATION_FPS: [u32; 4] = [5, 8, 12, 16];

/// Seconds of context covered by 16 frames at `fps`.
pub fn context_seconds(fps: f64) -> f64 {
    CLIP_FRAMES as f64 / fps
}

/// `frames` source indices centred on the contact frame, spaced
/// `SOURCE_FPS / fps` apart and clamped into the clip. Half come before the
/// contact. A missing contact falls back to the clip midpoint.
pub fn resample_indices(frame_count: usize, contact_frame: Option<usize>, fps: f64, frames: usize) -> Result<Vec<usize>> {
    if frame_count == 0 {
        return Err(Error::Domain("cannot resample an empty clip".into()));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Domain(format!("target fps must be positive, got {fps}")));
    }
    let contact = contact_frame.unwrap_or(frame_count / 2) as f64;
    let stride = SOURCE_FPS / fps;
    let half = (frames / 2) as f64;
    let last = (frame_count - 1) as f64;
    Ok((0..frames)
        .map(|k| (contact + (k as f64 - half) * stride).round().clamp(0.0, last) as usize)
        .collect())
}

/// Picks 16 frames from `clip[F×H×W]` around the contact frame.
pub fn resample_frames(clip: &Tensor, contact_frame: Option<usize>, fps: f64) -> Result<Tensor> {
    let shape = clip.shape();
    if shape.len() != 3 {
        return Err(Error::shape("resample_frames", shape, &[0, 0, 0]));
    }
    let plane = shape[1] * shape[2];
    let indices = resample_indices(shape[0], contact_frame, fps, CLIP_FRAMES)?;
    let mut data = Vec::with_capacity(CLIP_FRAMES * plane);
    for i in indices {
        data.extend_from_slice(&clip.data()[i * plane..(i + 1) * plane]);
    }
    Tensor::new(&[CLIP_FRAMES, shape[1], shape[2]], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stride_one_at_source_rate() {
        let idx = resample_indices(52, Some(26), 16.0, 16).unwrap();
        assert_eq!(idx, (18..34).collect::<Vec<_>>());
    }

    #[test]
    fn stride_two_at_eight_fps() {
        let idx = resample_indices(52, Some(26), 8.0, 16).unwrap();
        assert_eq!(idx, (10..=40).step_by(2).collect::<Vec<_>>());
    }

    #[test]
    fn clamps_near_the_start() {
        let idx = resample_indices(52, Some(4), 5.0, 16).unwrap();
        assert_eq!(idx.len(), 16);
        assert_eq!(&idx[..3], &[0, 0, 0]);
        assert!(idx.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn missing_contact_uses_midpoint() {
        assert_eq!(
            resample_indices(40, None, 16.0, 16).unwrap(),
            resample_indices(40, Some(20), 16.0, 16).unwrap()
        );
    }

    #[test]
    fn bad_rates_are_rejected() {
        assert!(resample_indices(52, Some(4), 0.0, 16).is_err());
        assert!(resample_indices(52, Some(4), f64::NAN, 16).is_err());
        assert!(resample_indices(0, None, 16.0, 16).is_err());
    }

    #[test]
    fn frames_follow_the_indices() {
        let clip = Tensor::new(&[20, 1, 2], (0..40).map(f64::from).collect()).unwrap();
        let out = resample_frames(&clip, Some(10), 16.0).unwrap();
        assert_eq!(out.shape(), &[16, 1, 2]);
        assert_eq!(&out.data()[..2], &[4.0, 5.0]);
    }

    #[test]
    fn context_row() {
        let ctx: Vec<f64> = ABLATION_FPS.iter().map(|&f| context_seconds(f as f64)).collect();
        assert_eq!(ctx[0], 3.2);
        assert_eq!(ctx[1], 2.0);
        assert!((ctx[2] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(ctx[3], 1.0);
    }
}
