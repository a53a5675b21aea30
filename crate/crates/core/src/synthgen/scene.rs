//! Moving-blob scenes. Each foul class has a fixed motion signature: the
//! heading and speed of the attacking blob (plus a trailing limb) and how the
//! second blob moves.
//! Severity shows up as a ring of light around the contact point.

use crate::dataset::{Task1Label, Task2Label};

/// Per-class motion: attacker heading (row, col), attacker speed in px/s,
/// victim velocity in px/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signature {
    pub heading: (f64, f64),
    pub speed: f64,
    pub victim_velocity: (f64, f64),
    /// Dives have no attacker at the contact point.
    pub attacker_present: bool,
}

pub fn signature(class: Task1Label) -> Signature {
    // each class approaches from its own compass direction
    const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let s = |heading, speed, victim_velocity| Signature {
        heading,
        speed,
        victim_velocity,
        attacker_present: true,
    };
    match class {
        Task1Label::StandingTackling => s((0.0, 1.0), 16.0, (0.0, 0.0)),
        Task1Label::Tackling => s((D, D), 28.0, (0.0, 0.0)),
        Task1Label::HighLeg => s((1.0, 0.0), 20.0, (0.0, 0.0)),
        Task1Label::Pushing => s((0.0, -1.0), 16.0, (0.0, -12.0)),
        Task1Label::Holding => s((-1.0, 0.0), 16.0, (-10.0, 0.0)),
        Task1Label::Elbowing => s((-D, -D), 24.0, (0.0, 0.0)),
        Task1Label::Challenge => s((D, -D), 20.0, (8.0, -8.0)),
        Task1Label::Dive => Signature {
            heading: (0.0, 0.0),
            speed: 0.0,
            victim_velocity: (-12.0, 12.0),
            attacker_present: false,
        },
    }
}

/// Brightness of the contact ring for each offence outcome.
pub fn collision_amplitude(outcome: Task2Label) -> f64 {
    match outcome {
        Task2Label::NoOffence => 0.0,
        Task2Label::OffenceNoCard => 0.35,
        Task2Label::OffenceYellow => 0.65,
        Task2Label::OffenceRed => 1.0,
    }
}

const BACKGROUND: f64 = 0.1;
const BLOB_PEAK: f64 = 0.9;
const BLOB_SIGMA: f64 = 3.0;
/// Half-distance between the two blobs at the moment of contact.
const CONTACT_GAP: f64 = 2.0;
const LIMB_REACH: f64 = 4.0;
const RING_RADIUS: f64 = 5.0;
const RING_WIDTH: f64 = 1.0;
/// Seconds either side of contact during which the ring is lit.
const RING_WINDOW: f64 = 0.2;

/// Everything needed to draw one action at any instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    pub class: Task1Label,
    pub outcome: Task2Label,
    /// Contact point (row, col) in pixels.
    pub contact: (f64, f64),
    pub height: usize,
    pub width: usize,
}

impl Scene {
    fn blob_positions(&self, t: f64) -> [Option<(f64, f64)>; 3] {
        let sig = signature(self.class);
        let (pr, pc) = self.contact;
        let (hr, hc) = sig.heading;
        let approach = sig.speed * (-t).max(0.0);
        let attacker = sig.attacker_present.then_some({
            (
                pr - hr * (CONTACT_GAP + approach),
                pc - hc * (CONTACT_GAP + approach),
            )
        });
        let (vr, vc) = sig.victim_velocity;
        let victim_start = if sig.attacker_present {
            (pr + hr * CONTACT_GAP, pc + hc * CONTACT_GAP)
        } else {
            (pr, pc)
        };
        let victim = (victim_start.0 + vr * t, victim_start.1 + vc * t);
        // a trailing limb shows the heading even in a single frame
        let limb = attacker.map(|(ar, ac)| (ar - hr * LIMB_REACH, ac - hc * LIMB_REACH));
        [attacker, limb, Some(victim)]
    }

    /// Renders the frame at `t` seconds relative to contact into `out`
    /// (row-major `height × width`), before noise.
    pub fn render(&self, t: f64, informative: bool, out: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        debug_assert_eq!(out.len(), h * w);
        for r in 0..h {
            // faint vertical gradient stands in for the pitch
            let base = BACKGROUND + 0.05 * r as f64 / h as f64;
            out[r * w..(r + 1) * w].fill(base);
        }
        if !informative {
            return;
        }
        let two_sigma_sq = 2.0 * BLOB_SIGMA * BLOB_SIGMA;
        for (br, bc) in self.blob_positions(t).into_iter().flatten() {
            let r0 = (br - 4.0 * BLOB_SIGMA).floor().max(0.0) as usize;
            let r1 = ((br + 4.0 * BLOB_SIGMA).ceil().max(0.0) as usize).min(h);
            let c0 = (bc - 4.0 * BLOB_SIGMA).floor().max(0.0) as usize;
            let c1 = ((bc + 4.0 * BLOB_SIGMA).ceil().max(0.0) as usize).min(w);
            for r in r0..r1 {
                for c in c0..c1 {
                    let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                    out[r * w + c] += BLOB_PEAK * (-d2 / two_sigma_sq).exp();
                }
            }
        }
        let amplitude = collision_amplitude(self.outcome);
        if amplitude > 0.0 && t.abs() <= RING_WINDOW {
            let (pr, pc) = self.contact;
            for r in 0..h {
                for c in 0..w {
                    let d = ((r as f64 - pr).powi(2) + (c as f64 - pc).powi(2)).sqrt();
                    let x = (d - RING_RADIUS) / RING_WIDTH;
                    out[r * w + c] += 0.5 * amplitude * (-0.5 * x * x).exp();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ClassLabel;

    fn classes() -> &'static [Task1Label] {
        Task1Label::ALL
    }

    fn scene(class: Task1Label, outcome: Task2Label) -> Scene {
        Scene {
            class,
            outcome,
            contact: (12.0, 20.0),
            height: 24,
            width: 40,
        }
    }

    #[test]
    fn signatures_are_distinct() {
        for (i, &a) in classes().iter().enumerate() {
            for &b in &classes()[i + 1..] {
                assert_ne!(signature(a), signature(b), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn uninformative_frames_are_background_only() {
        let mut a = vec![0.0; 24 * 40];
        let mut b = vec![0.0; 24 * 40];
        scene(Task1Label::Tackling, Task2Label::OffenceRed).render(0.0, false, &mut a);
        scene(Task1Label::Dive, Task2Label::NoOffence).render(-1.0, false, &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn ring_brightness_tracks_severity() {
        let energy = |outcome| {
            let mut f = vec![0.0; 24 * 40];
            scene(Task1Label::Holding, outcome).render(0.0, true, &mut f);
            f.iter().sum::<f64>()
        };
        let levels: Vec<f64> = Task2Label::ALL.iter().map(|&o| energy(o)).collect();
        assert!(levels.windows(2).all(|w| w[0] < w[1]), "{levels:?}");
    }
}
