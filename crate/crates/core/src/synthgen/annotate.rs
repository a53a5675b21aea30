use rand::Rng;

use crate::dataset::{
    ActionClass, Annotation, Bodypart, Contact, Handball, HandballOffence, Offence, PlayBall, Severity, Task1Label,
    TryToPlay, UpperBodyPart,
};

/// Referee success rate per foul class (share of called fouls that were
/// real offences). Dives have no published rate; every generated dive is an
/// offence.
pub fn success_rate(class: Task1Label) -> f64 {
    match class {
        Task1Label::StandingTackling => 0.94,
        Task1Label::Tackling => 0.87,
        Task1Label::HighLeg => 0.87,
        Task1Label::Holding => 0.90,
        Task1Label::Pushing => 0.84,
        Task1Label::Elbowing => 0.93,
        Task1Label::Challenge => 0.75,
        Task1Label::Dive => 1.0,
    }
}

/// No card / yellow / red shares per foul class, normalised to sum to 1.
pub fn card_distribution(class: Task1Label) -> [f64; 3] {
    let raw = match class {
        Task1Label::StandingTackling => [0.79, 0.18, 0.02],
        Task1Label::Tackling => [0.37, 0.58, 0.04],
        Task1Label::HighLeg => [0.31, 0.63, 0.06],
        Task1Label::Holding => [0.60, 0.40, 0.00],
        Task1Label::Pushing => [0.99, 0.01, 0.00],
        Task1Label::Elbowing => [0.43, 0.53, 0.03],
        Task1Label::Challenge => [0.94, 0.05, 0.01],
        Task1Label::Dive => [0.00, 1.00, 0.00],
    };
    let total: f64 = raw.iter().sum();
    raw.map(|p| p / total)
}

/// Fills all ten properties consistently with the foul class. Offence and
/// severity are sampled from the per-class rates above.
pub fn annotate_synthetic<R: Rng + ?Sized>(class: Task1Label, rng: &mut R) -> Annotation {
    let offence = if rng.random_bool(success_rate(class)) {
        Offence::Offence
    } else {
        Offence::NoOffence
    };
    let cards = card_distribution(class);
    let u: f64 = rng.random();
    let severity = if u < cards[0] {
        Severity::NO_CARD
    } else if u < cards[0] + cards[1] {
        Severity::YELLOW
    } else {
        Severity::RED
    };

    let (bodypart, upper_body_part) = match class {
        Task1Label::Challenge => (Bodypart::Upper, UpperBodyPart::Shoulder),
        Task1Label::Pushing | Task1Label::Holding | Task1Label::Elbowing => (Bodypart::Upper, UpperBodyPart::Arm),
        Task1Label::StandingTackling | Task1Label::Tackling | Task1Label::HighLeg | Task1Label::Dive => {
            (Bodypart::Under, UpperBodyPart::NotApplicable)
        }
    };
    let tries = matches!(
        class,
        Task1Label::StandingTackling | Task1Label::Tackling | Task1Label::HighLeg | Task1Label::Challenge
    );
    let play_ball = if tries && rng.random_bool(0.3) {
        PlayBall::Yes
    } else {
        PlayBall::No
    };

    Annotation {
        offence,
        action_class: ActionClass::from(class),
        severity,
        contact: if class == Task1Label::Dive {
            Contact::Without
        } else {
            Contact::With
        },
        bodypart,
        upper_body_part,
        try_to_play: if tries { TryToPlay::Yes } else { TryToPlay::No },
        play_ball,
        handball: Handball::NoHandball,
        handball_offence: HandballOffence::NotApplicable,
    }
}

impl From<Task1Label> for ActionClass {
    fn from(label: Task1Label) -> Self {
        label.to_action_class()
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dataset::{map_task1, map_task2, ClassLabel, Task2Label};

    #[test]
    fn challenge_uses_the_shoulder() {
        let a = annotate_synthetic(Task1Label::Challenge, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!((a.bodypart, a.upper_body_part), (Bodypart::Upper, UpperBodyPart::Shoulder));
    }

    #[test]
    fn tackling_is_under_body() {
        let a = annotate_synthetic(Task1Label::Tackling, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!((a.bodypart, a.upper_body_part), (Bodypart::Under, UpperBodyPart::NotApplicable));
    }

    #[test]
    fn every_class_yields_valid_mappable_annotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &class in Task1Label::ALL {
            for _ in 0..50 {
                let a = annotate_synthetic(class, &mut rng);
                assert!(a.is_valid(), "{a:?}");
                assert_eq!(map_task1(&a), Some(class));
                assert!(map_task2(&a).is_some());
            }
        }
    }

    #[test]
    fn pushing_is_almost_never_carded() {
        assert!((card_distribution(Task1Label::Pushing)[0] - 0.99).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let offences: Vec<Annotation> = (0..n)
            .map(|_| annotate_synthetic(Task1Label::Pushing, &mut rng))
            .filter(|a| a.offence == Offence::Offence)
            .collect();
        let no_card = offences
            .iter()
            .filter(|a| map_task2(a) == Some(Task2Label::OffenceNoCard))
            .count();
        let share = no_card as f64 / offences.len() as f64;
        assert!((share - 0.99).abs() < 0.01, "{share}");
    }
}
