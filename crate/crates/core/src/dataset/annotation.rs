//! The ten referee-annotated properties of a foul action.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident { $($variant:ident),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => stringify!($variant)),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

vocabulary!(Offence { Offence, NoOffence, Between });
vocabulary!(
    /// Foul type as annotated; `DontKnow` covers anything unclassifiable.
    ActionClass {
        StandingTackling,
        Tackling,
        HighLeg,
        Pushing,
        Holding,
        Elbowing,
        Challenge,
        Dive,
        DontKnow,
    }
);
vocabulary!(Contact { With, Without });
vocabulary!(Bodypart { Upper, Under });
vocabulary!(UpperBodyPart { Shoulder, Arm, NotApplicable });
vocabulary!(TryToPlay { Yes, No });
vocabulary!(PlayBall { Yes, No, Maybe });
vocabulary!(Handball { Handball, NoHandball });
vocabulary!(HandballOffence { Yes, No, NotApplicable });

/// Severity on the 1–5 scale: 1 careless (no card), 2 borderline no/yellow,
/// 3 reckless (yellow), 4 borderline yellow/red, 5 violent (red).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Severity(pub u8);

impl Severity {
    pub const NO_CARD: Severity = Severity(1);
    pub const YELLOW: Severity = Severity(3);
    pub const RED: Severity = Severity(5);

    pub fn is_valid(self) -> bool {
        (1..=5).contains(&self.0)
    }

    pub fn is_borderline(self) -> bool {
        self.0 == 2 || self.0 == 4
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub offence: Offence,
    pub action_class: ActionClass,
    pub severity: Severity,
    pub contact: Contact,
    pub bodypart: Bodypart,
    pub upper_body_part: UpperBodyPart,
    pub try_to_play: TryToPlay,
    pub play_ball: PlayBall,
    pub handball: Handball,
    pub handball_offence: HandballOffence,
}

/// One broken annotation rule, attributed to the field that breaks it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldViolation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl Annotation {
    /// Every rule this annotation breaks; empty when valid.
    pub fn violations(&self) -> Vec<FieldViolation> {
        let mut out = Vec::new();
        let mut push = |field: &str, message: String| {
            out.push(FieldViolation {
                field: field.to_string(),
                message,
            })
        };
        if !self.severity.is_valid() {
            push("severity", format!("severity must be in 1..=5, got {}", self.severity.0));
        }
        match (self.bodypart, self.upper_body_part) {
            (Bodypart::Upper, UpperBodyPart::NotApplicable) => push(
                "upper_body_part",
                "upper-body part must be Shoulder or Arm when bodypart is Upper".into(),
            ),
            (Bodypart::Under, part) if part != UpperBodyPart::NotApplicable => push(
                "upper_body_part",
                format!("upper-body part {part} only applies when bodypart is Upper (got bodypart Under)"),
            ),
            _ => {}
        }
        if self.handball_offence != HandballOffence::NotApplicable && self.handball != Handball::Handball {
            push(
                "handball_offence",
                format!(
                    "handball offence {} requires handball = Handball (got {})",
                    self.handball_offence, self.handball
                ),
            );
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn property_names() -> [&'static str; 10] {
        [
            "offence",
            "action_class",
            "severity",
            "contact",
            "bodypart",
            "upper_body_part",
            "try_to_play",
            "play_ball",
            "handball",
            "handball_offence",
        ]
    }

    /// `(property, value)` pairs for all ten properties, in a fixed order.
    pub fn properties(&self) -> [(&'static str, String); 10] {
        [
            ("offence", self.offence.to_string()),
            ("action_class", self.action_class.to_string()),
            ("severity", self.severity.0.to_string()),
            ("contact", self.contact.to_string()),
            ("bodypart", self.bodypart.to_string()),
            ("upper_body_part", self.upper_body_part.to_string()),
            ("try_to_play", self.try_to_play.to_string()),
            ("play_ball", self.play_ball.to_string()),
            ("handball", self.handball.to_string()),
            ("handball_offence", self.handball_offence.to_string()),
        ]
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn sample() -> Annotation {
        Annotation {
            offence: Offence::Offence,
            action_class: ActionClass::Tackling,
            severity: Severity::YELLOW,
            contact: Contact::With,
            bodypart: Bodypart::Under,
            upper_body_part: UpperBodyPart::NotApplicable,
            try_to_play: TryToPlay::Yes,
            play_ball: PlayBall::Yes,
            handball: Handball::NoHandball,
            handball_offence: HandballOffence::NotApplicable,
        }
    }

    #[test]
    fn valid_sample_passes() {
        assert!(sample().is_valid());
    }

    #[test]
    fn under_body_with_arm_is_rejected() {
        let a = Annotation {
            upper_body_part: UpperBodyPart::Arm,
            ..sample()
        };
        let v = a.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "upper_body_part");
        assert!(v[0].message.contains("Upper"));
    }

    #[test]
    fn upper_body_requires_a_part() {
        let a = Annotation {
            bodypart: Bodypart::Upper,
            ..sample()
        };
        assert_eq!(a.violations()[0].field, "upper_body_part");
        let ok = Annotation {
            bodypart: Bodypart::Upper,
            upper_body_part: UpperBodyPart::Shoulder,
            ..sample()
        };
        assert!(ok.is_valid());
    }

    #[test]
    fn handball_offence_requires_handball() {
        let a = Annotation {
            handball_offence: HandballOffence::No,
            ..sample()
        };
        assert_eq!(a.violations()[0].field, "handball_offence");
        let ok = Annotation {
            handball: Handball::Handball,
            handball_offence: HandballOffence::No,
            ..sample()
        };
        assert!(ok.is_valid());
    }

    #[test]
    fn enums_serialize_as_exact_strings() {
        let json = serde_json::to_value(sample()).unwrap();
        assert_eq!(json["action_class"], "Tackling");
        assert_eq!(json["upper_body_part"], "NotApplicable");
        assert_eq!(json["severity"], 3);
    }
}
