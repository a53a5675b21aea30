//! Task label vocabularies and the mapping from raw annotations onto them.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::annotation::{ActionClass, Annotation, Offence};

/// Common surface of the two task vocabularies.
pub trait ClassLabel: Copy + Eq + fmt::Debug + 'static {
    const ALL: &'static [Self];

    fn index(self) -> usize;

    fn name(self) -> &'static str;

    fn count() -> usize {
        Self::ALL.len()
    }

    fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|l| l.name()).collect()
    }
}

/// Fine-grained foul type (8 classes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task1Label {
    StandingTackling,
    Tackling,
    HighLeg,
    Pushing,
    Holding,
    Elbowing,
    Challenge,
    Dive,
}

/// Offence and severity outcome (4 classes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task2Label {
    NoOffence,
    OffenceNoCard,
    OffenceYellow,
    OffenceRed,
}

impl ClassLabel for Task1Label {
    const ALL: &'static [Self] = &[
        Task1Label::StandingTackling,
        Task1Label::Tackling,
        Task1Label::HighLeg,
        Task1Label::Pushing,
        Task1Label::Holding,
        Task1Label::Elbowing,
        Task1Label::Challenge,
        Task1Label::Dive,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Task1Label::StandingTackling => "StandingTackling",
            Task1Label::Tackling => "Tackling",
            Task1Label::HighLeg => "HighLeg",
            Task1Label::Pushing => "Pushing",
            Task1Label::Holding => "Holding",
            Task1Label::Elbowing => "Elbowing",
            Task1Label::Challenge => "Challenge",
            Task1Label::Dive => "Dive",
        }
    }
}

impl ClassLabel for Task2Label {
    const ALL: &'static [Self] = &[
        Task2Label::NoOffence,
        Task2Label::OffenceNoCard,
        Task2Label::OffenceYellow,
        Task2Label::OffenceRed,
    ];

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Task2Label::NoOffence => "NoOffence",
            Task2Label::OffenceNoCard => "OffenceNoCard",
            Task2Label::OffenceYellow => "OffenceYellow",
            Task2Label::OffenceRed => "OffenceRed",
        }
    }
}

impl fmt::Display for Task1Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Task2Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Task1Label {
    pub fn to_action_class(self) -> ActionClass {
        ActionClass::ALL[self.index()]
    }
}

/// Foul-type label; `DontKnow` is excluded from the task.
pub fn map_task1(a: &Annotation) -> Option<Task1Label> {
    Some(match a.action_class {
        ActionClass::StandingTackling => Task1Label::StandingTackling,
        ActionClass::Tackling => Task1Label::Tackling,
        ActionClass::HighLeg => Task1Label::HighLeg,
        ActionClass::Pushing => Task1Label::Pushing,
        ActionClass::Holding => Task1Label::Holding,
        ActionClass::Elbowing => Task1Label::Elbowing,
        ActionClass::Challenge => Task1Label::Challenge,
        ActionClass::Dive => Task1Label::Dive,
        ActionClass::DontKnow => return None,
    })
}

/// Offence/severity label; `Between` and borderline severities (2, 4) are excluded.
pub fn map_task2(a: &Annotation) -> Option<Task2Label> {
    match a.offence {
        Offence::NoOffence => Some(Task2Label::NoOffence),
        Offence::Between => None,
        Offence::Offence => match a.severity.0 {
            1 => Some(Task2Label::OffenceNoCard),
            3 => Some(Task2Label::OffenceYellow),
            5 => Some(Task2Label::OffenceRed),
            _ => None,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::annotation::{tests::sample, Severity};

    #[test]
    fn task1_examples() {
        let a = sample();
        assert_eq!(map_task1(&a), Some(Task1Label::Tackling));
        let dk = Annotation {
            action_class: ActionClass::DontKnow,
            ..sample()
        };
        assert_eq!(map_task1(&dk), None);
        let dive = Annotation {
            action_class: ActionClass::Dive,
            ..sample()
        };
        assert_eq!(map_task1(&dive), Some(Task1Label::Dive));
    }

    #[test]
    fn task1_inverse_is_identity() {
        for &label in Task1Label::ALL {
            let a = Annotation {
                action_class: label.to_action_class(),
                ..sample()
            };
            assert_eq!(map_task1(&a), Some(label));
        }
        let absent: Vec<_> = ActionClass::ALL
            .iter()
            .filter(|&&c| map_task1(&Annotation { action_class: c, ..sample() }).is_none())
            .collect();
        assert_eq!(absent, [&ActionClass::DontKnow]);
    }

    #[test]
    fn task2_examples() {
        let with = |offence, s| Annotation {
            offence,
            severity: Severity(s),
            ..sample()
        };
        assert_eq!(map_task2(&with(Offence::Offence, 1)), Some(Task2Label::OffenceNoCard));
        assert_eq!(map_task2(&with(Offence::Offence, 3)), Some(Task2Label::OffenceYellow));
        assert_eq!(map_task2(&with(Offence::Offence, 5)), Some(Task2Label::OffenceRed));
        assert_eq!(map_task2(&with(Offence::Offence, 2)), None);
        assert_eq!(map_task2(&with(Offence::Offence, 4)), None);
        for s in 1..=5 {
            assert_eq!(map_task2(&with(Offence::NoOffence, s)), Some(Task2Label::NoOffence));
            assert_eq!(map_task2(&with(Offence::Between, s)), None);
        }
    }
}
