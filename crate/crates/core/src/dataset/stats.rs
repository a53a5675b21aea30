//! Dataset statistics: property distributions, views per action, referee
//! error rate and per-class severity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::annotation::{ActionClass, Annotation, Offence};
use super::labels::{map_task1, map_task2, ClassLabel, Task1Label, Task2Label};
use super::manifest::Manifest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueShare {
    pub value: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSeverity {
    pub class: Task1Label,
    pub actions: usize,
    /// 1 − share of `NoOffence` within the class.
    pub success_rate: f64,
    /// Shares of no card / yellow / red among offences with a decided severity.
    pub no_card: f64,
    pub yellow: f64,
    pub red: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub actions: usize,
    pub annotated: usize,
    /// Property name → value shares over annotated actions, in vocabulary order.
    pub properties: BTreeMap<String, Vec<ValueShare>>,
    pub mean_clips_per_action: f64,
    /// View count → number of actions.
    pub views_histogram: BTreeMap<usize, usize>,
    /// Share of annotated actions judged `NoOffence`.
    pub referee_error_rate: f64,
    pub severity_by_class: Vec<ClassSeverity>,
    pub task1_mappable: usize,
    pub task2_mappable: usize,
}

fn vocabulary(property: &str) -> Vec<String> {
    use super::annotation::*;
    fn names<T: ToString>(all: &[T]) -> Vec<String> {
        all.iter().map(ToString::to_string).collect()
    }
    match property {
        "offence" => names(Offence::ALL),
        "action_class" => names(ActionClass::ALL),
        "severity" => (1..=5).map(|s| s.to_string()).collect(),
        "contact" => names(Contact::ALL),
        "bodypart" => names(Bodypart::ALL),
        "upper_body_part" => names(UpperBodyPart::ALL),
        "try_to_play" => names(TryToPlay::ALL),
        "play_ball" => names(PlayBall::ALL),
        "handball" => names(Handball::ALL),
        "handball_offence" => names(HandballOffence::ALL),
        _ => Vec::new(),
    }
}

pub fn dataset_stats(manifest: &Manifest) -> Result<StatsReport> {
    let actions = manifest.actions.len();
    if actions == 0 {
        return Err(Error::Domain("cannot compute statistics of an empty manifest".into()));
    }
    let annotations: Vec<&Annotation> = manifest.actions.iter().filter_map(|a| a.annotation.as_ref()).collect();
    let annotated = annotations.len();

    let mut counts: BTreeMap<&'static str, BTreeMap<String, usize>> = BTreeMap::new();
    for a in &annotations {
        for (property, value) in a.properties() {
            *counts.entry(property).or_default().entry(value).or_default() += 1;
        }
    }
    let percent = |n: usize, of: usize| if of == 0 { 0.0 } else { 100.0 * n as f64 / of as f64 };
    let properties = Annotation::property_names()
        .iter()
        .map(|&property| {
            let seen = counts.get(property);
            let shares = vocabulary(property)
                .into_iter()
                .map(|value| {
                    let count = seen.and_then(|m| m.get(&value)).copied().unwrap_or(0);
                    ValueShare {
                        percent: percent(count, annotated),
                        value,
                        count,
                    }
                })
                .collect();
            (property.to_string(), shares)
        })
        .collect();

    let mut views_histogram = BTreeMap::new();
    let mut total_clips = 0;
    for a in &manifest.actions {
        *views_histogram.entry(a.clips.len()).or_default() += 1;
        total_clips += a.clips.len();
    }

    let no_offence = annotations.iter().filter(|a| a.offence == Offence::NoOffence).count();
    let severity_by_class = Task1Label::ALL
        .iter()
        .map(|&class| {
            let in_class: Vec<&&Annotation> = annotations
                .iter()
                .filter(|a| a.action_class == class.to_action_class())
                .collect();
            let misses = in_class.iter().filter(|a| a.offence == Offence::NoOffence).count();
            let mut cards = [0usize; 3];
            for a in &in_class {
                match map_task2(a) {
                    Some(Task2Label::OffenceNoCard) => cards[0] += 1,
                    Some(Task2Label::OffenceYellow) => cards[1] += 1,
                    Some(Task2Label::OffenceRed) => cards[2] += 1,
                    _ => {}
                }
            }
            let decided: usize = cards.iter().sum();
            let share = |n: usize| if decided == 0 { 0.0 } else { n as f64 / decided as f64 };
            ClassSeverity {
                class,
                actions: in_class.len(),
                success_rate: if in_class.is_empty() {
                    0.0
                } else {
                    1.0 - misses as f64 / in_class.len() as f64
                },
                no_card: share(cards[0]),
                yellow: share(cards[1]),
                red: share(cards[2]),
            }
        })
        .collect();

    Ok(StatsReport {
        actions,
        annotated,
        properties,
        mean_clips_per_action: total_clips as f64 / actions as f64,
        views_histogram,
        referee_error_rate: if annotated == 0 {
            0.0
        } else {
            no_offence as f64 / annotated as f64
        },
        severity_by_class,
        task1_mappable: annotations.iter().filter(|a| map_task1(a).is_some()).count(),
        task2_mappable: annotations.iter().filter(|a| map_task2(a).is_some()).count(),
    })
}

impl StatsReport {
    pub fn share(&self, property: &str, value: &str) -> Option<f64> {
        self.properties
            .get(property)?
            .iter()
            .find(|s| s.value == value)
            .map(|s| s.percent)
    }

    /// Percentage of annotated actions with the given foul class.
    pub fn foul_class_share(&self, class: ActionClass) -> Option<f64> {
        self.share("action_class", class.as_str())
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "actions {}  annotated {}  mean clips/action {:.2}  referee error rate {:.1}%",
            self.actions,
            self.annotated,
            self.mean_clips_per_action,
            100.0 * self.referee_error_rate
        );
        let hist: Vec<String> = self.views_histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let _ = writeln!(out, "views per action  {}", hist.join("  "));
        let _ = writeln!(
            out,
            "task1 mappable {}  task2 mappable {}",
            self.task1_mappable, self.task2_mappable
        );
        for (property, shares) in &self.properties {
            let _ = writeln!(out, "\n{property}");
            for s in shares {
                let _ = writeln!(out, "  {:<18} {:>6} {:>6.1}%", s.value, s.count, s.percent);
            }
        }
        let _ = writeln!(
            out,
            "\n{:<18} {:>7} {:>10} {:>8} {:>8} {:>8}",
            "foul class", "actions", "succ rate", "no card", "yellow", "red"
        );
        for c in &self.severity_by_class {
            let _ = writeln!(
                out,
                "{:<18} {:>7} {:>10.2} {:>8.2} {:>8.2} {:>8.2}",
                c.class.name(),
                c.actions,
                c.success_rate,
                c.no_card,
                c.yellow,
                c.red
            );
        }
        out
    }
}
