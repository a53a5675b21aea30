use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::labels::{map_task2, ClassLabel};
use super::manifest::{Manifest, Split};
use crate::error::{Error, Result};

/// Train/valid/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let f = Self { train, valid, test };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(format!("split fractions must be non-negative, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.valid, self.test]
    }
}

/// Reassigns every action's split, stratified on the Task 2 label.
///
/// Each stratum is shuffled with a seeded RNG and dealt out so that after
/// `k` actions the split counts track `k · fraction` as closely as possible
/// (a weighted round-robin). Actions without a Task 2 label form their own
/// stratum.
pub fn split_actions(manifest: &Manifest, seed: u64, fractions: SplitFractions) -> Result<Manifest> {
    fractions.check()?;
    let mut strata: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, action) in manifest.actions.iter().enumerate() {
        let key = action.annotation.as_ref().and_then(map_task2).map(ClassLabel::index);
        strata.entry(key).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = manifest.clone();
    let weights = fractions.as_array();
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let mut dealt = [0usize; 3];
        for (k, &i) in members.iter().enumerate() {
            let target = (k + 1) as f64;
            // pick the split furthest behind its quota; ties go to the earlier split
            let mut best = 0;
            let mut best_deficit = f64::NEG_INFINITY;
            for s in 0..3 {
                if weights[s] == 0.0 {
                    continue;
                }
                let deficit = target * weights[s] - dealt[s] as f64;
                if deficit > best_deficit + 1e-12 {
                    best = s;
                    best_deficit = deficit;
                }
            }
            dealt[best] += 1;
            out.actions[i].split = Split::ALL[best];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::annotation::tests::sample;
    use crate::dataset::annotation::{Annotation, Offence, Severity};
    use crate::dataset::labels::Task2Label;
    use crate::dataset::manifest::tests::action;

    fn manifest(n: usize) -> Manifest {
        let mut m = Manifest::new("split", ".", ".");
        for i in 0..n {
            let mut a = action(&format!("a{i:04}"));
            let (offence, severity) = match i % 7 {
                0 => (Offence::NoOffence, 1),
                1 | 2 => (Offence::Offence, 3),
                3 => (Offence::Offence, 5),
                4 => (Offence::Between, 1),
                _ => (Offence::Offence, 1),
            };
            a.annotation = Some(Annotation {
                offence,
                severity: Severity(severity),
                ..sample()
            });
            m.actions.push(a);
        }
        m
    }

    #[test]
    fn fractions_must_sum_to_one() {
        assert!(matches!(SplitFractions::new(0.5, 0.2, 0.2), Err(Error::Config(_))));
        assert!(SplitFractions::new(0.8, 0.0, 0.2).is_ok());
    }

    #[test]
    fn same_seed_same_assignment() {
        let m = manifest(100);
        let f = SplitFractions::new(0.6, 0.2, 0.2).unwrap();
        assert_eq!(split_actions(&m, 3, f).unwrap(), split_actions(&m, 3, f).unwrap());
        assert_ne!(split_actions(&m, 3, f).unwrap(), split_actions(&m, 4, f).unwrap());
    }

    #[test]
    fn all_train() {
        let m = manifest(50);
        let out = split_actions(&m, 0, SplitFractions::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert!(out.actions.iter().all(|a| a.split == Split::Train));
    }

    #[test]
    fn stratified_test_share_per_class() {
        let m = manifest(1000);
        let out = split_actions(&m, 11, SplitFractions::new(0.8, 0.0, 0.2).unwrap()).unwrap();
        let mut per_class: BTreeMap<Option<Task2Label>, (usize, usize)> = BTreeMap::new();
        for a in &out.actions {
            let entry = per_class.entry(a.annotation.as_ref().and_then(map_task2)).or_default();
            entry.0 += 1;
            if a.split == Split::Test {
                entry.1 += 1;
            }
            assert_ne!(a.split, Split::Valid);
        }
        for (class, (total, test)) in per_class {
            let expected = 0.2 * total as f64;
            assert!((test as f64 - expected).abs() <= 1.0, "{class:?}: {test} of {total}");
        }
    }
}
