//! Metric identities on random confusion matrices and prediction sets, and
//! end-to-end evaluation and view ablation on a generated dataset.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vars_core::dataset::Split;
use vars_core::evaluation::{
    ablate_views, balanced_accuracy, evaluate, task_metrics, topk_accuracy, AblationSpec, ConfusionMatrix,
};
use vars_core::model::{EncoderKind, MvfModel, Task, TaskMode};
use vars_core::training::prepare_split;

fn random_matrix(rng: &mut ChaCha8Rng) -> Vec<Vec<u64>> {
    let n = rng.random_range(2..=8);
    (0..n)
        .map(|_| {
            // some rows empty, to exercise the absent-class rule
            let empty = rng.random_bool(0.15);
            (0..n).map(|_| if empty { 0 } else { rng.random_range(0..20) }).collect()
        })
        .collect()
}

#[test]
fn balanced_accuracy_is_mean_recall_and_trace_is_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for _ in 0..1000 {
        let counts = random_matrix(&mut rng);
        let n = counts.len();
        let cm = ConfusionMatrix::from_square(counts.clone()).unwrap();

        let mut recalls = Vec::new();
        for (i, row) in counts.iter().enumerate() {
            let p: u64 = row.iter().sum();
            if p > 0 {
                recalls.push(row[i] as f64 / p as f64);
            }
        }
        if recalls.is_empty() {
            assert!(balanced_accuracy(&cm).is_err());
            continue;
        }
        let oracle = recalls.iter().sum::<f64>() / recalls.len() as f64;
        assert!((balanced_accuracy(&cm).unwrap() - oracle).abs() < 1e-12);

        // expand the matrix into one-hot predictions and recompute acc@1
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for (t, row) in counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    let mut s = vec![0.0; n];
                    s[p] = 1.0;
                    scores.push(s);
                    labels.push(t);
                }
            }
        }
        let acc = topk_accuracy(&scores, &labels, 1).unwrap();
        assert!((cm.trace() as f64 / cm.total() as f64 - acc).abs() < 1e-12);
        checked += 1;
    }
    assert!(checked > 900);
}

#[test]
fn equal_row_sums_make_balanced_accuracy_equal_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n = rng.random_range(2..=6);
        let per_row = rng.random_range(1..30);
        let counts: Vec<Vec<u64>> = (0..n)
            .map(|_| {
                let mut row = vec![0u64; n];
                for _ in 0..per_row {
                    row[rng.random_range(0..n)] += 1;
                }
                row
            })
            .collect();
        let cm = ConfusionMatrix::from_square(counts).unwrap();
        assert!((balanced_accuracy(&cm).unwrap() - cm.accuracy().unwrap()).abs() < 1e-12);
    }
}

/// Sort classes by descending score, lower index first on ties.
fn topk_oracle(scores: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, &l)| {
            let mut idx: Vec<usize> = (0..s.len()).collect();
            idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap().then(a.cmp(&b)));
            idx[..k.min(s.len())].contains(&l)
        })
        .count();
    hits as f64 / labels.len() as f64
}

#[test]
fn topk_matches_sorting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let n = rng.random_range(2..=8);
        let rows = rng.random_range(1..=100);
        // coarse scores so ties are common
        let scores: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..n).map(|_| f64::from(rng.random_range(0..5u8)) / 4.0).collect())
            .collect();
        let labels: Vec<usize> = (0..rows).map(|_| rng.random_range(0..n)).collect();
        for k in 1..=n {
            assert_eq!(topk_accuracy(&scores, &labels, k).unwrap(), topk_oracle(&scores, &labels, k));
        }
        assert_eq!(topk_accuracy(&scores, &labels, n).unwrap(), 1.0);
    }
}

#[test]
fn perfect_scores_give_perfect_metrics() {
    let labels: Vec<usize> = (0..40).map(|i| (i * 7) % 4).collect();
    let scores: Vec<Vec<f64>> = labels
        .iter()
        .map(|&l| (0..4).map(|c| if c == l { 1.0 } else { 0.0 }).collect())
        .collect();
    let (m, cm) = task_metrics(Task::Offence, &scores, &labels, 0).unwrap();
    assert_eq!((m.acc_at_1, m.acc_at_2, m.balanced_accuracy), (1.0, 1.0, 1.0));
    assert_eq!(cm.trace(), 40);
    assert!(m.recall.iter().all(|r| *r == Some(1.0)));
}

#[test]
fn evaluation_is_pure_and_consistent() {
    let (_dir, manifest) = common::small_dataset(40, 2, 0.5, [0.5, 0.0, 0.5]);
    let config = common::model_for(&manifest, EncoderKind::TemporalConv, TaskMode::MultiTask);
    let model = MvfModel::init(config, 3).unwrap();
    let a = evaluate(&model, &manifest, Split::Test, 16.0).unwrap();
    let b = evaluate(&model, &manifest, Split::Test, 16.0).unwrap();
    assert_eq!(a, b);
    for t in &a.report.tasks {
        assert!(t.acc_at_2 >= t.acc_at_1);
        let cm = &a.confusion[&t.task];
        assert_eq!(cm.total() as usize, t.evaluated);
        assert!((cm.trace() as f64 / cm.total() as f64 - t.acc_at_1).abs() < 1e-12);
        for r in [t.acc_at_1, t.acc_at_2, t.balanced_accuracy] {
            assert!((0.0..=1.0).contains(&r));
        }
    }
}

#[test]
fn view_ablation_shape_and_singleton_symmetry() {
    let (_dir, manifest) = common::small_dataset(60, 5, 0.5, [0.0, 0.0, 1.0]);
    let config = common::model_for(&manifest, EncoderKind::FramePool, TaskMode::MultiTask);
    let model = MvfModel::init(config, 0).unwrap();
    let actions = prepare_split(&manifest, Some(Split::Test), 16.0).unwrap();
    let spec = AblationSpec::default();
    let ab = ablate_views(&model, &actions, &spec).unwrap();
    assert_eq!(ab.reports.len(), spec.subsets.len());
    assert_eq!(ab.actions_used + ab.actions_skipped, actions.len());
    let header = ab.to_table().lines().next().unwrap().to_string();
    assert_eq!(header.split_whitespace().count(), spec.subsets.len() + 1);

    let single = AblationSpec {
        subsets: vec!["R1".parse().unwrap(), "R1".parse().unwrap()],
        ..AblationSpec::default()
    };
    let ab = ablate_views(&model, &actions, &single).unwrap();
    assert_eq!(ab.reports[0], ab.reports[1]);

    let missing = AblationSpec {
        subsets: vec!["R3".parse().unwrap()],
        ..AblationSpec::default()
    };
    let only_one_replay: Vec<_> = actions.iter().filter(|a| a.views.len() == 2).cloned().collect();
    assert!(ablate_views(&model, &only_one_replay, &missing).is_err());
}
