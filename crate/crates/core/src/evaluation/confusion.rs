use serde::{Deserialize, Serialize};

use super::table::render;
use crate::error::{Error, Result};

/// Counts with ground truth on rows and predictions on columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Self {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts<S: Into<String>>(classes: impl IntoIterator<Item = S>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let mut cm = Self::new(classes);
        let n = cm.classes.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::Domain(format!("confusion counts must be {n}x{n}")));
        }
        cm.counts = counts;
        Ok(cm)
    }

    /// Builds a matrix with generic class names `c0, c1, ...`.
    pub fn from_square(counts: Vec<Vec<u64>>) -> Result<Self> {
        let names: Vec<String> = (0..counts.len()).map(|i| format!("c{i}")).collect();
        Self::from_counts(names, counts)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.classes.len();
        if truth >= n || predicted >= n {
            return Err(Error::Label {
                label: truth.max(predicted),
                classes: n,
                row: 0,
            });
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Ground-truth count per class.
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Prediction count per class.
    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// `None` when the class never occurs in the ground truth.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let p: u64 = self.counts[class].iter().sum();
        (p > 0).then(|| self.counts[class][class] as f64 / p as f64)
    }

    /// `None` when the class is never predicted.
    pub fn precision(&self, class: usize) -> Option<f64> {
        let p: u64 = self.counts.iter().map(|r| r[class]).sum();
        (p > 0).then(|| self.counts[class][class] as f64 / p as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.trace() as f64 / total as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (name, row) in self.classes.iter().zip(&self.counts) {
            out.push_str(&csv_field(name));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Aligned text with a recall column (R) and a precision row (P).
    pub fn to_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let mut header: Vec<String> = vec![String::new()];
        header.extend(self.classes.iter().cloned());
        header.push("R".into());
        let mut rows = Vec::new();
        for (i, name) in self.classes.iter().enumerate() {
            let mut row = vec![name.clone()];
            row.extend(self.counts[i].iter().map(u64::to_string));
            row.push(fmt(self.recall(i)));
            rows.push(row);
        }
        let mut last = vec!["P".to_string()];
        last.extend((0..self.len()).map(|j| fmt(self.precision(j))));
        last.push(String::new());
        rows.push(last);
        render(&[header], &rows)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
