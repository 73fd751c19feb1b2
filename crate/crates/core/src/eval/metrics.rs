use serde::{Deserialize, Serialize};

use crate::pipeline::EventResult;
use crate::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (usize, usize)>,
        classes: usize,
    ) -> Result<Self> {
        let mut counts = vec![vec![0u64; classes]; classes];
        for (truth, pred) in pairs {
            if truth >= classes || pred >= classes {
                return Err(Error::InvalidLabel {
                    label: truth.max(pred),
                    classes,
                });
            }
            counts[truth][pred] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|c| self.counts[c][c]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub confusion: ConfusionMatrix,
    /// Classes whose precision or recall had an empty denominator; their F1
    /// is reported as 0.
    pub degenerate_classes: Vec<usize>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
}

impl MetricsReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let total = confusion.total();
        if total == 0 {
            return Err(Error::Empty("prediction records"));
        }
        let c = confusion.classes();
        let mut per_class_f1 = Vec::with_capacity(c);
        let mut degenerate_classes = Vec::new();
        for k in 0..c {
            let tp = confusion.counts[k][k] as f64;
            let predicted: u64 = (0..c).map(|t| confusion.counts[t][k]).sum();
            let actual: u64 = confusion.counts[k].iter().sum();
            if predicted == 0 || actual == 0 {
                degenerate_classes.push(k);
            }
            let precision = if predicted == 0 {
                0.0
            } else {
                tp / predicted as f64
            };
            let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            per_class_f1.push(f1);
        }
        let macro_f1 = per_class_f1.iter().sum::<f64>() / c as f64;
        Ok(MetricsReport {
            accuracy: confusion.trace() as f64 / total as f64,
            macro_f1,
            per_class_f1,
            confusion,
            degenerate_classes,
            config_hash: None,
            seed: None,
        })
    }

    /// `Acc. Mac-F1 F1 F2 …` as a single whitespace-separated row.
    pub fn table_row(&self) -> String {
        let mut cols = vec![
            format!("{:.4}", self.accuracy),
            format!("{:.4}", self.macro_f1),
        ];
        cols.extend(self.per_class_f1.iter().map(|f| format!("{f:.4}")));
        cols.join("\t")
    }

    pub fn table_header(&self) -> String {
        let mut cols = vec!["Acc.".to_string(), "Mac-F1".to_string()];
        cols.extend((1..=self.per_class_f1.len()).map(|k| format!("F{k}")));
        cols.join("\t")
    }
}

pub fn compute_metrics(records: &[EventResult], classes: usize) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::Empty("prediction records"));
    }
    let confusion =
        ConfusionMatrix::from_pairs(records.iter().map(|r| (r.label, r.predicted)), classes)?;
    MetricsReport::from_confusion(confusion)
}
