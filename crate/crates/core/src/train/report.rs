use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, Evaluation, Task, TrainConfig};
use crate::classifiers::ModelKind;
use crate::corpus::{Category, HelpfulnessLabel};
use crate::error::{Error, Result};
use crate::util::sha256_hex;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Content hashes of the data a run consumed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataHashes {
    /// SHA-256 of each split as JSON lines, keyed by split name.
    pub splits: BTreeMap<String, String>,
    /// Checksum of a pre-trained look-up table supplied from outside.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<String>,
}

impl DataHashes {
    pub fn fingerprint(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("hashes serialize"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub category: Category,
    pub data: DataHashes,
    /// Examples the model learned from: labeled train and validation, plus
    /// the unlabeled pre-training documents for T2.
    pub training_size: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub pretraining_documents: usize,
    pub vocab_size: usize,
    /// Out-of-vocabulary training words given composed subword vectors.
    pub extended_words: usize,
    pub skipped_empty: usize,
    pub initial_validation_accuracy: f64,
    pub validation_curve: Vec<EpochRecord>,
    pub selected_epoch: usize,
    /// Test scores of the selected checkpoint.
    pub test: Evaluation,
    /// Test scores after the last epoch.
    pub final_test: Evaluation,
    pub per_class: BTreeMap<String, super::ClassCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_accuracy: Option<f64>,
}

impl CategoryReport {
    pub fn per_class_counts(test: &Evaluation) -> BTreeMap<String, super::ClassCounts> {
        [HelpfulnessLabel::Helpful, HelpfulnessLabel::Unhelpful]
            .into_iter()
            .map(|c| (c.to_string(), test.confusion.for_class(c)))
            .collect()
    }
}

/// Full-scale published accuracy for the same task and model, kept only as
/// context: the desk-scale data cannot reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceResult {
    pub overall_accuracy: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: u64,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub task: Task,
    pub model: ModelKind,
    pub config: TrainConfig,
    /// Config keys set away from the task defaults.
    pub overrides: Vec<String>,
    /// SHA-256 over the config and every category's data hashes.
    pub fingerprint: String,
    pub categories: Vec<CategoryReport>,
    /// Unweighted mean of the per-category test accuracies.
    pub overall_accuracy: f64,
    pub overall_final_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Published per-category accuracies (percent), by task and model.
fn published(task: Task, model: ModelKind) -> Option<[(Category, f64); 4]> {
    use Category::*;
    let row = |v: [f64; 4]| {
        Some([(Books, v[0]), (Electronics, v[1]), (CDsAndVinyl, v[2]), (MoviesAndTV, v[3])])
    };
    match (task, model) {
        (Task::T1, ModelKind::Rcnn) => row([82.0, 81.0, 86.0, 84.0]),
        (Task::T1, ModelKind::Linear) => row([81.4, 80.1, 84.8, 83.9]),
        (Task::T1, ModelKind::Svm) => row([75.5, 73.3, 78.5, 76.4]),
        (Task::T1, ModelKind::Cnn) => row([78.7, 77.2, 81.6, 79.0]),
        (Task::T2, ModelKind::Rcnn) => row([87.0, 86.0, 92.0, 90.0]),
        _ => None,
    }
}

impl ExperimentReport {
    /// Assembles a report; overall means, fingerprint and reference values
    /// are derived here.
    pub fn new(config: TrainConfig, mut categories: Vec<CategoryReport>) -> Self {
        let table = published(config.task, config.model);
        for c in &mut categories {
            c.reference_accuracy =
                table.as_ref().and_then(|t| t.iter().find(|(k, _)| *k == c.category)).map(|(_, v)| v / 100.0);
        }
        let reference = table.map(|t| ReferenceResult {
            overall_accuracy: t.iter().map(|(_, v)| v).sum::<f64>() / 400.0,
            note: "published full-scale result (500,000 reviews per category); not expected at desk scale".into(),
        });
        let mean = |f: &dyn Fn(&CategoryReport) -> f64| {
            if categories.is_empty() {
                0.0
            } else {
                categories.iter().map(f).sum::<f64>() / categories.len() as f64
            }
        };
        let overall_accuracy = mean(&|c| c.test.accuracy);
        let overall_final_accuracy = mean(&|c| c.final_test.accuracy);
        let mut h = serde_json::to_vec(&config).expect("config serializes");
        for c in &categories {
            h.extend_from_slice(c.data.fingerprint().as_bytes());
        }
        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            task: config.task,
            model: config.model,
            overrides: config.overrides(),
            fingerprint: sha256_hex(&h),
            config,
            categories,
            overall_accuracy,
            overall_final_accuracy,
            reference,
            timing: None,
        }
    }

    /// Combines single-category runs of the same config into one report.
    pub fn merge(reports: Vec<ExperimentReport>) -> Result<Self> {
        let Some(first) = reports.first() else {
            return Err(Error::Config("nothing to merge".into()));
        };
        let config = first.config.clone();
        let mut categories = Vec::new();
        let mut timing: Option<Timing> = None;
        for r in reports {
            if r.config != config {
                return Err(Error::Config("reports were produced with different configs".into()));
            }
            if let Some(t) = r.timing {
                let acc = timing.get_or_insert(Timing { started_unix: t.started_unix, wall_clock_secs: 0.0 });
                acc.started_unix = acc.started_unix.min(t.started_unix);
                acc.wall_clock_secs += t.wall_clock_secs;
            }
            categories.extend(r.categories);
        }
        let mut out = ExperimentReport::new(config, categories);
        out.timing = timing;
        Ok(out)
    }

    pub fn category(&self, category: &Category) -> Option<&CategoryReport> {
        self.categories.iter().find(|c| &c.category == category)
    }

    /// JSON without the timing block, for byte-level comparisons.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timing = None;
        Ok(serde_json::to_string_pretty(&copy)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task {} / model {}  (fingerprint {})", self.task, self.model, &self.fingerprint[..12]);
        if !self.overrides.is_empty() {
            let _ = writeln!(s, "overrides: {}", self.overrides.join(", "));
        }
        let _ = writeln!(
            s,
            "{:<16} {:>9} {:>9} {:>7} {:>6} {:>9} {:>9}  {:>6} {:>6} {:>6} {:>6}",
            "Category", "Training", "Testing", "Epoch", "Val", "Best", "Final", "TP", "FP", "TN", "FN"
        );
        for c in &self.categories {
            let m = c.test.confusion;
            let _ = writeln!(
                s,
                "{:<16} {:>9} {:>9} {:>7} {:>6.2} {:>8.2}% {:>8.2}%  {:>6} {:>6} {:>6} {:>6}",
                c.category.display_name(),
                c.training_size,
                c.test_size,
                c.selected_epoch,
                100.0 * c.curve_best(),
                m.accuracy_points(),
                c.final_test.confusion.accuracy_points(),
                m.tp,
                m.fp,
                m.tn,
                m.fn_
            );
        }
        let _ = writeln!(
            s,
            "{:<16} {:>9} {:>9} {:>7} {:>6} {:>8.2}% {:>8.2}%",
            "Overall",
            "",
            "",
            "",
            "",
            100.0 * self.overall_accuracy,
            100.0 * self.overall_final_accuracy
        );
        if let Some(r) = &self.reference {
            let _ = writeln!(s, "reference: {:.2}% ({})", 100.0 * r.overall_accuracy, r.note);
        }
        s
    }
}

impl CategoryReport {
    fn curve_best(&self) -> f64 {
        self.validation_curve
            .iter()
            .find(|r| r.epoch == self.selected_epoch)
            .map_or(self.initial_validation_accuracy, |r| r.validation_accuracy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub category: Category,
    pub training_size_a: usize,
    pub training_size_b: usize,
    pub test_size: usize,
    /// Percentage points, from the confusion counts.
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    pub delta: f64,
    pub same_test_split: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ComparisonRow>,
    pub overall_a: f64,
    pub overall_b: f64,
    pub overall_delta: f64,
}

fn label(r: &ExperimentReport) -> String {
    format!("{} {}", r.task.as_str().to_uppercase(), r.model)
}

/// Per-category and overall accuracy deltas (b − a) in percentage points.
/// Rows follow the category order of `a`.
pub fn compare_reports(a: &ExperimentReport, b: &ExperimentReport) -> Result<Comparison> {
    if let Some(c) = b.categories.iter().find(|c| a.category(&c.category).is_none()) {
        return Err(Error::MissingCategory(c.category.to_string()));
    }
    let mut rows = Vec::with_capacity(a.categories.len());
    for ca in &a.categories {
        let cb = b.category(&ca.category).ok_or_else(|| Error::MissingCategory(ca.category.to_string()))?;
        let (pa, pb) = (ca.test.confusion.accuracy_points(), cb.test.confusion.accuracy_points());
        rows.push(ComparisonRow {
            category: ca.category.clone(),
            training_size_a: ca.training_size,
            training_size_b: cb.training_size,
            test_size: ca.test_size,
            accuracy_a: pa,
            accuracy_b: pb,
            delta: pb - pa,
            same_test_split: ca.test_size == cb.test_size && ca.data.splits.get("test") == cb.data.splits.get("test"),
        });
    }
    let n = rows.len().max(1) as f64;
    let overall_a = rows.iter().map(|r| r.accuracy_a).sum::<f64>() / n;
    let overall_b = rows.iter().map(|r| r.accuracy_b).sum::<f64>() / n;
    let (mut label_a, mut label_b) = (label(a), label(b));
    if label_a == label_b {
        label_a.push_str(" (a)");
        label_b.push_str(" (b)");
    }
    Ok(Comparison { label_a, label_b, rows, overall_a, overall_b, overall_delta: overall_b - overall_a })
}

impl Comparison {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let w = self.label_a.len().max(self.label_b.len()).max(8);
        let _ = writeln!(
            s,
            "{:<16} {:>w$} {:>w$} {:>9} {:>w$} {:>w$} {:>7}",
            "Category",
            format!("Train {}", short(&self.label_a)),
            format!("Train {}", short(&self.label_b)),
            "Testing",
            self.label_a,
            self.label_b,
            "Delta",
            w = w + 6
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<16} {:>w$} {:>w$} {:>9} {:>w$.2} {:>w$.2} {:>+7.2}{}",
                r.category.display_name(),
                r.training_size_a,
                r.training_size_b,
                r.test_size,
                r.accuracy_a,
                r.accuracy_b,
                r.delta,
                if r.same_test_split { "" } else { "  (test splits differ)" },
                w = w + 6
            );
        }
        let _ = writeln!(
            s,
            "{:<16} {:>w$} {:>w$} {:>9} {:>w$.2} {:>w$.2} {:>+7.2}",
            "Overall",
            "",
            "",
            "",
            self.overall_a,
            self.overall_b,
            self.overall_delta,
            w = w + 6
        );
        s
    }
}

fn short(label: &str) -> &str {
    label.split(' ').next().unwrap_or(label)
}
