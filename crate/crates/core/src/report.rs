//! Evaluation report serialization: pinned-header CSV, full-precision JSON
//! with a metadata block, and a rendered recall comparison table.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::evaluation::{MaskMode, ModelKind, SelectionScope};
use crate::jsonfmt;

/// Reference recall of a decision-tree classifier for categories 0 through 8,
/// shown alongside computed results. These values were reported elsewhere and
/// are never produced by this crate; the rendered table marks the column
/// `source=paper`.
const DT_REFERENCE_RECALL: [f64; 9] =
    [0.884, 0.710, 0.652, 0.508, 0.621, 0.855, 0.755, 0.728, 0.677];

/// Reference recall of a support-vector classifier for categories 0 through 8.
/// Same status as [`DT_REFERENCE_RECALL`].
const SVM_REFERENCE_RECALL: [f64; 9] =
    [0.292, 0.390, 0.474, 0.346, 0.259, 0.621, 0.454, 0.332, 0.209];

pub fn dt_reference_recall(category: Label) -> Option<f64> {
    DT_REFERENCE_RECALL.get(category as usize).copied()
}

pub fn svm_reference_recall(category: Label) -> Option<f64> {
    SVM_REFERENCE_RECALL.get(category as usize).copied()
}

/// One evaluated (category, model) cell: confusion counts plus the derived
/// metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub category: Label,
    pub model: ModelKind,
    #[serde(rename = "tp")]
    pub true_positive: u64,
    #[serde(rename = "fp")]
    pub false_positive: u64,
    #[serde(rename = "tn")]
    pub true_negative: u64,
    #[serde(rename = "fn")]
    pub false_negative: u64,
    pub recall: f64,
    pub precision: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Experiment configuration and per-run diagnostics recorded next to the
/// results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub top_k: usize,
    pub lambda: f64,
    pub threshold: f64,
    pub xi: f64,
    pub folds: usize,
    pub seed: u64,
    pub binarize_tests: bool,
    pub mask_mode: MaskMode,
    pub selection_scope: SelectionScope,
    pub models: Vec<ModelKind>,
    pub categories: Vec<Label>,
    /// Neighbor count actually used per category (cross-validated or fixed).
    pub knn_k: BTreeMap<Label, usize>,
    /// Categories whose detector has no positive eigenvalue and classifies
    /// everything 0.
    pub degenerate_categories: Vec<Label>,
    /// Per category, how many test vectors were zero after masking.
    pub zero_test_vectors: BTreeMap<Label, u64>,
}

/// Full benchmark output: metadata plus one row per (category, model) cell,
/// sorted by category then model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    metadata: ReportMetadata,
    rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn new(metadata: ReportMetadata, mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by_key(|row| (row.category, row.model));
        Self { metadata, rows }
    }

    pub fn metadata(&self) -> &ReportMetadata {
        &self.metadata
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn recall(&self, category: Label, model: ModelKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|row| row.category == category && row.model == model)
            .map(|row| row.recall)
    }

    /// CSV with the pinned header and floats at 6 decimals.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("category,model,tp,fp,tn,fn,recall,precision,accuracy,f1\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                row.category,
                row.model,
                row.true_positive,
                row.false_positive,
                row.true_negative,
                row.false_negative,
                row.recall,
                row.precision,
                row.accuracy,
                row.f1,
            ));
        }
        out
    }

    /// Full-precision JSON: `{"metadata": {...}, "rows": [...]}` with floats
    /// that round-trip exactly.
    pub fn to_json_string(&self) -> serde_json::Result<String> {
        jsonfmt::to_json_string(self)
    }

    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        Ok(Self::new(report.metadata, report.rows))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> io::Result<()> {
        jsonfmt::write_json_file(path, self)
    }

    /// Recall comparison table: one row per category, one column per computed
    /// model, then the `dt*` and `svm*` reference columns with their
    /// `source=paper` footnote. Cells without a value render as `-`.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:>8}", "category"));
        for model in &self.metadata.models {
            out.push_str(&format!("  {:>8}", model.name()));
        }
        out.push_str(&format!("  {:>8}  {:>8}\n", "dt*", "svm*"));

        let cell = |value: Option<f64>| match value {
            Some(recall) => format!("{recall:.3}"),
            None => "-".to_string(),
        };
        for &category in &self.metadata.categories {
            out.push_str(&format!("{category:>8}"));
            for &model in &self.metadata.models {
                out.push_str(&format!("  {:>8}", cell(self.recall(category, model))));
            }
            out.push_str(&format!(
                "  {:>8}  {:>8}\n",
                cell(dt_reference_recall(category)),
                cell(svm_reference_recall(category)),
            ));
        }
        out.push_str("\n* source=paper: reference recall values, not computed by this run\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(category: Label, model: ModelKind, recall: f64) -> ReportRow {
        ReportRow {
            category,
            model,
            true_positive: 90,
            false_positive: 10,
            true_negative: 880,
            false_negative: 20,
            recall,
            precision: 0.9,
            accuracy: 0.97,
            f1: 2.0 * 0.9 * recall / (0.9 + recall),
        }
    }

    fn sample_metadata(categories: Vec<Label>) -> ReportMetadata {
        ReportMetadata {
            top_k: 100,
            lambda: 1.0,
            threshold: 0.5,
            xi: 0.5,
            folds: 5,
            seed: 42,
            binarize_tests: true,
            mask_mode: MaskMode::SharedMax,
            selection_scope: SelectionScope::FullTrainingSet,
            models: vec![ModelKind::Bciqt, ModelKind::Knn, ModelKind::Nb],
            categories,
            knn_k: BTreeMap::from([(0, 3), (1, 5)]),
            degenerate_categories: vec![],
            zero_test_vectors: BTreeMap::from([(0, 0), (1, 0)]),
        }
    }

    fn sample_report() -> EvaluationReport {
        EvaluationReport::new(
            sample_metadata(vec![0, 1]),
            vec![
                row(1, ModelKind::Nb, 0.75),
                row(0, ModelKind::Bciqt, 1.0),
                row(0, ModelKind::Knn, 0.959),
                row(0, ModelKind::Nb, 0.889),
                row(1, ModelKind::Bciqt, 0.996),
                row(1, ModelKind::Knn, 0.699),
            ],
        )
    }

    #[test]
    fn rows_sort_by_category_then_model() {
        let report = sample_report();
        let order: Vec<(Label, ModelKind)> =
            report.rows().iter().map(|row| (row.category, row.model)).collect();
        assert_eq!(
            order,
            vec![
                (0, ModelKind::Bciqt),
                (0, ModelKind::Knn),
                (0, ModelKind::Nb),
                (1, ModelKind::Bciqt),
                (1, ModelKind::Knn),
                (1, ModelKind::Nb),
            ]
        );
    }

    #[test]
    fn csv_has_pinned_header_and_six_decimal_floats() {
        let report = EvaluationReport::new(
            sample_metadata(vec![0]),
            vec![ReportRow {
                category: 0,
                model: ModelKind::Bciqt,
                true_positive: 980,
                false_positive: 36,
                true_negative: 8984,
                false_negative: 0,
                recall: 1.0,
                precision: 980.0 / 1016.0,
                accuracy: 9964.0 / 10000.0,
                f1: 2.0 * (980.0 / 1016.0) / (1.0 + 980.0 / 1016.0),
            }],
        );
        let csv = report.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "category,model,tp,fp,tn,fn,recall,precision,accuracy,f1"
        );
        assert_eq!(
            lines.next().unwrap(),
            "0,bciqt,980,36,8984,0,1.000000,0.964567,0.996400,0.981964"
        );
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn json_round_trips_exactly() {
        let report = sample_report();
        let text = report.to_json_string().unwrap();
        assert!(text.starts_with("{\"metadata\":{\"top_k\":100,"), "got {text}");
        assert!(text.contains("\"rows\":[{\"category\":0,\"model\":\"bciqt\",\"tp\":90,"));
        let restored = EvaluationReport::from_json_str(&text).unwrap();
        assert_eq!(restored, report);
        assert_eq!(restored.to_json_string().unwrap(), text);
    }

    #[test]
    fn table_shows_computed_and_reference_columns() {
        let table = sample_report().render_table();
        let mut lines = table.lines();
        let header = lines.next().unwrap();
        for name in ["category", "bciqt", "knn", "nb", "dt*", "svm*"] {
            assert!(header.contains(name), "header missing {name}: {header}");
        }
        let first = lines.next().unwrap();
        assert!(first.contains("1.000") && first.contains("0.884") && first.contains("0.292"));
        let second = lines.next().unwrap();
        assert!(second.contains("0.996") && second.contains("0.710") && second.contains("0.390"));
        assert!(table
            .ends_with("* source=paper: reference recall values, not computed by this run\n"));
    }

    #[test]
    fn table_renders_dash_for_missing_cells() {
        let mut metadata = sample_metadata(vec![0, 9]);
        metadata.models = vec![ModelKind::Bciqt];
        let report = EvaluationReport::new(metadata, vec![row(0, ModelKind::Bciqt, 1.0)]);
        let table = report.render_table();
        let last_row = table.lines().nth(2).unwrap();
        // category 9 has no computed cell and no reference values
        assert!(last_row.starts_with(&format!("{:>8}", 9)));
        assert_eq!(last_row.split_whitespace().collect::<Vec<_>>(), vec!["9", "-", "-", "-"]);
    }

    #[test]
    fn reference_recall_covers_categories_zero_through_eight() {
        assert_eq!(dt_reference_recall(0), Some(0.884));
        assert_eq!(dt_reference_recall(8), Some(0.677));
        assert_eq!(svm_reference_recall(0), Some(0.292));
        assert_eq!(svm_reference_recall(8), Some(0.209));
        assert_eq!(dt_reference_recall(9), None);
        assert_eq!(svm_reference_recall(9), None);
    }

    #[test]
    fn recall_lookup_finds_present_cells_only() {
        let report = sample_report();
        assert_eq!(report.recall(0, ModelKind::Knn), Some(0.959));
        assert_eq!(report.recall(2, ModelKind::Knn), None);
    }
}
