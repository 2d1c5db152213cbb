//! Generic labeled CSV datasets.
//!
//! Rectangular numeric CSV, one sample per row. An optional header row is
//! auto-detected: if any cell of the first row fails to parse as a number,
//! the row is treated as a header. The label column is selected by name
//! (requires a header) or by zero-based index.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{Dataset, DatasetError, Label, RawSample};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// A string of digits selects by index, anything else by name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(index) => LabelColumn::Index(index),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

pub fn load_csv_path<T: Real>(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
) -> Result<Dataset<T>, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_csv(file, label_column)
}

pub fn load_csv<T: Real>(
    reader: impl Read,
    label_column: &LabelColumn,
) -> Result<Dataset<T>, DatasetError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let records: Vec<csv::StringRecord> =
        csv_reader.records().collect::<Result<_, csv::Error>>()?;

    let first = records.first().ok_or(DatasetError::EmptyDataset)?;
    let has_header = first.iter().any(|cell| cell.parse::<f64>().is_err());
    let width = first.len();
    if width < 2 {
        return Err(DatasetError::ZeroDimension("feature columns"));
    }

    let label_index = match label_column {
        LabelColumn::Index(index) if *index < width => *index,
        LabelColumn::Index(index) => {
            return Err(DatasetError::LabelColumnNotFound(index.to_string()))
        }
        LabelColumn::Name(name) => {
            if !has_header {
                return Err(DatasetError::LabelColumnNotFound(name.clone()));
            }
            first
                .iter()
                .position(|cell| cell == name)
                .ok_or_else(|| DatasetError::LabelColumnNotFound(name.clone()))?
        }
    };

    let data_rows = records.iter().enumerate().skip(usize::from(has_header));
    let mut samples = Vec::new();
    for (row_index, record) in data_rows {
        let row = row_index + 1; // 1-based file line for messages
        if record.len() != width {
            return Err(DatasetError::RaggedRows {
                row,
                expected: width,
                found: record.len(),
            });
        }
        let mut features = Vec::with_capacity(width - 1);
        let mut label = None;
        for (column, cell) in record.iter().enumerate() {
            if column == label_index {
                label = Some(parse_label(cell, row)?);
            } else {
                features.push(parse_feature::<T>(cell, row, column)?);
            }
        }
        samples.push(RawSample::new(features, label.expect("label column visited")));
    }
    Dataset::from_samples(samples)
}

fn parse_feature<T: Real>(cell: &str, row: usize, column: usize) -> Result<T, DatasetError> {
    let value: f64 = cell.parse().map_err(|_| DatasetError::NonNumericFeature {
        row,
        column,
        value: cell.to_string(),
    })?;
    if !value.is_finite() {
        return Err(DatasetError::NonNumericFeature { row, column, value: cell.to_string() });
    }
    if value < 0.0 {
        return Err(DatasetError::NegativeFeature { row, column, value });
    }
    Ok(T::from_f64_lossy(value))
}

fn parse_label(cell: &str, row: usize) -> Result<Label, DatasetError> {
    let invalid = || DatasetError::InvalidLabel { row, value: cell.to_string() };
    let value: f64 = cell.parse().map_err(|_| invalid())?;
    if !value.is_finite() || value.fract() != 0.0 || value < 0.0 || value > f64::from(u32::MAX) {
        return Err(invalid());
    }
    Ok(value as Label)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, column: &LabelColumn) -> Result<Dataset<f64>, DatasetError> {
        load_csv(text.as_bytes(), column)
    }

    #[test]
    fn loads_headerless_rows_with_index_column() {
        let text = "1,2,3,0\n4,5,6,1\n7,8,9,0\n1,1,1,1\n";
        let dataset = load(text, &LabelColumn::Index(3)).unwrap();
        assert_eq!(dataset.dimension(), 3);
        assert_eq!(dataset.len(), 4);
        assert_eq!(dataset.samples()[1].features, vec![4.0, 5.0, 6.0]);
        assert_eq!(dataset.samples()[1].label, 1);
    }

    #[test]
    fn detects_header_and_selects_by_name() {
        let text = "a,b,target\n1,2,0\n3,4,1\n";
        let dataset = load(text, &LabelColumn::Name("target".into())).unwrap();
        assert_eq!(dataset.dimension(), 2);
        assert_eq!(dataset.len(), 2);
        assert_eq!(dataset.samples()[0].label, 0);
    }

    #[test]
    fn label_column_may_be_interior() {
        let text = "1,0,2\n3,1,4\n";
        let dataset = load(text, &LabelColumn::Index(1)).unwrap();
        assert_eq!(dataset.samples()[0].features, vec![1.0, 2.0]);
        assert_eq!(dataset.samples()[1].label, 1);
    }

    #[test]
    fn text_in_feature_column_is_non_numeric() {
        let text = "1,2,0\n1,oops,0\n";
        let err = load(text, &LabelColumn::Index(2)).unwrap_err();
        assert!(matches!(
            err,
            DatasetError::NonNumericFeature { row: 2, column: 1, .. }
        ));
        // a non-numeric cell in the FIRST row is absorbed by header
        // auto-detection, leaving no data rows here
        assert!(matches!(
            load("1,oops,0\n", &LabelColumn::Index(2)).unwrap_err(),
            DatasetError::EmptyDataset
        ));
    }

    #[test]
    fn negative_feature_is_rejected() {
        let text = "1,-1,0\n";
        let err = load(text, &LabelColumn::Index(2)).unwrap_err();
        assert!(matches!(err, DatasetError::NegativeFeature { row: 1, column: 1, .. }));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let text = "1,2,0\n1,2\n";
        let err = load(text, &LabelColumn::Index(2)).unwrap_err();
        assert!(matches!(err, DatasetError::RaggedRows { row: 2, expected: 3, found: 2 }));
    }

    #[test]
    fn missing_name_and_out_of_range_index_are_reported() {
        let text = "a,b,c\n1,2,3\n";
        assert!(matches!(
            load(text, &LabelColumn::Name("missing".into())).unwrap_err(),
            DatasetError::LabelColumnNotFound(_)
        ));
        assert!(matches!(
            load(text, &LabelColumn::Index(9)).unwrap_err(),
            DatasetError::LabelColumnNotFound(_)
        ));
    }

    #[test]
    fn non_integer_label_is_rejected() {
        let text = "1,2,0.5\n";
        let err = load(text, &LabelColumn::Index(2)).unwrap_err();
        assert!(matches!(err, DatasetError::InvalidLabel { row: 1, .. }));
    }

    #[test]
    fn name_selection_without_header_fails() {
        let text = "1,2,0\n";
        assert!(matches!(
            load(text, &LabelColumn::Name("y".into())).unwrap_err(),
            DatasetError::LabelColumnNotFound(_)
        ));
    }
}
