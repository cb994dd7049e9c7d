use std::path::Path;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use super::ObjectiveError;
use crate::rng::aux_stream;

/// Options for reading a comma-separated dataset.
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub feature_count: usize,
    /// Zero-based column holding the 0/1 label. Every other column is a feature.
    pub label_column: usize,
    /// Shift and scale each feature column to mean 0, variance 1.
    pub standardize: bool,
    /// Expected lowercase hex SHA-256 of the file contents.
    pub checksum: Option<String>,
}

impl CsvOptions {
    /// Trailing label after `feature_count` features, standardized, no checksum.
    pub fn trailing_label(feature_count: usize) -> Self {
        Self { feature_count, label_column: feature_count, standardize: true, checksum: None }
    }
}

/// Feature rows with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Standardizes every column with its population mean and variance.
    /// Constant columns are centered and left at zero.
    pub fn standardize(&mut self) {
        let n = self.len() as f64;
        for j in 0..self.feature_count() {
            let mean = self.features.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = self.features.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            for r in &mut self.features {
                r[j] = if sd > 0.0 { (r[j] - mean) / sd } else { 0.0 };
            }
        }
    }
}

pub fn parse_csv_dataset(text: &str, opts: &CsvOptions) -> Result<Dataset, ObjectiveError> {
    let columns = opts.feature_count + 1;
    if opts.label_column >= columns {
        return Err(ObjectiveError::Parse {
            line: 0,
            msg: format!("label column {} outside {columns} columns", opts.label_column),
        });
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != columns {
            return Err(ObjectiveError::Parse {
                line,
                msg: format!("expected {columns} fields, found {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(opts.feature_count);
        let mut label = 0.0;
        for (c, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| ObjectiveError::Parse {
                line,
                msg: format!("column {}: cannot parse {field:?}", c + 1),
            })?;
            if !v.is_finite() {
                return Err(ObjectiveError::Parse { line, msg: format!("column {}: non-finite value", c + 1) });
            }
            if c == opts.label_column {
                if v != 0.0 && v != 1.0 {
                    return Err(ObjectiveError::Parse { line, msg: format!("label {field:?} is not 0 or 1") });
                }
                label = v;
            } else {
                row.push(v);
            }
        }
        features.push(row);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(ObjectiveError::EmptyDataset);
    }
    let mut data = Dataset { features, labels };
    if opts.standardize {
        data.standardize();
    }
    Ok(data)
}

pub fn load_csv_dataset(path: &Path, opts: &CsvOptions) -> Result<Dataset, ObjectiveError> {
    let bytes = std::fs::read(path)?;
    if let Some(expected) = &opts.checksum {
        let found = hex::encode(Sha256::digest(&bytes));
        if !found.eq_ignore_ascii_case(expected.trim()) {
            return Err(ObjectiveError::Checksum { expected: expected.clone(), found });
        }
    }
    let text = String::from_utf8_lossy(&bytes);
    parse_csv_dataset(&text, opts)
}

/// Row indices owned by each node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn nodes(&self) -> usize {
        self.blocks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }
}

/// Shuffles `0..rows` with a seeded stream and cuts it into `parts`
/// contiguous blocks. The first `rows % parts` blocks get one extra row.
pub fn partition_even(rows: usize, parts: usize, seed: u64) -> Result<Partition, ObjectiveError> {
    if parts == 0 || parts > rows {
        return Err(ObjectiveError::BadPartition { rows, parts });
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut aux_stream(seed, 2));
    let base = rows / parts;
    let extra = rows % parts;
    let mut blocks = Vec::with_capacity(parts);
    let mut start = 0;
    for b in 0..parts {
        let len = base + usize::from(b < extra);
        blocks.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(Partition { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(features: usize) -> CsvOptions {
        CsvOptions { standardize: false, ..CsvOptions::trailing_label(features) }
    }

    #[test]
    fn three_row_fixture_standardizes_exactly() {
        let text = "1,10,0\n2,10,1\n3,10,1\n";
        let d = parse_csv_dataset(text, &CsvOptions::trailing_label(2)).unwrap();
        // mean 2, population variance 2/3
        let s = (1.5f64).sqrt();
        assert_eq!(d.labels, vec![0.0, 1.0, 1.0]);
        let col0: Vec<f64> = d.features.iter().map(|r| r[0]).collect();
        for (a, b) in col0.iter().zip([-s, 0.0, s]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(d.features.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn label_column_may_lead() {
        let d = parse_csv_dataset("1,5,6\n0,7,8\n", &CsvOptions { label_column: 0, ..raw(2) }).unwrap();
        assert_eq!(d.labels, vec![1.0, 0.0]);
        assert_eq!(d.features[1], vec![7.0, 8.0]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse_csv_dataset("", &raw(2)), Err(ObjectiveError::EmptyDataset)));
        match parse_csv_dataset("1,2,0\n1,x,1\n", &raw(2)) {
            Err(ObjectiveError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_csv_dataset("1,2,0\n\n1,2,2\n", &raw(2)) {
            Err(ObjectiveError::Parse { line: 3, msg }) => assert!(msg.contains("not 0 or 1")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_csv_dataset("1,0\n", &raw(2)), Err(ObjectiveError::Parse { line: 1, .. })));
    }

    #[test]
    fn checksum_is_verified() {
        let dir = std::env::temp_dir().join(format!("dcdgd-data-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tiny.csv");
        std::fs::write(&path, "1,0\n2,1\n").unwrap();
        let good = hex::encode(Sha256::digest(b"1,0\n2,1\n"));
        let ok = CsvOptions { checksum: Some(good), ..raw(1) };
        assert_eq!(load_csv_dataset(&path, &ok).unwrap().len(), 2);
        let bad = CsvOptions { checksum: Some("00".into()), ..raw(1) };
        assert!(matches!(load_csv_dataset(&path, &bad), Err(ObjectiveError::Checksum { .. })));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn partition_sizes() {
        let p = partition_even(4601, 10, 1).unwrap();
        let sizes = p.sizes();
        assert_eq!(sizes[0], 461);
        assert!(sizes[1..].iter().all(|&s| s == 460));
        let mut all: Vec<usize> = p.blocks.concat();
        all.sort_unstable();
        assert_eq!(all, (0..4601).collect::<Vec<_>>());

        assert_eq!(partition_even(7, 1, 0).unwrap().sizes(), vec![7]);
        assert!(partition_even(50, 50, 0).unwrap().sizes().iter().all(|&s| s == 1));
        assert!(partition_even(5, 0, 0).is_err());
        assert!(partition_even(5, 6, 0).is_err());
    }

    #[test]
    fn partition_is_seeded() {
        assert_eq!(partition_even(100, 3, 9).unwrap(), partition_even(100, 3, 9).unwrap());
        assert_ne!(partition_even(100, 3, 9).unwrap(), partition_even(100, 3, 10).unwrap());
    }
}
