use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::label::{LabelId, LabelVocabulary};

/// Per-column z-score parameters applied at load time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    /// Population standard deviations; zero-variance columns store 1.
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = (*v - m) / s;
        }
    }
}

/// Labeled feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<LabelId>,
    pub vocabulary: LabelVocabulary,
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<LabelId> {
        self.labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn class_counts(&self) -> BTreeMap<LabelId, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    pub fn label_name(&self, label: LabelId) -> String {
        self.vocabulary
            .name(label)
            .map_or_else(|| label.to_string(), str::to_owned)
    }

    /// Writes `x0,…,x{d-1},label` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim()).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (x, &l) in self.features.iter().zip(&self.labels) {
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.push(self.label_name(l));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a delimited file with a header row.
    ///
    /// `label_column` defaults to `label`. All other columns must be numeric
    /// and are z-scored; labels get ids in first-appearance order.
    pub fn from_csv<R: Read>(input: R, label_column: Option<&str>) -> Result<Self, ExperimentError> {
        let label_column = label_column.unwrap_or("label");
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers()?.clone();
        let label_idx = headers
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| ExperimentError::MissingLabelColumn(label_column.to_owned()))?;
        let columns: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, h)| h.to_owned())
            .collect();

        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut vocabulary = LabelVocabulary::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let mut x = Vec::with_capacity(columns.len());
            for (i, cell) in record.iter().enumerate() {
                if i == label_idx {
                    continue;
                }
                let v: f64 =
                    cell.parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| ExperimentError::NonNumeric {
                            row: row + 1,
                            column: headers.get(i).unwrap_or_default().to_owned(),
                            value: cell.to_owned(),
                        })?;
                x.push(v);
            }
            let label = record.get(label_idx).unwrap_or_default();
            labels.push(vocabulary.intern(label));
            features.push(x);
        }
        if features.is_empty() {
            return Err(ExperimentError::EmptyData);
        }

        let n = features.len() as f64;
        let d = columns.len();
        let mut means = vec![0.0; d];
        for x in &features {
            for (m, v) in means.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut stds = vec![0.0; d];
        for x in &features {
            for ((s, v), m) in stds.iter_mut().zip(x).zip(&means) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut stds {
            *s = s.sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        let standardization = Standardization { columns, means, stds };
        for x in &mut features {
            standardization.apply(x);
        }
        Ok(Dataset {
            features,
            labels,
            vocabulary,
            standardization: Some(standardization),
        })
    }

    pub fn from_csv_path(path: &Path, label_column: Option<&str>) -> Result<Self, ExperimentError> {
        let file = std::fs::File::open(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_csv(std::io::BufReader::new(file), label_column)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_two_features() {
        let data = "a,b,label\n1,2,A\n3,4,B\n5,6,A\n";
        let ds = Dataset::from_csv(data.as_bytes(), None).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.labels, vec![LabelId(0), LabelId(1), LabelId(0)]);
        assert_eq!(ds.vocabulary.name(LabelId(1)), Some("B"));
        // column a: mean 3, population std sqrt(8/3)
        let s = (8.0f64 / 3.0).sqrt();
        assert!((ds.features[0][0] + 2.0 / s).abs() < 1e-12);
        assert!(ds.features[1][0].abs() < 1e-12);
    }

    #[test]
    fn constant_column_becomes_zero() {
        let data = "label,c\nx,7\ny,7\n";
        let ds = Dataset::from_csv(data.as_bytes(), None).unwrap();
        assert_eq!(ds.features, vec![vec![0.0], vec![0.0]]);
        assert_eq!(ds.standardization.unwrap().stds, vec![1.0]);
    }

    #[test]
    fn label_column_can_be_anywhere() {
        let data = "kind,x\nB,1\nA,2\n";
        let ds = Dataset::from_csv(data.as_bytes(), Some("kind")).unwrap();
        assert_eq!(ds.vocabulary.get("B"), Some(LabelId(0)));
        assert_eq!(ds.vocabulary.get("A"), Some(LabelId(1)));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            Dataset::from_csv("a,b\n1,2\n".as_bytes(), None),
            Err(ExperimentError::MissingLabelColumn(_))
        ));
        assert!(matches!(
            Dataset::from_csv("a,label\n1,A\nfoo,B\n".as_bytes(), None),
            Err(ExperimentError::NonNumeric { row: 2, .. })
        ));
        assert!(matches!(
            Dataset::from_csv("a,label\n".as_bytes(), None),
            Err(ExperimentError::EmptyData)
        ));
        assert!(Dataset::from_csv("".as_bytes(), None).is_err());
    }

    #[test]
    fn write_then_read() {
        let ds = Dataset::from_csv("x,label\n1,u\n2,v\n3,u\n".as_bytes(), None).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::from_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back.labels, ds.labels);
        for (a, b) in back.features.iter().zip(&ds.features) {
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }
}
