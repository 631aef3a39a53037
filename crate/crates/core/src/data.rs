//! Labeled datasets, index partitions and the CSV dataset format.
//!
//! The CSV format is a header row `x0,...,x{p-1},y` followed by one row per
//! sample: real-valued features and a 0-based integer label in the last
//! column. Fields are comma-separated and use `.` as decimal separator.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 || p == 0 {
            return Err(Error::invalid(format!("dataset shape {n}x{p} is empty")));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: labels.len(),
            });
        }
        if num_classes < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features contain non-finite values"));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Rows at `indices`, in that order. Keeps the class count of `self`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("empty subset"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!("row {bad} out of range")));
        }
        Ok(Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        })
    }

    /// Reads the CSV dataset format. The class count is `1 + max label`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| csv_parse_error(e, 1))?.clone();
        let width = header.len();
        if width < 2 {
            return Err(Error::Parse {
                line: 1,
                message: "header must name at least one feature column and \"y\"".into(),
            });
        }
        if &header[width - 1] != "y" {
            return Err(Error::Parse {
                line: 1,
                message: "last column must be named \"y\"".into(),
            });
        }
        for (j, name) in header.iter().take(width - 1).enumerate() {
            if name != format!("x{j}") {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("feature column {j} is named {name:?}, expected \"x{j}\""),
                });
            }
        }
        let p = width - 1;

        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut record = csv::StringRecord::new();
        loop {
            let more = rdr
                .read_record(&mut record)
                .map_err(|e| csv_parse_error(e, 0))?;
            if !more {
                break;
            }
            let line = record.position().map_or(0, |pos| pos.line());
            for (j, field) in record.iter().take(p).enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("x{j} value {field:?} is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("x{j} value {field:?} is not finite"),
                    });
                }
                values.push(v);
            }
            let raw = &record[p];
            let y: usize = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("label y {raw:?} is not a non-negative integer"),
            })?;
            labels.push(y);
        }
        if labels.is_empty() {
            return Err(Error::Parse {
                line: 2,
                message: "no data rows".into(),
            });
        }
        let num_classes = labels.iter().max().map_or(0, |m| m.saturating_add(1));
        let features = Array2::from_shape_vec((labels.len(), p), values)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(features, labels, num_classes)
    }

    pub fn from_csv_path(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Writes the CSV dataset format. Floats use the shortest representation
    /// that parses back to the same value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.num_features()).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        let mut fields = Vec::with_capacity(header.len());
        for (row, y) in self.features.rows().into_iter().zip(&self.labels) {
            fields.clear();
            fields.extend(row.iter().map(|v| v.to_string()));
            fields.push(y.to_string());
            wtr.write_record(&fields)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_parse_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

/// How to partition `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    /// Parts with the given relative sizes; must sum to one.
    Fractions(Vec<f64>),
    /// `k` folds whose sizes differ by at most one.
    Folds(usize),
}

/// Randomly partitions `0..n`. Each part is returned in ascending order.
pub fn split_indices(
    n: usize,
    spec: &SplitSpec,
    rng: &mut RandomSource,
) -> Result<Vec<Vec<usize>>> {
    let sizes = match spec {
        SplitSpec::Folds(k) => {
            let k = *k;
            if k == 0 || k > n {
                return Err(Error::invalid(format!(
                    "cannot split {n} samples into {k} folds"
                )));
            }
            (0..k)
                .map(|i| n / k + usize::from(i < n % k))
                .collect::<Vec<_>>()
        }
        SplitSpec::Fractions(fracs) => {
            if fracs.is_empty() || fracs.len() > n {
                return Err(Error::invalid(format!(
                    "cannot split {n} samples into {} parts",
                    fracs.len()
                )));
            }
            if fracs.iter().any(|f| !f.is_finite() || *f <= 0.0) {
                return Err(Error::invalid("split fractions must be positive"));
            }
            let total: f64 = fracs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("split fractions sum to {total}")));
            }
            let mut sizes = Vec::with_capacity(fracs.len());
            let mut cum = 0.0;
            let mut assigned = 0usize;
            for (i, f) in fracs.iter().enumerate() {
                cum += f;
                let end = if i + 1 == fracs.len() {
                    n
                } else {
                    ((cum * n as f64).round() as usize).min(n)
                };
                sizes.push(end.saturating_sub(assigned));
                assigned = assigned.max(end);
            }
            if sizes.contains(&0) {
                return Err(Error::invalid(format!(
                    "split of {n} samples by {fracs:?} leaves an empty part"
                )));
            }
            sizes
        }
    };

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        let mut part = perm[start..start + size].to_vec();
        part.sort_unstable();
        parts.push(part);
        start += size;
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn check_partition(parts: &[Vec<usize>], n: usize) {
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn four_into_two_folds() {
        let parts = split_indices(4, &SplitSpec::Folds(2), &mut RandomSource::new(0)).unwrap();
        assert_eq!(parts.len(), 2);
        check_partition(&parts, 4);
        assert!(parts.iter().all(|p| p.len() == 2));
    }

    #[test]
    fn five_into_two_folds_sizes() {
        let parts = split_indices(5, &SplitSpec::Folds(2), &mut RandomSource::new(9)).unwrap();
        let mut sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3]);
        check_partition(&parts, 5);
    }

    #[test]
    fn half_split_is_reproducible() {
        let spec = SplitSpec::Fractions(vec![0.5, 0.5]);
        let a = split_indices(1000, &spec, &mut RandomSource::new(11)).unwrap();
        let b = split_indices(1000, &spec, &mut RandomSource::new(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].len(), 500);
        check_partition(&a, 1000);
    }

    #[test]
    fn too_many_parts() {
        assert!(split_indices(3, &SplitSpec::Folds(4), &mut RandomSource::new(0)).is_err());
        assert!(split_indices(0, &SplitSpec::Folds(1), &mut RandomSource::new(0)).is_err());
        let frac = SplitSpec::Fractions(vec![0.99, 0.01]);
        assert!(split_indices(10, &frac, &mut RandomSource::new(0)).is_err());
    }

    #[test]
    fn dataset_validation() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(LabeledDataset::new(x.clone(), vec![0, 1], 2).is_ok());
        assert!(LabeledDataset::new(x.clone(), vec![0, 2], 2).is_err());
        assert!(LabeledDataset::new(x.clone(), vec![0], 2).is_err());
        assert!(LabeledDataset::new(x, vec![0, 0], 1).is_err());
        let bad = array![[f64::INFINITY, 0.0]];
        assert!(LabeledDataset::new(bad, vec![0], 2).is_err());
    }

    #[test]
    fn reads_small_csv() {
        let text = "x0,x1,y\n1.5,2,0\n-3,4e-2,1\n0,0,2\n";
        let d = LabeledDataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.num_features(), 2);
        assert_eq!(d.num_classes(), 3);
        assert_eq!(d.row(1)[1], 0.04);
    }

    #[test]
    fn missing_label_column_names_y() {
        let err = LabeledDataset::from_csv_reader("x0,x1\n1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("\"y\""), "{err}");
    }

    #[test]
    fn bad_rows_report_line_numbers() {
        let neg = "x0,y\n1,0\n2,-1\n";
        match LabeledDataset::from_csv_reader(neg.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let frac = "x0,y\n1,0.5\n";
        assert!(matches!(
            LabeledDataset::from_csv_reader(frac.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let ragged = "x0,y\n1,0\n1,2,3\n";
        assert!(matches!(
            LabeledDataset::from_csv_reader(ragged.as_bytes()),
            Err(Error::Parse { .. })
        ));
        let nan = "x0,y\nNaN,0\n";
        assert!(LabeledDataset::from_csv_reader(nan.as_bytes()).is_err());
        let named = "a,y\n1,0\n";
        assert!(LabeledDataset::from_csv_reader(named.as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let x = array![[0.1, -1e-300], [std::f64::consts::PI, 12345.678901234567]];
        let d = LabeledDataset::new(x, vec![1, 0], 2).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = LabeledDataset::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }
}
