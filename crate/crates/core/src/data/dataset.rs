use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::matrix::DataMatrix;

/// Feature matrix with one 0/1 anomaly label per row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: DataMatrix,
    /// 0 = normal, 1 = anomaly.
    pub labels: Vec<u8>,
    pub name: String,
}

impl LabeledDataset {
    pub fn new(features: DataMatrix, labels: Vec<u8>, name: impl Into<String>) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::dim(features.rows(), labels.len()));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
        }
        if !labels.contains(&0) {
            return Err(Error::TooFewNormals(0));
        }
        Ok(Self {
            features,
            labels,
            name: name.into(),
        })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_normal(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 0).count()
    }

    pub fn n_anomaly(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn normal_indices(&self) -> Vec<usize> {
        (0..self.rows()).filter(|&i| self.labels[i] == 0).collect()
    }

    pub fn anomaly_indices(&self) -> Vec<usize> {
        (0..self.rows()).filter(|&i| self.labels[i] == 1).collect()
    }
}

/// Reads a headed CSV. The label column, when present, is split off.
///
/// Parse errors report 1-based data row and column numbers (the header is
/// not counted).
pub fn read_csv(path: &Path, label_column: &str) -> Result<(DataMatrix, Option<Vec<u8>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = headers.iter().position(|h| h == label_column);
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::ParseError {
                row,
                col: record.len().min(headers.len()) + 1,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let parsed: f64 = cell.parse().map_err(|_| Error::ParseError {
                row,
                col: c + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !parsed.is_finite() {
                return Err(Error::ParseError {
                    row,
                    col: c + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            if Some(c) == label_idx {
                let label = match parsed {
                    v if v == 0.0 => 0,
                    v if v == 1.0 => 1,
                    _ => {
                        return Err(Error::ParseError {
                            row,
                            col: c + 1,
                            message: format!("label `{cell}` must be 0 or 1"),
                        })
                    }
                };
                labels.push(label);
            } else {
                values.push(parsed);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    let features = DataMatrix::from_vec(rows, names.len(), values)?.with_col_names(names)?;
    Ok((features, label_idx.map(|_| labels)))
}

/// Loads a labeled dataset; the label column must exist.
pub fn load_csv(path: &Path, label_column: &str) -> Result<LabeledDataset> {
    let (features, labels) = read_csv(path, label_column)?;
    let labels = labels.ok_or_else(|| Error::MissingLabelColumn(label_column.to_owned()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LabeledDataset::new(features, labels, name)
}

/// Writes features (and labels, if given) as a headed CSV.
pub fn write_csv(
    writer: impl std::io::Write,
    features: &DataMatrix,
    labels: Option<&[u8]>,
    label_column: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = match features.col_names() {
        Some(n) => n.to_vec(),
        None => (0..features.cols()).map(|j| format!("x{j}")).collect(),
    };
    if labels.is_some() {
        header.push(label_column.to_owned());
    }
    w.write_record(&header)?;
    for (r, row) in features.row_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = labels {
            rec.push(l[r].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_three_rows() {
        let f = file("a,b,label\n1,2,0\n3,4,1\n5,6,0\n");
        let ds = load_csv(f.path(), "label").unwrap();
        assert_eq!(ds.features.shape(), (3, 2));
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.features.row(1), &[3.0, 4.0]);
        assert_eq!(ds.features.col_names().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn label_column_anywhere() {
        let f = file("label,a\n1,2.5\n0,-1\n");
        let ds = load_csv(f.path(), "label").unwrap();
        assert_eq!(ds.features.as_slice(), &[2.5, -1.0]);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn missing_label_column() {
        let f = file("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::MissingLabelColumn(_))));
    }

    #[test]
    fn non_numeric_cell() {
        let f = file("a,b,label\n1,2,0\nabc,4,1\n");
        match load_csv(f.path(), "label") {
            Err(Error::ParseError { row, col, .. }) => assert_eq!((row, col), (2, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file() {
        let f = file("a,b,label\n");
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn bad_label_value() {
        let f = file("a,label\n1,2\n");
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::ParseError { row: 1, col: 2, .. })));
    }

    #[test]
    fn all_anomalies_rejected() {
        let f = file("a,label\n1,1\n2,1\n");
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::TooFewNormals(0))));
    }

    #[test]
    fn write_then_read() {
        let x = DataMatrix::from_rows(&[[0.1, 1e-17], [-3.5, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &x, Some(&[0, 1]), "label").unwrap();
        let f = file(std::str::from_utf8(&buf).unwrap());
        let ds = load_csv(f.path(), "label").unwrap();
        assert_eq!(ds.features.as_slice(), x.as_slice());
        assert_eq!(ds.labels, vec![0, 1]);
    }
}
