use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::metrics::average_ranks;

pub const DEFAULT_FAIL_THRESHOLD: f64 = 9.0;

/// AUROC per (dataset, model). Missing cells are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AurocMatrix {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    /// `values[dataset][model]`.
    pub values: Vec<Vec<f64>>,
}

impl AurocMatrix {
    pub fn new(models: Vec<String>, datasets: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != datasets.len() {
            return Err(Error::dim(datasets.len(), values.len()));
        }
        if let Some(row) = values.iter().find(|r| r.len() != models.len()) {
            return Err(Error::dim(models.len(), row.len()));
        }
        Ok(Self { models, datasets, values })
    }

    /// Header `dataset,<model>,...`; one row per dataset. Empty, `NaN` or
    /// `-` cells are missing.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let models: Vec<String> = reader.headers()?.iter().skip(1).map(str::to_owned).collect();
        let mut datasets = Vec::new();
        let mut values = Vec::new();
        for (r, rec) in reader.records().enumerate() {
            let rec = rec?;
            let mut it = rec.iter();
            datasets.push(it.next().unwrap_or_default().to_owned());
            let row: Result<Vec<f64>> = it
                .enumerate()
                .map(|(c, cell)| match cell {
                    "" | "-" | "NaN" | "nan" => Ok(f64::NAN),
                    _ => cell.parse::<f64>().map_err(|_| Error::ParseError {
                        row: r + 1,
                        col: c + 2,
                        message: format!("`{cell}` is not a number"),
                    }),
                })
                .collect();
            values.push(row?);
        }
        if datasets.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Self::new(models, datasets, values)
    }

    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m == name)
    }

    /// Keeps the named models, in the given order.
    pub fn select_models(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.model_index(n).ok_or_else(|| Error::InvalidArgument(format!("unknown model `{n}`"))))
            .collect::<Result<_>>()?;
        Ok(Self {
            models: names.iter().map(|s| s.to_string()).collect(),
            datasets: self.datasets.clone(),
            values: self.values.iter().map(|row| idx.iter().map(|&i| row[i]).collect()).collect(),
        })
    }

    /// Column means over datasets.
    pub fn model_means(&self) -> Vec<f64> {
        let n = self.datasets.len() as f64;
        (0..self.models.len())
            .map(|m| self.values.iter().map(|r| r[m]).sum::<f64>() / n)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub models: Vec<String>,
    pub datasets: Vec<String>,
    /// `ranks[dataset][model]`; 1 is the highest AUROC.
    pub ranks: Vec<Vec<f64>>,
    pub avg_rank: Vec<f64>,
    pub top2_ratio: Vec<f64>,
    pub fail_ratio: Vec<f64>,
    pub fail_threshold: f64,
}

impl RankTable {
    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m == name)
    }
}

pub fn rank_table(matrix: &AurocMatrix, fail_threshold: f64) -> Result<RankTable> {
    for (d, row) in matrix.values.iter().enumerate() {
        if let Some(m) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::IncompleteMatrix(format!(
                "{} / {}",
                matrix.datasets[d], matrix.models[m]
            )));
        }
    }
    let m = matrix.models.len();
    let n = matrix.datasets.len() as f64;
    let ranks: Vec<Vec<f64>> = matrix
        .values
        .iter()
        .map(|row| {
            let neg: Vec<f64> = row.iter().map(|v| -v).collect();
            average_ranks(&neg)
        })
        .collect();
    let per_model = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        (0..m).map(|j| ranks.iter().map(|r| f(r[j])).sum::<f64>() / n).collect()
    };
    Ok(RankTable {
        models: matrix.models.clone(),
        datasets: matrix.datasets.clone(),
        avg_rank: per_model(&|r| r),
        top2_ratio: per_model(&|r| f64::from(u8::from(r <= 2.0))),
        fail_ratio: per_model(&|r| f64::from(u8::from(r >= fail_threshold))),
        ranks,
        fail_threshold,
    })
}
