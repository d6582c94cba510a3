use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::rng::Rng;

use super::dataset::LabeledDataset;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    /// Anomalies injected into training, as a fraction of training normals.
    pub contamination_ratio: f64,
}

/// Row indices (into the source dataset) behind a split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitIndices {
    /// Training normals first, then injected anomalies.
    pub train: Vec<usize>,
    /// Held-out normals first, then the remaining anomalies.
    pub test: Vec<usize>,
    pub n_contaminants: usize,
}

/// Half of the normals (rounded down) go to training, everything else is test.
pub fn split_zong_indices(ds: &LabeledDataset, spec: &SplitSpec) -> Result<SplitIndices> {
    if !(0.0..1.0).contains(&spec.contamination_ratio) {
        return Err(Error::InvalidArgument(format!(
            "contamination ratio {} outside [0, 1)",
            spec.contamination_ratio
        )));
    }
    let mut normals = ds.normal_indices();
    if normals.len() < 2 {
        return Err(Error::TooFewNormals(normals.len()));
    }
    let anomalies = ds.anomaly_indices();
    let mut rng = Rng::new(spec.seed);
    rng.shuffle(&mut normals);
    let n_train = normals.len() / 2;
    let n_cont = (spec.contamination_ratio * n_train as f64).round() as usize;
    if n_cont > anomalies.len() {
        return Err(Error::InvalidArgument(format!(
            "contamination needs {n_cont} anomalies but only {} exist",
            anomalies.len()
        )));
    }
    let mut picked = vec![false; anomalies.len()];
    for k in rng.sample_indices(anomalies.len(), n_cont) {
        picked[k] = true;
    }
    let mut train = normals[..n_train].to_vec();
    let mut test = normals[n_train..].to_vec();
    let mut injected: Vec<usize> = Vec::with_capacity(n_cont);
    for (k, &i) in anomalies.iter().enumerate() {
        if picked[k] {
            injected.push(i);
        } else {
            test.push(i);
        }
    }
    train.extend(injected);
    Ok(SplitIndices {
        train,
        test,
        n_contaminants: n_cont,
    })
}

/// Unlabeled training matrix and labeled test set.
pub fn split_zong(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(DataMatrix, LabeledDataset)> {
    let idx = split_zong_indices(ds, spec)?;
    let train = ds.features.select_rows(&idx.train);
    let test = LabeledDataset {
        features: ds.features.select_rows(&idx.test),
        labels: idx.test.iter().map(|&i| ds.labels[i]).collect(),
        name: ds.name.clone(),
    };
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(normals: usize, anomalies: usize) -> LabeledDataset {
        let n = normals + anomalies;
        let x = DataMatrix::from_vec(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let labels = (0..n).map(|i| u8::from(i >= normals)).collect();
        LabeledDataset::new(x, labels, "toy").unwrap()
    }

    #[test]
    fn half_the_normals_train() {
        let ds = dataset(100, 10);
        let (train, test) = split_zong(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(train.rows(), 50);
        assert_eq!(test.n_normal(), 50);
        assert_eq!(test.n_anomaly(), 10);
        // no anomalies among the training values
        assert!(train.as_slice().iter().all(|&v| v < 100.0));
    }

    #[test]
    fn contamination_moves_anomalies() {
        let ds = dataset(200, 20);
        let spec = SplitSpec {
            seed: 4,
            contamination_ratio: 0.05,
        };
        let (train, test) = split_zong(&ds, &spec).unwrap();
        assert_eq!(train.rows(), 105);
        assert_eq!(train.as_slice().iter().filter(|&&v| v >= 200.0).count(), 5);
        assert_eq!(test.n_anomaly(), 15);
        assert_eq!(test.n_normal(), 100);
    }

    #[test]
    fn odd_normal_count_rounds_down() {
        let (train, test) = split_zong(&dataset(7, 1), &SplitSpec::default()).unwrap();
        assert_eq!((train.rows(), test.n_normal()), (3, 4));
    }

    #[test]
    fn same_seed_same_partition() {
        let ds = dataset(60, 6);
        let spec = SplitSpec {
            seed: 9,
            contamination_ratio: 0.03,
        };
        assert_eq!(split_zong_indices(&ds, &spec).unwrap(), split_zong_indices(&ds, &spec).unwrap());
        let other = SplitSpec { seed: 10, ..spec };
        assert_ne!(split_zong_indices(&ds, &spec).unwrap(), split_zong_indices(&ds, &other).unwrap());
    }

    #[test]
    fn too_few_normals() {
        let ds = dataset(1, 3);
        assert!(matches!(split_zong(&ds, &SplitSpec::default()), Err(Error::TooFewNormals(1))));
    }

    #[test]
    fn not_enough_anomalies_to_inject() {
        let ds = dataset(100, 1);
        let spec = SplitSpec {
            seed: 0,
            contamination_ratio: 0.1,
        };
        assert!(matches!(split_zong(&ds, &spec), Err(Error::InvalidArgument(_))));
    }

    proptest! {
        #[test]
        fn split_is_a_partition(normals in 2usize..80, anomalies in 0usize..20, seed in 0u64..1000, ratio in 0.0f64..0.05) {
            let ds = dataset(normals, anomalies);
            let spec = SplitSpec { seed, contamination_ratio: ratio };
            let Ok(idx) = split_zong_indices(&ds, &spec) else {
                // only possible when too few anomalies exist for the requested ratio
                prop_assert!((ratio * (normals / 2) as f64).round() as usize > anomalies);
                return Ok(());
            };
            let mut all: Vec<usize> = idx.train.iter().chain(&idx.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..normals + anomalies).collect::<Vec<_>>());
            let test_anom = idx.test.iter().filter(|&&i| ds.labels[i] == 1).count();
            prop_assert_eq!(test_anom + idx.n_contaminants, anomalies);
            prop_assert_eq!(idx.train.len() - idx.n_contaminants, normals / 2);
        }
    }
}
