use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{fit_scaler, split_zong, LabeledDataset, ScalerKind, SplitSpec};
use crate::error::{Error, Result};
use crate::flow::{train_flow, FlowKind, TrainConfig};

use super::metrics::{evaluate, EvalReport};
use super::scorers::{slt_score, typicality_from_nll};

/// Which likelihood statistic becomes the anomaly score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodTest {
    /// Negative log-likelihood.
    #[default]
    Slt,
    /// Distance of the NLL from the mean training NLL.
    Typicality,
}

impl FromStr for LikelihoodTest {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "slt" => Ok(Self::Slt),
            "typicality" => Ok(Self::Typicality),
            _ => Err(Error::InvalidArgument(format!("unknown test `{s}`"))),
        }
    }
}

impl fmt::Display for LikelihoodTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Slt => "slt",
            Self::Typicality => "typicality",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub kind: FlowKind,
    pub scaler: ScalerKind,
    pub test: LikelihoodTest,
    pub contamination: f64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            kind: FlowKind::Nice,
            scaler: ScalerKind::Robust,
            test: LikelihoodTest::Slt,
            contamination: 0.0,
        }
    }
}

/// One split/scale/train/score/evaluate round. `seed` drives both the split
/// and the flow (it replaces `config.seed`).
pub fn run_trial(ds: &LabeledDataset, spec: &TrialSpec, config: &TrainConfig, seed: u64) -> Result<EvalReport> {
    let (train, test) = split_zong(
        ds,
        &SplitSpec {
            seed,
            contamination_ratio: spec.contamination,
        },
    )?;
    let scaler = fit_scaler(&train, spec.scaler)?;
    let xs = scaler.apply(&train)?;
    let cfg = TrainConfig {
        seed,
        ..config.clone()
    };
    let (model, _) = train_flow(spec.kind, &xs, &cfg)?;
    let nll = slt_score(&model, &scaler, &test.features)?.values;
    let scores = match spec.test {
        LikelihoodTest::Slt => nll,
        LikelihoodTest::Typicality => typicality_from_nll(&nll, model.mean_nll(&xs)?),
    };
    evaluate(&scores, &test.labels, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::Rng;
    use crate::synth::GaussianSpec;

    #[test]
    fn separable_data_scores_high() {
        let mut rng = Rng::new(4);
        let normal = GaussianSpec::isotropic(3, 0.0, 1.0).unwrap().sample(&mut rng, 300).unwrap();
        let far = GaussianSpec::isotropic(3, 6.0, 1.0).unwrap().sample(&mut rng, 30).unwrap();
        let labels = (0..330).map(|i| u8::from(i >= 300)).collect();
        let ds = LabeledDataset::new(normal.vstack(&far).unwrap(), labels, "toy").unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            hidden_dim: 16,
            n_coupling: 4,
            batch_size: 64,
            ..TrainConfig::default()
        };
        let spec = TrialSpec::default();
        let rep = run_trial(&ds, &spec, &cfg, 1).unwrap();
        assert!(rep.auroc > 0.95, "{}", rep.auroc);
        assert_eq!(rep, run_trial(&ds, &spec, &cfg, 1).unwrap());
        let typ = TrialSpec {
            test: LikelihoodTest::Typicality,
            ..spec
        };
        assert!(run_trial(&ds, &typ, &cfg, 1).unwrap().auroc > 0.9);
        assert_eq!("Typicality".parse::<LikelihoodTest>().unwrap(), LikelihoodTest::Typicality);
    }
}
