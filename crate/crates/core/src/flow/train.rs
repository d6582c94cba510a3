use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::matrix::DataMatrix;
use crate::numeric::rng::Rng;

use super::config::TrainConfig;
use super::model::{build_flow, FlowKind, FlowModel};
use super::optim::{cosine_warm_restart_lr, AdamW};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    /// Mean mini-batch NLL per epoch, weighted by batch size.
    pub nll: Vec<f64>,
    /// Learning rate at the first step of each epoch.
    pub lr: Vec<f64>,
}

/// Training that stopped early because the loss stopped being finite.
#[derive(Debug)]
pub struct Diverged {
    pub error: Error,
    pub model: FlowModel,
    pub history: LossHistory,
}

/// Maximum-likelihood training of a fresh flow on `x`.
///
/// Mini-batches are reshuffled every epoch from an RNG seeded by
/// `config.seed`; the same seed initialises the coupling networks.
pub fn train_flow(kind: FlowKind, x: &DataMatrix, config: &TrainConfig) -> Result<(FlowModel, LossHistory)> {
    train_flow_with_partial(kind, x, config).map_err(|d| d.error)
}

/// Like [`train_flow`], but a divergence hands back the partial state.
pub fn train_flow_with_partial(
    kind: FlowKind,
    x: &DataMatrix,
    config: &TrainConfig,
) -> std::result::Result<(FlowModel, LossHistory), Box<Diverged>> {
    let fail = |error: Error| {
        Box::new(Diverged {
            error,
            model: FlowModel {
                kind,
                input_dim: x.cols(),
                padded: false,
                layers: Vec::new(),
                scaling_logs: Vec::new(),
            },
            history: LossHistory::default(),
        })
    };
    if x.rows() < 2 {
        return Err(fail(Error::NotEnoughRows(x.rows())));
    }
    let mut rng = Rng::new(config.seed);
    let model = build_flow(kind, x.cols(), config, &mut rng).map_err(fail)?;
    fit(model, x, config, &mut rng)
}

/// Continues training `model` on `x` for `config.epochs` epochs.
pub fn fit(
    mut model: FlowModel,
    x: &DataMatrix,
    config: &TrainConfig,
    rng: &mut Rng,
) -> std::result::Result<(FlowModel, LossHistory), Box<Diverged>> {
    let n = x.rows();
    let batch = config.batch_size.min(n).max(1);
    let per_epoch = n.div_ceil(batch);
    let total = config.epochs * per_epoch;
    let mut opt = AdamW::new(config.beta1, config.beta2, config.eps, config.weight_decay);
    let mut history = LossHistory::default();
    let mut step = 0;
    for epoch in 0..config.epochs {
        let order = rng.permutation(n);
        let mut sum = 0.0;
        history.lr.push(cosine_warm_restart_lr(step, total, config.learning_rate));
        for chunk in order.chunks(batch) {
            let xb = x.select_rows(chunk);
            let lr = cosine_warm_restart_lr(step, total, config.learning_rate);
            let (loss, grads) = match model.nll_and_grad(&xb) {
                Ok(v) if v.0.is_finite() => v,
                Ok(_) | Err(Error::NonFiniteActivation { .. }) => {
                    return Err(Box::new(Diverged {
                        error: Error::DivergedLoss { epoch },
                        model,
                        history,
                    }))
                }
                Err(e) => {
                    return Err(Box::new(Diverged {
                        error: e,
                        model,
                        history,
                    }))
                }
            };
            sum += loss * chunk.len() as f64;
            opt.step(lr, model.params_mut(), grads.buffers());
            step += 1;
        }
        history.nll.push(sum / n as f64);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::standard_normal_sample;

    fn small(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 128,
            n_coupling: 4,
            hidden_dim: 16,
            n_hidden_layers: 1,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_built_model() {
        let x = standard_normal_sample(&mut Rng::new(1), 50, 3);
        let cfg = small(0);
        let (m, h) = train_flow(FlowKind::Nice, &x, &cfg).unwrap();
        let built = build_flow(FlowKind::Nice, 3, &cfg, &mut Rng::new(cfg.seed)).unwrap();
        assert_eq!(m, built);
        assert!(h.nll.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let x = standard_normal_sample(&mut Rng::new(1), 300, 4);
        let a = train_flow(FlowKind::RealNvp, &x, &small(3)).unwrap();
        let b = train_flow(FlowKind::RealNvp, &x, &small(3)).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn training_reduces_nll() {
        let mut rng = Rng::new(2);
        let mut x = standard_normal_sample(&mut rng, 1000, 2);
        // shifted and stretched so the identity start is clearly suboptimal
        for r in 0..x.rows() {
            let row = x.row_mut(r);
            row[0] = 3.0 * row[0] + 2.0;
            row[1] = 0.5 * row[1] - 1.0 + 0.3 * row[0];
        }
        for kind in [FlowKind::Nice, FlowKind::RealNvp] {
            let cfg = small(30);
            let before = build_flow(kind, 2, &cfg, &mut Rng::new(cfg.seed)).unwrap().mean_nll(&x).unwrap();
            let (m, h) = train_flow(kind, &x, &cfg).unwrap();
            let after = m.mean_nll(&x).unwrap();
            assert!(after < before, "{kind}: {after} !< {before}");
            assert_eq!(h.nll.len(), 30);
            let first: f64 = h.nll[..10].iter().sum();
            let last: f64 = h.nll[20..].iter().sum();
            assert!(last <= first);
            assert_eq!(h.lr[0], cfg.learning_rate);
        }
    }

    #[test]
    fn too_few_rows() {
        let x = DataMatrix::zeros(1, 2);
        assert!(matches!(train_flow(FlowKind::Nice, &x, &small(1)), Err(Error::NotEnoughRows(1))));
    }

    #[test]
    fn divergence_keeps_partial_history() {
        let x = standard_normal_sample(&mut Rng::new(5), 64, 2);
        let mut cfg = small(5);
        cfg.learning_rate = 1e300;
        cfg.batch_size = 8;
        match train_flow_with_partial(FlowKind::RealNvp, &x, &cfg) {
            Err(d) => {
                assert!(matches!(d.error, Error::DivergedLoss { .. }), "{:?}", d.error);
                assert!(d.history.nll.len() < 5);
            }
            Ok(_) => panic!("expected divergence"),
        }
    }
}
