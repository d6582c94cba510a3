//! Split a synthetic dataset, train a RealNVP flow on the normal half, save
//! and reload the bundle, then score the test rows with both likelihood tests.

use flowbench::data::{fit_scaler, load_model, save_model, split_zong, ModelBundle, ScalerKind, SplitSpec};
use flowbench::flow::{train_flow, FlowKind, TrainConfig};
use flowbench::scoring::{evaluate, slt_score, typicality_from_nll};
use flowbench::synth::{gen_anomaly_suite, AnomalySuiteSpec, AnomalyType, GmmDiag};
use flowbench::Rng;

fn main() -> flowbench::Result<()> {
    let mut rng = Rng::new(11);
    let seed_rows = GmmDiag::random(3, 6, 3.0, &mut rng).sample(&mut rng, 1500).0;
    let ds = gen_anomaly_suite(&seed_rows, &AnomalySuiteSpec::new(AnomalyType::Global, 1000, 100, 1))?;
    let (train, test) = split_zong(&ds, &SplitSpec { seed: 1, contamination_ratio: 0.0 })?;

    let scaler = fit_scaler(&train, ScalerKind::Robust)?;
    let xs = scaler.apply(&train)?;
    let config = TrainConfig { epochs: 30, ..TrainConfig::default() };
    let (model, history) = train_flow(FlowKind::RealNvp, &xs, &config)?;
    println!("final train nll {:.4}", history.nll.last().copied().unwrap_or(f64::NAN));

    let mut bundle = ModelBundle::new(model, scaler, config);
    bundle.train_entropy = Some(bundle.model.mean_nll(&xs)?);
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("model.json");
    save_model(&path, &bundle)?;
    let back = load_model(&path)?;
    assert_eq!(back, bundle);

    let nll = slt_score(&back.model, &back.scaler, &test.features)?.values;
    let slt = evaluate(&nll, &test.labels, 1)?;
    let typ = evaluate(&typicality_from_nll(&nll, back.train_entropy.unwrap_or(0.0)), &test.labels, 1)?;
    println!("slt        auroc {:.4} auprc {:.4}", slt.auroc, slt.auprc);
    println!("typicality auroc {:.4} auprc {:.4}", typ.auroc, typ.auprc);
    Ok(())
}
