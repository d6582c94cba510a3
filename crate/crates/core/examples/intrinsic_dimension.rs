//! TwoNN and MLE estimates on AR(1) Gaussians as the correlation grows, plus
//! the subsample/scaler robustness grid at one ρ.

use flowbench::data::ScalerKind;
use flowbench::intrinsic_dim::{d_ratio, robustness_suite, Aggregation, Estimator, RobustnessSpec};
use flowbench::synth::{ar_covariance, GaussianSpec};
use flowbench::Rng;

fn main() -> flowbench::Result<()> {
    let d = 10;
    let twonn = Estimator::TwoNn { discard_top: 0.1 };
    let mle = Estimator::Mle { k: 10, aggregation: Aggregation::MacKay };
    println!("rho,twonn,mle,d_ratio_mle");
    for rho in [0.0, 0.5, 0.9, 0.99] {
        let g = GaussianSpec::full(vec![0.0; d], &ar_covariance(d, rho)?)?;
        let x = g.sample(&mut Rng::new(3), 2000)?;
        let a = twonn.estimate(&x, 0)?.value;
        let b = mle.estimate(&x, 0)?.value;
        println!("{rho},{a:.3},{b:.3},{:.3}", d_ratio(b, d)?.ratio);
    }

    let g = GaussianSpec::full(vec![0.0; d], &ar_covariance(d, 0.9)?)?;
    let x = g.sample(&mut Rng::new(4), 2000)?;
    let spec = RobustnessSpec {
        ratios: vec![1.0, 0.9, 0.8, 0.5],
        scalers: vec![ScalerKind::None, ScalerKind::Standard, ScalerKind::Robust],
        estimator: mle,
    };
    println!("\nsubsample,scaler,mle");
    for c in robustness_suite(&x, &spec, 5)? {
        println!("{},{:?},{:.3}", c.ratio, c.scaler, c.estimate.value);
    }
    Ok(())
}
