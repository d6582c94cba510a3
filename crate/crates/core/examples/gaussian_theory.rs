//! Closed-form entropy, KL and likelihood-gap checks for isotropic Gaussians,
//! with the concentration bound and the shrinking relative norm variance.

use flowbench::synth::GaussianSpec;
use flowbench::theory::{
    concentration_check, empirical_likelihood_gap, gap_condition_scalar, norm_variance_ratio, Density,
};

fn main() -> flowbench::Result<()> {
    println!("d,gap,se,perfect,holds");
    for d in [5, 10, 20, 40] {
        let p = GaussianSpec::isotropic(d, 5.0, 1.0)?;
        let q = GaussianSpec::isotropic(d, 3.25, 1.0)?;
        let r = empirical_likelihood_gap(&Density::Gaussian(&p), &p, &q, 50_000, d as u64)?;
        let c = gap_condition_scalar(d, 5.0, 1.0, 3.25, 1.0)?;
        println!("{d},{:.4},{:.4},{:.4},{}", r.gap, r.gap_se, r.perfect_model_gap, c.holds);
    }

    println!("\nd,t,empirical,bound");
    for d in [10, 100, 1000] {
        let r = concentration_check(d, 0.25 * d as f64, 10_000, 7)?;
        println!("{d},{},{:.5},{:.5}", r.t, r.empirical, r.bound);
    }

    println!("\nd,var_norm_over_d");
    for v in norm_variance_ratio(&[1, 10, 100, 1000], 50_000, 9)? {
        println!("{},{:.6}", v.d, v.ratio);
    }
    Ok(())
}
