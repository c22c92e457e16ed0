//! The invariant law of the kinetic pair: uniform angle times Gaussian
//! curvature for the linear drift, and the tabulated e^{-V/α²} law for
//! power-law drifts.

use ptw::model::{
    invariant_density, sample_invariant, DriftSpec, KineticState, ModelParams, PowerLawInvariant,
};
use ptw::rng::stream_rng;

fn main() {
    let alpha = 0.8;
    let params = ModelParams::ou(alpha).unwrap();
    let mut rng = stream_rng(42, "example-invariant", 0);

    let n = 200_000;
    let (mut sk, mut sk2) = (0.0, 0.0);
    for _ in 0..n {
        let y = sample_invariant(&params, &mut rng).unwrap();
        sk += y.kappa;
        sk2 += y.kappa * y.kappa;
    }
    println!("OU drift, alpha = {alpha}:");
    println!("  kappa mean {:+.4} (target 0)", sk / n as f64);
    println!("  kappa var  {:.4} (target {:.4})", sk2 / n as f64, alpha * alpha);
    println!(
        "  density at the mode: {:.6}",
        invariant_density(&KineticState::new(0.0, 0.0), &params).unwrap()
    );

    let pl = ModelParams::ou(alpha).unwrap().with_drift(DriftSpec::PowerLaw { p: 0.5 }).unwrap();
    let sampler = PowerLawInvariant::new(&pl).unwrap();
    let (mut sk, mut sk2, mut sk4) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let k = sampler.sample(&mut rng).kappa;
        sk += k;
        sk2 += k * k;
        sk4 += k * k * k * k;
    }
    let m2 = sk2 / n as f64;
    println!("\npower-law drift (p = 0.5), heavier tails than Gaussian:");
    println!("  kappa mean {:+.4}", sk / n as f64);
    println!("  kappa var  {:.4}", m2);
    println!("  kurtosis   {:.3} (Gaussian would be 3)", sk4 / n as f64 / (m2 * m2));
}
