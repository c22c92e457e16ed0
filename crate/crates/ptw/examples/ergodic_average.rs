//! Law of large numbers along one long path: time averages of observables
//! settle at their invariant-measure values inside the CLT band.

use ptw::model::{observables, sample_invariant, FullState, ModelParams};
use ptw::rng::stream_rng;
use ptw::sim::{simulate_path, Scheme};
use ptw::stats::ergodic_average;

fn main() {
    let params = ModelParams::ou(1.0).unwrap();
    let mut rng = stream_rng(42, "example-ergodic", 0);
    let init = FullState::at_origin(sample_invariant(&params, &mut rng).unwrap());
    let t_final = 5_000.0;
    let traj = simulate_path(&params, Scheme::ExactKinetic, t_final, 0.01, &init, &mut rng).unwrap();

    let cos_curve = ergodic_average(&traj, observables::cos_theta);
    let k2_curve = ergodic_average(&traj, |y| y.kappa * y.kappa);

    println!("{:>8} {:>12} {:>12}", "t", "avg cos", "avg kappa^2");
    for &(t, _) in cos_curve.iter().step_by(100_000) {
        let i = cos_curve.iter().position(|&(tt, _)| tt == t).unwrap();
        println!("{:8.0} {:12.5} {:12.5}", t, cos_curve[i].1, k2_curve[i].1);
    }
    let last_cos = cos_curve.last().unwrap().1;
    let last_k2 = k2_curve.last().unwrap().1;
    println!("\nfinal averages: cos = {last_cos:+.5} (target 0), kappa^2 = {last_k2:.5} (target 1)");
    // CLT bands: 4 sqrt(V/T) with V = D for cos, V = 2 alpha^4 for kappa^2
    let d = ptw::diffusion::compute_d_closed_form(1.0).unwrap();
    println!(
        "CLT bands: {:.4} and {:.4}",
        4.0 * (d / t_final).sqrt(),
        4.0 * (2.0 / t_final).sqrt()
    );
}
