//! Compute the diffusion constant three independent ways: adaptive
//! quadrature of the autocorrelation integral, the incomplete-gamma closed
//! form, and Green-Kubo integration of a Monte Carlo autocorrelation curve.

use ptw::diffusion::{compute_d_closed_form, compute_d_quadrature, green_kubo, CutoffRule};
use ptw::model::ModelParams;
use ptw::stats::empirical_velocity_autocorrelation;

fn main() {
    let alpha = 1.0;
    let quad = compute_d_quadrature(alpha, 1e-12).unwrap();
    let closed = compute_d_closed_form(alpha).unwrap();
    println!("alpha = {alpha}");
    println!(
        "quadrature : {:.12}  (error bound {:.1e}, {} evaluations, T* = {:.1})",
        quad.value, quad.abs_error_bound, quad.evaluations, quad.truncation_t
    );
    println!("closed form: {:.12}  (e - 1 = {:.12})", closed, std::f64::consts::E - 1.0);

    let params = ModelParams::ou(alpha).unwrap();
    let curve = empirical_velocity_autocorrelation(&params, 50_000, 15.0, 0.05, 42).unwrap();
    let gk = green_kubo(&curve, CutoffRule::NoiseFloor).unwrap();
    println!(
        "green-kubo : {:.6} ± {:.6}  (cutoff at s = {:.2}, tail {:.2e})",
        gk.value,
        gk.std_error,
        curve[gk.cutoff_index].0,
        gk.tail
    );

    println!("\nD(alpha) sweep:");
    for a in [0.25, 0.5, 1.0, 2.0, 4.0] {
        println!("  D({a}) = {:.9}", compute_d_closed_form(a).unwrap());
    }
}
