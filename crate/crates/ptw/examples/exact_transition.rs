//! The (κ, θ) pair is Gaussian with closed-form mean and covariance; sample
//! it exactly at t = ln 2 and compare the ensemble moments to the formulas.

use ptw::gaussian::{sample_transition, transition_law};
use ptw::rng::stream_rng;

fn main() {
    let (kappa0, theta0) = (0.8, 0.6);
    let t = 2.0f64.ln();
    let law = transition_law(t, (kappa0, theta0), 1.0).unwrap();
    println!("t = ln 2, start (kappa, theta) = ({kappa0}, {theta0})");
    println!("mean  = ({:.6}, {:.6})   [(kappa0/2, theta0 + kappa0/2)]", law.mean[0], law.mean[1]);
    println!(
        "cov   = [[{:.6}, {:.6}], [{:.6}, {:.6}]]   [[3/4, 1/4], [1/4, 2 ln2 - 5/4]]",
        law.cov[0][0], law.cov[0][1], law.cov[1][0], law.cov[1][1]
    );

    let n = 200_000;
    let mut rng = stream_rng(42, "example-transition", 0);
    let (mut sk, mut sth, mut skk, mut sthth, mut skth) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let (k, th) = sample_transition(&law, &mut rng);
        sk += k;
        sth += th;
        skk += k * k;
        sthth += th * th;
        skth += k * th;
    }
    let nf = n as f64;
    let (mk, mth) = (sk / nf, sth / nf);
    println!("\n{n} samples:");
    println!("mean  = ({:.6}, {:.6})", mk, mth);
    println!(
        "cov   = [[{:.6}, {:.6}], [-, {:.6}]]",
        skk / nf - mk * mk,
        skth / nf - mk * mth,
        sthth / nf - mth * mth
    );
}
