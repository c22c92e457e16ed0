//! Simulate one curvature-slowed walker path and print it as CSV
//! (the speed drops as 1/(1+2|κ|), so tight turns crawl and straight
//! stretches cruise).

use ptw::cli::trajectory_to_csv;
use ptw::model::{sample_invariant, FullState, ModelParams, SpeedProfile};
use ptw::rng::stream_rng;
use ptw::sim::{simulate_path, Scheme};

fn main() {
    let params = ModelParams::ou(1.0)
        .unwrap()
        .with_speed(SpeedProfile::RationalDecay { a: 1.0, b: 2.0 })
        .unwrap();
    let mut rng = stream_rng(42, "example-trajectory", 0);
    let y0 = sample_invariant(&ModelParams::ou(1.0).unwrap(), &mut rng).unwrap();
    let init = FullState::at_origin(y0);
    let traj = simulate_path(&params, Scheme::ExactKinetic, 10.0, 1e-3, &init, &mut rng).unwrap();
    // one point per 0.1 time units
    print!("{}", trajectory_to_csv(&traj, 100));
}
