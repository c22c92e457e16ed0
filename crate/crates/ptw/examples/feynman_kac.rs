//! Cross-validate the grid Poisson solution pointwise against the
//! probabilistic representation g(y) = -E[∫₀^∞ f(y_s) ds | y₀ = y].

use ptw::model::{KineticState, ModelParams};
use ptw::poisson::{feynman_kac_g, solve_poisson, Grid, OperatorOptions};

fn main() {
    let alpha = 1.0;
    let params = ModelParams::ou(alpha).unwrap();
    let grid = Grid::new(64, 129, 6.0).unwrap();
    let f: Vec<f64> = grid.sample(|th, _| th.cos());
    let sol = solve_poisson(&f, &grid, alpha, &OperatorOptions::default()).unwrap();
    let g00 = sol.g[grid.idx(0, (grid.n_kappa - 1) / 2)];

    let fk = feynman_kac_g(
        KineticState::new(0.0, 0.0),
        |y| y.theta.cos(),
        20.0,
        50_000,
        0.02,
        &params,
        42,
    )
    .unwrap();

    println!("f = cos theta at (theta, kappa) = (0, 0):");
    println!("  grid solution : {g00:.5}");
    println!("  monte carlo   : {:.5} ± {:.5}  ({} paths)", fk.value, fk.std_error, fk.n_paths);
    println!("  difference    : {:.5}", (fk.value - g00).abs());
}
