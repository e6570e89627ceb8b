//! Prey-only steady states along η, with the spectral identity they satisfy.

use agebif::branches::{identity_residual, solve_prey, continue_semitrivial, Model};
use agebif::error::Error;
use agebif::grid::{BirthProfile, BirthShape, Discretization};
use agebif::params::ModelParams;

fn main() -> agebif::error::Result<()> {
    let disc = Discretization::new(16, 128, 1.0)?;
    let raw = BirthProfile::from_shape(&BirthShape::Constant, &disc.ages)?;
    let m = Model::new(disc, &raw, ModelParams::default())?;

    match solve_prey(&m, 0.8) {
        Err(Error::NoPositiveSolution { param }) => println!("eta = {param}: no positive solution"),
        other => println!("unexpected: {other:?}"),
    }

    let mut sol = solve_prey(&m, 1.1)?;
    println!("{:>6} {:>12} {:>12} {:>10}", "eta", "max u(0)", "min u(0)", "identity");
    for eta in [1.1, 1.5, 2.0, 3.0, 4.0] {
        sol = continue_semitrivial(&m, &sol, eta)?;
        println!(
            "{eta:>6.2} {:>12.5} {:>12.5} {:>10.1e}",
            sol.trace.inf_norm(),
            sol.trace.min(),
            identity_residual(&m, &sol)?
        );
    }
    Ok(())
}
