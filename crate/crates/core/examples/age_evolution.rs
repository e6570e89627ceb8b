//! Heat flow in age: backward Euler against `e^{-π² a} sin(πx)`.

use std::f64::consts::PI;

use agebif::evolve::evolve_linear;
use agebif::grid::{AgeField, Discretization};

fn main() -> agebif::error::Result<()> {
    println!("{:>5} {:>5} {:>12}", "n_x", "n_a", "max error");
    for (n_x, n_a) in [(31, 32), (31, 64), (31, 128), (63, 128)] {
        let disc = Discretization::new(n_x, n_a, 1.0)?;
        let phi = disc.space.sample(|x| (PI * x).sin()).0;
        let z = evolve_linear(&disc, &AgeField::zeros(disc.n_ages(), n_x), &phi)?;
        let err = disc
            .ages
            .nodes()
            .enumerate()
            .map(|(k, a)| (z.slice(k) - &phi * (-PI * PI * a).exp()).amax())
            .fold(0.0, f64::max);
        println!("{n_x:>5} {n_a:>5} {err:>12.4e}");
    }
    Ok(())
}
