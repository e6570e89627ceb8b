//! Rescale a fertility profile so that `r(H[0]) = 1`.

use std::f64::consts::PI;

use agebif::grid::{BirthProfile, BirthShape, Discretization};
use agebif::spectral::{assemble_h0, normalize_birth, spectral_radius};

fn main() -> agebif::error::Result<()> {
    let continuum = PI * PI / (1.0 - (-PI * PI).exp());
    println!("continuum constant for b = 1: {continuum:.6}");
    for (n_x, n_a) in [(16, 32), (32, 64), (64, 128), (64, 512)] {
        let disc = Discretization::new(n_x, n_a, 1.0)?;
        let raw = BirthProfile::from_shape(&BirthShape::Constant, &disc.ages)?;
        let (b, c) = normalize_birth(&disc, &raw)?;
        let r = spectral_radius(&assemble_h0(&disc, &b)?)?.radius;
        println!("n_x {n_x:>3} n_a {n_a:>4}: c = {c:.6}  |r - 1| = {:.1e}", (r - 1.0).abs());
    }

    // A ramp shape: fertility rising with age.
    let disc = Discretization::new(32, 64, 1.0)?;
    let raw = BirthProfile::from_shape(&BirthShape::Ramp, &disc.ages)?;
    let (_, c) = normalize_birth(&disc, &raw)?;
    println!("ramp profile: c = {c:.6}");
    Ok(())
}
