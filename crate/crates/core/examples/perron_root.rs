//! Power iteration for the renewal operator against a dense eigen solve.

use agebif::branches::{solve_predator, Model};
use agebif::grid::{AgeField, BirthProfile, BirthShape, Discretization};
use agebif::params::ModelParams;
use agebif::spectral::{assemble_g, assemble_h, spectral_radius};

fn main() -> agebif::error::Result<()> {
    let disc = Discretization::new(16, 64, 1.0)?;
    let raw = BirthProfile::from_shape(&BirthShape::Constant, &disc.ages)?;
    let m = Model::new(disc, &raw, ModelParams::default())?;

    let v = solve_predator(&m, 2.0)?;
    let ops = [
        ("H[0]", assemble_h(&m.disc, &m.zeros(), &m.birth)?),
        ("H[2]", assemble_h(&m.disc, &AgeField::from_fn(m.disc.n_ages(), 16, |_, _| 2.0), &m.birth)?),
        ("G_2", assemble_g(&m.disc, &v.field, &m.params, &m.birth, 0.5)?),
    ];
    for (name, op) in &ops {
        let s = spectral_radius(op)?;
        let dense = op
            .matrix
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        println!(
            "{name:>5}: r = {:.12}  dense = {dense:.12}  iterations {}  min Perron entry {:.3e}",
            s.radius,
            s.iterations,
            s.eigvec.min()
        );
    }
    Ok(())
}
