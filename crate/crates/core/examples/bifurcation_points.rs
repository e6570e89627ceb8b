//! Where coexistence states branch off the semi-trivial curves.

use agebif::branches::{delta_estimate, eta0, eta1, xi0, xi1_scan, Model};
use agebif::grid::{BirthProfile, BirthShape, Discretization};
use agebif::params::ModelParams;

fn main() -> agebif::error::Result<()> {
    let disc = Discretization::new(16, 128, 1.0)?;
    let raw = BirthProfile::from_shape(&BirthShape::Constant, &disc.ages)?;
    let m = Model::new(disc, &raw, ModelParams::default())?;

    for xi in [1.5, 2.0, 3.0] {
        println!("eta0(xi = {xi}) = {:.6}", eta0(&m, xi)?.eta0);
    }
    for eta in [1.5, 2.0, 4.0] {
        println!("xi0(eta = {eta}) = {:.6}", xi0(&m, eta)?.xi0);
    }
    for xi in [0.85, 0.9, 0.95] {
        let p = eta1(&m, xi, 10.0)?;
        println!("eta1(xi = {xi}) = {:.6}  (xi0 there: {:.9})", p.eta1, xi0(&m, p.eta1)?.xi0);
    }

    let d = delta_estimate(&m, 5.0)?;
    println!("delta estimate up to eta = 5: {:.6}", d.delta_hat);

    let scan = xi1_scan(&m, 2.0, &[1.05, 1.1, 1.15, 1.2, 1.3, 1.5])?;
    for (xi, r) in &scan.points {
        println!("eta r(G_xi) - 1 at xi = {xi}: {r:+.4e}");
    }
    println!("sign changes: {:?}", scan.sign_changes);
    Ok(())
}
