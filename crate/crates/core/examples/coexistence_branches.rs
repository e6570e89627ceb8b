//! Trace the three coexistence continua and classify where each one ends.

use agebif::branches::Model;
use agebif::continuation::{classify_endpoint, trace_branch, ContinuationConfig, Launch};
use agebif::grid::{BirthProfile, BirthShape, Discretization};
use agebif::params::ModelParams;

fn main() -> agebif::error::Result<()> {
    let disc = Discretization::new(16, 64, 1.0)?;
    let raw = BirthProfile::from_shape(&BirthShape::Constant, &disc.ages)?;
    let m = Model::new(disc, &raw, ModelParams::default())?;

    let runs = [
        // ξ = 2 fixed, η varies from η0.
        (Launch::t1(&m, 2.0)?, ContinuationConfig { norm_cap: 10.0, h_max: 2.0, ..Default::default() }),
        // ξ = 0.9 fixed, η varies from η1.
        (
            Launch::t22(&m, 0.9, 10.0)?,
            ContinuationConfig { norm_cap: 10.0, h_max: 2.0, mu_min: 0.5, ..Default::default() },
        ),
        // η = 2 fixed, ξ varies from ξ0.
        (Launch::t222(&m, 2.0)?, ContinuationConfig { h_max: 1.0, ..Default::default() }),
    ];
    for (launch, cfg) in runs {
        let branch = trace_branch(&m, &launch, &cfg)?;
        let report = classify_endpoint(&m, &branch, &cfg)?;
        let last = branch.records.last().unwrap();
        println!(
            "{:?}: launched at mu = {:.5}, {} points, ended at mu = {:.5} (|u| {:.3}, |v| {:.3})",
            launch.scenario,
            launch.mu0,
            branch.records.len(),
            last.mu,
            last.norm_u,
            last.norm_v
        );
        println!("    {:?}: {}", branch.stop, report.label);
        if let Some(xi1) = report.xi1 {
            println!("    meets the predator branch at xi1 = {xi1:.6}");
        }
    }
    Ok(())
}
