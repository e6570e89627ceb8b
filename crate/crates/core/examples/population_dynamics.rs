//! Time integration: a perturbed coexistence state relaxes back, and a
//! subcritical population dies out.

use agebif::branches::Model;
use agebif::continuation::{trace_branch, ContinuationConfig, Launch};
use agebif::dynamics::{mode_initial, simulate, steady_state_distance, zero_field, PopulationState, SimulationConfig};
use agebif::grid::{BirthProfile, BirthShape, Discretization};
use agebif::params::ModelParams;

fn main() -> agebif::error::Result<()> {
    let disc = Discretization::new(16, 64, 1.0)?;
    let raw = BirthProfile::from_shape(&BirthShape::Constant, &disc.ages)?;
    let m = Model::new(disc, &raw, ModelParams::default())?;

    let launch = Launch::t1(&m, 2.0)?;
    let cfg = ContinuationConfig { max_steps: 40, ..Default::default() };
    let branch = trace_branch(&m, &launch, &cfg)?;
    let target = branch.states.last().unwrap();
    let (u, v) = target.fields(&m)?;
    let init = PopulationState::new(u.scale(1.05), v.scale(1.05))?;
    let run = SimulationConfig { eta: target.eta(), xi: target.xi(), t_end: 20.0, sample_every: 128 };
    let traj = simulate(&m, &init, &run)?;
    let rep = steady_state_distance(&m, &traj, &u, &v)?;
    println!("coexistence state at eta = {:.4}, xi = {:.1}", target.eta(), target.xi());
    for (t, d) in &rep.distances {
        println!("  t = {t:>5.1}  distance {d:.3e}");
    }

    let init = PopulationState::new(mode_initial(&m, 1.0)?, mode_initial(&m, 1.0)?)?;
    let run = SimulationConfig { eta: 0.5, xi: 0.5, t_end: 5.0, sample_every: 320 };
    let last = simulate(&m, &init, &run)?.pop().unwrap();
    let d = steady_state_distance(&m, &[last], &zero_field(&m), &zero_field(&m))?;
    println!("subcritical run: distance to extinction at t = 5 is {:.3e}", d.distances[0].1);
    Ok(())
}
