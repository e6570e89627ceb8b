//! Time-dependent system on characteristics `t - a = const`.
//!
//! With `Δt = Δa`, one time step shifts every age slice by one node, fills
//! the newborn slice from the renewal integrals of the old state and applies
//! one implicit react-diffuse step to each shifted slice. A steady state of
//! the age steppers is an exact fixed point of this scheme.

use nalgebra::DVector;

use crate::branches::Model;
use crate::error::{Error, Result};
use crate::evolve::{check_coupled_guard, coupled_step};
use crate::grid::AgeField;

#[derive(Debug, Clone)]
pub struct PopulationState {
    pub t: f64,
    pub u: AgeField,
    pub v: AgeField,
}

impl PopulationState {
    pub fn new(u: AgeField, v: AgeField) -> Result<Self> {
        if u.n_ages() != v.n_ages() || u.n_x() != v.n_x() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", u.n_ages(), u.n_x()),
                got: format!("{} x {}", v.n_ages(), v.n_x()),
            });
        }
        Ok(Self { t: 0.0, u, v })
    }

    pub fn is_nonnegative(&self) -> bool {
        self.u.is_nonnegative() && self.v.is_nonnegative()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationConfig {
    pub eta: f64,
    pub xi: f64,
    pub t_end: f64,
    /// Keep every `sample_every`-th state (the initial and final states are
    /// always kept).
    pub sample_every: usize,
}

fn step(model: &Model, s: &PopulationState, eta: f64, xi: f64, index: usize) -> Result<PopulationState> {
    let disc = &model.disc;
    let p = &model.params;
    let n_a = disc.ages.n_a();
    let mut us = Vec::with_capacity(n_a + 1);
    let mut vs = Vec::with_capacity(n_a + 1);
    us.push(model.age_integral(&s.u)?.0 * eta);
    vs.push(model.age_integral(&s.v)?.0 * xi);
    for k in 0..n_a {
        let (u, v) = coupled_step(disc, s.u.slice(k), s.v.slice(k), p, &model.stepper, index)?;
        check_coupled_guard(disc.da(), &u, &v, p)?;
        let min_d = 1.0 + p.gamma * v.min();
        if p.gamma > 0.0 && min_d < model.stepper.diffusion_floor {
            return Err(Error::CoefficientFloor {
                min: min_d,
                floor: model.stepper.diffusion_floor,
            });
        }
        us.push(u);
        vs.push(v);
    }
    Ok(PopulationState {
        t: s.t + disc.da(),
        u: AgeField::from_slices(us)?,
        v: AgeField::from_slices(vs)?,
    })
}

/// Integrates from `init` to `t_end` with `Δt = Δa`.
pub fn simulate(model: &Model, init: &PopulationState, cfg: &SimulationConfig) -> Result<Vec<PopulationState>> {
    let disc = &model.disc;
    if init.u.n_ages() != disc.n_ages() || init.u.n_x() != disc.n_x() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", disc.n_ages(), disc.n_x()),
            got: format!("{} x {}", init.u.n_ages(), init.u.n_x()),
        });
    }
    PopulationState::new(init.u.clone(), init.v.clone())?;
    if !init.is_nonnegative() {
        return Err(Error::Invalid("initial densities must be nonnegative".into()));
    }
    if !(cfg.eta > 0.0 && cfg.xi > 0.0) {
        return Err(Error::Invalid(format!(
            "birth multipliers must be positive, got eta = {}, xi = {}",
            cfg.eta, cfg.xi
        )));
    }
    if !(cfg.t_end >= 0.0) || cfg.sample_every == 0 {
        return Err(Error::Invalid("t_end must be nonnegative and sample_every positive".into()));
    }
    let steps = (cfg.t_end / disc.da()).round() as usize;
    let mut out = vec![init.clone()];
    let mut cur = init.clone();
    for n in 1..=steps {
        cur = step(model, &cur, cfg.eta, cfg.xi, n)?;
        if n % cfg.sample_every == 0 || n == steps {
            out.push(cur.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DistanceReport {
    /// `(t, ‖u - u*‖ + ‖v - v*‖)`-type distance, discrete `L²` over age × space.
    pub distances: Vec<(f64, f64)>,
    /// Whether the last half of the samples is non-increasing.
    pub monotone_tail: bool,
}

/// Distance of every sampled state to a fixed target pair.
pub fn steady_state_distance(
    model: &Model,
    traj: &[PopulationState],
    target_u: &AgeField,
    target_v: &AgeField,
) -> Result<DistanceReport> {
    let d = &model.disc;
    let mut distances = Vec::with_capacity(traj.len());
    for s in traj {
        if s.u.n_ages() != target_u.n_ages() || s.u.n_x() != target_u.n_x() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} x {}", target_u.n_ages(), target_u.n_x()),
                got: format!("{} x {}", s.u.n_ages(), s.u.n_x()),
            });
        }
        let du = s.u.zip_map(target_u, |a, b| a - b).l2_norm(&d.ages, &d.space);
        let dv = s.v.zip_map(target_v, |a, b| a - b).l2_norm(&d.ages, &d.space);
        distances.push((s.t, du.hypot(dv)));
    }
    let tail = &distances[distances.len() / 2..];
    let monotone_tail = tail.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(DistanceReport {
        distances,
        monotone_tail,
    })
}

/// Zero field matching the model grid.
pub fn zero_field(model: &Model) -> AgeField {
    AgeField::zeros(model.disc.n_ages(), model.disc.n_x())
}

/// Age-constant initial density `c · e₁(x)` from the principal mode.
pub fn mode_initial(model: &Model, c: f64) -> Result<AgeField> {
    let ep = crate::grid::principal_eigenpair(&model.disc.lap)?;
    let profile: DVector<f64> = ep.vector.0 * c;
    Ok(AgeField::constant_in_age(model.disc.n_ages(), &profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branches::{solve_prey, ModelParams};
    use crate::grid::{BirthProfile, BirthShape, Discretization};

    fn model(n_x: usize, n_a: usize, params: ModelParams) -> Model {
        let disc = Discretization::new(n_x, n_a, 1.0).unwrap();
        let raw = BirthProfile::from_shape(&BirthShape::Constant, &disc.ages).unwrap();
        Model::new(disc, &raw, params).unwrap()
    }

    #[test]
    fn semitrivial_state_is_a_fixed_point() {
        let m = model(10, 32, ModelParams::default());
        let u = solve_prey(&m, 1.8).unwrap();
        let init = PopulationState::new(u.field.clone(), zero_field(&m)).unwrap();
        let cfg = SimulationConfig {
            eta: 1.8,
            xi: 0.5,
            t_end: 2.0,
            sample_every: 8,
        };
        let traj = simulate(&m, &init, &cfg).unwrap();
        let rep = steady_state_distance(&m, &traj, &u.field, &zero_field(&m)).unwrap();
        assert!(rep.distances.iter().all(|&(_, d)| d < 1e-9));
        assert!(traj.iter().all(|s| s.v.max_abs() == 0.0));
    }

    #[test]
    fn subcritical_populations_decay() {
        let m = model(10, 32, ModelParams::default());
        let init = PopulationState::new(mode_initial(&m, 0.1).unwrap(), mode_initial(&m, 0.1).unwrap()).unwrap();
        let cfg = SimulationConfig {
            eta: 0.5,
            xi: 0.5,
            t_end: 6.0,
            sample_every: 32,
        };
        let traj = simulate(&m, &init, &cfg).unwrap();
        let last = traj.last().unwrap();
        assert!(last.u.max_abs() < 1e-3 && last.v.max_abs() < 1e-3);
        assert!(traj.iter().all(|s| s.is_nonnegative()));
    }

    #[test]
    fn own_terminal_state_has_zero_distance() {
        let m = model(8, 16, ModelParams::default());
        let init = PopulationState::new(mode_initial(&m, 1.0).unwrap(), mode_initial(&m, 0.5).unwrap()).unwrap();
        let cfg = SimulationConfig {
            eta: 2.0,
            xi: 2.0,
            t_end: 1.0,
            sample_every: 4,
        };
        let traj = simulate(&m, &init, &cfg).unwrap();
        let last = traj.last().unwrap();
        let rep = steady_state_distance(&m, &traj, &last.u, &last.v).unwrap();
        assert!(rep.distances.last().unwrap().1 <= 1e-12);
        assert!(rep.distances.iter().all(|&(_, d)| d.is_finite() && d >= 0.0));
    }
}
