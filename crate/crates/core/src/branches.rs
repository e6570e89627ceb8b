//! Semi-trivial branches, bifurcation points and kernel tangents.
//!
//! Steady states are computed by shooting over the age-zero trace: the
//! unknown is `Φ = u(0, ·)` and the residual is `Φ - param · ∫ b u da`, with
//! `u` propagated by the implicit age steppers of [`crate::evolve`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evolve::{
    evolve_conservative, evolve_duhamel, evolve_linear, evolve_reaction, StepperConfig,
};
use crate::grid::{age_integral, principal_eigenpair, AgeField, BirthProfile, Discretization, SpatialField};
use crate::linalg::{dense_solve, inf_norm};
use crate::newton::{newton, NewtonOptions};
pub use crate::params::ModelParams;
use crate::spectral::{assemble_g, assemble_h, normalize_birth, spectral_radius, SpectralResult};

/// Discretized problem: grids, normalized fertility profile and coefficients.
#[derive(Debug, Clone)]
pub struct Model {
    pub disc: Discretization,
    pub birth: BirthProfile,
    pub params: ModelParams,
    pub stepper: StepperConfig,
}

impl Model {
    /// Normalizes `raw` so that `r(H[0]) = 1` on this grid.
    pub fn new(disc: Discretization, raw: &BirthProfile, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let (birth, _) = normalize_birth(&disc, raw)?;
        Ok(Self {
            disc,
            birth,
            params,
            stepper: StepperConfig::default(),
        })
    }

    pub fn with_params(&self, params: ModelParams) -> Self {
        Self {
            params,
            ..self.clone()
        }
    }

    pub fn n_x(&self) -> usize {
        self.disc.n_x()
    }

    pub fn zeros(&self) -> AgeField {
        AgeField::zeros(self.disc.n_ages(), self.disc.n_x())
    }

    pub fn age_integral(&self, f: &AgeField) -> Result<SpatialField> {
        age_integral(f, &self.birth, &self.disc.ages)
    }

    /// `r(H[h])` with its Perron vector.
    pub fn radius_h(&self, h: &AgeField) -> Result<SpectralResult> {
        spectral_radius(&assemble_h(&self.disc, h, &self.birth)?)
    }

    /// `r(G_ξ)` for a predator profile.
    pub fn radius_g(&self, v: &AgeField) -> Result<SpectralResult> {
        spectral_radius(&assemble_g(
            &self.disc,
            v,
            &self.params,
            &self.birth,
            self.stepper.diffusion_floor,
        )?)
    }
}

/// Orientation of a semi-trivial solution relative to the positive cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchSign {
    /// `field ≥ 0` is the physical density.
    Positive,
    /// `field = w ≥ 0` and the physical density is `-w` (branch below one).
    Negative,
}

#[derive(Debug, Clone)]
pub struct SemiTrivialSolution {
    /// `η` or `ξ`.
    pub param: f64,
    /// Signed self-coefficient used by the stepper (`-α₁` on the flipped branch).
    pub alpha: f64,
    pub trace: SpatialField,
    pub field: AgeField,
    pub sign: BranchSign,
    pub newton_iters: usize,
    pub residual: f64,
}

impl SemiTrivialSolution {
    /// Zeroth-order coefficient `alpha * field` of the self-linearization.
    pub fn self_coefficient(&self) -> AgeField {
        self.field.scale(self.alpha)
    }

    pub fn physical_field(&self) -> AgeField {
        match self.sign {
            BranchSign::Positive => self.field.clone(),
            BranchSign::Negative => self.field.scale(-1.0),
        }
    }
}

/// Shooting residual `Φ - param · ∫ b z(Φ) da` for the single-species problem.
pub fn semitrivial_residual(model: &Model, param: f64, alpha: f64, trace: &DVector<f64>) -> Result<DVector<f64>> {
    let z = evolve_reaction(&model.disc, trace, alpha, &model.stepper)?;
    let w = model.age_integral(&z)?;
    Ok(trace - param * w.0)
}

/// Amplitude of the bifurcating solution near `param = 1`, from the slope of
/// `t ↦ r(H[t α ψ])` along the linear heat profile `ψ`.
fn initial_amplitude(model: &Model, param: f64, alpha: f64) -> Result<(f64, DVector<f64>)> {
    let ep = principal_eigenpair(&model.disc.lap)?;
    let heat = evolve_linear(&model.disc, &model.zeros(), &ep.vector)?;
    let t = 1e-4;
    let r = model.radius_h(&heat.scale(t * alpha))?.radius;
    let slope = (1.0 - r) / t;
    let s = (1.0 - 1.0 / param) / slope;
    Ok((s, ep.vector.0))
}

fn newton_semitrivial(
    model: &Model,
    param: f64,
    alpha: f64,
    guess: DVector<f64>,
) -> Result<SemiTrivialSolution> {
    let scale = inf_norm(&guess).max(1.0);
    let f = |x: &DVector<f64>| semitrivial_residual(model, param, alpha, x);
    let opts = NewtonOptions {
        tol: 1e-10 * scale,
        ..NewtonOptions::default()
    };
    let guess_norm = inf_norm(&guess);
    let out = newton(&f, guess, &opts)?;
    let trace = SpatialField(out.x);
    // Newton may fall back onto the trivial root; that is a failure here.
    if !trace.is_positive() || trace.inf_norm() < 1e-3 * guess_norm {
        return Err(Error::NewtonDivergence {
            iterations: out.iterations,
            residual: out.residual,
        });
    }
    let field = evolve_reaction(&model.disc, &trace, alpha, &model.stepper)?;
    Ok(SemiTrivialSolution {
        param,
        alpha,
        trace,
        field,
        sign: if alpha >= 0.0 {
            BranchSign::Positive
        } else {
            BranchSign::Negative
        },
        newton_iters: out.iterations,
        residual: out.residual,
    })
}

const START_OFFSET: f64 = 0.05;

/// Above this `da * max trace` the first age steps carry O(1) relative
/// error and the discrete branch can blow up at finite parameter.
const UNRESOLVED_PRODUCT: f64 = 1.0;

/// Warm-started walk along a semi-trivial branch from `from` to `to`.
pub fn continue_semitrivial(model: &Model, from: &SemiTrivialSolution, to: f64) -> Result<SemiTrivialSolution> {
    let alpha = from.alpha;
    let target = (to - 1.0).abs();
    let mut cur = from.clone();
    let mut prev: Option<SemiTrivialSolution> = None;
    let mut ratio: f64 = 1.6;
    let mut failures = 0;
    while cur.param != to {
        let dist = (cur.param - 1.0).abs();
        let next_dist = if target > dist {
            (dist * ratio).min(target)
        } else {
            (dist / ratio).max(target)
        };
        let next = if (next_dist - target).abs() == 0.0 {
            to
        } else {
            1.0 + (cur.param - 1.0).signum() * next_dist
        };
        let guess = match &prev {
            Some(p) => {
                let slope = (&cur.trace.0 - &p.trace.0) / (cur.param - p.param);
                let g = &cur.trace.0 + slope * (next - cur.param);
                if g.iter().all(|&x| x > 0.0) {
                    g
                } else {
                    &cur.trace.0 * (next_dist / dist)
                }
            }
            None => &cur.trace.0 * (next_dist / dist),
        };
        match newton_semitrivial(model, next, alpha, guess) {
            Ok(sol) => {
                prev = Some(std::mem::replace(&mut cur, sol));
                ratio = (ratio * 1.2).min(1.6);
            }
            Err(e) => {
                failures += 1;
                if failures > 12 {
                    let product = model.disc.da() * cur.trace.inf_norm();
                    if product > UNRESOLVED_PRODUCT {
                        return Err(Error::Unresolved {
                            param: to,
                            reached: cur.param,
                            product,
                        });
                    }
                    return Err(e);
                }
                ratio = ratio.sqrt();
            }
        }
    }
    Ok(cur)
}

fn start_branch(model: &Model, param: f64, alpha: f64) -> Result<SemiTrivialSolution> {
    let dir = (param - 1.0).signum();
    let start = if (param - 1.0).abs() <= START_OFFSET {
        param
    } else {
        1.0 + dir * START_OFFSET
    };
    // Small first guess along the principal mode; if Newton falls back onto
    // the trivial root, restart from the amplitude predicted by the
    // spectral slope.
    let ep = principal_eigenpair(&model.disc.lap)?;
    let sol = match newton_semitrivial(model, start, alpha, &ep.vector.0 * (0.1 * (start - 1.0))) {
        Ok(sol) => sol,
        Err(_) => {
            let (s, e1) = initial_amplitude(model, start, alpha)?;
            newton_semitrivial(model, start, alpha, e1 * s)?
        }
    };
    if start == param {
        Ok(sol)
    } else {
        continue_semitrivial(model, &sol, param)
    }
}

/// Positive solution of the single-species problem `∂_a z - Δz = -α z²`,
/// `z(0) = param · Z`. Serves both the prey (`α = α₁`) and the predator
/// (`α = β₁`).
pub fn solve_semitrivial(model: &Model, param: f64, alpha: f64) -> Result<SemiTrivialSolution> {
    if !(alpha > 0.0) {
        return Err(Error::Invalid(format!("self-limitation must be positive, got {alpha}")));
    }
    if !(param > 1.0) {
        return Err(Error::NoPositiveSolution { param });
    }
    start_branch(model, param, alpha)
}

/// Prey branch `u_η`.
pub fn solve_prey(model: &Model, eta: f64) -> Result<SemiTrivialSolution> {
    solve_semitrivial(model, eta, model.params.alpha1)
}

/// Predator branch `v_ξ`.
pub fn solve_predator(model: &Model, xi: f64) -> Result<SemiTrivialSolution> {
    solve_semitrivial(model, xi, model.params.beta1)
}

/// Continuation of the prey branch below `η = 1`, where `-u_η ≥ 0`.
/// Solves `∂_a w - Δw = α₁ w²`, `w(0) = η W` and returns `w` with
/// [`BranchSign::Negative`].
pub fn extend_semitrivial_below_one(model: &Model, eta: f64) -> Result<SemiTrivialSolution> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Invalid(format!("extension below one needs eta in (0, 1), got {eta}")));
    }
    let alpha = -model.params.alpha1;
    let start = eta.max(1.0 - START_OFFSET);
    let (s, e1) = initial_amplitude(model, start, alpha)?;
    let first = newton_semitrivial(model, start, alpha, e1 * s)
        .map_err(|_| Error::ExtensionFailed { reached: 1.0 })?;
    if start == eta {
        return Ok(first);
    }
    // Walk down and report the smallest eta reached on failure.
    let mut cur = first;
    let mut step = (1.0 - start) * 0.6;
    while cur.param > eta {
        let next = (cur.param - step).max(eta);
        let guess = &cur.trace.0 * ((1.0 - next) / (1.0 - cur.param));
        match newton_semitrivial(model, next, alpha, guess) {
            Ok(sol) => {
                cur = sol;
                step *= 1.3;
            }
            Err(_) => {
                step *= 0.5;
                if step < 1e-6 {
                    return Err(Error::ExtensionFailed { reached: cur.param });
                }
            }
        }
    }
    Ok(cur)
}

/// `|param · r(H[α field]) - 1|`, which vanishes on every semi-trivial solution.
pub fn identity_residual(model: &Model, sol: &SemiTrivialSolution) -> Result<f64> {
    let r = model.radius_h(&sol.self_coefficient())?.radius;
    Ok((sol.param * r - 1.0).abs())
}

/// Uniqueness probe: Newton from `starts` random positive traces at fixed
/// `param`. Returns the converged traces.
pub fn uniqueness_probe(
    model: &Model,
    reference: &SemiTrivialSolution,
    starts: usize,
    seed: u64,
) -> Result<Vec<SpatialField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peak = reference.trace.inf_norm();
    let ep = principal_eigenpair(&model.disc.lap)?;
    (0..starts)
        .map(|_| {
            let amp = peak * rng.gen_range(0.5..2.0);
            let guess = DVector::from_fn(model.n_x(), |i, _| {
                amp * ep.vector[i] * rng.gen_range(0.6..1.4)
            });
            newton_semitrivial(model, reference.param, reference.alpha, guess).map(|s| s.trace)
        })
        .collect()
}

/// Which semi-trivial branch a tangent launches from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TangentKind {
    /// From `(0, v_ξ)`: prey appears.
    FromPredatorBranch,
    /// From `(u_η, 0)`: predator appears.
    FromPreyBranch,
}

/// Kernel data of the linearization at a bifurcation point.
///
/// For [`TangentKind::FromPredatorBranch`] the traces are `(Φ₀, Ψ₀)` and the
/// branch leaves along `(+φ*, +ψ*)`. For [`TangentKind::FromPreyBranch`] they
/// are `(Φ₁, Ψ₁)` and the branch leaves along `(-φ⋆, +ψ⋆)`.
#[derive(Debug, Clone)]
pub struct TangentData {
    pub kind: TangentKind,
    /// Bifurcation point `(η, ξ)`.
    pub eta: f64,
    pub xi: f64,
    pub trace_u: SpatialField,
    pub trace_v: SpatialField,
    pub phi: AgeField,
    pub psi: AgeField,
    /// Spectral radius of the operator inverted in the resolvent solve.
    pub resolvent_radius: f64,
}

impl TangentData {
    /// Trace direction `(δu(0), δv(0))` pointing into the coexistence cone.
    pub fn direction(&self) -> (DVector<f64>, DVector<f64>) {
        match self.kind {
            TangentKind::FromPredatorBranch => (self.trace_u.0.clone(), self.trace_v.0.clone()),
            TangentKind::FromPreyBranch => (-&self.trace_u.0, self.trace_v.0.clone()),
        }
    }
}

/// `(I - s M)^{-1} rhs` together with `r(s M)`.
fn resolvent(m: &DMatrix<f64>, s: f64, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = m.nrows();
    let a = DMatrix::identity(n, n) - m * s;
    let radius = spectral_radius(&crate::spectral::NonlocalOperator::from_matrix(m * s))
        .map(|r| r.radius)
        .unwrap_or(f64::NAN);
    let x = dense_solve(a, rhs)
        .map_err(|_| Error::Singular(format!("resolvent with spectral radius {radius}")))?;
    Ok((x, radius))
}

#[derive(Debug, Clone)]
pub struct Eta0Point {
    pub xi: f64,
    pub eta0: f64,
    pub predator: SemiTrivialSolution,
    pub tangent: TangentData,
    /// `r(G_ξ)`, with the power-iteration diagnostics.
    pub spectral: SpectralResult,
}

/// Bifurcation point `η₀ = 1 / r(G_ξ)` on the predator branch, and the
/// kernel `(φ*, ψ*)` of the linearization there.
pub fn eta0(model: &Model, xi: f64) -> Result<Eta0Point> {
    let predator = solve_predator(model, xi)?;
    eta0_from(model, predator)
}

pub fn eta0_from(model: &Model, predator: SemiTrivialSolution) -> Result<Eta0Point> {
    let p = &model.params;
    let disc = &model.disc;
    let xi = predator.param;
    let v = &predator.field;
    let spectral = model.radius_g(v)?;
    let eta0 = 1.0 / spectral.radius;
    let phi0 = spectral.eigvec.0.clone();

    let d = v.map(|x| 1.0 + p.gamma * x);
    let c = v.scale(p.alpha2);
    let phi = evolve_conservative(disc, &d, &c, &phi0, model.stepper.diffusion_floor)?;

    let h = v.scale(2.0 * p.beta1);
    let forcing = v.zip_map(&phi, |vv, ph| p.beta2 * vv * ph);
    let forced = evolve_duhamel(disc, &h, &forcing, &DVector::zeros(disc.n_x()))?;
    let hmat = assemble_h(disc, &h, &model.birth)?;
    let rhs = model.age_integral(&forced)?.0 * xi;
    let (psi0, resolvent_radius) = resolvent(&hmat.matrix, xi, &rhs)?;
    let psi = evolve_duhamel(disc, &h, &forcing, &psi0)?;

    Ok(Eta0Point {
        xi,
        eta0,
        predator,
        tangent: TangentData {
            kind: TangentKind::FromPredatorBranch,
            eta: eta0,
            xi,
            trace_u: SpatialField(phi0),
            trace_v: SpatialField(psi0),
            phi,
            psi,
            resolvent_radius,
        },
        spectral,
    })
}

/// Kernel of the linearization at `(u_η, 0)` when `ξ r(H[-β₂ u_η]) = 1`.
pub fn prey_branch_tangent(model: &Model, xi: f64, prey: &SemiTrivialSolution) -> Result<TangentData> {
    let p = &model.params;
    let disc = &model.disc;
    let eta = prey.param;
    let u = &prey.field;
    let h_v = u.scale(-p.beta2);
    let perron = model.radius_h(&h_v)?;
    let psi1 = perron.eigvec.0.clone();
    let psi = evolve_linear(disc, &h_v, &psi1)?;

    let slices: Vec<DVector<f64>> = u
        .slices()
        .iter()
        .zip(psi.slices())
        .map(|(uk, pk)| {
            let prod = uk.component_mul(pk);
            -disc.lap.apply(&(&prod * p.gamma)) + prod * p.alpha2
        })
        .collect();
    let forcing = AgeField::from_slices(slices)?;
    let h_u = u.scale(2.0 * p.alpha1);
    let forced = evolve_duhamel(disc, &h_u, &forcing, &DVector::zeros(disc.n_x()))?;
    let hmat = assemble_h(disc, &h_u, &model.birth)?;
    let rhs = model.age_integral(&forced)?.0 * eta;
    let (phi1, resolvent_radius) = resolvent(&hmat.matrix, eta, &rhs)?;
    let free = evolve_linear(disc, &h_u, &phi1)?;
    let phi = free.zip_map(&forced, |a, b| a + b);
    Ok(TangentData {
        kind: TangentKind::FromPreyBranch,
        eta,
        xi,
        trace_u: SpatialField(phi1),
        trace_v: SpatialField(psi1),
        phi,
        psi,
        resolvent_radius,
    })
}

#[derive(Debug, Clone)]
pub struct Xi0Point {
    pub eta: f64,
    pub xi0: f64,
    pub prey: SemiTrivialSolution,
    /// `r(H[-β₂ u_η])`.
    pub radius: f64,
}

/// `ξ₀(η) = 1 / r(H[-β₂ u_η])`, the bifurcation point on the prey branch
/// when `ξ` is the active parameter.
pub fn xi0(model: &Model, eta: f64) -> Result<Xi0Point> {
    let prey = solve_prey(model, eta)?;
    xi0_from(model, prey)
}

pub fn xi0_from(model: &Model, prey: SemiTrivialSolution) -> Result<Xi0Point> {
    let radius = model.radius_h(&prey.field.scale(-model.params.beta2))?.radius;
    let xi0 = 1.0 / radius;
    if !(xi0 > 0.0 && xi0 <= 1.0) {
        return Err(Error::Invalid(format!("computed xi0 = {xi0} outside (0, 1]")));
    }
    Ok(Xi0Point {
        eta: prey.param,
        xi0,
        prey,
        radius,
    })
}

#[derive(Debug, Clone)]
pub struct Eta1Point {
    pub xi: f64,
    pub eta1: f64,
    pub prey: SemiTrivialSolution,
    pub tangent: TangentData,
    /// `|ξ r(H[-β₂ u_η₁]) - 1|` at the returned root.
    pub defect: f64,
    pub evaluations: usize,
}

/// Default upper end of the η search window.
pub const ETA_MAX: f64 = 1e3;

/// Solves `ξ r(H[-β₂ u_η]) = 1` for `η > 1` by bracket growth followed by a
/// safeguarded secant/bisection iteration.
pub fn eta1(model: &Model, xi: f64, eta_max: f64) -> Result<Eta1Point> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::NoBifurcation(format!("eta1 needs xi in (0, 1), got {xi}")));
    }
    let beta2 = model.params.beta2;
    let mut evaluations = 0;
    let mut eval = |sol: &SemiTrivialSolution| -> Result<f64> {
        evaluations += 1;
        Ok(xi * model.radius_h(&sol.field.scale(-beta2))?.radius - 1.0)
    };

    // f(1) = xi - 1 since u_1 = 0 and r(H[0]) = 1.
    let mut lo: (f64, f64, Option<SemiTrivialSolution>) = (1.0, xi - 1.0, None);
    let mut eta = 1.0 + START_OFFSET;
    let mut sol = solve_prey(model, eta)?;
    let mut f = eval(&sol)?;
    while f < 0.0 {
        lo = (eta, f, Some(sol.clone()));
        if eta >= eta_max {
            return Err(Error::NoBifurcation(format!(
                "xi = {xi} is below the delta estimate: xi r(H[-beta2 u_eta]) < 1 up to eta = {eta_max}"
            )));
        }
        eta = (1.0 + (eta - 1.0) * 1.6).min(eta_max);
        sol = continue_semitrivial(model, &sol, eta)?;
        f = eval(&sol)?;
    }
    let mut hi = (eta, f, sol);

    let mut best = hi.clone();
    for it in 0..200 {
        if best.1.abs() <= 1e-9 {
            break;
        }
        let (a, fa) = (lo.0, lo.1);
        let (b, fb) = (hi.0, hi.1);
        let secant = b - fb * (b - a) / (fb - fa);
        let mid = 0.5 * (a + b);
        let trial = if it % 3 == 2 || !(secant > a && secant < b) {
            mid
        } else {
            secant
        };
        let from = match &lo.2 {
            Some(s) if (trial - a).abs() < (b - trial).abs() => s,
            _ => &hi.2,
        };
        let s = continue_semitrivial(model, from, trial)?;
        let ft = eval(&s)?;
        let entry = (trial, ft, s);
        if ft.abs() < best.1.abs() {
            best = entry.clone();
        }
        if ft < 0.0 {
            lo = (entry.0, entry.1, Some(entry.2));
        } else {
            hi = entry;
        }
        if (hi.0 - lo.0).abs() < 1e-15 * hi.0 {
            break;
        }
    }
    let (eta1, defect, prey) = (best.0, best.1.abs(), best.2);
    let tangent = prey_branch_tangent(model, xi, &prey)?;
    Ok(Eta1Point {
        xi,
        eta1,
        prey,
        tangent,
        defect,
        evaluations,
    })
}

#[derive(Debug, Clone)]
pub struct DeltaEstimate {
    /// `1 / r(H[-β₂ u_η])` at the largest η reached; an upper estimate of δ.
    pub delta_hat: f64,
    /// `(η, 1 / r(H[-β₂ u_η]))` along the ladder.
    pub ladder: Vec<(f64, f64)>,
}

/// Upper estimate of δ from the ladder `η ∈ {10, 10², …} ∩ (1, η_max]`,
/// with `η_max` appended when it is not a power of ten.
pub fn delta_estimate(model: &Model, eta_max: f64) -> Result<DeltaEstimate> {
    if !(eta_max > 1.0) {
        return Err(Error::Invalid(format!("eta_max must exceed 1, got {eta_max}")));
    }
    let mut etas = Vec::new();
    let mut e = 10.0;
    while e <= eta_max * (1.0 + 1e-12) {
        etas.push(e);
        e *= 10.0;
    }
    if etas.last().map_or(true, |&l| (l - eta_max).abs() > 1e-9 * eta_max) {
        etas.push(eta_max);
    }
    let mut ladder = Vec::with_capacity(etas.len());
    let mut sol: Option<SemiTrivialSolution> = None;
    for eta in etas {
        let s = match &sol {
            Some(prev) => continue_semitrivial(model, prev, eta)?,
            None => solve_prey(model, eta)?,
        };
        let r = model.radius_h(&s.field.scale(-model.params.beta2))?.radius;
        ladder.push((eta, 1.0 / r));
        sol = Some(s);
    }
    Ok(DeltaEstimate {
        delta_hat: ladder.last().map(|x| x.1).unwrap_or(1.0),
        ladder,
    })
}

/// `η r(G_ξ) - 1`; a root in `ξ > 1` is where the ξ-continuum may meet the
/// predator branch. Its existence is not guaranteed.
pub fn xi1_residual(model: &Model, eta: f64, xi: f64) -> Result<f64> {
    if !(xi > 1.0) {
        return Err(Error::Invalid(format!("xi1 residual needs xi > 1, got {xi}")));
    }
    let v = solve_predator(model, xi)?;
    Ok(eta * model.radius_g(&v.field)?.radius - 1.0)
}

#[derive(Debug, Clone)]
pub struct Xi1Scan {
    pub eta: f64,
    pub points: Vec<(f64, f64)>,
    /// Consecutive grid values where the residual changes sign.
    pub sign_changes: Vec<(f64, f64)>,
}

/// Residual of the connection relation over an increasing grid of `ξ > 1`.
pub fn xi1_scan(model: &Model, eta: f64, xis: &[f64]) -> Result<Xi1Scan> {
    let mut points = Vec::with_capacity(xis.len());
    let mut sol: Option<SemiTrivialSolution> = None;
    for &xi in xis {
        if !(xi > 1.0) {
            return Err(Error::Invalid(format!("scan values must exceed 1, got {xi}")));
        }
        let v = match &sol {
            Some(prev) => continue_semitrivial(model, prev, xi)?,
            None => solve_predator(model, xi)?,
        };
        let res = eta * model.radius_g(&v.field)?.radius - 1.0;
        points.push((xi, res));
        sol = Some(v);
    }
    let sign_changes = points
        .windows(2)
        .filter(|w| w[0].1 == 0.0 || w[0].1.signum() != w[1].1.signum())
        .map(|w| (w[0].0, w[1].0))
        .collect();
    Ok(Xi1Scan {
        eta,
        points,
        sign_changes,
    })
}

/// Root of the connection relation inside a sign-change bracket.
pub fn find_xi1(model: &Model, eta: f64, lo: f64, hi: f64) -> Result<f64> {
    let mut a = lo;
    let mut b = hi;
    let mut fa = xi1_residual(model, eta, a)?;
    let mut fb = xi1_residual(model, eta, b)?;
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::NoBifurcation(format!("no sign change on [{lo}, {hi}]")));
    }
    for it in 0..100 {
        let secant = b - fb * (b - a) / (fb - fa);
        let x = if it % 3 == 2 || !(secant > a.min(b) && secant < a.max(b)) {
            0.5 * (a + b)
        } else {
            secant
        };
        let fx = xi1_residual(model, eta, x)?;
        if fx.abs() <= 1e-11 || (b - a).abs() <= 1e-12 * x {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BirthShape;

    fn model(n_x: usize, n_a: usize) -> Model {
        let disc = Discretization::new(n_x, n_a, 1.0).unwrap();
        let raw = BirthProfile::from_shape(&BirthShape::Constant, &disc.ages).unwrap();
        Model::new(disc, &raw, ModelParams::default()).unwrap()
    }

    #[test]
    fn no_solution_at_or_below_one() {
        let m = model(8, 16);
        assert!(matches!(solve_prey(&m, 0.5), Err(Error::NoPositiveSolution { .. })));
        assert!(matches!(solve_prey(&m, 1.0), Err(Error::NoPositiveSolution { .. })));
    }

    #[test]
    fn spectral_identity_on_prey_branch() {
        let m = model(12, 24);
        let u = solve_prey(&m, 1.5).unwrap();
        assert!(u.field.is_nonnegative());
        assert!(identity_residual(&m, &u).unwrap() <= 1e-8);
        let trace_again = m.age_integral(&u.field).unwrap().0 * 1.5;
        assert!((trace_again - &u.trace.0).amax() <= 1e-9 * u.trace.inf_norm().max(1.0));
    }

    #[test]
    fn prey_branch_is_monotone() {
        let m = model(12, 24);
        let a = solve_prey(&m, 1.5).unwrap();
        let b = solve_prey(&m, 2.0).unwrap();
        for k in 0..m.disc.n_ages() {
            assert!(b.field.slice(k).iter().zip(a.field.slice(k).iter()).all(|(x, y)| x >= y));
        }
    }

    #[test]
    fn below_one_branch_is_sign_flipped() {
        let m = model(12, 24);
        let w = extend_semitrivial_below_one(&m, 0.98).unwrap();
        assert_eq!(w.sign, BranchSign::Negative);
        assert!(w.field.is_nonnegative());
        assert!(w.physical_field().max_abs() == w.field.max_abs());
        assert!(w.physical_field().slices().iter().all(|s| s.iter().all(|&x| x <= 0.0)));
        assert!(identity_residual(&m, &w).unwrap() <= 1e-8);
        let w2 = extend_semitrivial_below_one(&m, 0.995).unwrap();
        assert!(w2.trace.inf_norm() < w.trace.inf_norm());
    }

    #[test]
    fn eta0_degenerates_without_cross_terms() {
        let m = model(10, 20).with_params(ModelParams {
            gamma: 0.0,
            alpha2: 0.0,
            ..ModelParams::default()
        });
        let e = eta0(&m, 2.0).unwrap();
        assert!((e.eta0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eta0_transversality_identity() {
        let m = model(12, 24);
        let e = eta0(&m, 2.0).unwrap();
        let t = &e.tangent;
        assert!(e.eta0 > 0.0);
        assert!(t.trace_u.is_positive());
        let integral = m.age_integral(&t.phi).unwrap();
        assert!((&t.trace_u.0 - integral.0 * e.eta0).amax() <= 1e-9);
        assert!(t.resolvent_radius < 1.0);
        assert_eq!(t.psi.slice(0), &t.trace_v.0);
    }

    #[test]
    fn xi0_in_unit_interval() {
        let m = model(10, 64);
        let x = xi0(&m, 2.0).unwrap();
        assert!(x.xi0 > 0.0 && x.xi0 < 1.0);
        let tiny = m.with_params(ModelParams {
            beta2: 1e-12,
            ..ModelParams::default()
        });
        assert!((xi0(&tiny, 2.0).unwrap().xi0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eta1_inverts_xi0() {
        let m = model(10, 20);
        let e = eta1(&m, 0.9, ETA_MAX).unwrap();
        assert!(e.eta1 > 1.0);
        assert!(e.defect <= 1e-9);
        let back = xi0(&m, e.eta1).unwrap();
        assert!((back.xi0 - 0.9).abs() <= 1e-8, "{}", back.xi0);
    }

    #[test]
    fn eta1_rejects_xi_outside_unit_interval() {
        let m = model(8, 16);
        assert!(matches!(eta1(&m, 1.2, ETA_MAX), Err(Error::NoBifurcation(_))));
    }

    #[test]
    fn xi1_residual_degenerate_case() {
        let m = model(8, 16).with_params(ModelParams {
            gamma: 0.0,
            alpha2: 0.0,
            ..ModelParams::default()
        });
        for xi in [1.5, 3.0] {
            let r = xi1_residual(&m, 1.7, xi).unwrap();
            assert!((r - 0.7).abs() < 1e-10);
        }
    }
}
