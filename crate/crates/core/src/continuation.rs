//! Coexistence states, pseudo-arclength continuation and endpoint
//! classification.
//!
//! The unknowns are the age-zero traces `(u0, v0)` and the active parameter
//! `μ` (either η with ξ fixed or ξ with η fixed). Arclength is measured in
//! the discrete `L²` norm of the traces plus `|Δμ|`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::branches::{
    eta0, eta1, prey_branch_tangent, solve_predator, solve_prey, xi0_from, Model, TangentData,
    TangentKind,
};
use crate::error::{Error, Result};
use crate::evolve::evolve_coupled_unchecked;
use crate::grid::{AgeField, SpatialField};
use crate::linalg::inf_norm;
use crate::newton::{fd_jacobian, newton, NewtonOptions};

/// Which parameter moves along the branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Mode {
    VaryEta { xi: f64 },
    VaryXi { eta: f64 },
}

impl Mode {
    /// `(η, ξ)` at active value `mu`.
    pub fn params(&self, mu: f64) -> (f64, f64) {
        match *self {
            Mode::VaryEta { xi } => (mu, xi),
            Mode::VaryXi { eta } => (eta, mu),
        }
    }
}

/// Shooting residual of the coupled problem, `(u0 - η ∫ b u, v0 - ξ ∫ b v)`.
pub fn residual(model: &Model, u0: &DVector<f64>, v0: &DVector<f64>, eta: f64, xi: f64) -> Result<DVector<f64>> {
    let (u, v) = evolve_coupled_unchecked(&model.disc, u0, v0, &model.params, &model.stepper)?;
    let iu = model.age_integral(&u)?;
    let iv = model.age_integral(&v)?;
    let n = model.n_x();
    Ok(DVector::from_fn(2 * n, |i, _| {
        if i < n {
            u0[i] - eta * iu[i]
        } else {
            v0[i - n] - xi * iv[i - n]
        }
    }))
}

fn split(model: &Model, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = model.n_x();
    (y.rows(0, n).into_owned(), y.rows(n, n).into_owned())
}

fn pack(u0: &DVector<f64>, v0: &DVector<f64>, mu: f64) -> DVector<f64> {
    let n = u0.len();
    DVector::from_fn(2 * n + 1, |i, _| match i {
        i if i < n => u0[i],
        i if i < 2 * n => v0[i - n],
        _ => mu,
    })
}

/// Forward-difference Jacobian of [`residual`] with respect to `(u0, v0)`.
pub fn jacobian(model: &Model, u0: &DVector<f64>, v0: &DVector<f64>, eta: f64, xi: f64) -> Result<DMatrix<f64>> {
    let y = DVector::from_iterator(2 * u0.len(), u0.iter().chain(v0.iter()).copied());
    let f = |y: &DVector<f64>| {
        let (u, v) = split(model, y);
        residual(model, &u, &v, eta, xi)
    };
    let fy = f(&y)?;
    fd_jacobian(&f, &y, &fy)
}

#[derive(Debug, Clone)]
pub struct CoexistenceState {
    pub u0: SpatialField,
    pub v0: SpatialField,
    pub mu: f64,
    pub mode: Mode,
    pub newton_iters: usize,
    pub residual: f64,
}

impl CoexistenceState {
    fn from_packed(model: &Model, y: &DVector<f64>, mode: Mode, newton_iters: usize) -> Result<Self> {
        let (u0, v0) = split(model, y);
        let mu = y[y.len() - 1];
        let (eta, xi) = mode.params(mu);
        let residual = inf_norm(&residual(model, &u0, &v0, eta, xi)?);
        Ok(Self {
            u0: SpatialField(u0),
            v0: SpatialField(v0),
            mu,
            mode,
            newton_iters,
            residual,
        })
    }

    pub fn eta(&self) -> f64 {
        self.mode.params(self.mu).0
    }

    pub fn xi(&self) -> f64 {
        self.mode.params(self.mu).1
    }

    fn packed(&self) -> DVector<f64> {
        pack(&self.u0, &self.v0, self.mu)
    }

    /// Full age profiles reconstructed from the traces.
    pub fn fields(&self, model: &Model) -> Result<(AgeField, AgeField)> {
        evolve_coupled_unchecked(&model.disc, &self.u0, &self.v0, &model.params, &model.stepper)
    }

    pub fn is_interior_positive(&self) -> bool {
        self.u0.is_positive() && self.v0.is_positive()
    }
}

/// Which continuum a launch traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Scenario {
    /// From `(η₀, 0, v_ξ)`, ξ > 1 fixed, η varies.
    T1,
    /// From `(η₁, u_η₁, 0)`, ξ ∈ (δ, 1) fixed, η varies.
    T22,
    /// From `(ξ₀, u_η, 0)`, η > 1 fixed, ξ varies.
    T222,
}

/// Bifurcation point, kernel direction and the semi-trivial base state.
#[derive(Debug, Clone)]
pub struct Launch {
    pub scenario: Scenario,
    pub mode: Mode,
    /// Active parameter at the bifurcation point.
    pub mu0: f64,
    pub tangent: TangentData,
    pub base_u: DVector<f64>,
    pub base_v: DVector<f64>,
}

impl Launch {
    pub fn t1(model: &Model, xi: f64) -> Result<Self> {
        let e = eta0(model, xi)?;
        let n = model.n_x();
        Ok(Self {
            scenario: Scenario::T1,
            mode: Mode::VaryEta { xi },
            mu0: e.eta0,
            base_u: DVector::zeros(n),
            base_v: e.predator.trace.0.clone(),
            tangent: e.tangent,
        })
    }

    pub fn t22(model: &Model, xi: f64, eta_max: f64) -> Result<Self> {
        let e = eta1(model, xi, eta_max)?;
        let n = model.n_x();
        Ok(Self {
            scenario: Scenario::T22,
            mode: Mode::VaryEta { xi },
            mu0: e.eta1,
            base_u: e.prey.trace.0.clone(),
            base_v: DVector::zeros(n),
            tangent: e.tangent,
        })
    }

    pub fn t222(model: &Model, eta: f64) -> Result<Self> {
        let x = xi0_from(model, solve_prey(model, eta)?)?;
        let tangent = prey_branch_tangent(model, x.xi0, &x.prey)?;
        let n = model.n_x();
        Ok(Self {
            scenario: Scenario::T222,
            mode: Mode::VaryXi { eta },
            mu0: x.xi0,
            base_u: x.prey.trace.0.clone(),
            base_v: DVector::zeros(n),
            tangent,
        })
    }

    pub fn base_point(&self) -> DVector<f64> {
        pack(&self.base_u, &self.base_v, self.mu0)
    }

    /// Kernel direction scaled so that the vanishing component peaks at one,
    /// and the index of that peak in the packed unknowns.
    pub fn direction(&self) -> (DVector<f64>, DVector<f64>, usize) {
        let (du, dv) = self.tangent.direction();
        let n = du.len();
        let (pinned, offset) = match self.tangent.kind {
            TangentKind::FromPredatorBranch => (&du, 0),
            TangentKind::FromPreyBranch => (&dv, n),
        };
        let i = pinned.imax();
        let c = 1.0 / pinned[i];
        (du * c, dv * c, offset + i)
    }

    /// Sup norm of the semi-trivial base traces.
    pub fn base_amplitude(&self) -> f64 {
        inf_norm(&self.base_u).max(inf_norm(&self.base_v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationConfig {
    /// Launch amplitude; `None` selects `max(1e-2 |base|_inf, 1e-4)`.
    pub s0: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub norm_cap: f64,
    /// Relative positivity threshold on the traces.
    pub pos_tol: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub max_steps: usize,
    pub corrector_tol: f64,
    pub corrector_max_iter: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            s0: None,
            h_min: 1e-4,
            h_max: 0.25,
            norm_cap: 1e3,
            pos_tol: 1e-8,
            mu_min: 0.0,
            mu_max: 20.0,
            max_steps: 400,
            corrector_tol: 1e-10,
            corrector_max_iter: 8,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if let Some(s0) = self.s0 {
            if !(s0 > 0.0) {
                return bad(format!("s0 must be positive, got {s0}"));
            }
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_max) {
            return bad(format!(
                "step bounds need 0 < h_min <= h_max, got h_min = {}, h_max = {}",
                self.h_min, self.h_max
            ));
        }
        if !(self.norm_cap > 0.0) {
            return bad(format!("norm_cap must be positive, got {}", self.norm_cap));
        }
        if !(self.pos_tol >= 0.0 && self.pos_tol < 1.0) {
            return bad(format!("pos_tol must lie in [0, 1), got {}", self.pos_tol));
        }
        if !(self.mu_min < self.mu_max) {
            return bad(format!(
                "parameter range needs mu_min < mu_max, got [{}, {}]",
                self.mu_min, self.mu_max
            ));
        }
        if !(self.corrector_tol > 0.0) || self.corrector_max_iter == 0 || self.max_steps == 0 {
            return bad("corrector tolerance, iteration and step budgets must be positive".into());
        }
        Ok(())
    }

    fn launch_amplitude(&self, launch: &Launch) -> f64 {
        self.s0
            .unwrap_or_else(|| (1e-2 * launch.base_amplitude()).max(1e-4))
    }
}

const LAUNCH_HALVINGS: usize = 6;

/// First point off the bifurcation: Newton on `(u0, v0, μ)` with the peak of
/// the vanishing component pinned to `s0`. Halves `s0` on failure.
pub fn first_step_off_bifurcation(model: &Model, launch: &Launch, s0: f64) -> Result<CoexistenceState> {
    let (du, dv, pin) = launch.direction();
    let base = launch.base_point();
    let mode = launch.mode;
    let mut last = Error::NewtonDivergence {
        iterations: 0,
        residual: f64::NAN,
    };
    for halving in 0..=LAUNCH_HALVINGS {
        let s = s0 / 2f64.powi(halving as i32);
        let mut guess = base.clone();
        let n = du.len();
        for i in 0..n {
            guess[i] += s * du[i];
            guess[n + i] += s * dv[i];
        }
        let f = |y: &DVector<f64>| -> Result<DVector<f64>> {
            let (u, v) = split(model, y);
            let (eta, xi) = mode.params(y[2 * n]);
            let r = residual(model, &u, &v, eta, xi)?;
            Ok(DVector::from_fn(2 * n + 1, |i, _| if i < 2 * n { r[i] } else { y[pin] - s }))
        };
        let opts = NewtonOptions {
            tol: 1e-10,
            ..NewtonOptions::default()
        };
        match newton(&f, guess, &opts) {
            Ok(out) => {
                let st = CoexistenceState::from_packed(model, &out.x, mode, out.iterations)?;
                if st.is_interior_positive() {
                    return Ok(st);
                }
                last = Error::Invalid(format!("launch at amplitude {s} left the positive cone"));
            }
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// How a traced branch ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    NormCapReached,
    /// The prey component vanished.
    HitSemitrivialU,
    /// The predator component vanished.
    HitSemitrivialV,
    ParamExitedRange,
    CoefficientFloor,
    /// The age grid is too coarse for the amplitudes reached (step guard).
    ResolutionLimit,
    StepFailure,
    StepBudgetExhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub index: usize,
    pub s: f64,
    pub mu: f64,
    pub norm_u: f64,
    pub norm_v: f64,
    pub min_u0: f64,
    pub min_v0: f64,
    pub step: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub scenario: Scenario,
    pub mode: Mode,
    pub records: Vec<BranchRecord>,
    /// States matching `records` one to one.
    pub states: Vec<CoexistenceState>,
    pub stop: StopReason,
    pub terminal: CoexistenceState,
}

struct Tracer<'a> {
    model: &'a Model,
    mode: Mode,
    cfg: &'a ContinuationConfig,
    weights: DVector<f64>,
}

impl Tracer<'_> {
    fn wnorm(&self, d: &DVector<f64>) -> f64 {
        d.component_mul(&self.weights).norm()
    }

    fn coupled(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.model.n_x();
        let (u, v) = split(self.model, y);
        let (eta, xi) = self.mode.params(y[2 * n]);
        residual(self.model, &u, &v, eta, xi)
    }

    /// Corrects the predictor `cur + h t` onto the branch. Chord iteration
    /// with a Jacobian refresh whenever convergence stalls.
    fn correct(&self, cur: &DVector<f64>, t: &DVector<f64>, h: f64) -> Result<(DVector<f64>, usize)> {
        let m = cur.len();
        let wt = t.component_mul(&self.weights).component_mul(&self.weights);
        let f = |y: &DVector<f64>| -> Result<DVector<f64>> {
            let r = self.coupled(y)?;
            let arc = wt.dot(&(y - cur)) - h;
            Ok(DVector::from_fn(m, |i, _| if i + 1 < m { r[i] } else { arc }))
        };
        let mut y = cur + t * h;
        let mut fy = f(&y)?;
        let mut res = inf_norm(&fy);
        let mut lu = fd_jacobian(&f, &y, &fy)?.lu();
        let mut fresh = true;
        for it in 0..self.cfg.corrector_max_iter {
            if res <= self.cfg.corrector_tol {
                return Ok((y, it));
            }
            let dx = lu
                .solve(&fy)
                .ok_or_else(|| Error::Singular("bordered continuation matrix".into()))?;
            let yn = &y - dx;
            let fnew = f(&yn)?;
            let rn = inf_norm(&fnew);
            if !(rn < res) {
                if fresh {
                    break;
                }
                lu = fd_jacobian(&f, &y, &fy)?.lu();
                fresh = true;
                continue;
            }
            let slow = rn > 0.1 * res;
            y = yn;
            fy = fnew;
            res = rn;
            fresh = false;
            if slow && res > self.cfg.corrector_tol {
                lu = fd_jacobian(&f, &y, &fy)?.lu();
                fresh = true;
            }
        }
        if res <= self.cfg.corrector_tol {
            return Ok((y, self.cfg.corrector_max_iter));
        }
        Err(Error::NewtonDivergence {
            iterations: self.cfg.corrector_max_iter,
            residual: res,
        })
    }

    fn record(&self, st: &CoexistenceState, index: usize, s: f64, step: f64) -> Result<BranchRecord> {
        let (u, v) = st.fields(self.model)?;
        let d = &self.model.disc;
        Ok(BranchRecord {
            index,
            s,
            mu: st.mu,
            norm_u: u.l2_norm(&d.ages, &d.space),
            norm_v: v.l2_norm(&d.ages, &d.space),
            min_u0: st.u0.min(),
            min_v0: st.v0.min(),
            step,
            newton_iters: st.newton_iters,
            residual: st.residual,
        })
    }
}

fn vanished(trace: &DVector<f64>, scale: f64, pos_tol: f64) -> bool {
    trace.min() < 0.0 || inf_norm(trace) <= pos_tol * scale
}

/// Pseudo-arclength continuation from `start`, seeded by the secant from
/// the bifurcation point.
pub fn continue_branch(
    model: &Model,
    launch: &Launch,
    start: CoexistenceState,
    cfg: &ContinuationConfig,
) -> Result<Branch> {
    cfg.validate()?;
    let n = model.n_x();
    let hx = model.disc.space.h_x();
    let tracer = Tracer {
        model,
        mode: launch.mode,
        cfg,
        weights: DVector::from_fn(2 * n + 1, |i, _| if i < 2 * n { hx.sqrt() } else { 1.0 }),
    };

    let mut prev = launch.base_point();
    let mut cur = start.packed();
    let mut s = tracer.wnorm(&(&cur - &prev));
    let mut h = s.clamp(cfg.h_min, cfg.h_max);
    let mut records = vec![tracer.record(&start, 0, s, s)?];
    let mut states = vec![start];

    let finish = |records: Vec<BranchRecord>, states: Vec<CoexistenceState>, stop, terminal| Branch {
        scenario: launch.scenario,
        mode: launch.mode,
        records,
        states,
        stop,
        terminal,
    };

    let mut blocked = None;
    for _ in 0..cfg.max_steps {
        let sec = &cur - &prev;
        let t = &sec / tracer.wnorm(&sec);
        let (y, iters) = match tracer.correct(&cur, &t, h) {
            Ok(ok) => ok,
            Err(e) => {
                // Remember structural failures seen while shrinking the step;
                // plain Newton failures are reported only if nothing else was.
                match e {
                    Error::CoefficientFloor { .. } => blocked = Some(StopReason::CoefficientFloor),
                    Error::PositivityGuard { .. } if blocked.is_none() => {
                        blocked = Some(StopReason::ResolutionLimit)
                    }
                    _ => {}
                }
                h *= 0.5;
                if h < cfg.h_min {
                    let stop = blocked.unwrap_or(StopReason::StepFailure);
                    let last = states.last().cloned().expect("nonempty");
                    return Ok(finish(records, states, stop, last));
                }
                continue;
            }
        };
        let (u0, v0) = split(model, &y);
        let scale = inf_norm(&u0).max(inf_norm(&v0));
        let hit_u = vanished(&u0, scale, cfg.pos_tol);
        let hit_v = vanished(&v0, scale, cfg.pos_tol);
        if hit_u || hit_v {
            let which = if hit_u { 0 } else { n };
            let (yt, ht) = refine_crossing(&tracer, &cur, &t, h, which, scale)?;
            let st = CoexistenceState::from_packed(model, &yt, launch.mode, iters)?;
            s += ht;
            records.push(tracer.record(&st, records.len(), s, ht)?);
            states.push(st.clone());
            let stop = if hit_u {
                StopReason::HitSemitrivialU
            } else {
                StopReason::HitSemitrivialV
            };
            return Ok(finish(records, states, stop, st));
        }

        let st = CoexistenceState::from_packed(model, &y, launch.mode, iters)?;
        s += h;
        let rec = tracer.record(&st, records.len(), s, h)?;
        let norm = rec.norm_u.hypot(rec.norm_v);
        let mu = st.mu;
        records.push(rec);
        states.push(st.clone());
        if norm > cfg.norm_cap {
            return Ok(finish(records, states, StopReason::NormCapReached, st));
        }
        if !(mu >= cfg.mu_min && mu <= cfg.mu_max) {
            return Ok(finish(records, states, StopReason::ParamExitedRange, st));
        }
        prev = std::mem::replace(&mut cur, y);
        blocked = None;
        if iters <= 3 {
            h = (h * 1.3).min(cfg.h_max);
        }
    }
    let last = states.last().cloned().expect("nonempty");
    Ok(finish(records, states, StopReason::StepBudgetExhausted, last))
}

/// Locates, along the arclength step from `cur`, the point where the peak
/// of the vanishing component (prey if `offset == 0`) crosses zero.
fn refine_crossing(
    tracer: &Tracer,
    cur: &DVector<f64>,
    t: &DVector<f64>,
    h: f64,
    offset: usize,
    scale: f64,
) -> Result<(DVector<f64>, f64)> {
    let n = tracer.model.n_x();
    let peak = offset + cur.rows(offset, n).imax();
    let g = |y: &DVector<f64>| y[peak];
    let (mut a, mut ga) = (0.0, g(cur));
    let (yb, _) = tracer.correct(cur, t, h)?;
    let (mut b, mut gb) = (h, g(&yb));
    let mut best = (yb, h);
    if gb > 0.0 {
        return Ok(best);
    }
    let tol = (tracer.cfg.pos_tol * scale).max(1e-12);
    for it in 0..60 {
        let x = if it % 3 == 2 { 0.5 * (a + b) } else { b - gb * (b - a) / (gb - ga) };
        let x = if x > a && x < b { x } else { 0.5 * (a + b) };
        let (y, _) = tracer.correct(cur, t, x)?;
        let gx = g(&y);
        best = (y, x);
        if gx.abs() <= tol || (b - a) < 1e-14 * h {
            break;
        }
        if gx > 0.0 {
            a = x;
            ga = gx;
        } else {
            b = x;
            gb = gx;
        }
    }
    Ok(best)
}

/// Launch plus trace in one call.
pub fn trace_branch(model: &Model, launch: &Launch, cfg: &ContinuationConfig) -> Result<Branch> {
    cfg.validate()?;
    let start = first_step_off_bifurcation(model, launch, cfg.launch_amplitude(launch))?;
    continue_branch(model, launch, start, cfg)
}

/// Global alternative assigned to a terminated branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alternative {
    Unbounded,
    /// T22 (ii): reaches a coexistence state at the lower end of the η window.
    ConnectsLowerEnd,
    /// T222 (ii): joins the predator-only branch.
    ConnectsPredatorBranch,
    Unclassified,
}

#[derive(Debug, Clone, Serialize)]
pub struct EndpointReport {
    pub scenario: Scenario,
    pub reason: StopReason,
    pub alternative: Alternative,
    pub label: String,
    /// Connection point on the predator branch, when found.
    pub xi1: Option<f64>,
    pub diagnostics: Vec<(String, f64)>,
}

/// Maps the stop reason and the terminal state onto the alternatives of the
/// relevant scenario. Anything ambiguous is reported as unclassified.
pub fn classify_endpoint(model: &Model, branch: &Branch, cfg: &ContinuationConfig) -> Result<EndpointReport> {
    let st = &branch.terminal;
    let rec = branch.records.last().expect("branch has records");
    let scale = st.u0.inf_norm().max(st.v0.inf_norm());
    let mut diagnostics = vec![
        ("mu".to_string(), st.mu),
        ("norm_u".to_string(), rec.norm_u),
        ("norm_v".to_string(), rec.norm_v),
        ("max_u0".to_string(), st.u0.inf_norm()),
        ("max_v0".to_string(), st.v0.inf_norm()),
        ("min_u0".to_string(), st.u0.min()),
        ("min_v0".to_string(), st.v0.min()),
        ("norm_cap".to_string(), cfg.norm_cap),
        ("pos_tol".to_string(), cfg.pos_tol),
    ];
    let small = |x: f64| x <= 1e-6 * scale.max(1e-300);
    let both_small = small(st.u0.inf_norm()) && small(st.v0.inf_norm());
    let mut xi1 = None;
    use Alternative::*;
    use Scenario::*;
    let (alternative, label) = match (branch.scenario, branch.stop) {
        _ if both_small => (Unclassified, "both components vanish".to_string()),
        (T1, StopReason::NormCapReached) => (Unbounded, "T1: unbounded continuum of coexistence states".into()),
        (T22, StopReason::NormCapReached) => (Unbounded, "T22 (i): unbounded".into()),
        (T222, StopReason::NormCapReached) => (Unbounded, "T222 (i): unbounded".into()),
        (sc, StopReason::ParamExitedRange) if st.mu > cfg.mu_max => {
            let name = match sc {
                T1 => "T1: unbounded continuum",
                T22 => "T22 (i): unbounded",
                T222 => "T222 (i): unbounded",
            };
            (Unbounded, format!("{name} (parameter window exhausted at {})", cfg.mu_max))
        }
        (T22, StopReason::ParamExitedRange) if st.is_interior_positive() => (
            ConnectsLowerEnd,
            format!("T22 (ii) candidate: coexistence state at eta = {} below the window", st.mu),
        ),
        (T222, StopReason::HitSemitrivialU) => {
            let xi = st.xi();
            if xi > 1.0 {
                let v = solve_predator(model, xi)?;
                let dev = (&st.v0.0 - &v.trace.0).amax() / v.trace.inf_norm();
                let defect = (st.eta() * model.radius_g(&v.field)?.radius - 1.0).abs();
                diagnostics.push(("predator_trace_deviation".into(), dev));
                diagnostics.push(("xi1_defect".into(), defect));
                if dev <= 1e-6 {
                    xi1 = Some(xi);
                    (
                        ConnectsPredatorBranch,
                        format!("T222 (ii): connects T2 with T1 at xi1 = {xi}"),
                    )
                } else {
                    (Unclassified, "prey vanished away from the predator branch".into())
                }
            } else {
                (Unclassified, format!("prey vanished at xi = {xi} <= 1"))
            }
        }
        (sc, reason) => (Unclassified, format!("{sc:?} branch stopped with {reason:?}")),
    };
    Ok(EndpointReport {
        scenario: branch.scenario,
        reason: branch.stop,
        alternative,
        label,
        xi1,
        diagnostics,
    })
}
