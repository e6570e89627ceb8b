//! Backward Euler propagators in age.
//!
//! All steppers sample coefficients at the new age level, so one step reads
//! `(I - da L + da diag(h_{k+1})) z_{k+1} = z_k`. Under the guard
//! `da * max(0, -min h) < 1` the step matrix is an M-matrix and the
//! propagators map nonnegative data to nonnegative data.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::grid::{AgeField, Discretization};
use crate::linalg::{block_thomas, inf_norm, Mat2};
use crate::params::ModelParams;

/// Coefficient sampled at every age node (zeroth-order term or diffusion
/// multiplier). Slice 0 is never read by the steppers.
pub type CoefficientPath = AgeField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    /// Step residual tolerance, relative to `max(1, |z_k|_inf)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound on `1 + gamma v` (and on any conservative multiplier).
    pub diffusion_floor: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 20,
            diffusion_floor: 0.5,
        }
    }
}

fn check_len(disc: &Discretization, what: &str, f: &AgeField) -> Result<()> {
    if f.n_ages() != disc.n_ages() || f.n_x() != disc.n_x() {
        return Err(Error::ShapeMismatch {
            expected: format!("{what}: {} x {}", disc.n_ages(), disc.n_x()),
            got: format!("{} x {}", f.n_ages(), f.n_x()),
        });
    }
    Ok(())
}

fn check_vec(disc: &Discretization, what: &str, v: &DVector<f64>) -> Result<()> {
    if v.len() != disc.n_x() {
        return Err(Error::ShapeMismatch {
            expected: format!("{what}: length {}", disc.n_x()),
            got: format!("length {}", v.len()),
        });
    }
    Ok(())
}

/// Positivity guard on the zeroth-order coefficient at the levels actually used.
pub fn check_positivity_guard(da: f64, h: &AgeField) -> Result<()> {
    let min_coeff = h.slices()[1..]
        .iter()
        .map(|s| s.min())
        .fold(f64::INFINITY, f64::min);
    let product = da * (-min_coeff).max(0.0);
    if product >= 1.0 || !product.is_finite() {
        return Err(Error::PositivityGuard {
            da,
            min_coeff,
            product,
            da_bound: 1.0 / (-min_coeff),
        });
    }
    Ok(())
}

/// Guard for the coupled step: the linearized reaction coefficients at the
/// new level, `2 α₁ u + α₂ v` and `2 β₁ v - β₂ u`, must keep `1 + da c > 0`.
/// Beyond it the step can converge to a spurious sign-changing root.
pub fn check_coupled_guard(da: f64, u: &DVector<f64>, v: &DVector<f64>, p: &ModelParams) -> Result<()> {
    let min_coeff = u
        .iter()
        .zip(v.iter())
        .map(|(&ui, &vi)| {
            (2.0 * p.alpha1 * ui + p.alpha2 * vi).min(2.0 * p.beta1 * vi - p.beta2 * ui)
        })
        .fold(f64::INFINITY, f64::min);
    let product = da * (-min_coeff).max(0.0);
    if product >= 1.0 || !product.is_finite() {
        return Err(Error::PositivityGuard {
            da,
            min_coeff,
            product,
            da_bound: 1.0 / (-min_coeff),
        });
    }
    Ok(())
}

fn check_floor(d: &AgeField, floor: f64) -> Result<()> {
    let min = d.slices()[1..]
        .iter()
        .map(|s| s.min())
        .fold(f64::INFINITY, f64::min);
    if !(min >= floor) {
        return Err(Error::CoefficientFloor { min, floor });
    }
    Ok(())
}

/// Linear propagator with zeroth-order coefficient `h`, started from `phi`.
pub fn evolve_linear(disc: &Discretization, h: &CoefficientPath, phi: &DVector<f64>) -> Result<AgeField> {
    evolve_duhamel_impl(disc, None, h, None, phi)
}

/// Forced propagator: `z_{k+1} = A_{k+1}^{-1} (z_k + da f_{k+1})`.
pub fn evolve_duhamel(
    disc: &Discretization,
    h: &CoefficientPath,
    f: &AgeField,
    phi: &DVector<f64>,
) -> Result<AgeField> {
    check_len(disc, "forcing", f)?;
    evolve_duhamel_impl(disc, None, h, Some(f), phi)
}

/// Divergence-form propagator: `(I - da L diag(d) + da diag(c)) z_{k+1} = z_k`.
pub fn evolve_conservative(
    disc: &Discretization,
    d: &CoefficientPath,
    c: &CoefficientPath,
    phi: &DVector<f64>,
    floor: f64,
) -> Result<AgeField> {
    check_len(disc, "diffusion multiplier", d)?;
    check_floor(d, floor)?;
    evolve_duhamel_impl(disc, Some(d), c, None, phi)
}

fn evolve_duhamel_impl(
    disc: &Discretization,
    d: Option<&AgeField>,
    h: &AgeField,
    f: Option<&AgeField>,
    phi: &DVector<f64>,
) -> Result<AgeField> {
    check_len(disc, "coefficient", h)?;
    check_vec(disc, "initial trace", phi)?;
    let da = disc.da();
    check_positivity_guard(da, h)?;
    let mut out = Vec::with_capacity(disc.n_ages());
    out.push(phi.clone());
    for k in 0..disc.ages.n_a() {
        let m = disc
            .lap
            .step_matrix(da, d.map(|d| d.slice(k + 1)), h.slice(k + 1));
        let mut z = out[k].clone();
        if let Some(f) = f {
            z.axpy(da, f.slice(k + 1), 1.0);
        }
        m.factor()?.solve_in_place(z.as_mut_slice());
        out.push(z);
    }
    AgeField::from_slices(out)
}

/// Propagates every column of `phi` at once (one factorization per step).
/// Column j equals `evolve_linear(h, phi[:, j])` slice by slice.
pub(crate) fn evolve_columns(
    disc: &Discretization,
    d: Option<&AgeField>,
    h: &AgeField,
    phi: nalgebra::DMatrix<f64>,
    mut visit: impl FnMut(usize, &nalgebra::DMatrix<f64>),
) -> Result<()> {
    let da = disc.da();
    check_positivity_guard(da, h)?;
    let mut z = phi;
    visit(0, &z);
    for k in 0..disc.ages.n_a() {
        let m = disc
            .lap
            .step_matrix(da, d.map(|d| d.slice(k + 1)), h.slice(k + 1));
        let fac = m.factor()?;
        for mut col in z.column_iter_mut() {
            fac.solve_in_place(col.as_mut_slice());
        }
        visit(k + 1, &z);
    }
    Ok(())
}

/// One implicit step of `z - da L z + da alpha z∘z = prev` by Newton.
/// `alpha` may be negative (sign-flipped branch below one).
pub(crate) fn reaction_step(
    disc: &Discretization,
    prev: &DVector<f64>,
    alpha: f64,
    cfg: &StepperConfig,
    step: usize,
) -> Result<DVector<f64>> {
    let n = disc.n_x();
    let da = disc.da();
    let k = da * disc.lap.stencil_scale();
    let tol = cfg.tol * inf_norm(prev).max(1.0);
    let residual = |x: &DVector<f64>| -> DVector<f64> {
        let lx = disc.lap.apply(x);
        DVector::from_fn(n, |i, _| {
            x[i] - da * lx[i] + da * (alpha * x[i] * x[i]) - prev[i]
        })
    };
    let mut x = prev.clone();
    let mut r = residual(&x);
    let mut polished = false;
    for it in 0..=cfg.max_iter {
        let rn = inf_norm(&r);
        if !rn.is_finite() {
            break;
        }
        if rn <= tol {
            if polished || rn == 0.0 {
                return Ok(x);
            }
            polished = true;
        } else if it == cfg.max_iter {
            break;
        }
        let lower = vec![-k; n];
        let upper = vec![-k; n];
        let diag: Vec<f64> = (0..n)
            .map(|i| 1.0 + 2.0 * k + da * (2.0 * alpha * x[i]))
            .collect();
        let dx = block_thomas::<f64>(&lower, &diag, &upper, r.as_slice())?;
        for i in 0..n {
            x[i] -= dx[i];
        }
        r = residual(&x);
    }
    Err(Error::StepNewton {
        step,
        iterations: cfg.max_iter,
        residual: inf_norm(&r),
    })
}

pub(crate) fn evolve_reaction(
    disc: &Discretization,
    phi: &DVector<f64>,
    alpha: f64,
    cfg: &StepperConfig,
) -> Result<AgeField> {
    check_vec(disc, "initial trace", phi)?;
    let mut out = Vec::with_capacity(disc.n_ages());
    out.push(phi.clone());
    for k in 0..disc.ages.n_a() {
        let next = reaction_step(disc, &out[k], alpha, cfg, k + 1)?;
        out.push(next);
    }
    AgeField::from_slices(out)
}

/// Semi-trivial stepper `u_{k+1} - da L u_{k+1} + da alpha u_{k+1}^2 = u_k`.
pub fn evolve_semitrivial(
    disc: &Discretization,
    phi: &DVector<f64>,
    alpha: f64,
    cfg: &StepperConfig,
) -> Result<AgeField> {
    if !(alpha > 0.0) {
        return Err(Error::Invalid(format!("reaction coefficient must be positive, got {alpha}")));
    }
    if phi.iter().any(|&x| x < 0.0) {
        return Err(Error::Invalid("initial trace must be nonnegative".into()));
    }
    evolve_reaction(disc, phi, alpha, cfg)
}

/// One fully implicit step of the coupled cross-diffusion system, solved by
/// Newton on the interleaved (u_i, v_i) unknowns.
pub fn coupled_step(
    disc: &Discretization,
    uk: &DVector<f64>,
    vk: &DVector<f64>,
    p: &ModelParams,
    cfg: &StepperConfig,
    step: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = disc.n_x();
    let da = disc.da();
    let k = da * disc.lap.stencil_scale();
    let (a1, a2, b1, b2, g) = (p.alpha1, p.alpha2, p.beta1, p.beta2, p.gamma);
    let tol = cfg.tol * inf_norm(uk).max(inf_norm(vk)).max(1.0);

    let residual = |u: &DVector<f64>, v: &DVector<f64>| -> Vec<[f64; 2]> {
        let d = v.map(|x| 1.0 + g * x);
        let lu = disc.lap.apply_product(&d, u);
        let lv = disc.lap.apply(v);
        (0..n)
            .map(|i| {
                [
                    u[i] - da * lu[i] + da * (a1 * u[i] * u[i] + a2 * u[i] * v[i]) - uk[i],
                    v[i] - da * lv[i] + da * (b1 * v[i] * v[i] - b2 * v[i] * u[i]) - vk[i],
                ]
            })
            .collect()
    };
    let norm = |r: &[[f64; 2]]| r.iter().fold(0.0f64, |m, x| m.max(x[0].abs()).max(x[1].abs()));

    let mut u = uk.clone();
    let mut v = vk.clone();
    let mut r = residual(&u, &v);
    let mut polished = false;
    for it in 0..=cfg.max_iter {
        let rn = norm(&r);
        if !rn.is_finite() {
            break;
        }
        if rn <= tol {
            if polished || rn == 0.0 {
                return Ok((u, v));
            }
            polished = true;
        } else if it == cfg.max_iter {
            break;
        }
        let d = v.map(|x| 1.0 + g * x);
        let mut lower = vec![Mat2::ZERO; n];
        let mut upper = vec![Mat2::ZERO; n];
        let mut diag = vec![Mat2::ZERO; n];
        for i in 0..n {
            diag[i] = Mat2 {
                uu: 1.0 + 2.0 * k * d[i] + da * (2.0 * a1 * u[i] + a2 * v[i]),
                uv: 2.0 * k * g * u[i] + da * (a2 * u[i]),
                vu: -da * (b2 * v[i]),
                vv: 1.0 + 2.0 * k + da * (2.0 * b1 * v[i] - b2 * u[i]),
            };
            if i > 0 {
                lower[i] = Mat2 {
                    uu: -k * d[i - 1],
                    uv: -k * g * u[i - 1],
                    vu: 0.0,
                    vv: -k,
                };
            }
            if i + 1 < n {
                upper[i] = Mat2 {
                    uu: -k * d[i + 1],
                    uv: -k * g * u[i + 1],
                    vu: 0.0,
                    vv: -k,
                };
            }
        }
        let dx = block_thomas(&lower, &diag, &upper, &r)?;
        for i in 0..n {
            u[i] -= dx[i][0];
            v[i] -= dx[i][1];
        }
        r = residual(&u, &v);
    }
    Err(Error::StepNewton {
        step,
        iterations: cfg.max_iter,
        residual: norm(&r),
    })
}

/// Coupled evolution without sign checks on the initial traces; only the
/// diffusion floor is enforced. Used by residual evaluations that may probe
/// slightly negative traces.
pub(crate) fn evolve_coupled_unchecked(
    disc: &Discretization,
    phi_u: &DVector<f64>,
    phi_v: &DVector<f64>,
    p: &ModelParams,
    cfg: &StepperConfig,
) -> Result<(AgeField, AgeField)> {
    check_vec(disc, "prey trace", phi_u)?;
    check_vec(disc, "predator trace", phi_v)?;
    let floor_ok = |v: &DVector<f64>| -> Result<()> {
        let min = 1.0 + p.gamma * v.min();
        if p.gamma > 0.0 && min < cfg.diffusion_floor {
            return Err(Error::CoefficientFloor {
                min,
                floor: cfg.diffusion_floor,
            });
        }
        Ok(())
    };
    floor_ok(phi_v)?;
    let mut us = Vec::with_capacity(disc.n_ages());
    let mut vs = Vec::with_capacity(disc.n_ages());
    us.push(phi_u.clone());
    vs.push(phi_v.clone());
    for k in 0..disc.ages.n_a() {
        let (u, v) = coupled_step(disc, &us[k], &vs[k], p, cfg, k + 1)?;
        check_coupled_guard(disc.da(), &u, &v, p)?;
        floor_ok(&v)?;
        us.push(u);
        vs.push(v);
    }
    Ok((AgeField::from_slices(us)?, AgeField::from_slices(vs)?))
}

/// Coupled prey-predator evolution in age from nonnegative traces.
pub fn evolve_coupled(
    disc: &Discretization,
    phi_u: &DVector<f64>,
    phi_v: &DVector<f64>,
    p: &ModelParams,
    cfg: &StepperConfig,
) -> Result<(AgeField, AgeField)> {
    p.validate()?;
    if phi_u.iter().chain(phi_v.iter()).any(|&x| x < 0.0) {
        return Err(Error::Invalid("initial traces must be nonnegative".into()));
    }
    evolve_coupled_unchecked(disc, phi_u, phi_v, p, cfg)
}
