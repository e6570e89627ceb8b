//! Dense Newton with forward-difference Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{dense_solve, inf_norm};

/// Relative forward-difference step: `h = FD_STEP * (1 + |x|_inf)`.
pub const FD_STEP: f64 = 1e-7;

/// Forward-difference Jacobian of `f` at `x`, given `fx = f(x)`.
pub fn fd_jacobian<F>(f: &F, x: &DVector<f64>, fx: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let h = FD_STEP * (1.0 + inf_norm(x));
    let mut jac = DMatrix::zeros(fx.len(), x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j];
        jac.set_column(j, &((fp - fx) / h));
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Absolute tolerance on `|f(x)|_inf`.
    pub tol: f64,
    pub max_iter: usize,
    /// Halvings allowed when a full step increases the residual.
    pub max_backtrack: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 30,
            max_backtrack: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Newton iteration with a fresh forward-difference Jacobian each step and
/// residual-norm backtracking. Evaluation failures inside a trial step are
/// treated like a residual increase.
pub fn newton<F>(f: &F, x0: DVector<f64>, opts: &NewtonOptions) -> Result<NewtonOutcome>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut x = x0;
    let mut fx = f(&x)?;
    let mut res = inf_norm(&fx);
    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(NewtonOutcome {
                x,
                residual: res,
                iterations: it,
            });
        }
        let jac = fd_jacobian(f, &x, &fx)?;
        let dx = dense_solve(jac, &fx)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtrack {
            let trial = &x - t * &dx;
            if let Ok(ft) = f(&trial) {
                let rt = inf_norm(&ft);
                if rt.is_finite() && (rt < res || t == 1.0 && rt <= 2.0 * res) {
                    x = trial;
                    fx = ft;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence {
                iterations: it + 1,
                residual: res,
            });
        }
    }
    if res <= opts.tol {
        return Ok(NewtonOutcome {
            x,
            residual: res,
            iterations: opts.max_iter,
        });
    }
    Err(Error::NewtonDivergence {
        iterations: opts.max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_quadratic_map() {
        let f = |x: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![x[0] * x[0] + x[1], 3.0 * x[1] - x[0]]))
        };
        let x = DVector::from_vec(vec![1.5, -2.0]);
        let j = fd_jacobian(&f, &x, &f(&x).unwrap()).unwrap();
        assert!((j[(0, 0)] - 3.0).abs() < 1e-5);
        assert!((j[(0, 1)] - 1.0).abs() < 1e-6);
        assert!((j[(1, 0)] + 1.0).abs() < 1e-6);
        assert!((j[(1, 1)] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn solves_small_system() {
        let f = |x: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![x[0] * x[0] - 2.0, x[0] * x[1] - 1.0]))
        };
        let out = newton(&f, DVector::from_vec(vec![1.0, 1.0]), &NewtonOptions::default()).unwrap();
        assert!((out.x[0] - 2f64.sqrt()).abs() < 1e-10);
        assert!((out.x[1] - 1.0 / 2f64.sqrt()).abs() < 1e-10);
    }
}
