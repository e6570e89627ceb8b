//! Nonlocal renewal operators and their Perron roots.
//!
//! `H[h] = Σ_k w_k b_k Π[h](a_k, 0)` and `G_ξ`, its divergence-form analogue
//! built around a fixed predator profile, are assembled densely from the
//! discrete propagators. Both are entrywise positive, so the spectral radius
//! is a simple eigenvalue with a positive eigenvector and plain power
//! iteration recovers it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evolve::{evolve_columns, CoefficientPath};
use crate::grid::{AgeField, BirthProfile, Discretization, SpatialField};
use crate::linalg::inf_norm;
use crate::params::ModelParams;

/// Which renewal operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `H[h]` for a zeroth-order coefficient path.
    Renewal,
    /// `G_ξ`, built on a predator profile.
    CrossDiffusion,
    /// Anything supplied directly.
    Dense,
}

#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    pub matrix: DMatrix<f64>,
    pub kind: OperatorKind,
}

impl NonlocalOperator {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        Self {
            matrix,
            kind: OperatorKind::Dense,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.matrix.iter().all(|&x| x > 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrix: &self.matrix * c,
            kind: self.kind,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub radius: f64,
    /// Positive, unit max norm.
    pub eigvec: SpatialField,
    pub iterations: usize,
    /// `|M x - r x|_inf` at the returned pair.
    pub residual: f64,
}

fn assemble(
    disc: &Discretization,
    d: Option<&AgeField>,
    h: &AgeField,
    b: &BirthProfile,
    kind: OperatorKind,
) -> Result<NonlocalOperator> {
    let n = disc.n_x();
    if b.samples().len() != disc.n_ages() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} birth samples", disc.n_ages()),
            got: b.samples().len().to_string(),
        });
    }
    let weights: Vec<f64> = disc
        .ages
        .weights()
        .iter()
        .zip(b.samples())
        .map(|(w, bk)| w * bk)
        .collect();
    let mut m = DMatrix::zeros(n, n);
    evolve_columns(disc, d, h, DMatrix::identity(n, n), |k, z| {
        m.zip_apply(z, |acc, zk| *acc += weights[k] * zk);
    })?;
    Ok(NonlocalOperator { matrix: m, kind })
}

/// `H[h]`: column j is the weighted age integral of the propagated unit vector e_j.
pub fn assemble_h(disc: &Discretization, h: &CoefficientPath, b: &BirthProfile) -> Result<NonlocalOperator> {
    if h.n_ages() != disc.n_ages() || h.n_x() != disc.n_x() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", disc.n_ages(), disc.n_x()),
            got: format!("{} x {}", h.n_ages(), h.n_x()),
        });
    }
    assemble(disc, None, h, b, OperatorKind::Renewal)
}

/// `H[0]`.
pub fn assemble_h0(disc: &Discretization, b: &BirthProfile) -> Result<NonlocalOperator> {
    assemble_h(disc, &AgeField::zeros(disc.n_ages(), disc.n_x()), b)
}

/// `G_ξ`: divergence-form propagator with multiplier `1 + γ v` and
/// zeroth-order term `α₂ v`.
pub fn assemble_g(
    disc: &Discretization,
    v_xi: &AgeField,
    p: &ModelParams,
    b: &BirthProfile,
    floor: f64,
) -> Result<NonlocalOperator> {
    if !v_xi.is_nonnegative() {
        return Err(Error::Invalid("predator profile must be nonnegative".into()));
    }
    if v_xi.n_ages() != disc.n_ages() || v_xi.n_x() != disc.n_x() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", disc.n_ages(), disc.n_x()),
            got: format!("{} x {}", v_xi.n_ages(), v_xi.n_x()),
        });
    }
    let d = v_xi.map(|v| 1.0 + p.gamma * v);
    let min_d = d.min();
    if min_d < floor {
        return Err(Error::CoefficientFloor { min: min_d, floor });
    }
    let c = v_xi.scale(p.alpha2);
    assemble(disc, Some(&d), &c, b, OperatorKind::CrossDiffusion)
}

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 100_000;

/// Perron root by power iteration from the all-ones vector.
pub fn spectral_radius(op: &NonlocalOperator) -> Result<SpectralResult> {
    let m = &op.matrix;
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::Invalid("operator must be square and nonempty".into()));
    }
    if m.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::Invalid("operator must be entrywise nonnegative".into()));
    }
    let mut x = DVector::from_element(n, 1.0);
    let mut change = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let y = m * &x;
        let r = inf_norm(&y);
        if r == 0.0 {
            return Err(Error::Invalid("operator annihilates the positive cone".into()));
        }
        let next = y / r;
        change = inf_norm(&(&next - &x));
        x = next;
        if change <= POWER_TOL {
            let mx = m * &x;
            let radius = inf_norm(&mx);
            let residual = inf_norm(&(&mx - radius * &x));
            return Ok(SpectralResult {
                radius,
                eigvec: SpatialField(x),
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::PowerIteration {
        iterations: POWER_MAX_ITER,
        residual: change,
    })
}

/// Rescales a raw fertility shape so that `r(H[0]) = 1` on this grid.
/// Returns the normalized profile and the factor `c` applied.
pub fn normalize_birth(disc: &Discretization, raw: &BirthProfile) -> Result<(BirthProfile, f64)> {
    if raw.samples().iter().all(|&b| b == 0.0) {
        return Err(Error::Invalid("birth profile is identically zero".into()));
    }
    let r = spectral_radius(&assemble_h0(disc, raw)?)?.radius;
    let c = 1.0 / r;
    Ok((raw.scaled(c), c))
}

/// Eigenmode reduction for a constant coefficient `c`:
/// `r(H[c]) = Σ_k w_k b_k (1 + da (λ₁ʰ + c))^{-k}`.
pub fn constant_coefficient_radius(disc: &Discretization, lambda1: f64, c: f64, b: &BirthProfile) -> f64 {
    let q = 1.0 / (1.0 + disc.da() * (lambda1 + c));
    disc.ages
        .weights()
        .iter()
        .zip(b.samples())
        .enumerate()
        .map(|(k, (w, bk))| w * bk * q.powi(k as i32))
        .sum()
}
