//! Space and age meshes, field containers, the Dirichlet Laplacian and the
//! weighted age integral.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, Tridiagonal};

/// Uniform grid of interior nodes on (0, 1) with homogeneous Dirichlet ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    n_x: usize,
    h_x: f64,
}

impl SpatialGrid {
    pub fn new(n_x: usize) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::Invalid(format!(
                "spatial grid needs n_x >= 3 interior nodes, got {n_x}"
            )));
        }
        Ok(Self {
            n_x,
            h_x: 1.0 / (n_x as f64 + 1.0),
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn h_x(&self) -> f64 {
        self.h_x
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n_x).map(move |i| i as f64 * self.h_x)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> SpatialField {
        SpatialField(DVector::from_iterator(self.n_x, self.nodes().map(f)))
    }
}

/// Uniform age mesh on [0, a_m] with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeGrid {
    n_a: usize,
    a_max: f64,
    weights: Vec<f64>,
}

impl AgeGrid {
    pub fn new(n_a: usize, a_max: f64) -> Result<Self> {
        if n_a < 2 {
            return Err(Error::Invalid(format!("age grid needs n_a >= 2, got {n_a}")));
        }
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(Error::Invalid(format!("maximal age must be positive, got {a_max}")));
        }
        let da = a_max / n_a as f64;
        let weights = (0..=n_a)
            .map(|k| if k == 0 || k == n_a { 0.5 * da } else { da })
            .collect();
        Ok(Self {
            n_a,
            a_max,
            weights,
        })
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn da(&self) -> f64 {
        self.a_max / self.n_a as f64
    }

    /// Number of age nodes, `n_a + 1`.
    pub fn len(&self) -> usize {
        self.n_a + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.da()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_a).map(move |k| self.node(k))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Interior values of a function on the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField(pub DVector<f64>);

impl SpatialField {
    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(DVector::from_element(n, c))
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(DVector::from_vec(v))
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.0)
    }

    pub fn min(&self) -> f64 {
        self.0.min()
    }

    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|&x| x > 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&x| x >= 0.0)
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for SpatialField {
    type Target = DVector<f64>;
    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for SpatialField {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

impl From<DVector<f64>> for SpatialField {
    fn from(v: DVector<f64>) -> Self {
        Self(v)
    }
}

/// A function of (age, space): one spatial slice per age node.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeField {
    slices: Vec<DVector<f64>>,
}

impl AgeField {
    pub fn from_slices(slices: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(Error::Invalid("age field needs at least one slice".into()));
        };
        let n = first.len();
        if let Some(bad) = slices.iter().find(|s| s.len() != n) {
            return Err(Error::ShapeMismatch {
                expected: format!("slices of length {n}"),
                got: format!("slice of length {}", bad.len()),
            });
        }
        Ok(Self { slices })
    }

    pub fn zeros(n_ages: usize, n_x: usize) -> Self {
        Self {
            slices: vec![DVector::zeros(n_x); n_ages],
        }
    }

    /// The same spatial profile at every age.
    pub fn constant_in_age(n_ages: usize, profile: &DVector<f64>) -> Self {
        Self {
            slices: vec![profile.clone(); n_ages],
        }
    }

    pub fn from_fn(n_ages: usize, n_x: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self {
            slices: (0..n_ages)
                .map(|k| DVector::from_fn(n_x, |i, _| f(k, i)))
                .collect(),
        }
    }

    pub fn n_ages(&self) -> usize {
        self.slices.len()
    }

    pub fn n_x(&self) -> usize {
        self.slices[0].len()
    }

    pub fn slice(&self, k: usize) -> &DVector<f64> {
        &self.slices[k]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut DVector<f64> {
        &mut self.slices[k]
    }

    pub fn slices(&self) -> &[DVector<f64>] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<DVector<f64>> {
        self.slices
    }

    /// Row k holds the slice at age node k.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_ages(), self.n_x(), |k, i| self.slices[k][i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            slices: self.slices.iter().map(|s| s.map(&f)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    pub fn zip_map(&self, other: &AgeField, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            slices: self
                .slices
                .iter()
                .zip(&other.slices)
                .map(|(a, b)| a.zip_map(b, &f))
                .collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.slices.iter().map(|s| s.min()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.slices.iter().map(inf_norm).fold(0.0, f64::max)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.slices.iter().all(|s| s.iter().all(|&x| x >= 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().all(|s| s.iter().all(|x| x.is_finite()))
    }

    /// Discrete L2 norm over age x space (trapezoid in age, midpoint in space).
    pub fn l2_norm(&self, ages: &AgeGrid, space: &SpatialGrid) -> f64 {
        self.slices
            .iter()
            .zip(ages.weights())
            .map(|(s, w)| w * space.h_x() * s.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Shape selector for the raw fertility profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BirthShape {
    /// b(a) = 1.
    Constant,
    /// b(a) = a / a_m.
    Ramp,
    /// Explicit samples at the n_a + 1 age nodes.
    Samples { values: Vec<f64> },
}

/// Fertility samples at the age nodes together with the scaling applied to
/// the raw shape.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthProfile {
    samples: Vec<f64>,
    scale: f64,
}

impl BirthProfile {
    /// Raw (unnormalized) samples of `shape`.
    pub fn from_shape(shape: &BirthShape, ages: &AgeGrid) -> Result<Self> {
        let samples: Vec<f64> = match shape {
            BirthShape::Constant => vec![1.0; ages.len()],
            BirthShape::Ramp => ages.nodes().map(|a| a / ages.a_max()).collect(),
            BirthShape::Samples { values } => values.clone(),
        };
        Self::from_samples(samples, ages)
    }

    pub fn from_samples(samples: Vec<f64>, ages: &AgeGrid) -> Result<Self> {
        if samples.len() != ages.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} birth samples", ages.len()),
                got: format!("{}", samples.len()),
            });
        }
        if let Some(k) = samples.iter().position(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::Invalid(format!(
                "birth profile must be finite and nonnegative (sample {k} = {})",
                samples[k]
            )));
        }
        // Positive near the maximal age: last quarter of the nodes.
        let n_a = ages.n_a();
        let tail_start = n_a - n_a / 4;
        if let Some(k) = (tail_start..=n_a).find(|&k| samples[k] <= 0.0) {
            return Err(Error::Invalid(format!(
                "birth profile must be positive on the final quarter of the age grid \
                 (sample {k} at a = {} is {})",
                ages.node(k),
                samples[k]
            )));
        }
        Ok(Self {
            samples,
            scale: 1.0,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Multiplier applied relative to the raw shape.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|b| c * b).collect(),
            scale: self.scale * c,
        }
    }
}

/// Dirichlet second-difference operator `(Lz)_i = (z_{i-1} - 2 z_i + z_{i+1}) / h^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Laplacian {
    n: usize,
    inv_h2: f64,
}

impl Laplacian {
    pub fn new(grid: &SpatialGrid) -> Self {
        Self {
            n: grid.n_x(),
            inv_h2: 1.0 / (grid.h_x() * grid.h_x()),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        DVector::from_fn(n, |i, _| {
            let left = if i > 0 { z[i - 1] } else { 0.0 };
            let right = if i + 1 < n { z[i + 1] } else { 0.0 };
            (left - 2.0 * z[i] + right) * self.inv_h2
        })
    }

    /// `L (d ∘ z)`, the discrete divergence-form diffusion.
    pub fn apply_product(&self, d: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        self.apply(&d.component_mul(z))
    }

    /// `I - dt L diag(d) + dt diag(c)`; `d = None` means `d ≡ 1`.
    pub fn step_matrix(&self, dt: f64, d: Option<&DVector<f64>>, c: &DVector<f64>) -> Tridiagonal {
        let n = self.n;
        let k = dt * self.inv_h2;
        let dj = |j: usize| d.map_or(1.0, |d| d[j]);
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            diag[i] = 1.0 + 2.0 * k * dj(i) + dt * c[i];
            if i > 0 {
                lower[i] = -k * dj(i - 1);
            }
            if i + 1 < n {
                upper[i] = -k * dj(i + 1);
            }
        }
        Tridiagonal { lower, diag, upper }
    }

    /// `1 / h^2`.
    pub fn stencil_scale(&self) -> f64 {
        self.inv_h2
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = -2.0 * self.inv_h2;
            if i > 0 {
                m[(i, i - 1)] = self.inv_h2;
            }
            if i + 1 < self.n {
                m[(i, i + 1)] = self.inv_h2;
            }
        }
        m
    }
}

/// Principal Dirichlet eigenvalue of `-L` and its positive eigenvector.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    pub vector: SpatialField,
    pub iterations: usize,
}

/// Inverse power iteration on `-L`, eigenvector normalized to unit max norm.
pub fn principal_eigenpair(lap: &Laplacian) -> Result<Eigenpair> {
    const MAX_ITER: usize = 500;
    let n = lap.dim();
    // -L = (I - L) - I
    let mut minus_l = lap.step_matrix(1.0, None, &DVector::zeros(n));
    for x in minus_l.diag.iter_mut() {
        *x -= 1.0;
    }
    let factor = minus_l.factor()?;
    let mut x = DVector::from_element(n, 1.0);
    let mut last = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let mut y = x.clone();
        factor.solve_in_place(y.as_mut_slice());
        let s = inf_norm(&y);
        x = y / s;
        let ax = minus_l.mul_vec(&x);
        let lambda = x.dot(&ax) / x.dot(&x);
        let res = inf_norm(&(&ax - lambda * &x)) / lambda;
        if res <= 1e-12 || (res <= 1e-11 && res >= last) {
            return Ok(Eigenpair {
                lambda,
                vector: SpatialField(x),
                iterations: it,
            });
        }
        last = res;
    }
    Err(Error::PowerIteration {
        iterations: MAX_ITER,
        residual: last,
    })
}

/// Closed form of the smallest eigenvalue of `-L`.
pub fn discrete_lambda1(grid: &SpatialGrid) -> f64 {
    let h = grid.h_x();
    2.0 / (h * h) * (1.0 - (PI * h).cos())
}

/// `Σ_k w_k b_k f_k`, the discrete weighted age integral.
pub fn age_integral(f: &AgeField, b: &BirthProfile, ages: &AgeGrid) -> Result<SpatialField> {
    if f.n_ages() != ages.len() || b.samples().len() != ages.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} age nodes", ages.len()),
            got: format!("field {} / birth {}", f.n_ages(), b.samples().len()),
        });
    }
    let mut acc = DVector::zeros(f.n_x());
    for ((s, w), bk) in f.slices().iter().zip(ages.weights()).zip(b.samples()) {
        acc.axpy(w * bk, s, 1.0);
    }
    Ok(SpatialField(acc))
}

/// Grids plus the Laplacian: everything an age stepper needs.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub space: SpatialGrid,
    pub ages: AgeGrid,
    pub lap: Laplacian,
}

impl Discretization {
    pub fn new(n_x: usize, n_a: usize, a_max: f64) -> Result<Self> {
        let space = SpatialGrid::new(n_x)?;
        let ages = AgeGrid::new(n_a, a_max)?;
        let lap = Laplacian::new(&space);
        Ok(Self { space, ages, lap })
    }

    pub fn n_x(&self) -> usize {
        self.space.n_x()
    }

    pub fn n_ages(&self) -> usize {
        self.ages.len()
    }

    pub fn da(&self) -> f64 {
        self.ages.da()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_for_three_nodes() {
        let g = SpatialGrid::new(3).unwrap();
        assert_eq!(g.h_x(), 0.25);
        let m = Laplacian::new(&g).to_dense();
        assert_eq!(m[(0, 0)], -32.0);
        assert_eq!(m[(1, 0)], 16.0);
        assert_eq!(m[(0, 1)], 16.0);
        assert_eq!(m[(0, 2)], 0.0);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(SpatialGrid::new(2).is_err());
    }

    #[test]
    fn eigenpair_three_nodes() {
        let g = SpatialGrid::new(3).unwrap();
        let ep = principal_eigenpair(&Laplacian::new(&g)).unwrap();
        let expected = 32.0 * (1.0 - (PI / 4.0).cos());
        assert!((ep.lambda - expected).abs() < 1e-10);
        assert!((ep.lambda - 9.3726).abs() < 1e-4);
        assert!(ep.vector.is_positive());
    }

    #[test]
    fn eigenvector_is_discrete_sine() {
        for n in [5, 16, 64] {
            let g = SpatialGrid::new(n).unwrap();
            let ep = principal_eigenpair(&Laplacian::new(&g)).unwrap();
            let s = g.sample(|x| (PI * x).sin());
            let s = &s.0 / s.inf_norm();
            assert!((&ep.vector.0 - s).amax() <= 1e-10, "n = {n}");
            assert!((ep.lambda - discrete_lambda1(&g)).abs() <= 1e-9 * ep.lambda);
        }
    }

    #[test]
    fn lambda1_tends_to_pi_squared() {
        let errs: Vec<f64> = [16, 64, 256]
            .iter()
            .map(|&n| (discrete_lambda1(&SpatialGrid::new(n).unwrap()) - PI * PI).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        assert!(errs[2] < 1e-3);
    }

    #[test]
    fn trapezoid_weights_sum_to_a_max() {
        let ages = AgeGrid::new(10, 2.5).unwrap();
        let s: f64 = ages.weights().iter().sum();
        assert!((s - 2.5).abs() < 1e-14);
        assert!(ages.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn age_integral_of_ones_is_a_max() {
        let ages = AgeGrid::new(8, 1.0).unwrap();
        let b = BirthProfile::from_shape(&BirthShape::Constant, &ages).unwrap();
        let f = AgeField::from_fn(9, 4, |_, _| 1.0);
        let u = age_integral(&f, &b, &ages).unwrap();
        assert!(u.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let z = age_integral(&AgeField::zeros(9, 4), &b, &ages).unwrap();
        assert_eq!(z.inf_norm(), 0.0);
    }

    #[test]
    fn age_integral_rejects_shape_mismatch() {
        let ages = AgeGrid::new(8, 1.0).unwrap();
        let b = BirthProfile::from_shape(&BirthShape::Constant, &ages).unwrap();
        assert!(matches!(
            age_integral(&AgeField::zeros(5, 4), &b, &ages),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn birth_profile_must_be_positive_near_max_age() {
        let ages = AgeGrid::new(8, 1.0).unwrap();
        let mut v = vec![1.0; 9];
        v[8] = 0.0;
        assert!(BirthProfile::from_samples(v, &ages).is_err());
        let mut v = vec![0.0; 9];
        v[6] = 1.0;
        v[7] = 1.0;
        v[8] = 1.0;
        assert!(BirthProfile::from_samples(v, &ages).is_ok());
        assert!(BirthProfile::from_shape(&BirthShape::Ramp, &ages).is_ok());
    }
}
