//! Banded solvers used by the age steppers.
//!
//! Every step matrix in this crate is (block-)tridiagonal. The Thomas
//! recursion below is written once, generically over the block type, so
//! that the scalar and the 2x2 coupled steppers perform the same floating
//! point operations whenever one population is identically zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Algebra needed by the block Thomas recursion.
pub trait Block: Copy {
    type Vector: Copy;

    fn zero_vector() -> Self::Vector;
    /// `self^{-1} rhs`.
    fn solve(self, rhs: Self::Vector) -> Self::Vector;
    /// `self^{-1} rhs` for a block right-hand side.
    fn solve_block(self, rhs: Self) -> Self;
    fn mul(self, other: Self) -> Self;
    fn mul_vec(self, v: Self::Vector) -> Self::Vector;
    fn sub(self, other: Self) -> Self;
    fn sub_vec(a: Self::Vector, b: Self::Vector) -> Self::Vector;
    fn is_regular(self) -> bool;
}

impl Block for f64 {
    type Vector = f64;

    fn zero_vector() -> f64 {
        0.0
    }
    fn solve(self, rhs: f64) -> f64 {
        rhs / self
    }
    fn solve_block(self, rhs: f64) -> f64 {
        rhs / self
    }
    fn mul(self, other: f64) -> f64 {
        self * other
    }
    fn mul_vec(self, v: f64) -> f64 {
        self * v
    }
    fn sub(self, other: f64) -> f64 {
        self - other
    }
    fn sub_vec(a: f64, b: f64) -> f64 {
        a - b
    }
    fn is_regular(self) -> bool {
        self != 0.0 && self.is_finite()
    }
}

/// Row-major 2x2 block `[[uu, uv], [vu, vv]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub uu: f64,
    pub uv: f64,
    pub vu: f64,
    pub vv: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        uu: 0.0,
        uv: 0.0,
        vu: 0.0,
        vv: 0.0,
    };

    // Unpivoted LU. The pivot `uu` is the prey diagonal, which dominates.
    fn lu_solve(self, ru: f64, rv: f64) -> (f64, f64) {
        let l = self.vu / self.uu;
        let e = self.vv - l * self.uv;
        let xv = (rv - l * ru) / e;
        let xu = (ru - self.uv * xv) / self.uu;
        (xu, xv)
    }
}

impl Block for Mat2 {
    type Vector = [f64; 2];

    fn zero_vector() -> [f64; 2] {
        [0.0, 0.0]
    }
    fn solve(self, rhs: [f64; 2]) -> [f64; 2] {
        let (u, v) = self.lu_solve(rhs[0], rhs[1]);
        [u, v]
    }
    fn solve_block(self, rhs: Mat2) -> Mat2 {
        let (uu, vu) = self.lu_solve(rhs.uu, rhs.vu);
        let (uv, vv) = self.lu_solve(rhs.uv, rhs.vv);
        Mat2 { uu, uv, vu, vv }
    }
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2 {
            uu: self.uu * o.uu + self.uv * o.vu,
            uv: self.uu * o.uv + self.uv * o.vv,
            vu: self.vu * o.uu + self.vv * o.vu,
            vv: self.vu * o.uv + self.vv * o.vv,
        }
    }
    fn mul_vec(self, v: [f64; 2]) -> [f64; 2] {
        [
            self.uu * v[0] + self.uv * v[1],
            self.vu * v[0] + self.vv * v[1],
        ]
    }
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2 {
            uu: self.uu - o.uu,
            uv: self.uv - o.uv,
            vu: self.vu - o.vu,
            vv: self.vv - o.vv,
        }
    }
    fn sub_vec(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        [a[0] - b[0], a[1] - b[1]]
    }
    fn is_regular(self) -> bool {
        let det = self.uu * self.vv - self.uv * self.vu;
        self.uu != 0.0 && det != 0.0 && det.is_finite()
    }
}

/// Solves a block-tridiagonal system. `lower[0]` and `upper[n-1]` are ignored.
pub fn block_thomas<B: Block>(
    lower: &[B],
    diag: &[B],
    upper: &[B],
    rhs: &[B::Vector],
) -> Result<Vec<B::Vector>> {
    let n = diag.len();
    let mut cp: Vec<B> = Vec::with_capacity(n);
    let mut dp: Vec<B::Vector> = Vec::with_capacity(n);
    for i in 0..n {
        let (den, r) = if i == 0 {
            (diag[0], rhs[0])
        } else {
            (
                diag[i].sub(lower[i].mul(cp[i - 1])),
                B::sub_vec(rhs[i], lower[i].mul_vec(dp[i - 1])),
            )
        };
        if !den.is_regular() {
            return Err(Error::Singular(format!("zero pivot in row {i}")));
        }
        cp.push(den.solve_block(upper[i]));
        dp.push(den.solve(r));
    }
    let mut x = vec![B::zero_vector(); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = B::sub_vec(dp[i], cp[i].mul_vec(x[i + 1]));
    }
    Ok(x)
}

/// Scalar tridiagonal matrix; `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        DVector::from_fn(n, |i, _| {
            let mut s = self.diag[i] * z[i];
            if i > 0 {
                s += self.lower[i] * z[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * z[i + 1];
            }
            s
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i > 0 {
                m[(i, i - 1)] = self.lower[i];
            }
            if i + 1 < n {
                m[(i, i + 1)] = self.upper[i];
            }
        }
        m
    }

    /// Precomputes the Thomas pivots for repeated solves.
    pub fn factor(&self) -> Result<TridiagonalFactor> {
        let n = self.dim();
        let mut den = Vec::with_capacity(n);
        let mut cp: Vec<f64> = Vec::with_capacity(n);
        for i in 0..n {
            let d = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.lower[i] * cp[i - 1]
            };
            if !d.is_regular() {
                return Err(Error::Singular(format!("zero pivot in row {i}")));
            }
            cp.push(self.upper[i] / d);
            den.push(d);
        }
        Ok(TridiagonalFactor {
            lower: self.lower.clone(),
            den,
            cp,
        })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = rhs.clone();
        self.factor()?.solve_in_place(x.as_mut_slice());
        Ok(x)
    }
}

#[derive(Debug, Clone)]
pub struct TridiagonalFactor {
    lower: Vec<f64>,
    den: Vec<f64>,
    cp: Vec<f64>,
}

impl TridiagonalFactor {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.den.len();
        x[0] /= self.den[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) / self.den[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
    }
}

/// Dense LU solve with a singularity report.
pub fn dense_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(format!("dense {n}x{n} system")))
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
