//! Dense complex square matrices and the Hermitian matrix exponential.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{EseemError, Result};

pub type C64 = Complex64;

/// Absolute entrywise tolerances used by the structural checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Bound on `max |M - M^dagger|` for a matrix to count as Hermitian.
    pub hermitian: f64,
    /// Bound on `max |M M^dagger - 1|` for a matrix to count as unitary.
    pub unitary: f64,
}

impl Tolerance {
    pub const DEFAULT: Tolerance = Tolerance {
        hermitian: 1e-12,
        unitary: 1e-10,
    };

    /// Scale both bounds, e.g. for generators whose entries are far from unity.
    pub fn scaled(self, factor: f64) -> Tolerance {
        Tolerance {
            hermitian: self.hermitian * factor,
            unitary: self.unitary * factor,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Dense complex square matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            inner: DMatrix::from_fn(dim, dim, f),
        }
    }

    /// Builds a matrix from row-major entries. Panics unless `entries.len()` is a square.
    pub fn from_row_major(entries: &[C64]) -> Self {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, entries.len(), "entry count must be a perfect square");
        Self {
            inner: DMatrix::from_row_slice(dim, dim, entries),
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, &d) in diag.iter().enumerate() {
            m.inner[(k, k)] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, &d) in diag.iter().enumerate() {
            m.inner[(k, k)] = C64::new(d, 0.0);
        }
        m
    }

    pub(crate) fn from_nalgebra(inner: DMatrix<C64>) -> Self {
        debug_assert_eq!(inner.nrows(), inner.ncols());
        Self { inner }
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.inner[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.inner[(row, col)] = value;
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim()).map(|k| self.inner[(k, k)]).collect()
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<C64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                out.push(self.inner[(r, c)]);
            }
        }
        out
    }

    pub fn dagger(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            inner: self.inner.map(|z| z.conj()),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            inner: &self.inner * factor,
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    /// `[self, other] = self*other - other*self`
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// `self * rho * self^dagger`
    pub fn conjugate(&self, rho: &Self) -> Self {
        &(self * rho) * &self.dagger()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.inner
            .iter()
            .zip(other.inner.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn hermiticity_residual(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    pub fn unitarity_residual(&self) -> f64 {
        let p = self * &self.dagger();
        p.max_abs_diff(&Self::identity(self.dim()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() <= tol
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..n).all(|c| r == c || self.inner[(r, c)].norm() <= tol))
    }

    /// Keeps the entries for which `keep(row, col)` is true and zeroes the rest.
    pub fn masked(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let n = self.dim();
        Self::from_fn(n, |r, c| {
            if keep(r, c) {
                self.inner[(r, c)]
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// Principal submatrix on the given (ordered) index set.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), |r, c| self.inner[(indices[r], indices[c])])
    }

    /// `A^n` by repeated squaring.
    pub fn pow(&self, mut n: u64) -> Self {
        let mut result = Self::identity(self.dim());
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }
}

/// Tensor (Kronecker) product. Row index of the result is `i_a * dim(b) + i_b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix {
        inner: a.inner.kronecker(&b.inner),
    }
}

/// Eigendecomposition `H = V diag(values) V^dagger` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(h, Tolerance::DEFAULT)
    }

    /// The Hermiticity check is relative to the largest entry once that exceeds 1,
    /// so generators in rad/s are judged on the same footing as unit-scale ones.
    pub fn with_tolerance(h: &ComplexMatrix, tol: Tolerance) -> Result<Self> {
        let scale = h.max_abs().max(1.0);
        let residual = h.hermiticity_residual();
        if residual > tol.hermitian * scale {
            return Err(EseemError::NotHermitian {
                residual,
                tolerance: tol.hermitian * scale,
            });
        }
        // symmetrize away rounding-level anti-Hermitian parts before decomposing
        let sym = (&h.inner + h.inner.adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EseemError::Eigen("non-finite eigenvalue".into()));
        }
        Ok(Self {
            values,
            vectors: ComplexMatrix::from_nalgebra(eig.eigenvectors),
        })
    }

    /// `exp(-i H t) = V exp(-i values t) V^dagger`
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        let phases: Vec<C64> = self.values.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
        self.apply_diagonal(&phases)
    }

    /// `V diag(d) V^dagger`
    pub fn apply_diagonal(&self, d: &[C64]) -> ComplexMatrix {
        let v = &self.vectors.inner;
        let n = v.nrows();
        let mut scaled = v.clone();
        for c in 0..n {
            for r in 0..n {
                scaled[(r, c)] *= d[c];
            }
        }
        ComplexMatrix::from_nalgebra(scaled * v.adjoint())
    }
}

/// Unitary propagator `exp(-i H t)` of a Hermitian generator.
pub fn expm_hermitian_generator(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    Ok(HermitianEigen::new(h)?.propagator(t))
}

pub fn expm_hermitian_generator_with(h: &ComplexMatrix, t: f64, tol: Tolerance) -> Result<ComplexMatrix> {
    Ok(HermitianEigen::with_tolerance(h, tol)?.propagator(t))
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix { inner: -&self.inner }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        writeln!(f, "ComplexMatrix {n}x{n} [")?;
        for r in 0..n {
            write!(f, "  ")?;
            for c in 0..n {
                let z = self.inner[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}
