//! Angular-momentum operators and the electron-nuclear product basis.
//!
//! Single-spin bases are ordered by descending projection `m = s, s-1, ..., -s`.
//! Product states are electron-major: `index = (s - m_s)(2i + 1) + (i - m_i)`.

use std::fmt;

use crate::error::{EseemError, Result};
use crate::matrix::{kron, ComplexMatrix, C64};

/// Spin quantum number stored as `2s` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinQuantumNumber {
    twice: u32,
}

impl SpinQuantumNumber {
    pub const HALF: SpinQuantumNumber = SpinQuantumNumber { twice: 1 };
    pub const ONE: SpinQuantumNumber = SpinQuantumNumber { twice: 2 };
    pub const THREE_HALVES: SpinQuantumNumber = SpinQuantumNumber { twice: 3 };

    pub const fn from_twice(twice_s: u32) -> Self {
        Self { twice: twice_s }
    }

    /// Accepts integer and half-integer values only.
    pub fn from_value(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !s.is_finite() || s < 0.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(EseemError::InvalidSpin(format!(
                "{s} is not a non-negative integer or half-integer"
            )));
        }
        Ok(Self {
            twice: twice.round() as u32,
        })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// `2s + 1`
    pub fn multiplicity(self) -> usize {
        self.twice as usize + 1
    }

    /// `s(s + 1)`
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }

    /// Projections in basis order (descending).
    pub fn projections(self) -> impl Iterator<Item = Projection> {
        let twice = self.twice as i32;
        (0..=twice).map(move |k| Projection { twice: twice - 2 * k })
    }

    /// Basis index of projection `m`.
    pub fn index_of(self, m: Projection) -> Result<usize> {
        if !self.admits(m) {
            return Err(EseemError::InvalidProjection {
                m: m.value(),
                spin: self.value(),
            });
        }
        Ok(((self.twice as i32 - m.twice) / 2) as usize)
    }

    pub fn admits(self, m: Projection) -> bool {
        let t = self.twice as i32;
        m.twice.abs() <= t && (t - m.twice) % 2 == 0
    }
}

impl fmt::Display for SpinQuantumNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Magnetic quantum number stored as `2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Projection {
    twice: i32,
}

impl Projection {
    pub const fn from_twice(twice_m: i32) -> Self {
        Self { twice: twice_m }
    }

    pub const fn integer(m: i32) -> Self {
        Self { twice: 2 * m }
    }

    pub fn from_value(m: f64) -> Result<Self> {
        let twice = 2.0 * m;
        if !m.is_finite() || (twice - twice.round()).abs() > 1e-9 {
            return Err(EseemError::InvalidProjection { m, spin: f64::NAN });
        }
        Ok(Self {
            twice: twice.round() as i32,
        })
    }

    pub fn twice(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice % 2 == 0 {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// Cartesian spin matrices of one spin.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub x: ComplexMatrix,
    pub y: ComplexMatrix,
    pub z: ComplexMatrix,
}

impl SpinMatrices {
    pub fn raising(&self) -> ComplexMatrix {
        &self.x + &self.y.scale(C64::i())
    }

    pub fn lowering(&self) -> ComplexMatrix {
        &self.x - &self.y.scale(C64::i())
    }
}

/// `(Sx, Sy, Sz)` for spin `s` from the ladder-operator matrix elements
/// `<m+1|S+|m> = sqrt(s(s+1) - m(m+1))`.
pub fn spin_matrices(s: SpinQuantumNumber) -> SpinMatrices {
    let n = s.multiplicity();
    let sv = s.value();
    let m_of = |k: usize| sv - k as f64;
    let mut raise = ComplexMatrix::zeros(n);
    for k in 1..n {
        let m = m_of(k);
        raise.set(k - 1, k, C64::new((sv * (sv + 1.0) - m * (m + 1.0)).sqrt(), 0.0));
    }
    let lower = raise.dagger();
    let x = (&raise + &lower).scale_real(0.5);
    let y = (&raise - &lower).scale(C64::new(0.0, -0.5));
    let z = ComplexMatrix::from_real_diagonal(&(0..n).map(m_of).collect::<Vec<_>>());
    SpinMatrices { x, y, z }
}

/// Diagonal projector onto nuclear projection `m_i`, in the nuclear space only.
pub fn projector_mi(i: SpinQuantumNumber, m_i: Projection) -> Result<ComplexMatrix> {
    let k = i.index_of(m_i)?;
    let mut p = ComplexMatrix::zeros(i.multiplicity());
    p.set(k, k, C64::new(1.0, 0.0));
    Ok(p)
}

/// Electron-nuclear product space with its embedded spin operators.
#[derive(Debug, Clone)]
pub struct ProductBasis {
    pub s: SpinQuantumNumber,
    pub i: SpinQuantumNumber,
    electron: SpinMatrices,
    nuclear: SpinMatrices,
}

impl ProductBasis {
    pub fn new(s: SpinQuantumNumber, i: SpinQuantumNumber) -> Self {
        Self {
            s,
            i,
            electron: spin_matrices(s),
            nuclear: spin_matrices(i),
        }
    }

    pub fn dim(&self) -> usize {
        self.s.multiplicity() * self.i.multiplicity()
    }

    pub fn index(&self, m_s: Projection, m_i: Projection) -> Result<usize> {
        Ok(self.s.index_of(m_s)? * self.i.multiplicity() + self.i.index_of(m_i)?)
    }

    /// `(m_s, m_i)` of basis state `k`.
    pub fn labels(&self, k: usize) -> (Projection, Projection) {
        let ni = self.i.multiplicity();
        let (ks, ki) = (k / ni, k % ni);
        (
            Projection::from_twice(self.s.twice() as i32 - 2 * ks as i32),
            Projection::from_twice(self.i.twice() as i32 - 2 * ki as i32),
        )
    }

    /// Indices of all product states with nuclear projection `m_i`, in descending `m_s`.
    pub fn block_indices(&self, m_i: Projection) -> Result<Vec<usize>> {
        let ki = self.i.index_of(m_i)?;
        let ni = self.i.multiplicity();
        Ok((0..self.s.multiplicity()).map(|ks| ks * ni + ki).collect())
    }

    pub fn electron_ops(&self) -> &SpinMatrices {
        &self.electron
    }

    pub fn nuclear_ops(&self) -> &SpinMatrices {
        &self.nuclear
    }

    /// `A (x) 1_nuclear`
    pub fn electron(&self, a: &ComplexMatrix) -> ComplexMatrix {
        kron(a, &ComplexMatrix::identity(self.i.multiplicity()))
    }

    /// `1_electron (x) B`
    pub fn nuclear(&self, b: &ComplexMatrix) -> ComplexMatrix {
        kron(&ComplexMatrix::identity(self.s.multiplicity()), b)
    }

    pub fn sx(&self) -> ComplexMatrix {
        self.electron(&self.electron.x)
    }
    pub fn sy(&self) -> ComplexMatrix {
        self.electron(&self.electron.y)
    }
    pub fn sz(&self) -> ComplexMatrix {
        self.electron(&self.electron.z)
    }
    pub fn ix(&self) -> ComplexMatrix {
        self.nuclear(&self.nuclear.x)
    }
    pub fn iy(&self) -> ComplexMatrix {
        self.nuclear(&self.nuclear.y)
    }
    pub fn iz(&self) -> ComplexMatrix {
        self.nuclear(&self.nuclear.z)
    }

    /// `A (x) B` for electron operator `a` and nuclear operator `b`.
    pub fn product(&self, a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
        kron(a, b)
    }

    /// Electron coherence order `m_s(row) - m_s(col)`, in units of 1/2.
    pub fn electron_coherence_twice(&self, row: usize, col: usize) -> i32 {
        let (ms_r, _) = self.labels(row);
        let (ms_c, _) = self.labels(col);
        ms_r.twice() - ms_c.twice()
    }

    /// Detection operator `Sy (x) P_mi`.
    pub fn detection_operator(&self, m_i: Projection) -> Result<ComplexMatrix> {
        Ok(kron(&self.electron.y, &projector_mi(self.i, m_i)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spins_up_to(max_twice: u32) -> impl Iterator<Item = SpinQuantumNumber> {
        (0..=max_twice).map(SpinQuantumNumber::from_twice)
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let m = spin_matrices(SpinQuantumNumber::HALF);
        let sx = ComplexMatrix::from_row_major(&[
            C64::new(0.0, 0.0),
            C64::new(0.5, 0.0),
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.0),
        ]);
        assert!(m.x.max_abs_diff(&sx) < 1e-15);
        let sy = ComplexMatrix::from_row_major(&[
            C64::new(0.0, 0.0),
            C64::new(0.0, -0.5),
            C64::new(0.0, 0.5),
            C64::new(0.0, 0.0),
        ]);
        assert!(m.y.max_abs_diff(&sy) < 1e-15);
    }

    #[test]
    fn sz_is_descending() {
        let m = spin_matrices(SpinQuantumNumber::THREE_HALVES);
        let d: Vec<f64> = m.z.diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![1.5, 0.5, -0.5, -1.5]);
    }

    #[test]
    fn trace_sy_squared_closed_form() {
        // Tr(Sy^2) = s(s+1)(2s+1)/3
        for s in spins_up_to(10) {
            let m = spin_matrices(s);
            let tr = (&m.y * &m.y).trace();
            let expected = s.casimir() * s.multiplicity() as f64 / 3.0;
            assert!((tr.re - expected).abs() < 1e-12, "s={s}");
            assert!(tr.im.abs() < 1e-14);
        }
        let m = spin_matrices(SpinQuantumNumber::THREE_HALVES);
        assert!(((&m.y * &m.y).trace().re - 5.0).abs() < 1e-13);
    }

    #[test]
    fn commutator_and_casimir_up_to_spin_five() {
        for s in spins_up_to(10) {
            let m = spin_matrices(s);
            let comm = m.x.commutator(&m.y);
            assert!(comm.max_abs_diff(&m.z.scale(C64::i())) <= 1e-12, "s={s}");
            let cas = &(&(&m.x * &m.x) + &(&m.y * &m.y)) + &(&m.z * &m.z);
            let expected = ComplexMatrix::identity(s.multiplicity()).scale_real(s.casimir());
            assert!(cas.max_abs_diff(&expected) <= 1e-12, "s={s}");
            assert!(m.x.is_hermitian(1e-15) && m.y.is_hermitian(1e-15));
        }
    }

    #[test]
    fn projectors() {
        let one = SpinQuantumNumber::ONE;
        let p1 = projector_mi(one, Projection::integer(1)).unwrap();
        assert_eq!(p1, ComplexMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]));
        let p0 = projector_mi(one, Projection::integer(0)).unwrap();
        assert_eq!(p0, ComplexMatrix::from_real_diagonal(&[0.0, 1.0, 0.0]));
        let mut sum = ComplexMatrix::zeros(3);
        for m in one.projections() {
            let p = projector_mi(one, m).unwrap();
            assert_eq!(&p * &p, p);
            sum = &sum + &p;
        }
        assert_eq!(sum, ComplexMatrix::identity(3));
    }

    #[test]
    fn invalid_projection_rejected() {
        let one = SpinQuantumNumber::ONE;
        assert!(projector_mi(one, Projection::integer(2)).is_err());
        assert!(projector_mi(one, Projection::from_twice(1)).is_err());
        assert!(Projection::from_value(0.3).is_err());
        assert!(SpinQuantumNumber::from_value(0.7).is_err());
        assert!(SpinQuantumNumber::from_value(-0.5).is_err());
    }

    #[test]
    fn product_ordering_is_electron_major() {
        let basis = ProductBasis::new(SpinQuantumNumber::THREE_HALVES, SpinQuantumNumber::ONE);
        assert_eq!(basis.dim(), 12);
        let d: Vec<f64> = basis.sz().diagonal().iter().map(|z| z.re).collect();
        assert_eq!(
            d,
            vec![1.5, 1.5, 1.5, 0.5, 0.5, 0.5, -0.5, -0.5, -0.5, -1.5, -1.5, -1.5]
        );
        let idx = basis.index(Projection::from_twice(1), Projection::integer(-1)).unwrap();
        assert_eq!(idx, 5);
        assert_eq!(basis.labels(5), (Projection::from_twice(1), Projection::integer(-1)));
        assert_eq!(basis.block_indices(Projection::integer(1)).unwrap(), vec![0, 3, 6, 9]);
    }
}
