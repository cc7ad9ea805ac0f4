//! Spin Hamiltonians of an isotropically coupled electron-nuclear pair.
//!
//! Parameters are linear frequencies (Hz). Every returned operator is in angular
//! units (rad/s), so `exp(-i H t)` with `t` in seconds is the propagator.

use std::f64::consts::PI;

use crate::error::{EseemError, Result};
use crate::matrix::{ComplexMatrix, HermitianEigen, C64};
use crate::spin::{ProductBasis, Projection, SpinQuantumNumber};

/// CODATA 2018 constants (SI).
pub mod constants {
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
    pub const NUCLEAR_MAGNETON: f64 = 5.050_783_746_1e-27;
    /// Nuclear g-factor of 14N.
    pub const G_N14: f64 = 0.403_761;
}

/// Ratio `|a| / f_e` above which the perturbative formulas are flagged.
pub const PERTURBATIVE_RATIO_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSystemParams {
    pub s: SpinQuantumNumber,
    pub i: SpinQuantumNumber,
    /// Isotropic hyperfine coupling `a`.
    pub a_hz: f64,
    /// Electron Zeeman frequency.
    pub f_e_hz: f64,
    /// Nuclear Zeeman frequency (enters as `-f_i Iz`).
    pub f_i_hz: f64,
    pub g: f64,
    /// Microwave frequency, i.e. the rotating-frame frequency.
    pub f_mw_hz: f64,
}

impl SpinSystemParams {
    /// N@C60: S = 3/2, 14N (I = 1), a = 15.8 MHz at 9.67 GHz, g = 2.0036.
    pub fn nc60() -> Self {
        let f_e_hz = 9.67e9;
        let g = 2.0036;
        Self {
            s: SpinQuantumNumber::THREE_HALVES,
            i: SpinQuantumNumber::ONE,
            a_hz: 15.8e6,
            f_e_hz,
            f_i_hz: n14_larmor_hz(f_e_hz, g),
            g,
            f_mw_hz: f_e_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a_hz, self.f_e_hz, self.f_i_hz, self.g, self.f_mw_hz]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(EseemError::InvalidExperiment("non-finite system parameter".into()));
        }
        if self.f_e_hz <= 0.0 {
            return Err(EseemError::InvalidExperiment("f_e_hz must be positive".into()));
        }
        if self.g <= 0.0 {
            return Err(EseemError::InvalidExperiment("g must be positive".into()));
        }
        Ok(())
    }

    /// Human-readable warnings about the parameter regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.coupling_ratio();
        if ratio > PERTURBATIVE_RATIO_LIMIT {
            out.push(format!(
                "|a|/f_e = {ratio:.3} exceeds {PERTURBATIVE_RATIO_LIMIT}: second-order formulas are unreliable"
            ));
        }
        if self.a_hz == 0.0 {
            out.push("a = 0: no hyperfine modulation".into());
        }
        out
    }

    pub fn coupling_ratio(&self) -> f64 {
        self.a_hz.abs() / self.f_e_hz
    }

    pub fn basis(&self) -> ProductBasis {
        ProductBasis::new(self.s, self.i)
    }

    pub fn delta_hz(&self) -> f64 {
        delta(self)
    }

    /// Centre of the hyperfine line `m_i` to second order:
    /// `f_e + a m_i + (delta/2)(I(I+1) - m_i^2)`.
    pub fn line_center_hz(&self, m_i: Projection) -> f64 {
        let m = m_i.value();
        self.f_e_hz + self.a_hz * m + 0.5 * self.delta_hz() * (self.i.casimir() - m * m)
    }

    pub fn with_mw_frequency(mut self, f_mw_hz: f64) -> Self {
        self.f_mw_hz = f_mw_hz;
        self
    }

    /// Static field `B0 = h f_e / (g muB)` in tesla.
    pub fn field_tesla(&self) -> f64 {
        constants::PLANCK * self.f_e_hz / (self.g * constants::BOHR_MAGNETON)
    }

    /// Converts a frequency interval to a field interval (tesla) at this g.
    pub fn hz_to_tesla(&self, df_hz: f64) -> f64 {
        constants::PLANCK * df_hz / (self.g * constants::BOHR_MAGNETON)
    }
}

/// 14N Larmor frequency at the field where an electron with factor `g` resonates at `f_e_hz`.
pub fn n14_larmor_hz(f_e_hz: f64, g: f64) -> f64 {
    let b0 = constants::PLANCK * f_e_hz / (g * constants::BOHR_MAGNETON);
    constants::G_N14 * constants::NUCLEAR_MAGNETON * b0 / constants::PLANCK
}

/// Second-order hyperfine shift `a^2 / f_e` (Hz).
pub fn delta(p: &SpinSystemParams) -> f64 {
    p.a_hz * p.a_hz / p.f_e_hz
}

const TWO_PI: f64 = 2.0 * PI;

fn s_dot_i(b: &ProductBasis) -> ComplexMatrix {
    let xx = &b.sx() * &b.ix();
    let yy = &b.sy() * &b.iy();
    let zz = &b.sz() * &b.iz();
    &(&xx + &yy) + &zz
}

/// Laboratory-frame `2 pi [f_e Sz - f_i Iz + a S.I]`.
pub fn h0_lab(p: &SpinSystemParams) -> ComplexMatrix {
    h0_lab_in(p, TWO_PI)
}

/// Same operator in linear units (Hz); used where eigenvalues are reported in Hz.
pub fn h0_lab_hz(p: &SpinSystemParams) -> ComplexMatrix {
    h0_lab_in(p, 1.0)
}

fn h0_lab_in(p: &SpinSystemParams, unit: f64) -> ComplexMatrix {
    let b = p.basis();
    let zeeman = &b.sz().scale_real(p.f_e_hz) - &b.iz().scale_real(p.f_i_hz);
    (&zeeman + &s_dot_i(&b).scale_real(p.a_hz)).scale_real(unit)
}

/// Diagonal energies (rad/s) of `h_avg0`, in basis order.
pub fn h_avg0_diagonal(p: &SpinSystemParams) -> Vec<f64> {
    let b = p.basis();
    let omega_e = p.f_e_hz - p.f_mw_hz;
    (0..b.dim())
        .map(|k| {
            let (ms, mi) = b.labels(k);
            let (ms, mi) = (ms.value(), mi.value());
            TWO_PI * (omega_e * ms - p.f_i_hz * mi + p.a_hz * ms * mi)
        })
        .collect()
}

/// Diagonal energies (rad/s) of `h_avg1`, in basis order.
pub fn h_avg1_diagonal(p: &SpinSystemParams) -> Vec<f64> {
    let b = p.basis();
    let half_delta = 0.5 * TWO_PI * delta(p);
    let (ss, ii) = (p.s.casimir(), p.i.casimir());
    (0..b.dim())
        .map(|k| {
            let (ms, mi) = b.labels(k);
            let (ms, mi) = (ms.value(), mi.value());
            half_delta * ((ii - mi * mi) * ms - (ss - ms * ms) * mi)
        })
        .collect()
}

/// Zeroth-order average Hamiltonian in the frame rotating at `f_mw`:
/// `Omega_e Sz - omega_I Iz + a Sz Iz`, `Omega_e = omega_e - omega_mw`.
pub fn h_avg0(p: &SpinSystemParams) -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&h_avg0_diagonal(p))
}

/// First-order correction `(delta/2)[(I(I+1) - Iz^2) Sz - (S(S+1) - Sz^2) Iz]`.
pub fn h_avg1(p: &SpinSystemParams) -> ComplexMatrix {
    ComplexMatrix::from_real_diagonal(&h_avg1_diagonal(p))
}

/// `h_avg0 + h_avg1` as a diagonal vector (rad/s).
pub fn h_avg_diagonal(p: &SpinSystemParams) -> Vec<f64> {
    h_avg0_diagonal(p)
        .into_iter()
        .zip(h_avg1_diagonal(p))
        .map(|(a, b)| a + b)
        .collect()
}

/// Time-dependent rotating-frame Hamiltonian at time `t` (s):
///
/// `Omega_e Sz - omega_I Iz + a[Sz Iz + (Sx Ix + Sy Iy) cos(w t) + (Sx Iy - Sy Ix) sin(w t)]`
///
/// with `w = 2 pi f_mw`. This is `exp(i w Sz t) H0 exp(-i w Sz t) - w Sz` exactly.
pub fn h_rot_t(p: &SpinSystemParams, t: f64) -> ComplexMatrix {
    RotatingFrameHamiltonian::new(p).at(t)
}

/// Pre-built pieces of [`h_rot_t`] for repeated evaluation.
#[derive(Debug, Clone)]
pub struct RotatingFrameHamiltonian {
    static_part: ComplexMatrix,
    cos_part: ComplexMatrix,
    sin_part: ComplexMatrix,
    omega_mw: f64,
}

impl RotatingFrameHamiltonian {
    pub fn new(p: &SpinSystemParams) -> Self {
        let b = p.basis();
        let (sx, sy, sz) = (b.sx(), b.sy(), b.sz());
        let (ix, iy, iz) = (b.ix(), b.iy(), b.iz());
        let a = TWO_PI * p.a_hz;
        let static_part = &(&sz.scale_real(TWO_PI * (p.f_e_hz - p.f_mw_hz)) - &iz.scale_real(TWO_PI * p.f_i_hz))
            + &(&sz * &iz).scale_real(a);
        let cos_part = (&(&sx * &ix) + &(&sy * &iy)).scale_real(a);
        let sin_part = (&(&sx * &iy) - &(&sy * &ix)).scale_real(a);
        Self {
            static_part,
            cos_part,
            sin_part,
            omega_mw: TWO_PI * p.f_mw_hz,
        }
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        let phase = self.omega_mw * t;
        &self.static_part + &(&self.cos_part.scale_real(phase.cos()) + &self.sin_part.scale_real(phase.sin()))
    }

    pub fn omega_mw(&self) -> f64 {
        self.omega_mw
    }

    /// True when the hyperfine coupling vanishes and `at(t)` is constant.
    pub fn is_static(&self) -> bool {
        self.cos_part.max_abs() == 0.0 && self.sin_part.max_abs() == 0.0
    }

    pub fn static_part(&self) -> &ComplexMatrix {
        &self.static_part
    }
}

/// Block of `h` on the nuclear projection `m_i`, with the constant energy shift removed.
///
/// The shift removed is the mean diagonal energy of the state(s) with the smallest
/// `|m_s|`, so for S = 3/2 the block reads `diag(3/2 D + d, D/2, -D/2, -3/2 D + d)`.
pub fn reduced_block(h: &ComplexMatrix, p: &SpinSystemParams, m_i: Projection) -> Result<ComplexMatrix> {
    let b = p.basis();
    if h.dim() != b.dim() {
        return Err(EseemError::DimensionMismatch {
            expected: b.dim(),
            actual: h.dim(),
        });
    }
    let scale = h.max_abs().max(1.0);
    let mut cross = 0.0_f64;
    for r in 0..b.dim() {
        for c in 0..b.dim() {
            if b.labels(r).1 != b.labels(c).1 {
                cross = cross.max(h.get(r, c).norm());
            }
        }
    }
    if cross > 1e-12 * scale {
        return Err(EseemError::NotBlockDiagonal(cross));
    }
    let idx = b.block_indices(m_i)?;
    let block = h.submatrix(&idx);
    let min_twice = (p.s.twice() % 2) as i32;
    let central: Vec<f64> =
        p.s.projections()
            .enumerate()
            .filter(|(_, ms)| ms.twice().abs() == min_twice)
            .map(|(k, _)| block.get(k, k).re)
            .collect();
    let shift = central.iter().sum::<f64>() / central.len() as f64;
    Ok(&block - &ComplexMatrix::identity(idx.len()).scale_real(shift))
}

/// One allowed `m_s -> m_s + 1` EPR transition at fixed `m_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StickLine {
    pub m_i: Projection,
    /// Lower electron projection of the transition.
    pub m_s: Projection,
    /// Transition frequency minus `f_e` (Hz).
    pub offset_hz: f64,
    /// Field-swept position relative to `h f_e / (g muB)`, in microtesla
    /// (higher transition frequency appears at lower field).
    pub field_offset_ut: f64,
    /// `|<m_s+1|S+|m_s>|^2 = (S - m_s)(S + m_s + 1)`.
    pub intensity: f64,
}

/// EPR stick spectrum from the exact eigenvalues of `h0_lab`.
///
/// Each eigenstate is labelled by its dominant product-basis component; line
/// intensities are the product-basis `S+` matrix elements.
pub fn epr_stick_spectrum(p: &SpinSystemParams) -> Result<Vec<StickLine>> {
    p.validate()?;
    let b = p.basis();
    let h = h0_lab_hz(p);
    let eig = HermitianEigen::with_tolerance(&h, crate::matrix::Tolerance::DEFAULT)?;
    let n = b.dim();

    // greedy assignment of eigenvectors to basis labels by overlap
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for v in 0..n {
        for k in 0..n {
            pairs.push((eig.vectors.get(k, v).norm_sqr(), v, k));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut energy = vec![f64::NAN; n];
    let (mut used_v, mut used_k) = (vec![false; n], vec![false; n]);
    for (_, v, k) in pairs {
        if !used_v[v] && !used_k[k] {
            used_v[v] = true;
            used_k[k] = true;
            energy[k] = eig.values[v];
        }
    }

    let sv = p.s.value();
    let mut lines = Vec::new();
    for m_i in p.i.projections() {
        for m_s in p.s.projections().filter(|m| m.twice() < p.s.twice() as i32) {
            let upper = Projection::from_twice(m_s.twice() + 2);
            let lo = b.index(m_s, m_i)?;
            let hi = b.index(upper, m_i)?;
            let offset_hz = energy[hi] - energy[lo] - p.f_e_hz;
            let m = m_s.value();
            lines.push(StickLine {
                m_i,
                m_s,
                offset_hz,
                field_offset_ut: -p.hz_to_tesla(offset_hz) * 1e6,
                intensity: (sv - m) * (sv + m + 1.0),
            });
        }
    }
    Ok(lines)
}

/// Lines of one hyperfine group sorted by frequency.
pub fn stick_group(lines: &[StickLine], m_i: Projection) -> Vec<StickLine> {
    let mut g: Vec<StickLine> = lines.iter().copied().filter(|l| l.m_i == m_i).collect();
    g.sort_by(|a, b| a.offset_hz.total_cmp(&b.offset_hz));
    g
}

/// Sum of `|<a|S+|b>|^2` over the `m_i` block of the product basis.
pub fn block_raising_weight(p: &SpinSystemParams, m_i: Projection) -> Result<f64> {
    let b = p.basis();
    let idx = b.block_indices(m_i)?;
    let raise = b.electron(&b.electron_ops().raising());
    let block = raise.submatrix(&idx);
    Ok(block.to_row_major().iter().map(C64::norm_sqr).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(m: i32) -> Projection {
        Projection::integer(m)
    }

    #[test]
    fn delta_of_nc60() {
        let p = SpinSystemParams::nc60();
        assert!((delta(&p) - 25_815.925_542_916).abs() < 1.0);
        let mut q = p;
        q.a_hz = 0.0;
        assert_eq!(delta(&q), 0.0);
        q.a_hz = 2.0 * p.a_hz;
        assert!((delta(&q) / delta(&p) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn nitrogen_larmor_default() {
        let f = n14_larmor_hz(9.67e9, 2.0036);
        // B0 = 0.3448 T, gamma/2pi = 3.0777 MHz/T
        assert!((f - 1.0612e6).abs() < 2e3, "{f}");
    }

    #[test]
    fn uncoupled_lab_hamiltonian_is_zeeman_diagonal() {
        let mut p = SpinSystemParams::nc60();
        p.a_hz = 0.0;
        let h = h0_lab(&p);
        assert!(h.is_diagonal(0.0));
        let b = p.basis();
        for k in 0..b.dim() {
            let (ms, m) = b.labels(k);
            let e = TWO_PI * (p.f_e_hz * ms.value() - p.f_i_hz * m.value());
            assert!((h.get(k, k).re - e).abs() <= 1e-6 * e.abs().max(1.0));
        }
    }

    #[test]
    fn lab_hamiltonian_conserves_total_projection() {
        let p = SpinSystemParams::nc60();
        let b = p.basis();
        let fz = &b.sz() + &b.iz();
        let h = h0_lab(&p);
        assert!(h.is_hermitian(0.0));
        assert!(h.commutator(&fz).max_abs() <= 1e-12 * h.max_abs());
    }

    #[test]
    fn avg0_entry() {
        let p = SpinSystemParams::nc60().with_mw_frequency(9.66e9);
        let b = p.basis();
        let k = b.index(Projection::from_twice(3), mi(1)).unwrap();
        let omega_e = TWO_PI * (p.f_e_hz - p.f_mw_hz);
        let expected = 1.5 * omega_e - TWO_PI * p.f_i_hz + 1.5 * TWO_PI * p.a_hz;
        let got = h_avg0(&p).get(k, k).re;
        assert!((got - expected).abs() < 1e-6 * expected.abs());
    }

    #[test]
    fn avg0_without_coupling_is_lab_minus_frame() {
        let mut p = SpinSystemParams::nc60().with_mw_frequency(9.6e9);
        p.a_hz = 0.0;
        let b = p.basis();
        let shifted = &h0_lab(&p) - &b.sz().scale_real(TWO_PI * p.f_mw_hz);
        assert!(h_avg0(&p).max_abs_diff(&shifted) < 1e-14 * h0_lab(&p).max_abs());
    }

    #[test]
    fn avg1_reproduces_block_corrections() {
        let p = SpinSystemParams::nc60();
        let d = TWO_PI * delta(&p);
        let h1 = h_avg1(&p);
        let b = p.basis();
        let idx = b.block_indices(mi(1)).unwrap();
        let got: Vec<f64> = idx.iter().map(|&k| h1.get(k, k).re / d).collect();
        let expected = [0.0, -1.5, -2.0, -1.5];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn avg1_has_no_state_dependent_shift_at_central_line() {
        let p = SpinSystemParams::nc60();
        let block = reduced_block(&h_avg1(&p), &p, mi(0)).unwrap();
        // only the I(I+1) Sz piece survives: linear in m_s
        let d = TWO_PI * delta(&p);
        let diag: Vec<f64> = block.diagonal().iter().map(|z| z.re / d).collect();
        assert!((diag[0] - diag[1] - (diag[1] - diag[2])).abs() < 1e-12);
        assert!((diag[1] - diag[2] - (diag[2] - diag[3])).abs() < 1e-12);
    }

    #[test]
    fn avg1_block_structure() {
        // within each block: antisymmetric part in m_s is (d/2)(I(I+1) - m^2) Sz,
        // and the mean-removed block is traceless
        let p = SpinSystemParams::nc60();
        let d = TWO_PI * delta(&p);
        let b = p.basis();
        for m in p.i.projections() {
            let idx = b.block_indices(m).unwrap();
            let diag: Vec<f64> = idx.iter().map(|&k| h_avg1(&p).get(k, k).re).collect();
            let n = diag.len();
            let mean = diag.iter().sum::<f64>() / n as f64;
            let centred: f64 = diag.iter().map(|e| e - mean).sum();
            assert!(centred.abs() < 1e-9 * d);
            for (k, ms) in p.s.projections().enumerate() {
                let anti = 0.5 * (diag[k] - diag[n - 1 - k]);
                let expected = 0.5 * d * (p.i.casimir() - m.value().powi(2)) * ms.value();
                assert!((anti - expected).abs() < 1e-9 * d);
            }
        }
    }

    #[test]
    fn rotating_frame_at_zero_phase() {
        let p = SpinSystemParams::nc60().with_mw_frequency(9.67e9);
        let b = p.basis();
        let h = h_rot_t(&p, 0.0);
        let expected = &h_avg0(&p) + &(&(&b.sx() * &b.ix()) + &(&b.sy() * &b.iy())).scale_real(TWO_PI * p.a_hz);
        assert!(h.max_abs_diff(&expected) < 1e-6);
        assert!(h.is_hermitian(1e-6));
    }

    #[test]
    fn rotating_frame_period_average_is_avg0() {
        let p = SpinSystemParams::nc60().with_mw_frequency(9.67e9 + 15.8e6);
        let rf = RotatingFrameHamiltonian::new(&p);
        let period = 1.0 / p.f_mw_hz;
        let n = 1024;
        let mut acc = ComplexMatrix::zeros(12);
        for k in 0..n {
            acc = &acc + &rf.at((k as f64 + 0.5) * period / n as f64);
        }
        let avg = acc.scale_real(1.0 / n as f64);
        let scale = h_avg0(&p).max_abs();
        assert!(avg.max_abs_diff(&h_avg0(&p)) <= 1e-10 * scale);
    }

    #[test]
    fn rotating_frame_without_coupling_is_static() {
        let mut p = SpinSystemParams::nc60();
        p.a_hz = 0.0;
        assert_eq!(h_rot_t(&p, 0.0), h_rot_t(&p, 3.3e-11));
    }

    #[test]
    fn reduced_block_on_resonance() {
        let p0 = SpinSystemParams::nc60();
        let p = p0.with_mw_frequency(p0.line_center_hz(mi(1)));
        let h = &h_avg0(&p) + &h_avg1(&p);
        let block = reduced_block(&h, &p, mi(1)).unwrap();
        let d = TWO_PI * delta(&p);
        let expected = ComplexMatrix::from_real_diagonal(&[d, 0.0, 0.0, d]);
        assert!(block.max_abs_diff(&expected) < 1e-6 * d, "{block:?}");
    }

    #[test]
    fn reduced_block_off_resonance_matches_offset_form() {
        let p0 = SpinSystemParams::nc60();
        let offset = 1.3e6;
        let p = p0.with_mw_frequency(p0.line_center_hz(mi(1)) - offset);
        let h = &h_avg0(&p) + &h_avg1(&p);
        let block = reduced_block(&h, &p, mi(1)).unwrap();
        let (dd, d) = (TWO_PI * offset, TWO_PI * delta(&p));
        let expected = ComplexMatrix::from_real_diagonal(&[1.5 * dd + d, 0.5 * dd, -0.5 * dd, -1.5 * dd + d]);
        assert!(block.max_abs_diff(&expected) < 1e-9 * dd);
    }

    #[test]
    fn reduced_block_central_line_is_linear() {
        let p = SpinSystemParams::nc60().with_mw_frequency(9.6695e9);
        let h = &h_avg0(&p) + &h_avg1(&p);
        let block = reduced_block(&h, &p, mi(0)).unwrap();
        let sz = crate::spin::spin_matrices(p.s).z;
        let c = block.get(0, 0).re / 1.5;
        assert!(block.max_abs_diff(&sz.scale_real(c)) < 1e-9 * c.abs().max(1.0));
    }

    #[test]
    fn reduced_block_spin_half_has_no_relative_shift() {
        let mut p = SpinSystemParams::nc60();
        p.s = SpinQuantumNumber::HALF;
        let p = p.with_mw_frequency(p.line_center_hz(mi(1)));
        let h = &h_avg0(&p) + &h_avg1(&p);
        let block = reduced_block(&h, &p, mi(1)).unwrap();
        assert_eq!(block.dim(), 2);
        // rounding of GHz-scale diagonals only
        assert!(block.max_abs() < 1e-3, "{block:?}");
    }

    #[test]
    fn reduced_block_rejects_lab_mixing() {
        let p = SpinSystemParams::nc60();
        assert!(matches!(
            reduced_block(&h0_lab(&p), &p, mi(1)),
            Err(EseemError::NotBlockDiagonal(_))
        ));
    }

    #[test]
    fn stick_spectrum_outer_groups() {
        let p = SpinSystemParams::nc60();
        let lines = epr_stick_spectrum(&p).unwrap();
        let d = delta(&p);
        for m in [1, -1] {
            let g = stick_group(&lines, mi(m));
            assert_eq!(g.len(), 3);
            let mut intens: Vec<f64> = g.iter().map(|l| l.intensity).collect();
            intens.sort_by(f64::total_cmp);
            assert_eq!(intens, vec![3.0, 3.0, 4.0]);
            assert_eq!(g[1].intensity, 4.0);
            let split = 0.5 * (g[2].offset_hz - g[0].offset_hz);
            assert!((split / d - 1.0).abs() < 5e-3, "split {split}");
            let field = 0.5 * (g[0].field_offset_ut - g[2].field_offset_ut);
            assert!((field - 0.9).abs() < 0.05, "{field} uT");
        }
    }

    #[test]
    fn stick_spectrum_central_group_degenerate_to_third_order() {
        let p = SpinSystemParams::nc60();
        let lines = epr_stick_spectrum(&p).unwrap();
        let g = stick_group(&lines, mi(0));
        // adjacent-line spacing is a third-order effect (~168 Hz here)
        for w in g.windows(2) {
            let spacing = w[1].offset_hz - w[0].offset_hz;
            assert!(spacing < 1e-2 * delta(&p), "{spacing}");
        }
    }

    #[test]
    fn stick_spectrum_uncoupled_coincides() {
        let mut p = SpinSystemParams::nc60();
        p.a_hz = 0.0;
        for l in epr_stick_spectrum(&p).unwrap() {
            assert!(l.offset_hz.abs() < 1e-3, "{l:?}");
        }
    }

    #[test]
    fn stick_intensity_sum_independent_of_coupling() {
        let p = SpinSystemParams::nc60();
        let mut q = p;
        q.a_hz = 3.0e7;
        for m in p.i.projections() {
            let sum_p: f64 = stick_group(&epr_stick_spectrum(&p).unwrap(), m)
                .iter()
                .map(|l| l.intensity)
                .sum();
            let sum_q: f64 = stick_group(&epr_stick_spectrum(&q).unwrap(), m)
                .iter()
                .map(|l| l.intensity)
                .sum();
            let w = block_raising_weight(&p, m).unwrap();
            assert!((sum_p - w).abs() < 1e-12 && (sum_q - w).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_vs_second_order_levels() {
        // third-order scale a^3/f_e^2 bounds the disagreement of in-block splittings
        let p = SpinSystemParams::nc60();
        let third = p.a_hz.powi(3) / p.f_e_hz.powi(2);
        let lines = epr_stick_spectrum(&p).unwrap();
        let q = p.with_mw_frequency(0.0);
        let pert: Vec<f64> = h_avg_diagonal(&q).iter().map(|e| e / TWO_PI).collect();
        let b = p.basis();
        for l in &lines {
            let lo = b.index(l.m_s, l.m_i).unwrap();
            let hi = b.index(Projection::from_twice(l.m_s.twice() + 2), l.m_i).unwrap();
            let pert_offset = pert[hi] - pert[lo] - p.f_e_hz;
            assert!(
                (l.offset_hz - pert_offset).abs() <= 5.0 * third,
                "{l:?} vs {pert_offset}"
            );
        }
    }

    #[test]
    fn perturbative_warning() {
        let mut p = SpinSystemParams::nc60();
        assert!(p.warnings().is_empty());
        p.a_hz = 0.1 * p.f_e_hz;
        assert!(!p.warnings().is_empty());
    }
}
