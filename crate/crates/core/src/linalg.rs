//! Dense complex linear algebra.
//!
//! Storage and products go through `nalgebra`; determinants, log-determinants
//! and inverses use the partial-pivoting LU factorization implemented here so
//! that the log-magnitude and phase can be accumulated pivot by pivot.

use std::f64::consts::PI;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, SoupError};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// `log|det|` together with `arg det` in `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    pub phase: f64,
}

impl LogDet {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.log_abs, self.phase)
    }

    pub fn exp(self) -> Complex64 {
        Complex64::from_polar(self.log_abs.exp(), self.phase)
    }

    /// `log(self / other)` with the phase difference wrapped back into `(-pi, pi]`.
    pub fn ratio(self, other: LogDet) -> Complex64 {
        Complex64::new(self.log_abs - other.log_abs, wrap_phase(self.phase - other.phase))
    }
}

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSquareMatrix {
    data: DMatrix<Complex64>,
}

impl ComplexSquareMatrix {
    pub fn zeros(m: usize) -> Self {
        Self { data: DMatrix::zeros(m, m) }
    }

    pub fn identity(m: usize) -> Self {
        Self { data: DMatrix::identity(m, m) }
    }

    pub fn from_fn(m: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self { data: DMatrix::from_fn(m, m, f) }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "matrix must be square");
        Self { data: m.map(|x| Complex64::new(x, 0.0)) }
    }

    pub fn from_matrix(data: DMatrix<Complex64>) -> Result<Self> {
        if !data.is_square() {
            return Err(SoupError::DimensionMismatch { expected: data.nrows(), found: data.ncols() });
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self { data: &self.data * &other.data }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { data: &self.data + &other.data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { data: &self.data - &other.data }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { data: &self.data * c }
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    /// Entrywise product `U ⊙ V`.
    pub fn hadamard(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "hadamard: dimension mismatch");
        Self { data: self.data.component_mul(&other.data) }
    }

    pub fn conj(&self) -> Self {
        Self { data: self.data.map(|z| z.conj()) }
    }

    pub fn adjoint(&self) -> Self {
        Self { data: self.data.adjoint() }
    }

    /// `I - self`.
    pub fn identity_minus(&self) -> Self {
        let mut out = self.scale(Complex64::new(-1.0, 0.0));
        for i in 0..self.dim() {
            out[(i, i)] += 1.0;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn lu(&self) -> LuFactors {
        LuFactors::new(self)
    }

    pub fn det(&self) -> Complex64 {
        self.lu().det()
    }

    pub fn log_det(&self) -> Result<LogDet> {
        self.lu().log_det()
    }

    pub fn inverse(&self) -> Result<Self> {
        self.lu().inverse()
    }

    /// Eigenvalues from the complex Schur form (independent of the LU path).
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let schur = self.data.clone().schur();
        let (_, t) = schur.unpack();
        (0..t.nrows()).map(|i| t[(i, i)]).collect()
    }
}

impl Index<(usize, usize)> for ComplexSquareMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.data[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexSquareMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut Complex64 {
        &mut self.data[idx]
    }
}

/// Packed LU factors with row pivots, `PA = LU`.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    // row-major, unit-lower L below the diagonal, U on and above
    lu: Vec<Complex64>,
    piv: Vec<usize>,
    odd_swaps: bool,
    singular: bool,
}

impl LuFactors {
    fn new(m: &ComplexSquareMatrix) -> Self {
        let n = m.dim();
        let mut lu: Vec<Complex64> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                lu.push(m[(i, j)]);
            }
        }
        let mut piv: Vec<usize> = (0..n).collect();
        let mut odd_swaps = false;
        let mut singular = false;
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, lu[i * n + k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
                odd_swaps = !odd_swaps;
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in (k + 1)..n {
                    let ukj = lu[k * n + j];
                    lu[i * n + j] -= factor * ukj;
                }
            }
        }
        Self { n, lu, piv, odd_swaps, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> Complex64 {
        if self.singular {
            return Complex64::new(0.0, 0.0);
        }
        let mut d = Complex64::new(if self.odd_swaps { -1.0 } else { 1.0 }, 0.0);
        for k in 0..self.n {
            d *= self.lu[k * self.n + k];
        }
        d
    }

    pub fn log_det(&self) -> Result<LogDet> {
        if self.singular {
            return Err(SoupError::Singular);
        }
        let mut log_abs = 0.0;
        let mut phase = if self.odd_swaps { PI } else { 0.0 };
        for k in 0..self.n {
            let u = self.lu[k * self.n + k];
            log_abs += u.norm().ln();
            phase = wrap_phase(phase + u.arg());
        }
        Ok(LogDet { log_abs, phase })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.singular {
            return Err(SoupError::Singular);
        }
        if b.len() != self.n {
            return Err(SoupError::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let n = self.n;
        let mut x: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[i * n + j];
                let xj = x[j];
                x[i] -= l * xj;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.lu[i * n + j];
                let xj = x[j];
                x[i] -= u * xj;
            }
            x[i] /= self.lu[i * n + i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<ComplexSquareMatrix> {
        let n = self.n;
        let mut out = ComplexSquareMatrix::zeros(n);
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e)?;
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }
}

/// Elementary symmetric polynomials `e_0..=e_m` of the given values.
pub fn elementary_symmetric(values: &[Complex64]) -> Vec<Complex64> {
    let mut e = vec![Complex64::new(0.0, 0.0); values.len() + 1];
    e[0] = Complex64::new(1.0, 0.0);
    for (i, &v) in values.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            let prev = e[k - 1];
            e[k] += v * prev;
        }
    }
    e
}

/// `|det(I+M) - Σ_k e_k(eigenvalues of M)|`.
///
/// Compares the LU determinant against the wedge-power expansion
/// `det(I+M) = Σ_k Tr(M^{∧k})`, with the wedge traces evaluated as elementary
/// symmetric polynomials of the Schur eigenvalues.
pub fn det_expansion_check(m: &ComplexSquareMatrix) -> f64 {
    let det = ComplexSquareMatrix::identity(m.dim()).add(m).det();
    let expansion: Complex64 = elementary_symmetric(&m.eigenvalues()).into_iter().sum();
    (det - expansion).norm()
}

/// Real matrix power by repeated multiplication.
pub fn real_matrix_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pseudo_random(m: usize, seed: u64, scale: f64) -> ComplexSquareMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        ComplexSquareMatrix::from_fn(m, |_, _| c(next() * scale, next() * scale))
    }

    #[test]
    fn det_of_known_matrix() {
        let mut m = ComplexSquareMatrix::zeros(2);
        m[(0, 0)] = c(1.0, 1.0);
        m[(0, 1)] = c(2.0, 0.0);
        m[(1, 0)] = c(0.0, 3.0);
        m[(1, 1)] = c(4.0, 0.0);
        // (1+i)*4 - 2*3i = 4 - 2i
        let d = m.det();
        assert!((d - c(4.0, -2.0)).norm() < 1e-14);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let mut m = ComplexSquareMatrix::zeros(2);
        m[(0, 1)] = c(1.0, 0.0);
        m[(1, 0)] = c(1.0, 0.0);
        assert!((m.det() - c(-1.0, 0.0)).norm() < 1e-15);
        let ld = m.log_det().unwrap();
        assert!(ld.log_abs.abs() < 1e-15);
        assert!((ld.phase.abs() - PI).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = ComplexSquareMatrix::from_fn(3, |i, _| c(i as f64, 0.0));
        assert!(m.lu().is_singular());
        assert!(matches!(m.log_det(), Err(SoupError::Singular)));
        assert!(matches!(m.inverse(), Err(SoupError::Singular)));
    }

    #[test]
    fn det_matches_eigenvalue_product() {
        for (m, seed) in (1..=8).zip(11u64..) {
            let a = pseudo_random(m, seed, 1.0);
            let det = a.det();
            let prod: Complex64 = a.eigenvalues().into_iter().product();
            assert!((det - prod).norm() <= 1e-8 * det.norm().max(1e-300), "m={m}");
        }
    }

    #[test]
    fn log_det_matches_det() {
        for seed in 0..20u64 {
            let a = pseudo_random(6, seed, 0.3).identity_minus();
            let ld = a.log_det().unwrap();
            let d = a.det();
            assert!((ld.log_abs - d.norm().ln()).abs() < 1e-12);
            assert!(wrap_phase(ld.phase - d.arg()).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let a = pseudo_random(5, 99, 0.4).identity_minus();
        let inv = a.inverse().unwrap();
        let prod = a.matmul(&inv);
        assert!(prod.max_abs_diff(&ComplexSquareMatrix::identity(5)) < 1e-12);
    }

    #[test]
    fn hadamard_is_entrywise() {
        let a = pseudo_random(4, 1, 1.0);
        let b = pseudo_random(4, 2, 1.0);
        let h = a.hadamard(&b);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(h[(i, j)], a[(i, j)] * b[(i, j)]);
            }
        }
    }

    #[test]
    fn expansion_check_zero_and_diagonal() {
        assert_eq!(det_expansion_check(&ComplexSquareMatrix::zeros(3)), 0.0);
        let mut d = ComplexSquareMatrix::zeros(2);
        d[(0, 0)] = c(0.3, 0.1);
        d[(1, 1)] = c(-0.2, 0.4);
        assert!(det_expansion_check(&d) < 1e-15);
    }

    #[test]
    fn expansion_check_random_small_norm() {
        for seed in 0..10u64 {
            // entries bounded by 0.2 keeps the operator norm below 1
            let m = pseudo_random(4, seed, 0.2);
            let det = ComplexSquareMatrix::identity(4).add(&m).det();
            assert!(det_expansion_check(&m) <= 1e-8 * (1.0 + det.norm()));
        }
    }

    #[test]
    fn elementary_symmetric_small() {
        let e = elementary_symmetric(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        let re: Vec<f64> = e.iter().map(|z| z.re).collect();
        assert_eq!(re, vec![1.0, 6.0, 11.0, 6.0]);
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
    }
}
