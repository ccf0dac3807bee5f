//! Dense complex operators on a finite Hilbert space.
//!
//! Basis convention used throughout the crate: the excited state is
//! `|e> = (1, 0)^T`, the ground state `|g> = (0, 1)^T`, so that
//! `σ_z|e> = +|e>`, `σ_- = |g><e|` and `σ_+ = |e><g|`. In tensor products
//! site 0 is the leftmost (most significant) factor.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square complex matrix representing a Hamiltonian, coupling operator,
/// observable or unnormalized density operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(DMatrix<Complex64>);

impl OperatorMatrix {
    /// Wraps a square matrix.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Model("operator dimension must be positive".into()));
        }
        Ok(Self(m))
    }

    /// Builds a `dim x dim` operator from row-major entries.
    pub fn from_rows(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Builds an operator with purely real row-major entries.
    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_rows(dim, &c)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// Projector `|ψ><ψ|` onto the given (not necessarily normalized) vector.
    pub fn projector(psi: &[Complex64]) -> Self {
        let n = psi.len();
        Self(DMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj()))
    }

    pub(crate) fn from_inner(m: DMatrix<Complex64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt_libm()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * Complex64::new(factor, 0.0))
    }

    pub fn scale_complex(&self, factor: Complex64) -> Self {
        Self(&self.0 * factor)
    }

    /// `‖A − A†‖_F / ‖A‖_F`, zero for the zero operator.
    pub fn hermiticity_defect(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return 0.0;
        }
        Self(&self.0 - self.0.adjoint()).frobenius_norm() / norm
    }

    /// Hermitian within `tol`, measured as `‖A − A†‖_F ≤ tol · max(1, ‖A‖_F)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let diff = Self(&self.0 - self.0.adjoint()).frobenius_norm();
        diff <= tol * self.frobenius_norm().max(1.0)
    }

    /// Deviation `max(‖U†U − I‖_F, ‖UU† − I‖_F)`.
    pub fn unitarity_defect(&self) -> f64 {
        let id = DMatrix::<Complex64>::identity(self.dim(), self.dim());
        let left = Self(self.0.adjoint() * &self.0 - &id).frobenius_norm();
        let right = Self(&self.0 * self.0.adjoint() - id).frobenius_norm();
        left.max(right)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// `Tr[A B]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.0[(i, k)] * other.0[(k, i)];
            }
        }
        acc
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: self.dim(),
            });
        }
        Ok(())
    }

    /// Largest eigenvalue magnitude of the Hermitian part.
    pub fn hermitian_spectral_radius(&self) -> f64 {
        let h = self.hermitian_part();
        h.0.symmetric_eigenvalues().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    pub fn expm(&self) -> Self {
        Self(expm(&self.0))
    }
}

impl AsRef<OperatorMatrix> for OperatorMatrix {
    fn as_ref(&self) -> &OperatorMatrix {
        self
    }
}

pub(crate) trait SqrtLibm {
    fn sqrt_libm(self) -> Self;
}

impl SqrtLibm for f64 {
    #[inline]
    fn sqrt_libm(self) -> f64 {
        libm::sqrt(self)
    }
}

/// Induced 1-norm (max column sum).
pub(crate) fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = libm::ceil(libm::log2(norm / 0.5)) as u32;
    }
    let scaled = a * Complex64::new(libm::ldexp(1.0, -(squarings as i32)), 0.0);
    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=30 {
        term = (&term * &scaled) * Complex64::new(1.0 / k as f64, 0.0);
        result += &term;
        if one_norm(&term) <= 1e-18 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&OperatorMatrix> for &OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: &OperatorMatrix) -> OperatorMatrix {
                OperatorMatrix(&self.0 $op &rhs.0)
            }
        }
        impl $tr<OperatorMatrix> for OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: OperatorMatrix) -> OperatorMatrix {
                OperatorMatrix(self.0 $op rhs.0)
            }
        }
        impl $tr<&OperatorMatrix> for OperatorMatrix {
            type Output = OperatorMatrix;
            fn $method(self, rhs: &OperatorMatrix) -> OperatorMatrix {
                OperatorMatrix(self.0 $op &rhs.0)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Mul<Complex64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: Complex64) -> OperatorMatrix {
        OperatorMatrix(&self.0 * rhs)
    }
}

impl Mul<Complex64> for OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: Complex64) -> OperatorMatrix {
        OperatorMatrix(self.0 * rhs)
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: f64) -> OperatorMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: f64) -> OperatorMatrix {
        OperatorMatrix(self.0 * Complex64::new(rhs, 0.0))
    }
}

impl Neg for OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        OperatorMatrix(-self.0)
    }
}

impl AddAssign<&OperatorMatrix> for OperatorMatrix {
    fn add_assign(&mut self, rhs: &OperatorMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&OperatorMatrix> for OperatorMatrix {
    fn sub_assign(&mut self, rhs: &OperatorMatrix) {
        self.0 -= &rhs.0;
    }
}

/// Single-qubit operator selector for [`pauli`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    /// Raising operator `σ_+ = |e><g|`.
    Plus,
    /// Lowering operator `σ_- = |g><e|`.
    Minus,
}

impl Pauli {
    /// The 2x2 matrix in the `(|e>, |g>)` basis.
    pub fn matrix(self) -> OperatorMatrix {
        let (a, b, c, d) = match self {
            Pauli::X => (ZERO, ONE, ONE, ZERO),
            Pauli::Y => (ZERO, -I, I, ZERO),
            Pauli::Z => (ONE, ZERO, ZERO, -ONE),
            Pauli::Plus => (ZERO, ONE, ZERO, ZERO),
            Pauli::Minus => (ZERO, ZERO, ONE, ZERO),
        };
        OperatorMatrix(DMatrix::from_row_slice(2, 2, &[a, b, c, d]))
    }
}

pub fn sigma_x() -> OperatorMatrix {
    Pauli::X.matrix()
}

pub fn sigma_y() -> OperatorMatrix {
    Pauli::Y.matrix()
}

pub fn sigma_z() -> OperatorMatrix {
    Pauli::Z.matrix()
}

pub fn sigma_plus() -> OperatorMatrix {
    Pauli::Plus.matrix()
}

pub fn sigma_minus() -> OperatorMatrix {
    Pauli::Minus.matrix()
}

/// `I ⊗ … ⊗ σ ⊗ … ⊗ I` with `σ` on `site` of an `n_sites` qubit register.
pub fn pauli(which: Pauli, site: usize, n_sites: usize) -> Result<OperatorMatrix> {
    if site >= n_sites {
        return Err(Error::Index {
            index: site,
            len: n_sites,
        });
    }
    let left = OperatorMatrix::identity(1 << site);
    let right = OperatorMatrix::identity(1 << (n_sites - site - 1));
    Ok(left.kron(&which.matrix()).kron(&right))
}

/// `exp(−iHt)` for a time-independent Hamiltonian.
pub fn unitary_propagator(h: &OperatorMatrix, t: f64) -> OperatorMatrix {
    (h * Complex64::new(0.0, -t)).expm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &OperatorMatrix, b: &OperatorMatrix, tol: f64) -> bool {
        (a - b).frobenius_norm() <= tol
    }

    #[test]
    fn pauli_single_site() {
        assert_eq!(pauli(Pauli::X, 0, 1).unwrap(), sigma_x());
    }

    #[test]
    fn pauli_second_of_two() {
        let expected = OperatorMatrix::identity(2).kron(&sigma_z());
        assert_eq!(pauli(Pauli::Z, 1, 2).unwrap(), expected);
    }

    #[test]
    fn raising_times_lowering_projects_on_excited() {
        for n in 1..4 {
            for i in 0..n {
                let p = pauli(Pauli::Plus, i, n).unwrap() * pauli(Pauli::Minus, i, n).unwrap();
                let proj = (OperatorMatrix::identity(1 << n) + pauli(Pauli::Z, i, n).unwrap()) * 0.5;
                assert!(close(&p, &proj, 0.0));
            }
        }
    }

    #[test]
    fn pauli_site_out_of_range() {
        assert_eq!(pauli(Pauli::X, 3, 3), Err(Error::Index { index: 3, len: 3 }));
    }

    #[test]
    fn convention_sigma_z_on_excited() {
        let e = OperatorMatrix::projector(&[ONE, ZERO]);
        assert_eq!((sigma_z() * &e).get(0, 0), ONE);
        // σ_- |e> = |g>
        let lowered = sigma_minus() * e * sigma_plus();
        assert_eq!(lowered.get(1, 1), ONE);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.731;
        let u = unitary_propagator(&sigma_x(), t);
        let expected = OperatorMatrix::identity(2).scale(libm::cos(t))
            - sigma_x().scale_complex(Complex64::new(0.0, libm::sin(t)));
        assert!(close(&u, &expected, 1e-14));
        assert!(u.is_unitary(1e-14));
    }

    #[test]
    fn expm_handles_large_norm() {
        let t = 40.0;
        let u = unitary_propagator(&sigma_z(), t);
        assert!((u.get(0, 0) - Complex64::new(libm::cos(t), -libm::sin(t))).norm() < 1e-12);
    }

    #[test]
    fn hermiticity_and_unitarity_predicates() {
        assert!(sigma_y().is_hermitian(0.0));
        assert!(!sigma_minus().is_hermitian(1e-3));
        assert!(sigma_y().is_unitary(1e-15));
        assert!(!sigma_minus().is_unitary(1e-3));
        assert_eq!(OperatorMatrix::zeros(3).hermiticity_defect(), 0.0);
    }

    #[test]
    fn rejects_non_square() {
        assert!(OperatorMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(OperatorMatrix::from_rows(2, &[ONE; 3]).is_err());
    }
}
