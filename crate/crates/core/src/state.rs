//! Unnormalized density operators with an accumulated log-norm.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{sigma_x, sigma_y, sigma_z, OperatorMatrix, ONE, ZERO};

/// Numerical tolerances shared by the simulation routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Algebraic identities (tracelessness, linearity).
    pub algebraic: f64,
    /// Hermiticity of states and Hamiltonians.
    pub hermiticity: f64,
    /// Relative anti-Hermitian part allowed for a no-knowledge channel.
    pub channel_hermiticity: f64,
    /// Unitarity of jump corrections.
    pub unitarity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-12,
            hermiticity: 1e-10,
            channel_hermiticity: 1e-8,
            unitarity: 1e-10,
        }
    }
}

/// Rescaling window for the trace of an unnormalized state.
pub const TRACE_WINDOW: (f64, f64) = (1e-3, 1e3);

/// Trace below which a state is considered collapsed.
pub const TRACE_FLOOR: f64 = 1e-300;

/// Unnormalized Hermitian density operator.
///
/// The physical state is `exp(log_norm) · matrix`; expectation values only
/// depend on `matrix / Tr[matrix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    matrix: OperatorMatrix,
    log_norm: f64,
}

impl QuantumState {
    /// Validates Hermiticity and a strictly positive real trace.
    pub fn new(matrix: OperatorMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default().hermiticity)
    }

    pub fn with_tolerance(matrix: OperatorMatrix, hermiticity: f64) -> Result<Self> {
        if !matrix.is_hermitian(hermiticity) {
            return Err(Error::State("density operator is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if !(tr.re > 0.0) || !tr.re.is_finite() {
            return Err(Error::State("trace must be real and strictly positive".into()));
        }
        let mut s = Self { matrix, log_norm: 0.0 };
        s.hermitize();
        Ok(s)
    }

    pub(crate) fn from_parts(matrix: OperatorMatrix, log_norm: f64) -> Self {
        Self { matrix, log_norm }
    }

    /// Pure state `|ψ><ψ|` (normalized).
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let mut s = Self::new(OperatorMatrix::projector(psi))?;
        s.normalize();
        s.log_norm = 0.0;
        Ok(s)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: OperatorMatrix::identity(dim).scale(1.0 / dim as f64),
            log_norm: 0.0,
        }
    }

    /// Qubit excited state `|e><e|`.
    pub fn excited() -> Self {
        Self {
            matrix: OperatorMatrix::projector(&[ONE, ZERO]),
            log_norm: 0.0,
        }
    }

    /// Qubit ground state `|g><g|`.
    pub fn ground() -> Self {
        Self {
            matrix: OperatorMatrix::projector(&[ZERO, ONE]),
            log_norm: 0.0,
        }
    }

    /// Qubit state `(I + xσ_x + yσ_y + zσ_z)/2`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Self {
        let m = (OperatorMatrix::identity(2) + sigma_x() * x + sigma_y() * y + sigma_z() * z) * 0.5;
        Self {
            matrix: m,
            log_norm: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `matrix / Tr[matrix]`.
    pub fn normalized_matrix(&self) -> OperatorMatrix {
        self.matrix.scale(1.0 / self.trace())
    }

    /// Copy with unit trace and the factor folded into `log_norm`.
    pub fn normalized(&self) -> Self {
        let mut s = self.clone();
        s.normalize();
        s
    }

    /// `Tr[ρ̄²]` of the normalized view.
    pub fn purity(&self) -> f64 {
        let tr = self.trace();
        self.matrix.trace_product(&self.matrix).re / (tr * tr)
    }

    /// Replaces the matrix by its Hermitian part.
    pub fn hermitize(&mut self) {
        let m = self.matrix.matrix();
        let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        self.matrix = OperatorMatrix::from_inner(h);
    }

    /// Rescales to unit trace, folding the factor into `log_norm`.
    pub fn normalize(&mut self) {
        let tr = self.trace();
        if tr > 0.0 && tr != 1.0 {
            self.matrix = self.matrix.scale(1.0 / tr);
            self.log_norm += libm::log(tr);
        }
    }

    /// Applies the rescaling policy: normalize once the trace leaves
    /// [`TRACE_WINDOW`]. Fails on non-finite entries or collapse.
    pub fn renormalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if !tr.is_finite()
            || self
                .matrix
                .matrix()
                .iter()
                .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Numerical("non-finite density operator".into()));
        }
        if tr < TRACE_FLOOR {
            return Err(Error::State("trace collapsed below 1e-300".into()));
        }
        if tr < TRACE_WINDOW.0 || tr > TRACE_WINDOW.1 {
            self.normalize();
        }
        Ok(())
    }

    pub(crate) fn set_matrix(&mut self, m: DMatrix<Complex64>) {
        self.matrix = OperatorMatrix::from_inner(m);
    }

    /// Bloch coordinates `(⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩)` of a qubit state.
    pub fn bloch(&self) -> Result<[f64; 3]> {
        self.matrix.check_dim(2)?;
        let tr = self.trace();
        Ok([
            sigma_x().trace_product(&self.matrix).re / tr,
            sigma_y().trace_product(&self.matrix).re / tr,
            sigma_z().trace_product(&self.matrix).re / tr,
        ])
    }
}

impl AsRef<OperatorMatrix> for QuantumState {
    fn as_ref(&self) -> &OperatorMatrix {
        &self.matrix
    }
}
