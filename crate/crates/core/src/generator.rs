//! Linear maps of the form `ρ ↦ Gρ + ρG† + Σ_j J_j ρ J_j†` and their
//! exponentials.
//!
//! Every master-equation or record-driven SME update in this crate has this
//! shape once the measurement signal of a step is fixed, so one step of the
//! exponential scheme is `exp(dt·𝒦)ρ` for such a generator `𝒦`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::operator::{expm, one_norm};

#[derive(Debug, Clone)]
pub struct LinearGenerator {
    /// Non-Hermitian "effective Hamiltonian" part `G`.
    pub g: DMatrix<Complex64>,
    /// Sandwich terms `J_j`.
    pub jumps: Vec<DMatrix<Complex64>>,
}

impl LinearGenerator {
    pub fn new(g: DMatrix<Complex64>, jumps: Vec<DMatrix<Complex64>>) -> Self {
        Self { g, jumps }
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        apply(&self.g, &self.jumps, rho)
    }

    pub fn propagate(&self, rho: &DMatrix<Complex64>, dt: f64) -> DMatrix<Complex64> {
        propagate(&self.g, &self.jumps, rho, dt)
    }
}

/// `Gρ + ρG† + Σ_j J_j ρ J_j†`.
pub fn apply(g: &DMatrix<Complex64>, jumps: &[DMatrix<Complex64>], rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = g * rho;
    out += rho * g.adjoint();
    for j in jumps {
        out += j * rho * j.adjoint();
    }
    out
}

/// `exp(dt·𝒦)ρ` for the generator `𝒦` built from `g` and `jumps`.
///
/// Without sandwich terms this is the conjugation `MρM†` with
/// `M = exp(G dt)`, which keeps pure states pure to rounding. Otherwise
/// the superoperator series is summed directly, substepping so that each
/// substep has norm below one half.
pub fn propagate(
    g: &DMatrix<Complex64>,
    jumps: &[DMatrix<Complex64>],
    rho: &DMatrix<Complex64>,
    dt: f64,
) -> DMatrix<Complex64> {
    if jumps.is_empty() {
        let m = expm(&(g * Complex64::new(dt, 0.0)));
        return &m * rho * m.adjoint();
    }
    let bound = dt
        * (2.0 * one_norm(g)
            + jumps
                .iter()
                .map(|j| {
                    let n = one_norm(j);
                    n * n
                })
                .sum::<f64>());
    let substeps = if bound > 0.5 {
        libm::ceil(bound / 0.5) as usize
    } else {
        1
    };
    let h = dt / substeps as f64;
    let mut state = rho.clone();
    for _ in 0..substeps {
        let mut sum = state.clone();
        let mut term = state;
        for k in 1..=40 {
            term = apply(g, jumps, &term) * Complex64::new(h / k as f64, 0.0);
            sum += &term;
            if one_norm(&term) <= 1e-18 * one_norm(&sum) {
                break;
            }
        }
        state = sum;
    }
    state
}
