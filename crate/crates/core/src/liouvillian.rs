//! Column-stacked Liouvillian matrices and steady states.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generator;
use crate::model::MonitoredModel;
use crate::models::{dqc_chain, DqcChainParams};
use crate::noise::NoiseStream;
use crate::operator::{OperatorMatrix, SqrtLibm, I, ZERO};
use crate::state::QuantumState;
use crate::superop::{cluster_state, trace_fidelity};

/// Largest superoperator dimension `d²` accepted by [`vectorize`].
pub const MAX_LIOUVILLIAN_DIM: usize = 4096;

/// Up to this superoperator dimension the full spectrum is computed.
pub const DENSE_SPECTRUM_LIMIT: usize = 1024;

/// Superoperator `L̂` with `vec(L̂ρ) = L̂·vec(ρ)`, `vec` stacking columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvillianMatrix {
    system_dim: usize,
    matrix: DMatrix<Complex64>,
}

fn nonzeros(m: &DMatrix<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if z != ZERO {
                out.push((i, j, z));
            }
        }
    }
    out
}

/// `−i(I⊗H) + i(Hᵀ⊗I) + Σ_k [L̄_k⊗L_k − ½ I⊗L_k†L_k − ½ (L_k†L_k)ᵀ⊗I]`,
/// assembled entrywise from the nonzeros of each factor.
pub fn vectorize(h: &OperatorMatrix, ls: &[OperatorMatrix]) -> Result<LiouvillianMatrix> {
    let d = h.dim();
    for l in ls {
        l.check_dim(d)?;
    }
    let n = d * d;
    if n > MAX_LIOUVILLIAN_DIM {
        return Err(Error::Resource(format!(
            "superoperator dimension {n} exceeds {MAX_LIOUVILLIAN_DIM}"
        )));
    }
    // G = −iH − ½ΣL†L; L̂ = I⊗G + Ḡ⊗I + Σ L̄⊗L
    let mut g = h.matrix() * (-I);
    for l in ls {
        let l = l.matrix();
        g -= (l.adjoint() * l) * Complex64::new(0.5, 0.0);
    }
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    for (i, k, z) in nonzeros(&g) {
        for j in 0..d {
            m[(i + j * d, k + j * d)] += z;
            m[(j + i * d, j + k * d)] += z.conj();
        }
    }
    for l in ls {
        let nz = nonzeros(l.matrix());
        for &(j, l_col, a) in &nz {
            let a = a.conj();
            for &(i, k, b) in &nz {
                m[(i + j * d, k + l_col * d)] += a * b;
            }
        }
    }
    Ok(LiouvillianMatrix {
        system_dim: d,
        matrix: m,
    })
}

/// Liouvillian of a model's ensemble-averaged dynamics.
pub fn vectorize_model(model: &MonitoredModel) -> Result<LiouvillianMatrix> {
    let (h, ls) = model.unconditional_lindblad();
    vectorize(&h, &ls)
}

fn vec_of(rho: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_column_slice(rho.as_slice())
}

fn unvec(v: &DVector<Complex64>, d: usize) -> DMatrix<Complex64> {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

impl LiouvillianMatrix {
    /// Superoperator dimension `d²`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn apply(&self, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
        rho.check_dim(self.system_dim)?;
        let v = &self.matrix * vec_of(rho.matrix());
        Ok(OperatorMatrix::from_inner(unvec(&v, self.system_dim)))
    }

    /// Induced 1-norm.
    pub fn norm(&self) -> f64 {
        crate::operator::one_norm(&self.matrix)
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    /// `‖vec(I)†L̂‖₂`, zero for trace-preserving generators.
    pub fn trace_defect(&self) -> f64 {
        let d = self.system_dim;
        let mut acc = 0.0;
        for col in 0..self.dim() {
            let mut s = ZERO;
            for i in 0..d {
                s += self.matrix[(i + i * d, col)];
            }
            acc += s.norm_sqr();
        }
        acc.sqrt_libm()
    }

    /// Full spectrum, in real arithmetic when the matrix is real.
    ///
    /// nalgebra's Schur iteration stalls on the highly degenerate spectra
    /// of qubit-chain Liouvillians, so this goes through faer.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        let n = self.dim();
        let fail = |_| Error::Solver("eigenvalue iteration did not converge".into());
        if self.is_real() {
            let m = faer::Mat::<f64>::from_fn(n, n, |i, j| self.matrix[(i, j)].re);
            let ev = m.eigenvalues().map_err(fail)?;
            Ok(ev.iter().map(|z| Complex64::new(z.re, z.im)).collect())
        } else {
            let m = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| {
                let z = self.matrix[(i, j)];
                faer::c64::new(z.re, z.im)
            });
            let ev = m.eigenvalues().map_err(fail)?;
            Ok(ev.iter().map(|z| Complex64::new(z.re, z.im)).collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Eigenvalues with `|Re λ| < degeneracy_tol·‖L̂‖` count as stationary.
    pub degeneracy_tol: f64,
    /// Accepted `‖L̂ vec(ρ)‖ / ‖L̂‖`; above it the integration fallback runs.
    pub residual_tol: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            degeneracy_tol: 1e-9,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub rho_ss: QuantumState,
    /// `‖L̂ vec(ρ_ss)‖₂` for the trace-normalized `ρ_ss`.
    pub residual: f64,
    /// `residual / ‖L̂‖₁`.
    pub relative_residual: f64,
    /// `−max Re λ` over the non-stationary spectrum; `None` above
    /// [`DENSE_SPECTRUM_LIMIT`] or when every eigenvalue is stationary.
    pub spectral_gap: Option<f64>,
    pub degenerate: bool,
    /// The direct solve missed `residual_tol` and the state comes from long
    /// time integration.
    pub degraded: bool,
}

/// Factorization of `L̂ − σI` for a tiny positive shift `σ`, in real
/// arithmetic when possible.
enum Shifted {
    Real(faer::linalg::solvers::PartialPivLu<f64>),
    Complex(faer::linalg::solvers::PartialPivLu<faer::c64>),
}

impl Shifted {
    fn new(l: &LiouvillianMatrix, shift: f64) -> Self {
        let n = l.dim();
        let diag = |i: usize, j: usize| if i == j { shift } else { 0.0 };
        if l.is_real() {
            let m = faer::Mat::<f64>::from_fn(n, n, |i, j| l.matrix[(i, j)].re - diag(i, j));
            Shifted::Real(m.partial_piv_lu())
        } else {
            let m = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| {
                let z = l.matrix[(i, j)];
                faer::c64::new(z.re - diag(i, j), z.im)
            });
            Shifted::Complex(m.partial_piv_lu())
        }
    }

    fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        use faer::linalg::solvers::Solve;
        let n = b.len();
        match self {
            Shifted::Real(lu) => {
                let rhs = faer::Mat::<f64>::from_fn(n, 2, |i, j| if j == 0 { b[i].re } else { b[i].im });
                let x = lu.solve(rhs);
                DVector::from_fn(n, |i, _| Complex64::new(x[(i, 0)], x[(i, 1)]))
            }
            Shifted::Complex(lu) => {
                let rhs = faer::Mat::<faer::c64>::from_fn(n, 1, |i, _| faer::c64::new(b[i].re, b[i].im));
                let x = lu.solve(rhs);
                DVector::from_fn(n, |i, _| Complex64::new(x[(i, 0)].re, x[(i, 0)].im))
            }
        }
    }
}

fn inverse_iteration(l: &LiouvillianMatrix, lu: &Shifted, start: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let d = l.system_dim;
    let mut v = vec_of(start);
    for _ in 0..4 {
        let x = lu.solve(&v);
        let nrm = x.norm();
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::Solver("inverse iteration lost the null vector".into()));
        }
        v = x / Complex64::new(nrm, 0.0);
    }
    Ok(unvec(&v, d))
}

fn to_state(m: DMatrix<Complex64>) -> Result<QuantumState> {
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = h.trace();
    if tr.norm() == 0.0 || !tr.re.is_finite() {
        return Err(Error::Solver("null vector has zero trace".into()));
    }
    // fix the global phase so the trace is positive
    let scaled = h * (Complex64::new(1.0, 0.0) / tr);
    let scaled = (&scaled + scaled.adjoint()) * Complex64::new(0.5, 0.0);
    QuantumState::new(OperatorMatrix::from_inner(scaled)).map_err(|e| Error::Solver(format!("{e}")))
}

fn residual_of(l: &LiouvillianMatrix, rho: &QuantumState) -> f64 {
    (&l.matrix * vec_of(rho.matrix().matrix())).norm()
}

/// Deterministic full-rank start state, distinct from `I/d`.
fn probe_state(d: usize) -> DMatrix<Complex64> {
    let mut s = NoiseStream::new(0x5eed, 0, 1.0);
    let a = DMatrix::from_fn(d, d, |_, _| Complex64::new(s.wiener_increment(), s.wiener_increment()));
    &a * a.adjoint()
}

/// Null-space element of `L̂` by shifted inverse iteration, with spectral
/// diagnostics.
///
/// Degeneracy is read off the spectrum up to [`DENSE_SPECTRUM_LIMIT`]; above
/// it, two different start states are iterated and the stationary space is
/// declared degenerate when they reach different states.
pub fn steady_state(l: &LiouvillianMatrix, opts: &SteadyStateOptions) -> Result<SteadyStateResult> {
    let d = l.system_dim;
    let norm = l.norm();
    if norm == 0.0 {
        return Ok(SteadyStateResult {
            rho_ss: QuantumState::maximally_mixed(d),
            residual: 0.0,
            relative_residual: 0.0,
            spectral_gap: None,
            degenerate: d > 1,
            degraded: false,
        });
    }
    let lu = Shifted::new(l, 1e-13 * norm);
    let identity = DMatrix::<Complex64>::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0);
    let mut rho = to_state(inverse_iteration(l, &lu, &identity)?)?;

    let (spectral_gap, degenerate) = if l.dim() <= DENSE_SPECTRUM_LIMIT {
        let ev = l.eigenvalues()?;
        let cut = opts.degeneracy_tol * norm;
        let stationary = ev.iter().filter(|z| z.re.abs() < cut).count();
        let gap = ev
            .iter()
            .filter(|z| z.re.abs() >= cut)
            .map(|z| -z.re)
            .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));
        (gap, stationary > 1)
    } else {
        let other = to_state(inverse_iteration(l, &lu, &probe_state(d))?)?;
        let diff = (rho.matrix() - other.matrix()).frobenius_norm();
        (None, diff > 1e-6)
    };

    let mut residual = residual_of(l, &rho);
    let mut degraded = false;
    if residual / norm > opts.residual_tol {
        let horizon = 50.0 / spectral_gap.unwrap_or(1e-3 * norm);
        rho = integrate_liouvillian(l, &rho, horizon)?;
        residual = residual_of(l, &rho);
        degraded = true;
    }
    Ok(SteadyStateResult {
        rho_ss: rho,
        residual,
        relative_residual: residual / norm,
        spectral_gap,
        degenerate,
        degraded,
    })
}

/// `exp(tL̂)ρ` by Taylor steps of norm at most one half.
fn integrate_liouvillian(l: &LiouvillianMatrix, rho: &QuantumState, t: f64) -> Result<QuantumState> {
    let norm = l.norm();
    let steps = libm::ceil(t * norm / 0.5);
    if steps > 1e6 {
        return Err(Error::Solver(format!("fallback integration would need {steps} steps")));
    }
    let steps = steps.max(1.0) as usize;
    let h = Complex64::new(t / steps as f64, 0.0);
    let mut v = vec_of(rho.matrix().matrix());
    for _ in 0..steps {
        let mut term = v.clone();
        let mut sum = v.clone();
        for k in 1..=40 {
            term = (&l.matrix * &term) * (h / Complex64::new(k as f64, 0.0));
            sum += &term;
            if term.norm() <= 1e-18 * sum.norm() {
                break;
            }
        }
        v = sum;
    }
    to_state(unvec(&v, l.system_dim))
}

/// Solution of `∂ρ = −i[H,ρ] + Σ D[L]ρ` at time `t`.
pub fn integrate_master_equation(
    h: &OperatorMatrix,
    ls: &[OperatorMatrix],
    rho0: &QuantumState,
    t: f64,
) -> Result<QuantumState> {
    rho0.matrix().check_dim(h.dim())?;
    let mut g = h.matrix() * (-I);
    let mut jumps = Vec::with_capacity(ls.len());
    for l in ls {
        l.check_dim(h.dim())?;
        let lm = l.matrix();
        g -= (lm.adjoint() * lm) * Complex64::new(0.5, 0.0);
        jumps.push(lm.clone());
    }
    let m = generator::propagate(&g, &jumps, rho0.matrix().matrix(), t);
    let mut s = QuantumState::new(OperatorMatrix::from_inner(m))?;
    s.hermitize();
    Ok(s)
}

/// One row of a cluster-state fidelity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityRow {
    pub n_qubits: usize,
    /// Detection efficiency of the feedback loop; `None` without feedback.
    pub eta: Option<f64>,
    pub fidelity: f64,
    pub relative_residual: f64,
    pub spectral_gap: Option<f64>,
    pub degenerate: bool,
    pub degraded: bool,
}

/// Steady-state fidelity `sqrt(Tr[ρ_ss ρ_cluster])` of the dissipative chain
/// (`α = 1`, `γ = gamma_over_alpha`) for every chain length in `sizes`,
/// without feedback and then with feedback at each efficiency in `etas`.
pub fn fidelity_scan(sizes: &[usize], gamma_over_alpha: f64, etas: &[f64]) -> Result<Vec<FidelityRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        let mut configs: Vec<Option<f64>> = alloc::vec![None];
        configs.extend(etas.iter().map(|&e| Some(e)));
        for eta in configs {
            rows.push(fidelity_point(
                n,
                gamma_over_alpha,
                eta,
                &SteadyStateOptions::default(),
            )?);
        }
    }
    Ok(rows)
}

/// Single entry of [`fidelity_scan`].
pub fn fidelity_point(
    n: usize,
    gamma_over_alpha: f64,
    eta: Option<f64>,
    opts: &SteadyStateOptions,
) -> Result<FidelityRow> {
    let params = DqcChainParams {
        n_qubits: n,
        alpha: 1.0,
        gamma: gamma_over_alpha,
        eta: eta.unwrap_or(1.0),
    };
    let model = dqc_chain(&params, eta.is_some())?;
    let ss = steady_state(&vectorize_model(&model)?, opts)?;
    let fidelity = trace_fidelity(&ss.rho_ss, &cluster_state(n)?)?;
    Ok(FidelityRow {
        n_qubits: n,
        eta,
        fidelity,
        relative_residual: ss.relative_residual,
        spectral_gap: ss.spectral_gap,
        degenerate: ss.degenerate,
        degraded: ss.degraded,
    })
}
