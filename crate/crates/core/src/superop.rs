//! Lindblad superoperator actions, expectations, distances and the
//! linear-cluster target state.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{pauli, OperatorMatrix, Pauli, SqrtLibm, I};
use crate::state::{QuantumState, Tolerances};

fn check_pair(z: &OperatorMatrix, rho: &OperatorMatrix) -> Result<()> {
    rho.check_dim(z.dim())
}

/// `D[Z]ρ = ZρZ† − (Z†Zρ + ρZ†Z)/2`.
pub fn dissipator<R: AsRef<OperatorMatrix> + ?Sized>(z: &OperatorMatrix, rho: &R) -> Result<OperatorMatrix> {
    let rho = rho.as_ref();
    check_pair(z, rho)?;
    let (z, r) = (z.matrix(), rho.matrix());
    let zd = z.adjoint();
    let zdz = &zd * z;
    let out = z * r * &zd - (&zdz * r + r * &zdz) * Complex64::new(0.5, 0.0);
    Ok(OperatorMatrix::from_inner(out))
}

/// `A[Z]ρ = Zρ + ρZ†`.
pub fn innovation_action<R: AsRef<OperatorMatrix> + ?Sized>(z: &OperatorMatrix, rho: &R) -> Result<OperatorMatrix> {
    let rho = rho.as_ref();
    check_pair(z, rho)?;
    let (z, r) = (z.matrix(), rho.matrix());
    Ok(OperatorMatrix::from_inner(z * r + r * z.adjoint()))
}

/// `A²[Z]ρ = Z(A[Z]ρ) + (A[Z]ρ)Z†`.
pub fn innovation_squared<R: AsRef<OperatorMatrix> + ?Sized>(z: &OperatorMatrix, rho: &R) -> Result<OperatorMatrix> {
    let once = innovation_action(z, rho)?;
    innovation_action(z, &once)
}

/// Right-hand side of the unconditional master equation,
/// `−i[H,ρ] + Σ_k D[L_k]ρ`.
pub fn lindblad_rhs<R: AsRef<OperatorMatrix> + ?Sized>(
    h: &OperatorMatrix,
    ls: &[OperatorMatrix],
    rho: &R,
) -> Result<OperatorMatrix> {
    let rho = rho.as_ref();
    check_pair(h, rho)?;
    if !h.is_hermitian(Tolerances::default().hermiticity) {
        return Err(Error::Model("Hamiltonian is not Hermitian".into()));
    }
    let mut out = h.commutator(rho) * (-I);
    for l in ls {
        out += &dissipator(l, rho)?;
    }
    Ok(out)
}

/// Normalized expectation `Tr[Xρ]/Tr[ρ]`.
pub fn expectation<R: AsRef<OperatorMatrix> + ?Sized>(x: &OperatorMatrix, rho: &R) -> Result<Complex64> {
    let rho = rho.as_ref();
    check_pair(x, rho)?;
    let tr = rho.trace().re;
    if !(tr > 0.0) {
        return Err(Error::State("expectation requires a positive trace".into()));
    }
    Ok(x.trace_product(rho) / tr)
}

/// `sqrt(Tr[(ā − b̄)²])` between the normalized views of two states.
pub fn frobenius_distance(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    b.matrix().check_dim(a.dim())?;
    let diff = a.normalized_matrix() - b.normalized_matrix();
    Ok(diff.frobenius_norm())
}

/// Trace-overlap fidelity `sqrt(Tr[ρ̄ σ̄])` between normalized views.
///
/// This is the overlap measure used for the dissipative cluster-state
/// benchmark, not the Uhlmann fidelity; for a pure target the two agree up
/// to the square root convention.
pub fn trace_fidelity(rho: &QuantumState, target: &QuantumState) -> Result<f64> {
    target.matrix().check_dim(rho.dim())?;
    let overlap = rho.matrix().trace_product(target.matrix()).re / (rho.trace() * target.trace());
    if overlap < -1e-10 {
        return Err(Error::Numerical("negative trace overlap".into()));
    }
    Ok(overlap.max(0.0).sqrt_libm())
}

/// Cluster-state stabilizer `K_i = σ_z^{i−1} σ_x^i σ_z^{i+1}` on an open
/// chain (sites are 0-based; missing neighbours are dropped).
pub fn cluster_stabilizer(site: usize, n_sites: usize) -> Result<OperatorMatrix> {
    let mut k = pauli(Pauli::X, site, n_sites)?;
    if site > 0 {
        k = k * pauli(Pauli::Z, site - 1, n_sites)?;
    }
    if site + 1 < n_sites {
        k = k * pauli(Pauli::Z, site + 1, n_sites)?;
    }
    Ok(k)
}

/// Pure linear cluster state `Π_i (I + K_i)/2`.
pub fn cluster_state(n_sites: usize) -> Result<QuantumState> {
    if n_sites == 0 {
        return Err(Error::Model("cluster state needs at least one site".into()));
    }
    if n_sites > 12 {
        return Err(Error::Resource("cluster state limited to 12 sites".into()));
    }
    let dim = 1usize << n_sites;
    let id = OperatorMatrix::identity(dim);
    let mut proj = id.clone();
    let factors: Vec<OperatorMatrix> = (0..n_sites)
        .map(|i| cluster_stabilizer(i, n_sites).map(|k| (&id + &k) * 0.5))
        .collect::<Result<_>>()?;
    for f in &factors {
        proj = proj * f;
    }
    QuantumState::new(proj)
}
