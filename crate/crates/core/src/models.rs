//! Canonical models: the driven dephasing qubit with its Bloch-vector
//! equations, the two-reservoir general-coupling system, and the dissipative
//! cluster-state chain.

use alloc::format;
use alloc::vec::Vec;

use core::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::feedback::{beamsplitter_network, no_knowledge_feedback};
use crate::model::{Channel, MonitoredModel};
use crate::operator::{pauli, sigma_x, sigma_z, OperatorMatrix, Pauli, SqrtLibm};
use crate::state::QuantumState;
use crate::superop::cluster_stabilizer;

/// Largest chain handled by [`dqc_chain`].
pub const MAX_CHAIN: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingQubitParams {
    pub omega: f64,
    pub gamma: f64,
    pub theta: f64,
    pub eta: f64,
}

impl DephasingQubitParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Model(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !self.omega.is_finite() || !self.theta.is_finite() {
            return Err(Error::Model("omega and theta must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Model(format!("eta = {} outside [0, 1]", self.eta)));
        }
        Ok(())
    }
}

/// `H = Ωσ_x` with one homodyne channel `L = √γ σ_z` at `(θ, η)`.
pub fn dephasing_qubit(p: &DephasingQubitParams) -> Result<MonitoredModel> {
    p.validate()?;
    MonitoredModel::new(
        sigma_x().scale(p.omega),
        alloc::vec![Channel::homodyne(sigma_z().scale(p.gamma.sqrt_libm()), p.theta, p.eta)],
    )
}

impl MonitoredModel {
    /// Attaches the no-knowledge feedback law built from this model's
    /// channels.
    pub fn with_no_knowledge_feedback(self) -> Result<Self> {
        let law = no_knowledge_feedback(self.channels())?;
        self.with_feedback(law)
    }
}

/// True state `[I + (σ_x + σ_y)/√2]/2` of the dephasing-qubit experiments.
pub fn reference_state() -> QuantumState {
    QuantumState::from_bloch(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0)
}

/// Mismatched filter estimate `[I + (σ_x − σ_y)/√2]/2`.
pub fn mismatched_estimate() -> QuantumState {
    QuantumState::from_bloch(FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn of(rho: &QuantumState) -> Result<Self> {
        let [x, y, z] = rho.bloch()?;
        Ok(Self { x, y, z })
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn to_state(&self) -> QuantumState {
        QuantumState::from_bloch(self.x, self.y, self.z)
    }

    fn axpy(&self, a: f64, d: &BlochState) -> BlochState {
        BlochState::new(self.x + a * d.x, self.y + a * d.y, self.z + a * d.z)
    }

    pub fn max_abs_diff(&self, other: &BlochState) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

/// Time derivative of the normalized Bloch vector under the dephasing-qubit
/// SME with the signal held at `y` (Stratonovich form).
///
/// The drive enters as `2Ω` because `H = Ωσ_x` rotates the Bloch vector at
/// angular frequency `2Ω`. For `η < 1` the unmeasured part of the dephasing
/// adds the damping `−2(1−η)γ` on `x` and `y`.
pub fn bloch_rhs(b: &BlochState, p: &DephasingQubitParams, y: f64) -> BlochState {
    let (s, c) = (libm::sin(p.theta), libm::cos(p.theta));
    let k = 2.0 * (p.eta * p.gamma).sqrt_libm() * y;
    let damp = 2.0 * (1.0 - p.eta) * p.gamma;
    BlochState {
        x: k * (b.y * s - b.x * b.z * c) - damp * b.x,
        y: -2.0 * p.omega * b.z - k * (b.x * s + b.y * b.z * c) - damp * b.y,
        z: 2.0 * p.omega * b.y + k * (1.0 - b.z * b.z) * c,
    }
}

/// Integrates [`bloch_rhs`] with classical RK4, holding the signal of step
/// `n` constant over that step, which is split into `substeps` RK4 steps.
/// Returns `signals.len() + 1` points, one per signal step.
pub fn integrate_bloch(
    b0: BlochState,
    p: &DephasingQubitParams,
    signals: &[f64],
    dt: f64,
    substeps: usize,
) -> Vec<BlochState> {
    let m = substeps.max(1);
    let h = dt / m as f64;
    let mut out = Vec::with_capacity(signals.len() + 1);
    let mut b = b0;
    out.push(b);
    for &y in signals {
        for _ in 0..m {
            let k1 = bloch_rhs(&b, p, y);
            let k2 = bloch_rhs(&b.axpy(0.5 * h, &k1), p, y);
            let k3 = bloch_rhs(&b.axpy(0.5 * h, &k2), p, y);
            let k4 = bloch_rhs(&b.axpy(h, &k3), p, y);
            b = BlochState {
                x: b.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
                y: b.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
                z: b.z + h / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z),
            };
        }
        out.push(b);
    }
    out
}

/// Coupling `L` and its reverse reservoir `L†`, both monitored through the
/// beamsplitter pair `(L_+, L_−)` at `θ = π/2` and efficiency `eta`.
pub fn general_l_model(h: &OperatorMatrix, l: &OperatorMatrix, eta: f64) -> Result<MonitoredModel> {
    l.check_dim(h.dim())?;
    MonitoredModel::new(h.clone(), beamsplitter_network(l, eta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqcChainParams {
    pub n_qubits: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl DqcChainParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 {
            return Err(Error::Model(format!(
                "chain needs at least 2 qubits, got {}",
                self.n_qubits
            )));
        }
        if self.n_qubits > MAX_CHAIN {
            return Err(Error::Resource(format!(
                "chain of {} qubits exceeds the limit of {MAX_CHAIN}",
                self.n_qubits
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Model(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Model(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Model(format!("eta = {} outside [0, 1]", self.eta)));
        }
        Ok(())
    }
}

/// `Q_i = √α (I + K_i) σ_z^i / 2` (0-based site, open boundaries).
pub fn quasi_local_dissipator(site: usize, n_sites: usize, alpha: f64) -> Result<OperatorMatrix> {
    let k = cluster_stabilizer(site, n_sites)?;
    let id = OperatorMatrix::identity(k.dim());
    Ok(((id + k) * pauli(Pauli::Z, site, n_sites)?).scale(0.5 * alpha.sqrt_libm()))
}

/// Dissipative cluster-state chain.
///
/// Channels `0..N` are the unmonitored `Q_i`. Without feedback, channels
/// `N..2N` are unmonitored losses `√γ σ_−^i`. With feedback, each site
/// instead carries the beamsplitter pair of `√γ σ_−^i` (channels `N+2i`,
/// `N+2i+1`) at efficiency `eta` with no-knowledge feedback attached, whose
/// averaged dynamics is `(1−η)γ(D[σ_−^i] + D[σ_+^i])`.
pub fn dqc_chain(p: &DqcChainParams, with_feedback: bool) -> Result<MonitoredModel> {
    p.validate()?;
    let n = p.n_qubits;
    let dim = 1usize << n;
    let mut channels = Vec::with_capacity(3 * n);
    for i in 0..n {
        channels.push(Channel::unmonitored(quasi_local_dissipator(i, n, p.alpha)?));
    }
    let sg = p.gamma.sqrt_libm();
    for i in 0..n {
        let loss = pauli(Pauli::Minus, i, n)?.scale(sg);
        if with_feedback {
            channels.extend(beamsplitter_network(&loss, p.eta));
        } else {
            channels.push(Channel::unmonitored(loss));
        }
    }
    let model = MonitoredModel::new(OperatorMatrix::zeros(dim), channels)?;
    if with_feedback {
        model.with_no_knowledge_feedback()
    } else {
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::sigma_minus;
    use crate::superop::{cluster_state, dissipator, lindblad_rhs};
    use crate::testutil::{random_state, TestRng};
    use core::f64::consts::{FRAC_PI_2, PI};

    fn unit_params(theta: f64) -> DephasingQubitParams {
        DephasingQubitParams {
            omega: 1.0,
            gamma: 1.0,
            theta,
            eta: 1.0,
        }
    }

    #[test]
    fn dephasing_qubit_layout() {
        let m = dephasing_qubit(&unit_params(4.0 * PI / 5.0)).unwrap();
        assert_eq!(m.channels().len(), 1);
        assert_eq!(m.hamiltonian(), &sigma_x());
        let fb = dephasing_qubit(&unit_params(FRAC_PI_2))
            .unwrap()
            .with_no_knowledge_feedback()
            .unwrap();
        assert!((fb.feedback_gain(0).unwrap() - sigma_z()).max_abs() < 1e-15);
        assert!(dephasing_qubit(&DephasingQubitParams {
            gamma: 0.0,
            ..unit_params(0.0)
        })
        .is_err());
    }

    #[test]
    fn reference_states_differ_by_unit_distance() {
        let d = crate::superop::frobenius_distance(&reference_state(), &mismatched_estimate()).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn maximally_mixed_is_fixed() {
        let d = bloch_rhs(&BlochState::new(0.0, 0.0, 0.0), &unit_params(FRAC_PI_2), 3.7);
        // cos(π/2) is only zero to rounding
        assert!(d.x.abs() < 1e-14 && d.y.abs() < 1e-14 && d.z.abs() < 1e-14);
    }

    #[test]
    fn no_knowledge_angle_preserves_length() {
        let p = unit_params(FRAC_PI_2);
        for (b, y) in [((0.3, -0.4, 0.5), 2.0), ((0.9, 0.1, -0.2), -11.0)] {
            let b = BlochState::new(b.0, b.1, b.2);
            let d = bloch_rhs(&b, &p, y);
            assert!((b.x * d.x + b.y * d.y + b.z * d.z).abs() < 1e-14);
        }
    }

    /// Differentiating the normalized SME generator reproduces the Bloch
    /// right-hand side.
    #[test]
    fn bloch_rhs_matches_normalized_sme() {
        let mut rng = TestRng::new(4);
        for theta in [0.0, 0.7, FRAC_PI_2, 4.0 * PI / 5.0] {
            for eta in [1.0, 0.4] {
                let p = DephasingQubitParams {
                    omega: 0.8,
                    gamma: 1.3,
                    theta,
                    eta,
                };
                let model = dephasing_qubit(&p).unwrap();
                let rho = random_state(&mut rng, 2);
                let y = 1.7;
                let k = crate::unravel::sme_rhs(&model, &rho).unwrap().total(&[y]).unwrap();
                // d/dt of the normalized state: K − Tr[K] ρ̄
                let rbar = rho.normalized_matrix();
                let dn = &k - &rbar.scale(k.trace().re);
                let got = [
                    sigma_x().trace_product(&dn).re,
                    crate::operator::sigma_y().trace_product(&dn).re,
                    sigma_z().trace_product(&dn).re,
                ];
                let d = bloch_rhs(&BlochState::of(&rho).unwrap(), &p, y);
                assert!((got[0] - d.x).abs() < 1e-12, "{theta} {eta}");
                assert!((got[1] - d.y).abs() < 1e-12, "{theta} {eta}");
                assert!((got[2] - d.z).abs() < 1e-12, "{theta} {eta}");
            }
        }
    }

    #[test]
    fn general_l_unmonitored_limit() {
        let l = sigma_minus().scale(0.6);
        let h = sigma_x();
        let m = general_l_model(&h, &l, 0.0).unwrap();
        let rho = QuantumState::from_bloch(0.1, -0.3, 0.5);
        let rhs = crate::unravel::sme_rhs(&m, &rho).unwrap().total(&[5.0, -2.0]).unwrap();
        let want = lindblad_rhs(&h, &[l.clone(), l.adjoint()], &rho).unwrap();
        assert!((rhs - want).frobenius_norm() < 1e-14);
    }

    #[test]
    fn general_l_hermitian_coupling_has_null_partner() {
        let m = general_l_model(&sigma_x(), &sigma_z(), 1.0).unwrap();
        assert_eq!(m.channels()[1].l.max_abs(), 0.0);
    }

    #[test]
    fn chain_size_guards() {
        let p = DqcChainParams {
            n_qubits: 1,
            alpha: 1.0,
            gamma: 1.0,
            eta: 1.0,
        };
        assert!(matches!(dqc_chain(&p, false), Err(Error::Model(_))));
        assert!(matches!(
            dqc_chain(&DqcChainParams { n_qubits: 8, ..p }, false),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn interior_dissipator_square() {
        let n = 4;
        for i in 1..n - 1 {
            let q = quasi_local_dissipator(i, n, 2.5).unwrap();
            let k = cluster_stabilizer(i, n).unwrap();
            let want = (OperatorMatrix::identity(16) - k).scale(2.5 / 2.0);
            assert!((q.adjoint() * &q - want).max_abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_dissipators_of_two_site_chain() {
        let a: f64 = 3.0;
        let (x1, z1) = (pauli(Pauli::X, 0, 2).unwrap(), pauli(Pauli::Z, 0, 2).unwrap());
        let (x2, z2) = (pauli(Pauli::X, 1, 2).unwrap(), pauli(Pauli::Z, 1, 2).unwrap());
        let id = OperatorMatrix::identity(4);
        let q1 = ((&id + &(&x1 * &z2)) * &z1).scale(a.sqrt() / 2.0);
        let q2 = ((&id + &(&z1 * &x2)) * &z2).scale(a.sqrt() / 2.0);
        assert!((quasi_local_dissipator(0, 2, a).unwrap() - q1).max_abs() < 1e-15);
        assert!((quasi_local_dissipator(1, 2, a).unwrap() - q2).max_abs() < 1e-15);
    }

    #[test]
    fn cluster_state_is_dark_and_stationary() {
        for n in 2..=6 {
            let target = cluster_state(n).unwrap();
            for i in 0..n {
                let q = quasi_local_dissipator(i, n, 1.0).unwrap();
                assert!((&q * target.matrix()).max_abs() <= 1e-12);
            }
            let p = DqcChainParams {
                n_qubits: n,
                alpha: 1.0,
                gamma: 0.0,
                eta: 1.0,
            };
            let (h, ls) = dqc_chain(&p, false).unwrap().unconditional_lindblad();
            assert!(lindblad_rhs(&h, &ls, &target).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn feedback_chain_rescales_loss() {
        let p = DqcChainParams {
            n_qubits: 2,
            alpha: 1.0,
            gamma: 10.0,
            eta: 0.9,
        };
        let (h, ls) = dqc_chain(&p, true).unwrap().unconditional_lindblad();
        let mut rng = TestRng::new(12);
        let rho = random_state(&mut rng, 4);
        let got = lindblad_rhs(&h, &ls, &rho).unwrap();
        let mut want = OperatorMatrix::zeros(4);
        for i in 0..2 {
            want += &dissipator(&quasi_local_dissipator(i, 2, 1.0).unwrap(), &rho).unwrap();
            let sm = pauli(Pauli::Minus, i, 2).unwrap();
            let loss = dissipator(&sm, &rho).unwrap() + dissipator(&sm.adjoint(), &rho).unwrap();
            want += &loss.scale(0.1 * 10.0);
        }
        assert!((got - want).max_abs() < 1e-12);
    }
}
